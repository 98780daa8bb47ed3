//! One PASS/FAIL line per acceptance criterion. Reference values are computed
//! here with plain integer polynomial arithmetic, independent of the library.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coulomb_core::checks::{run_check, SuiteOptions};
use coulomb_core::gale::{gale_dual, ToricConfig};
use coulomb_core::lie::Conventions;
use coulomb_core::monopole::{
    coulomb_hilbert_series, nilcone_reference_hs, refined_implosion_integral, HsRequest,
};
use coulomb_core::quiver::{
    balance_report, build_bouquet_quiver, build_dn_implosion_quiver, build_linear_nilpotent_quiver,
    node_balance, predict_global_symmetry, ungauge, DnVariant, Family, GaugeGroup, NodeKind,
    Quiver, QuiverNode,
};
use coulomb_core::series::TruncatedSeries;
use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Poly = Vec<i128>;

fn one(order: usize) -> Poly {
    let mut p = vec![0; order + 1];
    p[0] = 1;
    p
}

fn times_one_minus(p: &mut Poly, d: usize) {
    for k in (d..p.len()).rev() {
        p[k] -= p[k - d];
    }
}

fn over_one_minus(p: &mut Poly, d: usize) {
    for k in d..p.len() {
        p[k] += p[k - d];
    }
}

fn as_poly(s: &TruncatedSeries<BigInt>) -> Poly {
    s.coeffs().iter().map(|c| i128::try_from(c).expect("coefficient fits")).collect()
}

fn u1_closed_form(d: usize, order: usize) -> Poly {
    let mut p = one(order);
    times_one_minus(&mut p, 2 * d);
    over_one_minus(&mut p, 2);
    over_one_minus(&mut p, d);
    over_one_minus(&mut p, d);
    p
}

fn nilcone(n: usize, order: usize) -> Poly {
    let mut p = one(order);
    for i in 1..=n {
        times_one_minus(&mut p, 2 * i);
    }
    for _ in 0..n * n {
        over_one_minus(&mut p, 2);
    }
    p
}

fn u1_with_flavors(d: u32) -> Quiver {
    Quiver::new(
        vec![
            QuiverNode::gauge("g", GaugeGroup::unitary(1)),
            QuiverNode::flavor("f", GaugeGroup::unitary(d)),
        ],
        vec![("g".into(), "f".into())],
    )
    .unwrap()
}

fn hs(q: Quiver, order: usize, ungauge: Option<&str>) -> Result<Poly, String> {
    let mut req = HsRequest::new(q, order);
    if let Some(id) = ungauge {
        req = req.ungauge(id);
    }
    coulomb_hilbert_series(&req).map(|r| as_poly(&r.series)).map_err(|e| e.to_string())
}

/// Rank read off the node list directly.
fn rank_by_hand(q: &Quiver) -> usize {
    q.nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Gauge)
        .map(|n| match n.group.family {
            Family::Unitary => n.group.n as usize,
            Family::Orthogonal | Family::Symplectic => n.group.n as usize / 2,
        })
        .sum()
}

/// `N_f - 2 N_c` for a unitary gauge node, from the edge list.
fn unitary_balance_by_hand(q: &Quiver, id: &str) -> i64 {
    let i = q.node_index(id).unwrap();
    let flavors: i64 = q
        .edges()
        .iter()
        .filter_map(|&(a, b)| match (a == i, b == i) {
            (true, _) => Some(b),
            (_, true) => Some(a),
            _ => None,
        })
        .map(|j| q.nodes()[j].group.n as i64)
        .sum();
    flavors - 2 * q.nodes()[i].group.n as i64
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail.push_str(&format!(" (took {elapsed:?}, limit {limit:?})"));
        }
    }
    o.detail.push_str(&format!(" [{} ms]", elapsed.as_millis()));
    o
}

fn u1_family() -> Outcome {
    for d in 1..=5u32 {
        let want = u1_closed_form(d as usize, 20);
        match hs(u1_with_flavors(d), 20, None) {
            Ok(got) if got == want => {}
            Ok(got) => return outcome(false, format!("d={d}: {got:?} != {want:?}")),
            Err(e) => return outcome(false, format!("d={d}: {e}")),
        }
    }
    outcome(true, "d=1..5 agree with the closed form to t^20")
}

fn nilpotent_cone() -> Outcome {
    for n in [2u32, 3] {
        let want = nilcone(n as usize, 10);
        if as_poly(&nilcone_reference_hs(n, 10)) != want {
            return outcome(false, format!("reference formula differs at n={n}"));
        }
        match hs(build_linear_nilpotent_quiver(n).unwrap(), 10, None) {
            Ok(got) if got == want => {}
            Ok(got) => return outcome(false, format!("n={n}: {got:?}")),
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        }
    }
    outcome(true, "n=2,3 agree to t^10")
}

fn bouquet_coeffs(n: u32, order: usize, want: &[(usize, i128)]) -> Outcome {
    match hs(build_bouquet_quiver(n).unwrap(), order, Some("b1")) {
        Ok(got) => {
            let pairs: Vec<String> =
                want.iter().map(|&(k, _)| format!("t^{k}={}", got[k])).collect();
            outcome(want.iter().all(|&(k, c)| got[k] == c), pairs.join(" "))
        }
        Err(e) => outcome(false, e),
    }
}

fn generic_bouquets() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [4u32, 5] {
        match hs(build_bouquet_quiver(n).unwrap(), 4, Some("b1")) {
            Ok(got) => {
                pass &= got[2] == (n * n + n - 2) as i128;
                parts.push(format!("n={n}: t^2={}", got[2]));
            }
            Err(e) => return outcome(false, e),
        }
    }
    outcome(pass, parts.join(", "))
}

fn refined_integral() -> Outcome {
    for n in [2u32, 3] {
        match refined_implosion_integral(n, 8, n - 1, Conventions::default(), None) {
            Ok(s) if as_poly(&s) == nilcone(n as usize, 8) => {}
            Ok(s) => return outcome(false, format!("n={n}: {s}")),
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        }
    }
    outcome(true, "n=2,3 equal the nilpotent cone to t^8")
}

fn orthosymplectic() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (n, want) in [(3u32, 18i128), (4, 32)] {
        match hs(build_dn_implosion_quiver(n, DnVariant::Bouquet).unwrap(), 2, None) {
            Ok(got) => {
                pass &= got[2] == want;
                parts.push(format!("D_{n}: t^2={}", got[2]));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("D_{n}: {e}"));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn dimensions() -> Outcome {
    for n in 2..=10u32 {
        let q = ungauge(&build_bouquet_quiver(n).unwrap(), "b1").unwrap();
        if 4 * rank_by_hand(&q) != 2 * (n * n + n - 2) as usize {
            return outcome(false, format!("bouquet n={n}: rank {}", rank_by_hand(&q)));
        }
    }
    for n in 2..=8u32 {
        let q = build_dn_implosion_quiver(n, DnVariant::Bouquet).unwrap();
        if 4 * rank_by_hand(&q) != 4 * (n * n) as usize {
            return outcome(false, format!("D_{n}: rank {}", rank_by_hand(&q)));
        }
    }
    outcome(true, "bouquet n=2..10 and D_n n=2..8")
}

fn balance() -> Outcome {
    for n in 2..=12u32 {
        let q = build_linear_nilpotent_quiver(n).unwrap();
        let by_hand = (1..n).all(|j| unitary_balance_by_hand(&q, &format!("c{j}")) == 0);
        if !by_hand || !balance_report(&q).unwrap().all_balanced {
            return outcome(false, format!("chain n={n} not balanced"));
        }
        let b = build_bouquet_quiver(n).unwrap();
        for j in 1..=n {
            let id = format!("b{j}");
            let h = unitary_balance_by_hand(&b, &id);
            if h != n as i64 - 3 || node_balance(&b, &id).unwrap() != h {
                return outcome(false, format!("bouquet n={n} leaf {id}: {h}"));
            }
        }
        if n >= 4 {
            let dim = predict_global_symmetry(&b).unwrap().total_dimension;
            if dim != (n * n + n - 2) as u64 {
                return outcome(false, format!("bouquet n={n}: symmetry dimension {dim}"));
            }
        }
    }
    for n in 2..=8u32 {
        let q = build_dn_implosion_quiver(n, DnVariant::Flavor).unwrap();
        if !balance_report(&q).unwrap().all_balanced {
            return outcome(false, format!("D_{n} chain not balanced"));
        }
    }
    outcome(true, "chains, leaves, D_n chains and symmetry dimensions")
}

fn properties() -> Outcome {
    let lib = run_check(10, &SuiteOptions::default());
    if !lib.pass {
        return outcome(false, lib.computed);
    }
    // dual rows annihilate the primal columns and have the complementary rank
    let mut rng = StdRng::seed_from_u64(2024);
    let mut tried = 0;
    while tried < 200 {
        let d = rng.gen_range(1..=8usize);
        let n = rng.gen_range(0..=d.min(5));
        let rows: Vec<Vec<i64>> =
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(-4..=4)).collect()).collect();
        let Ok(c) = ToricConfig::from_rows(&rows, d) else { continue };
        if c.rank() != n {
            continue;
        }
        tried += 1;
        let dual = gale_dual(&c).unwrap();
        if dual.n() != d - n {
            return outcome(false, format!("dual of {rows:?} has rank {}", dual.n()));
        }
        for r in &rows {
            for s in dual.rows() {
                if r.iter().zip(&s).map(|(a, b)| a * b).sum::<i64>() != 0 {
                    return outcome(false, format!("dual of {rows:?} is not orthogonal"));
                }
            }
        }
    }
    outcome(true, format!("{}; 200 random Gale pairs orthogonal", lib.computed))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: Vec<Criterion> = vec![
        ("U(1) with d flavors closed form", secs(1), u1_family),
        ("nilpotent chain is the nilpotent cone", secs(60), nilpotent_cone),
        ("SU(2) bouquet 4t + 10t^2", secs(1), || bouquet_coeffs(2, 2, &[(1, 4), (2, 10)])),
        ("SU(3) bouquet t^2 = 28", secs(60), || bouquet_coeffs(3, 4, &[(2, 28)])),
        ("bouquet t^2 = n^2+n-2 for n=4,5", secs(600), generic_bouquets),
        ("refined integral is the nilpotent cone", None, refined_integral),
        ("D_n bouquet t^2 = 18, 32", None, orthosymplectic),
        ("4 rank bookkeeping", None, dimensions),
        ("balance and symmetry", None, balance),
        ("property suites", None, properties),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let o = timed(limit, f);
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
