//! Reproduction suite: every quantitative claim checked against the engine.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::gale::{duality_report, gale_dual, is_gale_dual_pair, row_lattice, ToricConfig};
use crate::lie::{
    brute_force_root_sum, dominant_representative, positive_root_values, weyl_orbit, Conventions,
};
use crate::monopole::{
    coulomb_hilbert_series, nilcone_reference_hs, refined_implosion_integral, ChargePolicy,
    EngineError, HsRequest,
};
use crate::quiver::{
    balance_report, build_bouquet_quiver, build_dn_implosion_quiver, build_linear_nilpotent_quiver,
    expected_coulomb_dimension_real, gauge_group_rank, node_balance, predict_global_symmetry,
    ungauge, DnVariant, GaugeGroup, Quiver, QuiverNode,
};
use crate::series::{plethystic_exp, plethystic_log, TruncatedSeries};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
    #[serde(serialize_with = "millis")]
    pub elapsed: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}ms", d.as_millis()))
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub threads: Option<usize>,
    pub conventions: Conventions,
    /// Truncation order for the bouquet(5) run.
    pub bouquet5_order: usize,
    pub include_d4: bool,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            threads: None,
            conventions: Conventions::default(),
            bouquet5_order: 4,
            include_d4: true,
            seed: 7,
        }
    }
}

pub const CHECK_COUNT: u32 = 10;

pub fn check_name(id: u32) -> &'static str {
    match id {
        1 => "U(1) with d flavors matches closed form to t^20, d=1..5",
        2 => "nilpotent chain equals nilpotent cone to t^10, n=2,3",
        3 => "SU(2) bouquet: 4 t + 10 t^2",
        4 => "SU(3) bouquet: t^2 = 28",
        5 => "bouquet t^2 = n^2+n-2, n=4,5",
        6 => "refined bouquet integral equals nilpotent cone to t^8, n=2,3",
        7 => "D_n orthosymplectic bouquet: t^2 = 18 (n=3), 32 (n=4)",
        8 => "dimension bookkeeping 4 rank",
        9 => "balance and symmetry prediction",
        10 => "property suites",
        _ => "unknown check",
    }
}

fn time_limit(id: u32) -> Option<Duration> {
    match id {
        1 | 3 => Some(Duration::from_secs(1)),
        2 | 4 => Some(Duration::from_secs(60)),
        5 => Some(Duration::from_secs(600)),
        _ => None,
    }
}

type Verdict = Result<(String, String, bool), EngineError>;

pub fn run_check(id: u32, opts: &SuiteOptions) -> CheckOutcome {
    let start = Instant::now();
    let verdict: Verdict = match id {
        1 => fig2_closed_form_check(opts),
        2 => nilcone_chain(opts),
        3 => bouquet_coefficients(opts, 2, 2, &[(1, 4), (2, 10)]),
        4 => bouquet_coefficients(opts, 3, 4, &[(2, 28)]),
        5 => bouquet_generic(opts),
        6 => refined_integral(opts),
        7 => dn_bouquet(opts),
        8 => dimensions(),
        9 => balance_suite(),
        10 => properties(opts),
        _ => Ok(("-".into(), "unknown check".into(), false)),
    };
    let elapsed = start.elapsed();
    let (expected, computed, mut pass) = match verdict {
        Ok(v) => v,
        Err(e) => ("-".into(), format!("error: {e}"), false),
    };
    let mut computed = computed;
    if let Some(limit) = time_limit(id) {
        if elapsed > limit {
            pass = false;
            computed = format!("{computed} (over {}s limit)", limit.as_secs());
        }
    }
    CheckOutcome { id, name: check_name(id).into(), expected, computed, pass, elapsed }
}

pub fn run_suite(opts: &SuiteOptions) -> Vec<CheckOutcome> {
    (1..=CHECK_COUNT).map(|id| run_check(id, opts)).collect()
}

fn request(q: Quiver, order: usize, opts: &SuiteOptions) -> HsRequest {
    HsRequest::new(q, order).conventions(opts.conventions).threads(opts.threads)
}

fn fig2(d: u32) -> Quiver {
    Quiver::new(
        vec![
            QuiverNode::gauge("g", GaugeGroup::unitary(1)),
            QuiverNode::flavor("f", GaugeGroup::unitary(d)),
        ],
        vec![("g".into(), "f".into())],
    )
    .expect("valid quiver")
}

/// `(1 - t^{2d}) / ((1 - t^2)(1 - t^d)^2)`.
pub fn fig2_closed_form(d: u32, order: usize) -> TruncatedSeries<BigInt> {
    let d = d as usize;
    let mut s = TruncatedSeries::<BigInt>::one(order);
    s.mul_one_minus_t_pow(2 * d);
    s.div_one_minus_t_pow(2);
    s.div_one_minus_t_pow(d);
    s.div_one_minus_t_pow(d);
    s
}

fn fig2_closed_form_check(opts: &SuiteOptions) -> Verdict {
    let mut ok = true;
    let mut computed = Vec::new();
    for d in 1..=5 {
        let hs = coulomb_hilbert_series(&request(fig2(d), 20, opts))?.series;
        let same = hs == fig2_closed_form(d, 20);
        ok &= same;
        computed.push(format!("d={d}:{}", if same { "equal" } else { "differs" }));
    }
    Ok(("closed form for d=1..5".into(), computed.join(" "), ok))
}

fn nilcone_chain(opts: &SuiteOptions) -> Verdict {
    let mut ok = true;
    let mut computed = Vec::new();
    for n in [2, 3] {
        let q = build_linear_nilpotent_quiver(n)?;
        let hs = coulomb_hilbert_series(&request(q, 10, opts))?.series;
        let same = hs == nilcone_reference_hs(n, 10);
        ok &= same;
        computed.push(format!("n={n}:{}", if same { "equal" } else { "differs" }));
    }
    Ok(("equal for n=2,3".into(), computed.join(" "), ok))
}

fn bouquet_coefficients(
    opts: &SuiteOptions,
    n: u32,
    order: usize,
    want: &[(usize, i64)],
) -> Verdict {
    let q = build_bouquet_quiver(n)?;
    let hs = coulomb_hilbert_series(&request(q, order, opts).ungauge("b1"))?.series;
    let mut ok = true;
    let mut expected = Vec::new();
    let mut computed = Vec::new();
    for &(k, c) in want {
        let got = hs.coefficient(k)?;
        ok &= *got == BigInt::from(c);
        expected.push(format!("t^{k}:{c}"));
        computed.push(format!("t^{k}:{got}"));
    }
    Ok((expected.join(" "), computed.join(" "), ok))
}

fn bouquet_generic(opts: &SuiteOptions) -> Verdict {
    let mut ok = true;
    let mut expected = Vec::new();
    let mut computed = Vec::new();
    for (n, order) in [(4u32, 4usize), (5, opts.bouquet5_order.max(2))] {
        let q = build_bouquet_quiver(n)?;
        let hs = coulomb_hilbert_series(&request(q, order, opts).ungauge("b1"))?.series;
        let want = n * n + n - 2;
        let got = hs.coefficient(2)?;
        ok &= *got == BigInt::from(want);
        expected.push(format!("n={n}:{want}"));
        computed.push(format!("n={n}:{got}"));
    }
    Ok((expected.join(" "), computed.join(" "), ok))
}

fn refined_integral(opts: &SuiteOptions) -> Verdict {
    let mut ok = true;
    let mut computed = Vec::new();
    for n in [2, 3] {
        let s = refined_implosion_integral(n, 8, n - 1, opts.conventions, opts.threads)?;
        let same = s == nilcone_reference_hs(n, 8);
        ok &= same;
        computed.push(format!("n={n}:{}", if same { "equal" } else { "differs" }));
    }
    Ok(("equal for n=2,3".into(), computed.join(" "), ok))
}

fn dn_bouquet(opts: &SuiteOptions) -> Verdict {
    let mut cases = vec![(3u32, 18i64)];
    if opts.include_d4 {
        cases.push((4, 32));
    }
    let mut ok = true;
    let mut expected = Vec::new();
    let mut computed = Vec::new();
    for (n, want) in cases {
        let q = build_dn_implosion_quiver(n, DnVariant::Bouquet)?;
        let got = match coulomb_hilbert_series(&request(q, 2, opts)) {
            Ok(hs) => hs.series.coefficient(2)?.to_string(),
            Err(e) => format!("error ({e})"),
        };
        ok &= got == want.to_string();
        expected.push(format!("D_{n}:{want}"));
        computed.push(format!("D_{n}:{got}"));
    }
    Ok((expected.join(" "), computed.join(" "), ok))
}

fn dimensions() -> Verdict {
    let mut ok = true;
    for n in 2..=10u32 {
        let q = ungauge(&build_bouquet_quiver(n)?, "b1")?;
        ok &= expected_coulomb_dimension_real(&q)? == 2 * (n * n + n - 2) as usize;
    }
    for n in 2..=8u32 {
        let q = build_dn_implosion_quiver(n, DnVariant::Bouquet)?;
        ok &= 4 * gauge_group_rank(&q) == 4 * (n * n) as usize;
    }
    Ok((
        "2(n^2+n-2) for n=2..10; 4n^2 for n=2..8".into(),
        if ok { "all identities hold" } else { "identity failed" }.into(),
        ok,
    ))
}

fn balance_suite() -> Verdict {
    let mut failures = Vec::new();
    for n in 2..=12u32 {
        let r = balance_report(&build_linear_nilpotent_quiver(n)?)?;
        if !r.all_balanced {
            failures.push(format!("chain n={n}"));
        }
    }
    for n in 2..=12u32 {
        let q = build_bouquet_quiver(n)?;
        for j in 1..=n {
            if node_balance(&q, &format!("b{j}"))? != n as i64 - 3 {
                failures.push(format!("bouquet n={n} leaf b{j}"));
            }
        }
    }
    for n in 2..=8u32 {
        let r = balance_report(&build_dn_implosion_quiver(n, DnVariant::Flavor)?)?;
        if !r.all_balanced {
            failures.push(format!("D_{n} chain"));
        }
        let q = build_dn_implosion_quiver(n, DnVariant::Bouquet)?;
        if node_balance(&q, &format!("usp{}", 2 * n - 2))? != 0 {
            failures.push(format!("D_{n} bouquet USp node"));
        }
    }
    for n in 4..=12u32 {
        let p = predict_global_symmetry(&build_bouquet_quiver(n)?)?;
        if p.total_dimension != (n * n + n - 2) as u64 {
            failures.push(format!("symmetry n={n}: {}", p.total_dimension));
        }
    }
    let ok = failures.is_empty();
    Ok((
        "all balance and symmetry identities".into(),
        if ok { "all hold".into() } else { failures.join(", ") },
        ok,
    ))
}

fn random_config(rng: &mut StdRng) -> ToricConfig {
    loop {
        let d = rng.gen_range(1..=8);
        let n = rng.gen_range(0..=d.min(4));
        let rows: Vec<Vec<i64>> =
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3..=3)).collect()).collect();
        let c = ToricConfig::from_rows(&rows, d).expect("shape is consistent");
        if c.rank() == n {
            return c;
        }
    }
}

fn properties(opts: &SuiteOptions) -> Verdict {
    let mut failures = Vec::new();

    // PE(PL(s)) = s on the golden series
    let mut golden: Vec<(String, TruncatedSeries<BigInt>)> = Vec::new();
    for d in 1..=5 {
        golden.push((
            format!("U(1) d={d}"),
            coulomb_hilbert_series(&request(fig2(d), 10, opts))?.series,
        ));
    }
    for n in [2, 3] {
        let q = build_linear_nilpotent_quiver(n)?;
        golden
            .push((format!("chain n={n}"), coulomb_hilbert_series(&request(q, 10, opts))?.series));
        let b = build_bouquet_quiver(n)?;
        golden.push((
            format!("bouquet n={n}"),
            coulomb_hilbert_series(&request(b, 10, opts).ungauge("b1"))?.series,
        ));
    }
    golden.push((
        "D_3 bouquet".into(),
        coulomb_hilbert_series(&request(
            build_dn_implosion_quiver(3, DnVariant::Bouquet)?,
            10,
            opts,
        ))?
        .series,
    ));
    for (name, s) in &golden {
        let back = plethystic_exp(&plethystic_log(s, 10)?, 10)?.to_integer()?;
        if &back != s {
            failures.push(format!("PE(PL) {name}"));
        }
    }

    // Weyl invariance on rank <= 3 groups
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let groups = [
        GaugeGroup::unitary(2),
        GaugeGroup::unitary(3),
        GaugeGroup::symplectic(4),
        GaugeGroup::symplectic(6),
        GaugeGroup::orthogonal(5),
        GaugeGroup::orthogonal(7),
        GaugeGroup::orthogonal(4),
        GaugeGroup::orthogonal(6),
    ];
    for g in groups {
        for _ in 0..20 {
            let m: Vec<i64> = (0..g.rank()).map(|_| rng.gen_range(-3..=3)).collect();
            let dom = dominant_representative(g, &m);
            let value: u64 = positive_root_values(g, &dom)?.iter().sum();
            if weyl_orbit(g, &m).iter().any(|w| brute_force_root_sum(g, w) != value) {
                failures.push(format!("Weyl {g} {m:?}"));
            }
        }
    }

    // Gale involution and exchange
    for _ in 0..100 {
        let c = random_config(&mut rng);
        let result = (|| -> Result<bool, crate::gale::GaleError> {
            let dual = gale_dual(&c)?;
            let back = gale_dual(&dual)?;
            let report = duality_report(&c)?;
            let dual_report = duality_report(&dual)?;
            let involutive = report.torsion_order != "1" || row_lattice(&back) == row_lattice(&c);
            Ok(is_gale_dual_pair(&c, &dual)?
                && is_gale_dual_pair(&dual, &back)?
                && involutive
                && report.fi_primal == dual_report.isometry_rank_primal
                && report.fi_dual == dual_report.fi_primal)
        })();
        if !matches!(result, Ok(true)) {
            failures.push(format!("Gale {:?}", c.rows()));
        }
    }

    // enumeration stability: a larger starting box changes nothing
    let stability: Vec<(Quiver, Option<&str>)> = vec![
        (fig2(3), None),
        (build_bouquet_quiver(3)?, Some("b1")),
        (build_dn_implosion_quiver(3, DnVariant::Bouquet)?, None),
    ];
    for (q, ug) in stability {
        let mut req = request(q, 6, opts);
        req.ungauge = ug.map(str::to_string);
        let base = coulomb_hilbert_series(&req)?;
        let policy =
            ChargePolicy { initial_bound: base.stats.bound_reached + 3, ..ChargePolicy::default() };
        let wide = coulomb_hilbert_series(&req.clone().policy(policy))?;
        if wide.series != base.series {
            failures.push("enumeration stability".into());
        }
    }

    // ungauging-choice independence
    for n in [2u32, 3] {
        let q = build_bouquet_quiver(n)?;
        let reference = coulomb_hilbert_series(&request(q.clone(), 6, opts).ungauge("b1"))?.series;
        let mut others: Vec<String> = (2..=n).map(|j| format!("b{j}")).collect();
        others.push("c1".into());
        for id in others {
            let s =
                coulomb_hilbert_series(&request(q.clone(), 6, opts).ungauge(id.clone()))?.series;
            if s != reference {
                failures.push(format!("ungauge {id} in bouquet n={n}"));
            }
        }
    }

    let ok = failures.is_empty();
    Ok((
        "PE/PL, Weyl, Gale, stability, ungauging".into(),
        if ok { "all hold".into() } else { failures.join(", ") },
        ok,
    ))
}
