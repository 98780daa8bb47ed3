//! Root data, Casimir degrees, dominant chambers and matter weights for
//! U(n), SO(n) and USp(2r).

use num_rational::Ratio;
use thiserror::Error;

use crate::quiver::{Family, GaugeGroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LieError {
    #[error("charge {entries:?} is not dominant for {group}")]
    ChamberViolation { group: GaugeGroup, entries: Vec<i64> },
    #[error("charge {entries:?} has length {len}, {group} has rank {rank}")]
    RankMismatch { group: GaugeGroup, entries: Vec<i64>, len: usize, rank: usize },
    #[error("no bifundamental between {a} and {b}")]
    MixedFamilyEdge { a: GaugeGroup, b: GaugeGroup },
}

/// Weight assigned to each sign-reduced pair `|m_i ± n_j|` of an SO x USp
/// half-hypermultiplet inside `1/2 * sum |b(m)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HalfHyperWeight {
    /// Weight 1: the half-hyper counts each `±` pair once.
    #[default]
    Full,
    /// Weight 1/2 per pair.
    Half,
}

/// How rank-one orthogonal nodes SO(2) are treated in the lattice sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum So2Model {
    /// Charges in Z, dressing `1/(1-t^2)`.
    #[default]
    So2,
    /// O(2): charges `m >= 0`, dressing `1/(1-t^4)` at `m = 0`.
    O2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conventions {
    pub half_hyper: HalfHyperWeight,
    pub so2: So2Model,
}

/// Magnetic charge in the dominant chamber of a group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DominantCharge(Vec<i64>);

impl DominantCharge {
    pub fn new(group: GaugeGroup, entries: Vec<i64>) -> Result<Self, LieError> {
        let rank = group.rank();
        if entries.len() != rank {
            return Err(LieError::RankMismatch { group, len: entries.len(), entries, rank });
        }
        if !in_chamber(group, &entries) {
            return Err(LieError::ChamberViolation { group, entries });
        }
        Ok(DominantCharge(entries))
    }

    pub fn zero(group: GaugeGroup) -> Self {
        DominantCharge(vec![0; group.rank()])
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn max_abs(&self) -> i64 {
        self.0.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }
}

fn nonincreasing(m: &[i64]) -> bool {
    m.windows(2).all(|w| w[0] >= w[1])
}

pub fn in_chamber(group: GaugeGroup, m: &[i64]) -> bool {
    if m.len() != group.rank() {
        return false;
    }
    match group.family {
        Family::Unitary => nonincreasing(m),
        Family::Symplectic => nonincreasing(m) && m.last().is_none_or(|&x| x >= 0),
        Family::Orthogonal if group.n % 2 == 1 => {
            nonincreasing(m) && m.last().is_none_or(|&x| x >= 0)
        }
        Family::Orthogonal => match m.len() {
            0 | 1 => true,
            r => nonincreasing(&m[..r - 1]) && m[r - 2] >= m[r - 1].abs(),
        },
    }
}

/// Like [`in_chamber`], with SO(2) restricted to `m >= 0` under the O(2) model.
pub fn in_chamber_with(group: GaugeGroup, m: &[i64], conv: Conventions) -> bool {
    if is_so2(group) && conv.so2 == So2Model::O2 {
        return m.len() == 1 && m[0] >= 0;
    }
    in_chamber(group, m)
}

fn is_so2(group: GaugeGroup) -> bool {
    group.family == Family::Orthogonal && group.n == 2
}

fn check(group: GaugeGroup, m: &[i64]) -> Result<(), LieError> {
    DominantCharge::new(group, m.to_vec()).map(|_| ())
}

/// `|alpha(m)|` for every positive root.
pub fn positive_root_values(group: GaugeGroup, m: &[i64]) -> Result<Vec<u64>, LieError> {
    check(group, m)?;
    let r = m.len();
    let mut out = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            out.push(m[i].abs_diff(m[j]));
            if group.family != Family::Unitary {
                out.push((m[i] + m[j]).unsigned_abs());
            }
        }
    }
    match group.family {
        Family::Orthogonal if group.n % 2 == 1 => out.extend(m.iter().map(|x| x.unsigned_abs())),
        Family::Symplectic => out.extend(m.iter().map(|x| 2 * x.unsigned_abs())),
        _ => {}
    }
    Ok(out)
}

/// Sum of positive root values without chamber checks.
pub(crate) fn root_sum(group: GaugeGroup, m: &[i64]) -> u64 {
    let r = m.len();
    let mut s = 0;
    for i in 0..r {
        for j in i + 1..r {
            s += m[i].abs_diff(m[j]);
            if group.family != Family::Unitary {
                s += (m[i] + m[j]).unsigned_abs();
            }
        }
    }
    match group.family {
        Family::Orthogonal if group.n % 2 == 1 => {
            s + m.iter().map(|x| x.unsigned_abs()).sum::<u64>()
        }
        Family::Symplectic => s + 2 * m.iter().map(|x| x.unsigned_abs()).sum::<u64>(),
        _ => s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedValue {
    pub value: u64,
    pub weight: Ratio<u64>,
}

/// Matter weights `|b(m)|` of the hypermultiplet on an edge between groups
/// `a` and `b`, with charges `ma` and `mb`. Flavor and fixed endpoints pass
/// zero charges. Values with equal weight are kept as separate entries.
pub fn matter_weight_values(
    a: GaugeGroup,
    ma: &[i64],
    b: GaugeGroup,
    mb: &[i64],
    conv: Conventions,
) -> Result<Vec<WeightedValue>, LieError> {
    use Family::*;
    let one = Ratio::from_integer(1);
    match (a.family, b.family) {
        (Unitary, Unitary) => {
            let mut out = Vec::with_capacity(ma.len() * mb.len());
            for &x in ma {
                for &y in mb {
                    out.push(WeightedValue { value: x.abs_diff(y), weight: one });
                }
            }
            Ok(out)
        }
        (Orthogonal, Symplectic) | (Symplectic, Orthogonal) => {
            let (so, mso, msp) = if a.family == Orthogonal { (a, ma, mb) } else { (b, mb, ma) };
            let weight = match conv.half_hyper {
                HalfHyperWeight::Full => one,
                HalfHyperWeight::Half => Ratio::new(1, 2),
            };
            let mut out = Vec::new();
            for &x in mso {
                for &y in msp {
                    out.push(WeightedValue { value: x.abs_diff(y), weight });
                    out.push(WeightedValue { value: (x + y).unsigned_abs(), weight });
                }
            }
            if so.n % 2 == 1 {
                for &y in msp {
                    out.push(WeightedValue { value: y.unsigned_abs(), weight });
                }
            }
            Ok(out)
        }
        _ => Err(LieError::MixedFamilyEdge { a, b }),
    }
}

/// `2 * sum weight * value` over [`matter_weight_values`], the edge
/// contribution to `4 * Delta`.
pub fn matter_quarter_units(
    a: GaugeGroup,
    ma: &[i64],
    b: GaugeGroup,
    mb: &[i64],
    conv: Conventions,
) -> Result<u64, LieError> {
    use Family::*;
    match (a.family, b.family) {
        (Unitary, Unitary) => {
            let mut s = 0;
            for &x in ma {
                for &y in mb {
                    s += x.abs_diff(y);
                }
            }
            Ok(2 * s)
        }
        (Orthogonal, Symplectic) | (Symplectic, Orthogonal) => {
            let (so, mso, msp) = if a.family == Orthogonal { (a, ma, mb) } else { (b, mb, ma) };
            let mut s = 0;
            for &x in mso {
                for &y in msp {
                    s += x.abs_diff(y) + (x + y).unsigned_abs();
                }
            }
            if so.n % 2 == 1 {
                s += msp.iter().map(|y| y.unsigned_abs()).sum::<u64>();
            }
            Ok(match conv.half_hyper {
                HalfHyperWeight::Full => 2 * s,
                HalfHyperWeight::Half => s,
            })
        }
        _ => Err(LieError::MixedFamilyEdge { a, b }),
    }
}

/// Degrees of the generators of the invariant ring of `group`.
pub fn casimir_degrees(group: GaugeGroup) -> Vec<u32> {
    let r = group.rank() as u32;
    match group.family {
        Family::Unitary => (1..=r).collect(),
        Family::Symplectic => (1..=r).map(|i| 2 * i).collect(),
        Family::Orthogonal if group.n % 2 == 1 => (1..=r).map(|i| 2 * i).collect(),
        Family::Orthogonal if r == 1 => vec![1],
        Family::Orthogonal => {
            let mut d: Vec<u32> = (1..r).map(|i| 2 * i).collect();
            d.push(r);
            d.sort_unstable();
            d
        }
    }
}

fn group_runs(values: impl Iterator<Item = i64>) -> Vec<(i64, u32)> {
    let mut runs: Vec<(i64, u32)> = Vec::new();
    for v in values {
        match runs.last_mut() {
            Some((last, k)) if *last == v => *k += 1,
            _ => runs.push((v, 1)),
        }
    }
    runs
}

/// Centralizer of the magnetic charge, as a product of classical groups.
pub fn residual_stabilizer(group: GaugeGroup, m: &[i64]) -> Result<Vec<GaugeGroup>, LieError> {
    check(group, m)?;
    let zeros = m.iter().filter(|&&x| x == 0).count() as u32;
    let nonzero_runs = || {
        let mut abs: Vec<i64> = m.iter().filter(|&&x| x != 0).map(|x| x.abs()).collect();
        abs.sort_unstable_by(|x, y| y.cmp(x));
        group_runs(abs.into_iter())
            .into_iter()
            .map(|(_, k)| GaugeGroup::unitary(k))
            .collect::<Vec<_>>()
    };
    let out = match group.family {
        Family::Unitary => {
            group_runs(m.iter().copied()).into_iter().map(|(_, k)| GaugeGroup::unitary(k)).collect()
        }
        Family::Symplectic => {
            let mut v = nonzero_runs();
            if zeros > 0 {
                v.push(GaugeGroup::symplectic(2 * zeros));
            }
            v
        }
        Family::Orthogonal if group.n % 2 == 1 => {
            let mut v = nonzero_runs();
            if zeros > 0 || v.is_empty() {
                v.push(GaugeGroup::orthogonal(2 * zeros + 1));
            }
            v
        }
        Family::Orthogonal if group.n == 2 => vec![group],
        Family::Orthogonal => {
            let mut v = nonzero_runs();
            if zeros > 0 {
                v.push(GaugeGroup::orthogonal(2 * zeros));
            }
            v
        }
    };
    Ok(out)
}

/// Casimir degrees of the residual stabilizer, honoring the SO(2) model.
pub fn dressing_degrees(
    group: GaugeGroup,
    m: &[i64],
    conv: Conventions,
) -> Result<Vec<u32>, LieError> {
    if is_so2(group) && conv.so2 == So2Model::O2 {
        if m.len() != 1 || m[0] < 0 {
            return Err(LieError::ChamberViolation { group, entries: m.to_vec() });
        }
        return Ok(vec![if m[0] == 0 { 2 } else { 1 }]);
    }
    Ok(residual_stabilizer(group, m)?.into_iter().flat_map(casimir_degrees).collect())
}

/// All dominant charges with `max |entry| <= bound`, in ascending lexicographic order.
pub fn dominant_charges(group: GaugeGroup, bound: u32) -> Vec<DominantCharge> {
    dominant_charges_with(group, bound, Conventions::default())
}

pub fn dominant_charges_with(
    group: GaugeGroup,
    bound: u32,
    conv: Conventions,
) -> Vec<DominantCharge> {
    let r = group.rank();
    let b = bound as i64;
    let mut out = Vec::new();
    let mut cur = vec![-b; r];
    if r == 0 {
        return vec![DominantCharge(Vec::new())];
    }
    loop {
        if in_chamber_with(group, &cur, conv) {
            out.push(DominantCharge(cur.clone()));
        }
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < b {
                cur[i] += 1;
                for x in &mut cur[i + 1..] {
                    *x = -b;
                }
                break;
            }
        }
    }
}

/// Weyl orbit of `m` by brute force: permutations with the sign changes allowed by the family.
pub fn weyl_orbit(group: GaugeGroup, m: &[i64]) -> Vec<Vec<i64>> {
    fn perms(v: &[i64]) -> Vec<Vec<i64>> {
        if v.len() <= 1 {
            return vec![v.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..v.len() {
            let mut rest = v.to_vec();
            let x = rest.remove(i);
            for mut p in perms(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }
    let r = m.len();
    let mut out = Vec::new();
    for p in perms(m) {
        if group.family == Family::Unitary {
            out.push(p);
            continue;
        }
        for signs in 0..(1u32 << r) {
            if group.family == Family::Orthogonal
                && group.n.is_multiple_of(2)
                && signs.count_ones() % 2 == 1
            {
                continue;
            }
            out.push(
                p.iter()
                    .enumerate()
                    .map(|(i, &x)| if signs >> i & 1 == 1 { -x } else { x })
                    .collect(),
            );
        }
    }
    out
}

/// All roots as coefficient vectors on the standard basis.
pub fn all_roots(group: GaugeGroup) -> Vec<Vec<i64>> {
    let r = group.rank();
    let e = |i: usize, s: i64| {
        let mut v = vec![0; r];
        v[i] = s;
        v
    };
    let mut roots = Vec::new();
    for i in 0..r {
        for j in 0..r {
            if i == j {
                continue;
            }
            let mut v = e(i, 1);
            v[j] = -1;
            roots.push(v);
            if group.family != Family::Unitary && i < j {
                for s in [1, -1] {
                    let mut v = e(i, s);
                    v[j] = s;
                    roots.push(v);
                }
            }
        }
        match group.family {
            Family::Symplectic => {
                roots.push(e(i, 2));
                roots.push(e(i, -2));
            }
            Family::Orthogonal if group.n % 2 == 1 => {
                roots.push(e(i, 1));
                roots.push(e(i, -1));
            }
            _ => {}
        }
    }
    roots
}

/// `sum_{alpha > 0} |alpha(m)|` evaluated over the full root system, valid for any `m`.
pub fn brute_force_root_sum(group: GaugeGroup, m: &[i64]) -> u64 {
    let total: i64 = all_roots(group)
        .iter()
        .map(|a| a.iter().zip(m).map(|(x, y)| x * y).sum::<i64>().abs())
        .sum();
    total as u64 / 2
}

/// The chamber representative of the Weyl orbit of `m`.
pub fn dominant_representative(group: GaugeGroup, m: &[i64]) -> Vec<i64> {
    let mut v = m.to_vec();
    match group.family {
        _ if is_so2(group) => {}
        Family::Unitary => v.sort_unstable_by(|a, b| b.cmp(a)),
        _ => {
            let negatives = v.iter().filter(|&&x| x < 0).count();
            for x in &mut v {
                *x = x.abs();
            }
            v.sort_unstable_by(|a, b| b.cmp(a));
            let even_d =
                group.family == Family::Orthogonal && group.n.is_multiple_of(2) && v.len() > 1;
            if even_d && negatives % 2 == 1 {
                if let Some(last) = v.last_mut() {
                    *last = -*last;
                }
            }
        }
    }
    v
}
