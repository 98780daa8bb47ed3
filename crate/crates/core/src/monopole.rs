//! Coulomb-branch Hilbert series from the monopole formula
//! `HS(t) = sum_m t^{2 Delta(m)} P_G(m, t)`.
//!
//! Internally every exponent is measured in units of `u = t^{1/2}`, so the
//! exponent of a magnetic charge is the integer `q = 4 Delta(m)`. The default
//! strategy treats the gauge nodes of a forest-shaped quiver as a tree and sums
//! over charges by message passing: a min-plus sweep bounds the smallest `q`
//! reachable through each node charge, and only charges that can appear below
//! the truncation order are expanded into series.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lie::{
    self, dominant_charges_with, dressing_degrees, in_chamber_with, matter_quarter_units,
    Conventions, LieError,
};
use crate::quiver::{
    self, build_bouquet_quiver, detect_decoupled_u1, ungauge, Family, GaugeGroup, NodeKind, Quiver,
    QuiverError,
};
use crate::series::{Coefficient, Laurent, Monomial, SeriesError, TruncatedSeries};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Quiver(#[from] QuiverError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("the diagonal U(1) decouples and the monopole sum diverges; ungauge one U(1) node")]
    DecoupledU1Unresolved,
    #[error("a contributing charge has 2*Delta = {twice_delta}; the t-grading is half-odd")]
    HalfOddGrading { twice_delta: String },
    #[error("bad theory: nonzero charge {charge} has Delta = {delta} <= 0")]
    BadTheory { charge: String, delta: String },
    #[error("charge shells still contribute at bound {max_bound}")]
    ConvergenceNotReached { max_bound: u32 },
    #[error("node `{0}` cannot carry a fugacity: only unitary gauge nodes can be refined")]
    InvalidRefinement(String),
    #[error("use the refined entry point when fugacities are requested")]
    RefinedRequested,
    #[error("orthosymplectic edge {a} - {b} has multiplicity {count}")]
    UnsupportedMultiEdge { a: String, b: String, count: usize },
    #[error("invalid charge: {0}")]
    InvalidCharge(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Magnetic charge for every node, aligned with `Quiver::nodes`.
/// Flavor nodes hold an empty entry and fixed nodes hold `[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuiverCharge(Vec<Vec<i64>>);

impl QuiverCharge {
    pub fn zero(q: &Quiver) -> Self {
        QuiverCharge(
            q.nodes()
                .iter()
                .map(|n| match n.kind {
                    NodeKind::Gauge => vec![0; n.group.rank()],
                    NodeKind::Fixed => vec![0],
                    NodeKind::Flavor => Vec::new(),
                })
                .collect(),
        )
    }

    /// Charge with the listed gauge nodes set and all others zero.
    pub fn from_entries(
        q: &Quiver,
        entries: &[(&str, Vec<i64>)],
        conv: Conventions,
    ) -> Result<Self, EngineError> {
        let mut c = QuiverCharge::zero(q);
        for (id, m) in entries {
            let i = q.node_index(id)?;
            let node = &q.nodes()[i];
            if !node.is_gauge() {
                return Err(EngineError::InvalidCharge(format!("`{id}` is not a gauge node")));
            }
            if !in_chamber_with(node.group, m, conv) {
                return Err(
                    LieError::ChamberViolation { group: node.group, entries: m.clone() }.into()
                );
            }
            c.0[i] = m.clone();
        }
        Ok(c)
    }

    pub fn entries(&self) -> &[Vec<i64>] {
        &self.0
    }

    pub fn get(&self, q: &Quiver, id: &str) -> Result<&[i64], EngineError> {
        Ok(&self.0[q.node_index(id)?])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|&x| x == 0)
    }

    fn display(&self, q: &Quiver) -> String {
        let parts: Vec<String> = q
            .nodes()
            .iter()
            .zip(&self.0)
            .filter(|(n, _)| n.is_gauge())
            .map(|(n, m)| format!("{}={:?}", n.id, m))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// `Delta(m)` stored exactly as the integer `4 * Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Delta(i64);

impl Delta {
    pub fn from_quarters(q: i64) -> Self {
        Delta(q)
    }

    pub fn quarters(self) -> i64 {
        self.0
    }

    /// `2 * Delta` when it is an integer.
    pub fn twice(self) -> Option<i64> {
        (self.0 % 2 == 0).then_some(self.0 / 2)
    }

    pub fn value(self) -> Ratio<i64> {
        Ratio::new(self.0, 4)
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

fn zeros(g: GaugeGroup) -> Vec<i64> {
    vec![0; g.rank()]
}

fn edge_units(ga: GaugeGroup, ma: &[i64], gb: GaugeGroup, mb: &[i64], conv: Conventions) -> i64 {
    matter_quarter_units(ga, ma, gb, mb, conv).expect("edge families validated with the quiver")
        as i64
}

/// Charge of node `i` as seen by the matter sum.
fn node_charge<'a>(q: &Quiver, m: &'a QuiverCharge, i: usize, flavor: &'a [i64]) -> &'a [i64] {
    match q.nodes()[i].kind {
        NodeKind::Gauge => &m.0[i],
        _ => flavor,
    }
}

/// `4 * Delta(m)` without chamber checks.
fn quarter_units(q: &Quiver, m: &QuiverCharge, conv: Conventions) -> i64 {
    let mut total = 0i64;
    for i in q.gauge_indices() {
        total -= 4 * lie::root_sum(q.nodes()[i].group, &m.0[i]) as i64;
    }
    let flavor_zeros: Vec<Vec<i64>> = q.nodes().iter().map(|n| zeros(n.group)).collect();
    for &(a, b) in q.edges() {
        let ga = q.nodes()[a].group;
        let gb = q.nodes()[b].group;
        let ma = node_charge(q, m, a, &flavor_zeros[a]);
        let mb = node_charge(q, m, b, &flavor_zeros[b]);
        total += edge_units(ga, ma, gb, mb, conv);
    }
    total
}

fn check_charge(q: &Quiver, m: &QuiverCharge, conv: Conventions) -> Result<(), EngineError> {
    if m.0.len() != q.nodes().len() {
        return Err(EngineError::InvalidCharge(format!(
            "charge has {} entries, quiver has {} nodes",
            m.0.len(),
            q.nodes().len()
        )));
    }
    for (node, c) in q.nodes().iter().zip(&m.0) {
        let ok = match node.kind {
            NodeKind::Gauge => in_chamber_with(node.group, c, conv),
            NodeKind::Fixed => c.iter().all(|&x| x == 0),
            NodeKind::Flavor => true,
        };
        if !ok {
            return Err(EngineError::InvalidCharge(format!("node `{}`: {:?}", node.id, c)));
        }
    }
    Ok(())
}

/// `Delta(m) = -sum_{roots} |alpha(m)| + 1/2 sum_{weights} |b(m)|`.
pub fn delta(q: &Quiver, m: &QuiverCharge, conv: Conventions) -> Result<Delta, EngineError> {
    check_charge(q, m, conv)?;
    Ok(Delta(quarter_units(q, m, conv)))
}

/// `P_G(m, t) = prod 1/(1 - t^{2 d_i(m)})` over the residual Casimir degrees.
pub fn dressing_factor(
    q: &Quiver,
    m: &QuiverCharge,
    order: usize,
    conv: Conventions,
) -> Result<TruncatedSeries<BigInt>, EngineError> {
    check_charge(q, m, conv)?;
    let mut s = TruncatedSeries::<BigInt>::one(order);
    for i in q.gauge_indices() {
        for d in dressing_degrees(q.nodes()[i].group, &m.0[i], conv)? {
            s.div_one_minus_t_pow(2 * d as usize);
        }
    }
    Ok(s)
}

/// Shell schedule for the lattice sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChargePolicy {
    /// First box `max |m| <= initial_bound` examined.
    pub initial_bound: u32,
    pub max_bound: u32,
    /// Consecutive shells without contributing charges needed to stop.
    pub empty_shells: u32,
}

impl Default for ChargePolicy {
    fn default() -> Self {
        ChargePolicy { initial_bound: 0, max_bound: 64, empty_shells: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Tree message passing with min-plus pruning; falls back to `Direct` on cycles.
    #[default]
    Factorized,
    /// Brute-force enumeration of every charge in the box.
    Direct,
}

#[derive(Debug, Clone)]
pub struct HsRequest {
    pub quiver: Quiver,
    /// Inclusive truncation order in `t`.
    pub order: usize,
    /// Gauge nodes carrying a fugacity `z^{sum m}`.
    pub refined: Vec<String>,
    pub ungauge: Option<String>,
    pub policy: ChargePolicy,
    pub conventions: Conventions,
    pub strategy: Strategy,
    /// Worker threads; `None` runs on the calling thread only.
    pub threads: Option<usize>,
}

impl HsRequest {
    pub fn new(quiver: Quiver, order: usize) -> Self {
        HsRequest {
            quiver,
            order,
            refined: Vec::new(),
            ungauge: None,
            policy: ChargePolicy::default(),
            conventions: Conventions::default(),
            strategy: Strategy::default(),
            threads: None,
        }
    }

    pub fn ungauge(mut self, id: impl Into<String>) -> Self {
        self.ungauge = Some(id.into());
        self
    }

    pub fn refine(mut self, ids: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.refined = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn conventions(mut self, conventions: Conventions) -> Self {
        self.conventions = conventions;
        self
    }

    pub fn strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn policy(mut self, policy: ChargePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunStats {
    /// Final box `max |m| <= bound_reached`.
    pub bound_reached: u32,
    /// Charges with `2 Delta <= order`.
    pub charge_count: BigInt,
    pub strategy: Strategy,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct HsRun<C> {
    pub series: TruncatedSeries<C>,
    pub stats: RunStats,
}

/// Exponent window `[lo, lo + coeffs.len())` of a series in `u = t^{1/2}`.
#[derive(Debug, Clone)]
struct Window<C> {
    lo: i64,
    coeffs: Vec<C>,
}

impl<C: Coefficient> Window<C> {
    fn empty(lo: i64) -> Self {
        Window { lo, coeffs: Vec::new() }
    }

    fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    fn truncated(mut self, hi: i64) -> Self {
        let len = (hi - self.lo + 1).max(0) as usize;
        self.coeffs.truncate(len);
        self
    }

    /// Adds `u^shift * other`, keeping exponents `<= hi`.
    fn add_shifted(&mut self, other: &Window<C>, shift: i64, hi: i64) {
        let lo = other.lo + shift;
        if other.coeffs.is_empty() || lo > hi {
            return;
        }
        if self.coeffs.is_empty() {
            self.lo = lo;
        }
        if lo < self.lo {
            let pad = (self.lo - lo) as usize;
            let mut v = vec![C::zero(); pad];
            v.append(&mut self.coeffs);
            self.coeffs = v;
            self.lo = lo;
        }
        let top = (other.hi() + shift).min(hi);
        let need = (top - self.lo + 1) as usize;
        if self.coeffs.len() < need {
            self.coeffs.resize(need, C::zero());
        }
        for e in lo..=top {
            let c = &other.coeffs[(e - lo) as usize];
            if !c.is_zero() {
                self.coeffs[(e - self.lo) as usize].add_assign_ref(c);
            }
        }
    }

    fn mul(&self, other: &Window<C>, hi: i64) -> Window<C> {
        let lo = self.lo + other.lo;
        let len = (hi - lo + 1).max(0) as usize;
        let mut out = vec![C::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() || i >= len {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(len - i) {
                if !b.is_zero() {
                    out[i + j].add_assign_ref(&a.mul_ref(b));
                }
            }
        }
        Window { lo, coeffs: out }
    }
}

/// Gauge nodes of the quiver with flavor and fixed neighbors folded into a
/// per-charge offset.
struct Lattice<'a> {
    q: &'a Quiver,
    conv: Conventions,
    /// Quiver index of each gauge node.
    gauge: Vec<usize>,
    /// Gauge-gauge adjacency as (other local index, multiplicity).
    adj: Vec<Vec<(usize, i64)>>,
}

impl<'a> Lattice<'a> {
    fn new(q: &'a Quiver, conv: Conventions) -> Result<Self, EngineError> {
        let gauge: Vec<usize> = q.gauge_indices().collect();
        let local: BTreeMap<usize, usize> =
            gauge.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(a, b) in q.edges() {
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        let mut adj = vec![Vec::new(); gauge.len()];
        for (&(a, b), &count) in &counts {
            let na = &q.nodes()[a];
            let nb = &q.nodes()[b];
            if count > 1 && na.group.family != Family::Unitary {
                return Err(EngineError::UnsupportedMultiEdge {
                    a: na.id.clone(),
                    b: nb.id.clone(),
                    count,
                });
            }
            if let (Some(&la), Some(&lb)) = (local.get(&a), local.get(&b)) {
                adj[la].push((lb, count as i64));
                adj[lb].push((la, count as i64));
            }
        }
        Ok(Lattice { q, conv, gauge, adj })
    }

    fn group(&self, v: usize) -> GaugeGroup {
        self.q.nodes()[self.gauge[v]].group
    }

    fn charges(&self, v: usize, bound: u32) -> Vec<Vec<i64>> {
        dominant_charges_with(self.group(v), bound, self.conv)
            .into_iter()
            .map(|c| c.entries().to_vec())
            .collect()
    }

    /// Roots of node `v` plus its edges to flavor and fixed nodes.
    fn local_units(&self, v: usize, m: &[i64]) -> i64 {
        let i = self.gauge[v];
        let g = self.group(v);
        let mut total = -4 * lie::root_sum(g, m) as i64;
        for other in self.q.neighbors(i) {
            let node = &self.q.nodes()[other];
            if !node.is_gauge() {
                total += edge_units(g, m, node.group, &zeros(node.group), self.conv);
            }
        }
        total
    }

    fn pair_units(&self, a: usize, ma: &[i64], b: usize, mb: &[i64], mult: i64) -> i64 {
        mult * edge_units(self.group(a), ma, self.group(b), mb, self.conv)
    }

    /// Rooted spanning forest of the gauge graph, or `None` if it has a cycle.
    fn forest(&self) -> Option<Forest> {
        let n = self.gauge.len();
        let mut parent: Vec<Option<(usize, i64)>> = vec![None; n];
        let mut children: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut preorder = Vec::with_capacity(n);
        let mut roots = Vec::new();
        let mut by_rank: Vec<usize> = (0..n).collect();
        by_rank.sort_by_key(|&v| (std::cmp::Reverse(self.group(v).rank()), v));
        for &start in &by_rank {
            if seen[start] {
                continue;
            }
            roots.push(start);
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                preorder.push(v);
                for &(w, mult) in &self.adj[v] {
                    if parent[v].map(|(p, _)| p) == Some(w) {
                        continue;
                    }
                    if seen[w] {
                        return None;
                    }
                    seen[w] = true;
                    parent[w] = Some((v, mult));
                    children[v].push((w, mult));
                    stack.push(w);
                }
            }
        }
        Some(Forest { parent, children, preorder, roots })
    }
}

struct Forest {
    parent: Vec<Option<(usize, i64)>>,
    children: Vec<Vec<(usize, i64)>>,
    preorder: Vec<usize>,
    roots: Vec<usize>,
}

/// Min-plus bounds for one charge box.
struct Bounds {
    charges: Vec<Vec<Vec<i64>>>,
    local: Vec<Vec<i64>>,
    /// Minimum of `q` over the subtree of `v` with `v` at the given charge.
    up: Vec<Vec<i64>>,
    /// For a non-root `c`: per parent charge, `min_j edge + up[c][j]`.
    best: Vec<Vec<i64>>,
    /// Minimum of `q` outside the subtree of `v`, including the edge to its parent.
    down: Vec<Vec<i64>>,
}

impl Bounds {
    fn total(&self, v: usize, i: usize) -> i64 {
        self.up[v][i] + self.down[v][i]
    }
}

fn min_plus_bounds(lat: &Lattice, forest: &Forest, bound: u32) -> Bounds {
    let n = lat.gauge.len();
    let charges: Vec<Vec<Vec<i64>>> = (0..n).map(|v| lat.charges(v, bound)).collect();
    let local: Vec<Vec<i64>> =
        (0..n).map(|v| charges[v].iter().map(|m| lat.local_units(v, m)).collect()).collect();
    let mut up: Vec<Vec<i64>> = local.clone();
    let mut best: Vec<Vec<i64>> = vec![Vec::new(); n];
    for &v in forest.preorder.iter().rev() {
        if let Some((p, mult)) = forest.parent[v] {
            let b: Vec<i64> = charges[p]
                .par_iter()
                .map(|mp| {
                    charges[v]
                        .iter()
                        .zip(&up[v])
                        .map(|(mv, &u)| u + lat.pair_units(v, mv, p, mp, mult))
                        .min()
                        .expect("nonempty charge list")
                })
                .collect();
            for (x, y) in up[p].iter_mut().zip(&b) {
                *x += y;
            }
            best[v] = b;
        }
    }
    let comp_min: Vec<i64> =
        forest.roots.iter().map(|&r| *up[r].iter().min().expect("nonempty charge list")).collect();
    let comp_total: i64 = comp_min.iter().sum();
    let mut down: Vec<Vec<i64>> = vec![Vec::new(); n];
    for (&r, &m) in forest.roots.iter().zip(&comp_min) {
        down[r] = vec![comp_total - m; charges[r].len()];
    }
    for &v in &forest.preorder {
        if let Some((p, mult)) = forest.parent[v] {
            let outside: Vec<i64> =
                (0..charges[p].len()).map(|i| down[p][i] + up[p][i] - best[v][i]).collect();
            down[v] = charges[v]
                .par_iter()
                .map(|mv| {
                    charges[p]
                        .iter()
                        .zip(&outside)
                        .map(|(mp, &o)| o + lat.pair_units(v, mv, p, mp, mult))
                        .min()
                        .expect("nonempty charge list")
                })
                .collect();
        }
    }
    Bounds { charges, local, up, best, down }
}

fn max_abs(m: &[i64]) -> u32 {
    m.iter().map(|x| x.unsigned_abs() as u32).max().unwrap_or(0)
}

/// Per-charge contribution of node `v`: dressing times fugacity weight.
trait NodeFactor<C>: Sync {
    fn base(&self, v: usize, m: &[i64], hi_rel: usize) -> Window<C>;
}

struct Dressed<'a, F> {
    lat: &'a Lattice<'a>,
    weight: F,
}

impl<'a, C, F> NodeFactor<C> for Dressed<'a, F>
where
    C: Coefficient,
    F: Fn(usize, &[i64]) -> C + Sync,
{
    fn base(&self, v: usize, m: &[i64], hi_rel: usize) -> Window<C> {
        let mut s = TruncatedSeries::<C>::monomial(hi_rel, 0, (self.weight)(self.lat.gauge[v], m));
        let degrees = dressing_degrees(self.lat.group(v), m, self.lat.conv)
            .expect("enumerated charges are dominant");
        for d in degrees {
            s.div_one_minus_t_pow(4 * d as usize);
        }
        Window { lo: 0, coeffs: s.coeffs().to_vec() }
    }
}

struct Counting;

impl NodeFactor<BigInt> for Counting {
    fn base(&self, _: usize, _: &[i64], _: usize) -> Window<BigInt> {
        Window { lo: 0, coeffs: vec![BigInt::one()] }
    }
}

/// Sums the lattice over the box, returning the `u`-series up to `2 * order`.
fn tree_sum<C: Coefficient>(
    lat: &Lattice,
    forest: &Forest,
    b: &Bounds,
    budget: i64,
    factor: &impl NodeFactor<C>,
) -> Window<C> {
    let n = lat.gauge.len();
    let mut msgs: Vec<Vec<Option<Window<C>>>> = vec![Vec::new(); n];
    for &v in forest.preorder.iter().rev() {
        let out: Vec<Option<Window<C>>> = (0..b.charges[v].len())
            .into_par_iter()
            .map(|i| {
                if b.total(v, i) > budget {
                    return None;
                }
                let hi = budget - b.down[v][i];
                let slack = hi - b.up[v][i];
                let m = &b.charges[v][i];
                let mut acc = factor.base(v, m, slack as usize);
                acc.lo = b.local[v][i];
                let mut acc = acc.truncated(b.local[v][i] + slack);
                for &(c, mult) in &forest.children[v] {
                    let cut = b.best[c][i] + slack;
                    let mut agg = Window::empty(b.best[c][i]);
                    for (j, mc) in b.charges[c].iter().enumerate() {
                        let Some(msg) = &msgs[c][j] else { continue };
                        let e = lat.pair_units(c, mc, v, m, mult);
                        if msg.lo + e > cut {
                            continue;
                        }
                        agg.add_shifted(msg, e, cut);
                    }
                    let lo_acc = acc.lo;
                    acc = acc.mul(&agg, hi);
                    debug_assert!(acc.lo >= lo_acc + b.best[c][i]);
                }
                Some(acc)
            })
            .collect();
        msgs[v] = out;
        for &(c, _) in &forest.children[v] {
            msgs[c] = Vec::new();
        }
    }
    let mut total = Window { lo: 0, coeffs: vec![C::one()] };
    for &r in &forest.roots {
        let mut comp = Window::empty(0);
        for msg in msgs[r].iter().flatten() {
            comp.add_shifted(msg, 0, budget);
        }
        total = total.mul(&comp, budget);
    }
    total
}

/// Runs the shell schedule, returning the final bound and its min-plus data.
fn factorized_shells(
    lat: &Lattice,
    forest: &Forest,
    budget: i64,
    policy: ChargePolicy,
) -> Result<(u32, Bounds), EngineError> {
    let mut empty_run = 0;
    let mut bound = policy.initial_bound;
    loop {
        let b = min_plus_bounds(lat, forest, bound);
        let mut nonempty = false;
        for v in 0..lat.gauge.len() {
            for (i, m) in b.charges[v].iter().enumerate() {
                let t = b.total(v, i);
                if t > budget {
                    continue;
                }
                if t <= 0 && m.iter().any(|&x| x != 0) {
                    return Err(EngineError::BadTheory {
                        charge: format!("{}={:?}", lat.q.nodes()[lat.gauge[v]].id, m),
                        delta: Delta(t).to_string(),
                    });
                }
                if max_abs(m) == bound {
                    nonempty = true;
                }
            }
        }
        empty_run = if nonempty { 0 } else { empty_run + 1 };
        if empty_run >= policy.empty_shells.max(1) {
            return Ok((bound, b));
        }
        if bound >= policy.max_bound {
            return Err(EngineError::ConvergenceNotReached { max_bound: policy.max_bound });
        }
        bound += 1;
    }
}

fn odometer(lists: &[Vec<Vec<i64>>], mut visit: impl FnMut(&[usize])) {
    if lists.iter().any(|l| l.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; lists.len()];
    loop {
        visit(&idx);
        let mut k = lists.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Brute-force shells: every charge in the box with `q <= budget`.
fn direct_shells(
    q: &Quiver,
    conv: Conventions,
    budget: i64,
    policy: ChargePolicy,
) -> Result<(u32, Vec<(QuiverCharge, i64)>), EngineError> {
    let gauge: Vec<usize> = q.gauge_indices().collect();
    let mut found: Vec<(QuiverCharge, i64)> = Vec::new();
    let mut empty_run = 0;
    let mut bound = policy.initial_bound;
    let mut first = true;
    loop {
        let lists: Vec<Vec<Vec<i64>>> = gauge
            .iter()
            .map(|&i| {
                dominant_charges_with(q.nodes()[i].group, bound, conv)
                    .into_iter()
                    .map(|c| c.entries().to_vec())
                    .collect()
            })
            .collect();
        let mut shell = Vec::new();
        let mut bad = None;
        odometer(&lists, |idx| {
            let top =
                idx.iter().enumerate().map(|(k, &j)| max_abs(&lists[k][j])).max().unwrap_or(0);
            if !first && top != bound {
                return;
            }
            let mut c = QuiverCharge::zero(q);
            for (k, &j) in idx.iter().enumerate() {
                c.0[gauge[k]] = lists[k][j].clone();
            }
            let units = quarter_units(q, &c, conv);
            if units <= budget {
                if units <= 0 && !c.is_zero() && bad.is_none() {
                    bad = Some((c.display(q), units));
                }
                shell.push((c, units));
            }
        });
        if let Some((charge, units)) = bad {
            return Err(EngineError::BadTheory { charge, delta: Delta(units).to_string() });
        }
        let nonempty = shell.iter().any(|(c, _)| gauge.iter().any(|&i| max_abs(&c.0[i]) == bound));
        found.extend(shell);
        first = false;
        empty_run = if nonempty { 0 } else { empty_run + 1 };
        if empty_run >= policy.empty_shells.max(1) {
            found.sort();
            return Ok((bound, found));
        }
        if bound >= policy.max_bound {
            return Err(EngineError::ConvergenceNotReached { max_bound: policy.max_bound });
        }
        bound += 1;
    }
}

/// All charges with `Delta(m) <= delta_max`, sorted, found by brute-force shells.
pub fn enumerate_charges(
    q: &Quiver,
    delta_max: Delta,
    policy: ChargePolicy,
    conv: Conventions,
) -> Result<Vec<QuiverCharge>, EngineError> {
    if delta_max.quarters() < 0 {
        return Err(EngineError::InvalidParameter("delta_max must be nonnegative".into()));
    }
    let (_, found) = direct_shells(q, conv, delta_max.quarters(), policy)?;
    Ok(found.into_iter().map(|(c, _)| c).collect())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(1).max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}

struct Prepared {
    quiver: Quiver,
    /// Quiver index of each refined node, in fugacity order.
    refined: Vec<usize>,
}

fn prepare(req: &HsRequest) -> Result<Prepared, EngineError> {
    let quiver = match &req.ungauge {
        Some(id) => ungauge(&req.quiver, id)?,
        None => req.quiver.clone(),
    };
    if detect_decoupled_u1(&quiver) {
        return Err(EngineError::DecoupledU1Unresolved);
    }
    let mut refined = Vec::new();
    for id in &req.refined {
        let i = quiver.node_index(id)?;
        let node = &quiver.nodes()[i];
        if !node.is_gauge() || node.group.family != Family::Unitary || refined.contains(&i) {
            return Err(EngineError::InvalidRefinement(id.clone()));
        }
        refined.push(i);
    }
    Ok(Prepared { quiver, refined })
}

fn finish<C: Coefficient>(u_series: Window<C>, order: usize) -> Result<Vec<C>, EngineError> {
    let mut coeffs = vec![C::zero(); order + 1];
    for (k, c) in u_series.coeffs.iter().enumerate() {
        let e = u_series.lo + k as i64;
        if c.is_zero() || e < 0 {
            continue;
        }
        if e % 2 != 0 {
            return Err(EngineError::HalfOddGrading { twice_delta: format!("{e}/2") });
        }
        if (e / 2) as usize <= order {
            coeffs[(e / 2) as usize] = c.clone();
        }
    }
    Ok(coeffs)
}

fn run<C: Coefficient>(
    req: &HsRequest,
    weight: impl Fn(&[usize], usize, &[i64]) -> C + Sync,
) -> Result<(Vec<C>, RunStats, Vec<String>), EngineError> {
    let start = Instant::now();
    let prep = prepare(req)?;
    let q = &prep.quiver;
    let conv = req.conventions;
    let budget = 2 * req.order as i64;
    let names: Vec<String> = prep.refined.iter().map(|&i| q.nodes()[i].id.clone()).collect();
    let node_weight = |i: usize, m: &[i64]| weight(&prep.refined, i, m);
    let lat = Lattice::new(q, conv)?;
    let forest = match req.strategy {
        Strategy::Factorized => lat.forest(),
        Strategy::Direct => None,
    };
    let (coeffs, bound, count, strategy) = match forest {
        Some(forest) => with_pool(req.threads, || -> Result<_, EngineError> {
            let (bound, bounds) = factorized_shells(&lat, &forest, budget, req.policy)?;
            let factor = Dressed { lat: &lat, weight: &node_weight };
            let series = tree_sum(&lat, &forest, &bounds, budget, &factor);
            let coeffs = finish(series, req.order)?;
            let counts = tree_sum(&lat, &forest, &bounds, budget, &Counting);
            let count: BigInt = counts.coeffs.iter().sum();
            Ok((coeffs, bound, count, Strategy::Factorized))
        })?,
        None => {
            let (bound, found) = direct_shells(q, conv, budget, req.policy)?;
            let mut acc = Window::<C>::empty(0);
            for (c, units) in &found {
                let hi_rel = (budget - units) as usize;
                let mut s = TruncatedSeries::<C>::monomial(hi_rel, 0, C::one());
                for &i in &lat.gauge {
                    let m = &c.0[i];
                    s = s.scale(&node_weight(i, m));
                    for d in dressing_degrees(q.nodes()[i].group, m, conv)? {
                        s.div_one_minus_t_pow(4 * d as usize);
                    }
                }
                let w = Window { lo: *units, coeffs: s.coeffs().to_vec() };
                acc.add_shifted(&w, 0, budget);
            }
            let coeffs = finish(acc, req.order)?;
            (coeffs, bound, BigInt::from(found.len()), Strategy::Direct)
        }
    };
    let stats =
        RunStats { bound_reached: bound, charge_count: count, strategy, elapsed: start.elapsed() };
    Ok((coeffs, stats, names))
}

/// Unrefined Coulomb-branch Hilbert series truncated at `req.order`.
pub fn coulomb_hilbert_series(req: &HsRequest) -> Result<HsRun<BigInt>, EngineError> {
    if !req.refined.is_empty() {
        return Err(EngineError::RefinedRequested);
    }
    let (coeffs, stats, _) = run(req, |_, _, _| BigInt::one())?;
    Ok(HsRun { series: TruncatedSeries::from_coeffs(req.order, coeffs), stats })
}

/// Hilbert series with a fugacity `z_j^{sum_i m_i}` for each refined node.
pub fn refined_hilbert_series(req: &HsRequest) -> Result<HsRun<Laurent>, EngineError> {
    let (coeffs, stats, names) =
        run(req, |refined, i, m| match refined.iter().position(|&r| r == i) {
            Some(k) => Laurent::term(Monomial::var(k, m.iter().sum()), BigInt::one()),
            None => Laurent::one(),
        })?;
    Ok(HsRun {
        series: TruncatedSeries::from_coeffs(req.order, coeffs).with_fugacities(names),
        stats,
    })
}

/// Coefficient of `t^2`.
pub fn symmetry_dimension(s: &TruncatedSeries<BigInt>) -> Result<BigInt, EngineError> {
    Ok(s.coefficient(2)?.clone())
}

/// `prod_{i=1}^n (1 - t^{2i}) / (1 - t^2)^{n^2}` expanded to `t^order`.
pub fn nilcone_reference_hs(n: u32, order: usize) -> TruncatedSeries<BigInt> {
    let mut s = TruncatedSeries::<BigInt>::one(order);
    for i in 1..=n as usize {
        s.mul_one_minus_t_pow(2 * i);
    }
    for _ in 0..n * n {
        s.div_one_minus_t_pow(2);
    }
    s
}

/// Refined bouquet computation: `b1` is ungauged, `b2..bn` carry fugacities,
/// and `(1 - t^2)^prefactor_exponent * prod CT_{z_j}` is returned.
pub fn refined_implosion_integral(
    n: u32,
    order: usize,
    prefactor_exponent: u32,
    conventions: Conventions,
    threads: Option<usize>,
) -> Result<TruncatedSeries<BigInt>, EngineError> {
    let mut s = if n <= 1 {
        TruncatedSeries::<BigInt>::one(order).to_refined()
    } else {
        let q = build_bouquet_quiver(n)?;
        let req = HsRequest::new(q, order)
            .ungauge("b1")
            .refine((2..=n).map(|j| format!("b{j}")))
            .conventions(conventions)
            .threads(threads);
        refined_hilbert_series(&req)?.series
    };
    for _ in 0..prefactor_exponent {
        s.mul_one_minus_t_pow(2);
    }
    for j in 2..=n {
        s = s.constant_term(&format!("b{j}"))?;
    }
    Ok(s.into_unrefined()?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContributionReport {
    pub n: u32,
    pub order: usize,
    pub t2_coefficient: BigInt,
    /// `n^2 + n - 2`.
    pub t2_expected_generic: u64,
    /// Dimension of the enhanced symmetry for n = 2, 3.
    pub t2_expected_enhanced: Option<u64>,
    pub t2_matches: bool,
    pub top_exponent: usize,
    pub top_coefficient: BigInt,
    /// Bare monopoles with one bouquet charge `±1` and `2 Delta = n - 1`.
    pub identified_bouquet_monopoles: usize,
}

/// Ungauged bouquet(n) series with the `t^2` check and the `t^{n-1}`
/// bouquet-monopole count.
pub fn hs_contribution_check(
    n: u32,
    conventions: Conventions,
    threads: Option<usize>,
) -> Result<ContributionReport, EngineError> {
    if n < 2 {
        return Err(EngineError::InvalidParameter(format!("bouquet needs n >= 2, got {n}")));
    }
    let order = 2.max(n as usize - 1);
    let q = build_bouquet_quiver(n)?;
    let req =
        HsRequest::new(q.clone(), order).ungauge("b1").conventions(conventions).threads(threads);
    let hs = coulomb_hilbert_series(&req)?.series;
    let fixed = ungauge(&q, "b1")?;

    let mut monopoles = Vec::new();
    for j in 2..=n {
        for s in [1i64, -1] {
            monopoles.push(QuiverCharge::from_entries(
                &fixed,
                &[(&format!("b{j}"), vec![s])],
                conventions,
            )?);
        }
    }
    // the ungauged leaf at ±1 is the shift of every other node by ∓1
    for s in [1i64, -1] {
        let mut c = QuiverCharge::zero(&fixed);
        for i in fixed.gauge_indices() {
            c.0[i] = vec![-s; fixed.nodes()[i].group.rank()];
        }
        monopoles.push(c);
    }
    let identified = monopoles
        .iter()
        .map(|c| delta(&fixed, c, conventions))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|d| d.twice() == Some(n as i64 - 1))
        .count();

    let generic = (n * n + n - 2) as u64;
    let enhanced = match n {
        2 => Some(10),
        3 => Some(28),
        _ => None,
    };
    let t2 = hs.coefficient(2)?.clone();
    Ok(ContributionReport {
        n,
        order,
        t2_matches: t2 == BigInt::from(enhanced.unwrap_or(generic)),
        t2_coefficient: t2,
        t2_expected_generic: generic,
        t2_expected_enhanced: enhanced,
        top_exponent: n as usize - 1,
        top_coefficient: hs.coefficient(n as usize - 1)?.clone(),
        identified_bouquet_monopoles: identified,
    })
}

/// Rank-consistency helper: `4 * rank` of the ungauged bouquet.
pub fn ungauged_bouquet_dimension(n: u32) -> Result<usize, EngineError> {
    let q = ungauge(&build_bouquet_quiver(n)?, "b1")?;
    Ok(quiver::expected_coulomb_dimension_real(&q)?)
}
