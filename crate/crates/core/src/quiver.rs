//! Quiver data model, balance analysis, symmetry prediction and the
//! constructors for nilpotent-cone chains, bouquets, partial-implosion
//! legs and the D_n orthosymplectic chain.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use petgraph::algo::is_isomorphic;
use petgraph::graph::UnGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuiverError {
    #[error("node #{index} (`{id}`): {reason}")]
    InvalidGroup { index: usize, id: String, reason: String },
    #[error("node #{index}: duplicate id `{id}`")]
    DuplicateNode { index: usize, id: String },
    #[error("edge #{edge}: unknown endpoint `{id}`")]
    UnknownEndpoint { edge: usize, id: String },
    #[error("edge #{edge} ({a}, {b}): joins two flavor nodes")]
    FlavorFlavorEdge { edge: usize, a: String, b: String },
    #[error("edge #{edge} ({a}, {b}): self-loops are not supported")]
    SelfLoop { edge: usize, a: String, b: String },
    #[error("edge #{edge} ({a}, {b}): {reason}")]
    MixedFamilyEdge { edge: usize, a: String, b: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not a gauge node and has no balance")]
    FlavorNodeHasNoBalance(String),
    #[error("node `{id}`: adjacency sum {sum} gives a non-integral orthosymplectic balance")]
    NonIntegralBalance { id: String, sum: u64 },
    #[error("node `{0}` is not a U(1) gauge node")]
    NotAbelianGaugeNode(String),
    #[error("quiver has a decoupled diagonal U(1); ungauge a U(1) node first")]
    DecoupledU1Unresolved,
    #[error("operation supports unitary quivers only (node `{0}`)")]
    UnsupportedFamily(String),
    #[error("node `{0}` is not a flavor node")]
    NotAFlavorNode(String),
    #[error("flavor node `{id}` has dimension {actual}, not {requested}")]
    DimensionMismatch { id: String, actual: u32, requested: u32 },
    #[error("flavor node `{0}` must have exactly one neighbor")]
    MultiplyAttachedFlavor(String),
    #[error("partition {parts:?} sums to {sum}, expected {n}")]
    PartitionSumMismatch { parts: Vec<u32>, sum: u32, n: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "U")]
    Unitary,
    #[serde(rename = "SO")]
    Orthogonal,
    #[serde(rename = "USp")]
    Symplectic,
}

/// U(n), SO(n) or USp(n) (physics notation, USp(2r) = Sp(r)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GaugeGroup {
    pub family: Family,
    pub n: u32,
}

impl GaugeGroup {
    pub fn unitary(n: u32) -> Self {
        GaugeGroup { family: Family::Unitary, n }
    }

    pub fn orthogonal(n: u32) -> Self {
        GaugeGroup { family: Family::Orthogonal, n }
    }

    pub fn symplectic(n: u32) -> Self {
        GaugeGroup { family: Family::Symplectic, n }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("group dimension must be positive".into());
        }
        if self.family == Family::Symplectic && !self.n.is_multiple_of(2) {
            return Err(format!("USp({}) needs an even label", self.n));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        match self.family {
            Family::Unitary => self.n as usize,
            Family::Orthogonal | Family::Symplectic => (self.n / 2) as usize,
        }
    }

    /// Real dimension of the group manifold.
    pub fn dimension(&self) -> u64 {
        let n = self.n as u64;
        match self.family {
            Family::Unitary => n * n,
            Family::Orthogonal => n * (n - 1) / 2,
            Family::Symplectic => n * (n + 1) / 2,
        }
    }

    pub fn is_abelian_rank_one(&self) -> bool {
        matches!((self.family, self.n), (Family::Unitary, 1) | (Family::Orthogonal, 2))
    }
}

impl fmt::Display for GaugeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Unitary => write!(f, "U({})", self.n),
            Family::Orthogonal => write!(f, "SO({})", self.n),
            Family::Symplectic => write!(f, "USp({})", self.n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Gauge,
    Flavor,
    /// Former U(1) gauge node whose magnetic charge is pinned to zero.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuiverNode {
    pub id: String,
    pub kind: NodeKind,
    pub group: GaugeGroup,
}

impl QuiverNode {
    pub fn gauge(id: impl Into<String>, group: GaugeGroup) -> Self {
        QuiverNode { id: id.into(), kind: NodeKind::Gauge, group }
    }

    pub fn flavor(id: impl Into<String>, group: GaugeGroup) -> Self {
        QuiverNode { id: id.into(), kind: NodeKind::Flavor, group }
    }

    pub fn is_gauge(&self) -> bool {
        self.kind == NodeKind::Gauge
    }
}

#[derive(Serialize, Deserialize)]
struct RawQuiver {
    nodes: Vec<QuiverNode>,
    edges: Vec<(String, String)>,
}

/// Validated quiver. Edges are an unordered multiset of node pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQuiver", into = "RawQuiver")]
pub struct Quiver {
    nodes: Vec<QuiverNode>,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TryFrom<RawQuiver> for Quiver {
    type Error = QuiverError;
    fn try_from(raw: RawQuiver) -> Result<Self, QuiverError> {
        Quiver::new(raw.nodes, raw.edges)
    }
}

impl From<Quiver> for RawQuiver {
    fn from(q: Quiver) -> RawQuiver {
        let edges =
            q.edges.iter().map(|&(a, b)| (q.nodes[a].id.clone(), q.nodes[b].id.clone())).collect();
        RawQuiver { nodes: q.nodes, edges }
    }
}

fn edge_family_check(a: &QuiverNode, b: &QuiverNode) -> Result<(), String> {
    use Family::*;
    match (a.group.family, b.group.family) {
        (Unitary, Unitary) => Ok(()),
        (Orthogonal, Symplectic) | (Symplectic, Orthogonal) => Ok(()),
        (Unitary, _) | (_, Unitary) => {
            Err(format!("mixed unitary/orthosymplectic edge {} - {}", a.group, b.group))
        }
        _ => Err(format!(
            "orthosymplectic edges must join SO to USp, found {} - {}",
            a.group, b.group
        )),
    }
}

impl Quiver {
    pub fn new(
        nodes: Vec<QuiverNode>,
        edges: Vec<(String, String)>,
    ) -> Result<Quiver, QuiverError> {
        let mut index = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            node.group.validate().map_err(|reason| QuiverError::InvalidGroup {
                index: i,
                id: node.id.clone(),
                reason,
            })?;
            if node.kind == NodeKind::Fixed && node.group != GaugeGroup::unitary(1) {
                return Err(QuiverError::InvalidGroup {
                    index: i,
                    id: node.id.clone(),
                    reason: "fixed nodes must be U(1)".into(),
                });
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(QuiverError::DuplicateNode { index: i, id: node.id.clone() });
            }
        }
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (e, (a, b)) in edges.into_iter().enumerate() {
            let ia = *index
                .get(&a)
                .ok_or_else(|| QuiverError::UnknownEndpoint { edge: e, id: a.clone() })?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| QuiverError::UnknownEndpoint { edge: e, id: b.clone() })?;
            if ia == ib {
                return Err(QuiverError::SelfLoop { edge: e, a, b });
            }
            if nodes[ia].kind == NodeKind::Flavor && nodes[ib].kind == NodeKind::Flavor {
                return Err(QuiverError::FlavorFlavorEdge { edge: e, a, b });
            }
            if let Err(reason) = edge_family_check(&nodes[ia], &nodes[ib]) {
                return Err(QuiverError::MixedFamilyEdge { edge: e, a, b, reason });
            }
            idx_edges.push((ia, ib));
        }
        Ok(Quiver { nodes, edges: idx_edges, index })
    }

    pub fn empty() -> Quiver {
        Quiver::new(Vec::new(), Vec::new()).expect("empty quiver is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Quiver, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("quiver serializes")
    }

    pub fn nodes(&self) -> &[QuiverNode] {
        &self.nodes
    }

    /// Edges as node-index pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_index(&self, id: &str) -> Result<usize, QuiverError> {
        self.index.get(id).copied().ok_or_else(|| QuiverError::UnknownNode(id.to_string()))
    }

    pub fn node(&self, id: &str) -> Result<&QuiverNode, QuiverError> {
        Ok(&self.nodes[self.node_index(id)?])
    }

    /// Neighbor indices of node `i`, repeated per edge multiplicity.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn gauge_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_gauge())
    }

    pub fn is_unitary(&self) -> bool {
        self.nodes.iter().all(|n| n.group.family == Family::Unitary)
    }

    fn with_parts(nodes: Vec<QuiverNode>, edges: Vec<(usize, usize)>) -> Quiver {
        let named =
            edges.iter().map(|&(a, b)| (nodes[a].id.clone(), nodes[b].id.clone())).collect();
        Quiver::new(nodes, named).expect("constructor produced a valid quiver")
    }

    fn fresh_id(&self, stem: &str) -> String {
        if !self.index.contains_key(stem) {
            return stem.to_string();
        }
        (1..)
            .map(|k| format!("{stem}_{k}"))
            .find(|id| !self.index.contains_key(id))
            .expect("unbounded search")
    }

    /// Undirected graph with node weights (kind, group) for isomorphism checks.
    pub fn to_graph(&self) -> UnGraph<(NodeKind, GaugeGroup), ()> {
        let mut g = UnGraph::new_undirected();
        let ix: Vec<_> = self.nodes.iter().map(|n| g.add_node((n.kind, n.group))).collect();
        for &(a, b) in &self.edges {
            g.add_edge(ix[a], ix[b], ());
        }
        g
    }

    /// Isomorphism respecting node kinds and groups.
    pub fn is_isomorphic_to(&self, other: &Quiver) -> bool {
        petgraph::algo::is_isomorphic_matching(
            &self.to_graph(),
            &other.to_graph(),
            |a, b| a == b,
            |_, _| true,
        )
    }
}

/// Balance of gauge node `id`: `-2N + sum of neighbor dimensions` for unitary
/// nodes, `(sum + 2)/2 - N` for SO(N) and `(sum - 2)/2 - N` for USp(N).
pub fn node_balance(q: &Quiver, id: &str) -> Result<i64, QuiverError> {
    let i = q.node_index(id)?;
    balance_at(q, i)
}

fn balance_at(q: &Quiver, i: usize) -> Result<i64, QuiverError> {
    let node = &q.nodes[i];
    if !node.is_gauge() {
        return Err(QuiverError::FlavorNodeHasNoBalance(node.id.clone()));
    }
    let sum: u64 = q.neighbors(i).map(|j| q.nodes[j].group.n as u64).sum();
    let n = node.group.n as i64;
    let half = |shifted: i64| -> Result<i64, QuiverError> {
        if shifted % 2 != 0 {
            Err(QuiverError::NonIntegralBalance { id: node.id.clone(), sum })
        } else {
            Ok(shifted / 2)
        }
    };
    match node.group.family {
        Family::Unitary => Ok(sum as i64 - 2 * n),
        Family::Orthogonal => Ok(half(sum as i64 + 2)? - n),
        Family::Symplectic => Ok(half(sum as i64 - 2)? - n),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalanceReport {
    /// Gauge nodes in quiver order with their balance.
    pub balances: Vec<(String, i64)>,
    pub balanced: Vec<String>,
    pub has_negative_below_minus_one: bool,
    pub minimally_unbalanced: bool,
    pub positively_balanced: bool,
    pub all_balanced: bool,
}

pub fn balance_report(q: &Quiver) -> Result<BalanceReport, QuiverError> {
    let balances = q
        .gauge_indices()
        .map(|i| Ok((q.nodes[i].id.clone(), balance_at(q, i)?)))
        .collect::<Result<Vec<_>, QuiverError>>()?;
    let values: Vec<i64> = balances.iter().map(|(_, b)| *b).collect();
    let min = values.iter().copied().min();
    let any_below = values.iter().any(|&b| b < -1);
    Ok(BalanceReport {
        balanced: balances.iter().filter(|(_, b)| *b == 0).map(|(id, _)| id.clone()).collect(),
        has_negative_below_minus_one: any_below,
        minimally_unbalanced: min == Some(-1) && !any_below,
        positively_balanced: !values.is_empty()
            && values.iter().all(|&b| b >= 0)
            && values.iter().any(|&b| b > 0),
        all_balanced: !values.is_empty() && values.iter().all(|&b| b == 0),
        balances,
    })
}

/// Label of a connected balanced subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DynkinLabel {
    A(usize),
    D(usize),
    E(usize),
    /// Not a simply-laced finite Dynkin graph; `shape` describes it.
    Unrecognized {
        shape: String,
    },
}

impl DynkinLabel {
    pub fn rank(&self) -> Option<usize> {
        match *self {
            DynkinLabel::A(r) | DynkinLabel::D(r) | DynkinLabel::E(r) => Some(r),
            DynkinLabel::Unrecognized { .. } => None,
        }
    }

    /// Dimension of the compact simple group with this Dynkin diagram.
    pub fn group_dimension(&self) -> Option<u64> {
        match *self {
            DynkinLabel::A(r) => Some((r * r + 2 * r) as u64),
            DynkinLabel::D(r) => Some((2 * r * r - r) as u64),
            DynkinLabel::E(6) => Some(78),
            DynkinLabel::E(7) => Some(133),
            DynkinLabel::E(8) => Some(248),
            _ => None,
        }
    }

    /// Conventional compact group name.
    pub fn group_name(&self) -> String {
        match self {
            DynkinLabel::A(r) => format!("SU({})", r + 1),
            DynkinLabel::D(r) => format!("SO({})", 2 * r),
            DynkinLabel::E(r) => format!("E{r}"),
            DynkinLabel::Unrecognized { shape } => format!("unrecognized ({shape})"),
        }
    }
}

impl fmt::Display for DynkinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynkinLabel::A(r) => write!(f, "A_{r}"),
            DynkinLabel::D(r) => write!(f, "D_{r}"),
            DynkinLabel::E(r) => write!(f, "E_{r}"),
            DynkinLabel::Unrecognized { shape } => write!(f, "unrecognized: {shape}"),
        }
    }
}

fn path_graph(k: usize) -> UnGraph<(), ()> {
    let mut g = UnGraph::new_undirected();
    let ix: Vec<_> = (0..k).map(|_| g.add_node(())).collect();
    for w in ix.windows(2) {
        g.add_edge(w[0], w[1], ());
    }
    g
}

/// Star with three arms of the given lengths (number of nodes beyond the center).
fn tee_graph(arms: [usize; 3]) -> UnGraph<(), ()> {
    let mut g = UnGraph::new_undirected();
    let center = g.add_node(());
    for len in arms {
        let mut prev = center;
        for _ in 0..len {
            let n = g.add_node(());
            g.add_edge(prev, n, ());
            prev = n;
        }
    }
    g
}

fn dynkin_templates(k: usize) -> Vec<(DynkinLabel, UnGraph<(), ()>)> {
    let mut out = vec![(DynkinLabel::A(k), path_graph(k))];
    if k >= 4 {
        out.push((DynkinLabel::D(k), tee_graph([1, 1, k - 3])));
    }
    match k {
        6 => out.push((DynkinLabel::E(6), tee_graph([1, 2, 2]))),
        7 => out.push((DynkinLabel::E(7), tee_graph([1, 2, 3]))),
        8 => out.push((DynkinLabel::E(8), tee_graph([1, 2, 4]))),
        _ => {}
    }
    out
}

fn describe_shape(g: &UnGraph<(), ()>, multi_edge: bool) -> String {
    let n = g.node_count();
    let e = g.edge_count();
    let mut degrees: Vec<usize> = g.node_indices().map(|v| g.neighbors(v).count()).collect();
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    if multi_edge {
        return format!("{n} nodes with multiple edges");
    }
    if e >= n {
        return format!("{n} nodes, {e} edges (contains a cycle)");
    }
    let branch: Vec<usize> = degrees.iter().copied().filter(|&d| d >= 3).collect();
    if branch.len() == 1 {
        return format!("star with {} legs ({n} nodes)", branch[0]);
    }
    format!("tree with {n} nodes, degree sequence {degrees:?}")
}

/// Label a connected simple graph on `k` nodes.
pub fn classify_graph(g: &UnGraph<(), ()>, multi_edge: bool) -> DynkinLabel {
    let k = g.node_count();
    if !multi_edge {
        for (label, template) in dynkin_templates(k) {
            if template.edge_count() == g.edge_count() && is_isomorphic(&template, g) {
                return label;
            }
        }
    }
    DynkinLabel::Unrecognized { shape: describe_shape(g, multi_edge) }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalancedComponent {
    pub nodes: Vec<String>,
    pub label: DynkinLabel,
}

/// Connected components of the balanced gauge-node subgraph, labelled by
/// isomorphism against the A/D/E templates.
pub fn balanced_subquiver_classification(
    q: &Quiver,
) -> Result<Vec<BalancedComponent>, QuiverError> {
    let report = balance_report(q)?;
    let balanced: BTreeSet<usize> =
        report.balanced.iter().map(|id| q.node_index(id)).collect::<Result<_, _>>()?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in &balanced {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = vec![start];
        seen.insert(start);
        let mut k = 0;
        while k < comp.len() {
            let v = comp[k];
            for w in q.neighbors(v) {
                if balanced.contains(&w) && seen.insert(w) {
                    comp.push(w);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut g = UnGraph::<(), ()>::new_undirected();
        let ix: Vec<_> = comp.iter().map(|_| g.add_node(())).collect();
        let mut pairs = BTreeSet::new();
        let mut multi_edge = false;
        for &(a, b) in q.edges() {
            if let (Some(&la), Some(&lb)) = (local.get(&a), local.get(&b)) {
                if !pairs.insert((la.min(lb), la.max(lb))) {
                    multi_edge = true;
                    continue;
                }
                g.add_edge(ix[la], ix[lb], ());
            }
        }
        out.push(BalancedComponent {
            nodes: comp.iter().map(|&v| q.nodes[v].id.clone()).collect(),
            label: classify_graph(&g, multi_edge),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymmetryPrediction {
    pub semisimple: Vec<BalancedComponent>,
    pub abelian_rank: usize,
    pub unrecognized: Vec<BalancedComponent>,
    /// Sum of recognized factor dimensions plus the abelian rank.
    pub total_dimension: u64,
}

/// Balanced components give simple factors, unbalanced unitary nodes give
/// U(1)s, and one U(1) is removed when the diagonal U(1) decouples.
pub fn predict_global_symmetry(q: &Quiver) -> Result<SymmetryPrediction, QuiverError> {
    let report = balance_report(q)?;
    let components = balanced_subquiver_classification(q)?;
    let (semisimple, unrecognized): (Vec<_>, Vec<_>) =
        components.into_iter().partition(|c| c.label.rank().is_some());
    let unbalanced_unitary = report
        .balances
        .iter()
        .filter(|(id, b)| {
            *b != 0 && q.node(id).map(|n| n.group.family == Family::Unitary).unwrap_or(false)
        })
        .count();
    let abelian_rank = unbalanced_unitary.saturating_sub(usize::from(detect_decoupled_u1(q)));
    let total_dimension = semisimple.iter().filter_map(|c| c.label.group_dimension()).sum::<u64>()
        + abelian_rank as u64;
    Ok(SymmetryPrediction { semisimple, abelian_rank, unrecognized, total_dimension })
}

/// True when every node is a unitary gauge node, so the diagonal U(1) acts trivially.
pub fn detect_decoupled_u1(q: &Quiver) -> bool {
    !q.nodes.is_empty() && q.nodes.iter().all(|n| n.is_gauge() && n.group.family == Family::Unitary)
}

/// Pins the magnetic charge of U(1) gauge node `id` to zero.
pub fn ungauge(q: &Quiver, id: &str) -> Result<Quiver, QuiverError> {
    let i = q.node_index(id)?;
    let node = &q.nodes[i];
    if !node.is_gauge() || node.group != GaugeGroup::unitary(1) {
        return Err(QuiverError::NotAbelianGaugeNode(id.to_string()));
    }
    let mut nodes = q.nodes.clone();
    nodes[i].kind = NodeKind::Fixed;
    Ok(Quiver::with_parts(nodes, q.edges.clone()))
}

pub fn gauge_group_rank(q: &Quiver) -> usize {
    q.gauge_indices().map(|i| q.nodes[i].group.rank()).sum()
}

/// `4 * rank G`; the decoupled U(1) must be ungauged first.
pub fn expected_coulomb_dimension_real(q: &Quiver) -> Result<usize, QuiverError> {
    if detect_decoupled_u1(q) {
        return Err(QuiverError::DecoupledU1Unresolved);
    }
    Ok(4 * gauge_group_rank(q))
}

/// How the gauge group dimension is counted for the Higgs-branch dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeDimConvention {
    /// `sum N_j^2` over gauge nodes.
    #[default]
    Unitary,
    /// As `Unitary`, minus one for a decoupled diagonal U(1).
    QuotientDecoupled,
}

/// Hypermultiplet count minus gauge group dimension.
pub fn higgs_quaternionic_dimension(
    q: &Quiver,
    convention: GaugeDimConvention,
) -> Result<i64, QuiverError> {
    if let Some(n) = q.nodes.iter().find(|n| n.group.family != Family::Unitary) {
        return Err(QuiverError::UnsupportedFamily(n.id.clone()));
    }
    let hypers: i64 =
        q.edges.iter().map(|&(a, b)| q.nodes[a].group.n as i64 * q.nodes[b].group.n as i64).sum();
    let mut gauge: i64 = q.gauge_indices().map(|i| (q.nodes[i].group.n as i64).pow(2)).sum();
    if convention == GaugeDimConvention::QuotientDecoupled && detect_decoupled_u1(q) {
        gauge -= 1;
    }
    Ok(hypers - gauge)
}

/// Chain U(1)-U(2)-...-U(n-1) with a dimension-n flavor node on U(n-1).
/// Gauge nodes are `c1..c{n-1}`, the flavor node is `f`.
pub fn build_linear_nilpotent_quiver(n: u32) -> Result<Quiver, QuiverError> {
    if n < 2 {
        return Err(QuiverError::InvalidParameter(format!(
            "nilpotent chain needs n >= 2, got {n}"
        )));
    }
    let mut nodes: Vec<QuiverNode> =
        (1..n).map(|k| QuiverNode::gauge(format!("c{k}"), GaugeGroup::unitary(k))).collect();
    let mut edges: Vec<(usize, usize)> = (1..nodes.len()).map(|k| (k - 1, k)).collect();
    nodes.push(QuiverNode::flavor("f", GaugeGroup::unitary(n)));
    edges.push((nodes.len() - 2, nodes.len() - 1));
    Ok(Quiver::with_parts(nodes, edges))
}

/// Replaces a flavor node of dimension `k` by `k` U(1) gauge nodes `b1..bk`
/// on its neighbor.
pub fn bouquet_replace(q: &Quiver, flavor_id: &str, k: u32) -> Result<Quiver, QuiverError> {
    let fi = q.node_index(flavor_id)?;
    let flavor = &q.nodes[fi];
    if flavor.kind != NodeKind::Flavor {
        return Err(QuiverError::NotAFlavorNode(flavor_id.to_string()));
    }
    if flavor.group.n != k {
        return Err(QuiverError::DimensionMismatch {
            id: flavor_id.to_string(),
            actual: flavor.group.n,
            requested: k,
        });
    }
    let nbrs: Vec<usize> = q.neighbors(fi).collect();
    if nbrs.len() != 1 {
        return Err(QuiverError::MultiplyAttachedFlavor(flavor_id.to_string()));
    }
    let family = flavor.group.family;
    let leaf_group = match family {
        Family::Unitary => GaugeGroup::unitary(1),
        _ => GaugeGroup::orthogonal(2),
    };
    if family != Family::Unitary && !k.is_multiple_of(2) {
        return Err(QuiverError::InvalidParameter(format!(
            "orthosymplectic bouquet needs an even flavor dimension, got {k}"
        )));
    }
    let leaves = if family == Family::Unitary { k } else { k / 2 };
    replace_with_leaves(q, fi, nbrs[0], leaves, leaf_group)
}

fn replace_with_leaves(
    q: &Quiver,
    flavor: usize,
    anchor: usize,
    count: u32,
    leaf_group: GaugeGroup,
) -> Result<Quiver, QuiverError> {
    let remap = |i: usize| if i > flavor { i - 1 } else { i };
    let mut nodes: Vec<QuiverNode> =
        q.nodes.iter().enumerate().filter(|&(i, _)| i != flavor).map(|(_, n)| n.clone()).collect();
    let mut edges: Vec<(usize, usize)> = q
        .edges
        .iter()
        .filter(|&&(a, b)| a != flavor && b != flavor)
        .map(|&(a, b)| (remap(a), remap(b)))
        .collect();
    let anchor = remap(anchor);
    let mut taken: BTreeSet<String> = nodes.iter().map(|n| n.id.clone()).collect();
    for j in 1..=count {
        let stem = format!("b{j}");
        let id = if taken.contains(&stem) { q.fresh_id(&stem) } else { stem };
        taken.insert(id.clone());
        nodes.push(QuiverNode::gauge(id, leaf_group));
        edges.push((anchor, nodes.len() - 1));
    }
    Ok(Quiver::with_parts(nodes, edges))
}

/// Nilpotent chain for `n` with its flavor node replaced by `n` U(1) nodes.
pub fn build_bouquet_quiver(n: u32) -> Result<Quiver, QuiverError> {
    bouquet_replace(&build_linear_nilpotent_quiver(n)?, "f", n)
}

/// Chain U(1)..U(n-1) with one leg U(n_i)-U(n_i - 1)-...-U(1) per part,
/// attached to U(n-1) by its U(n_i) end. Leg nodes are `l{i}_{k}`.
pub fn build_partial_implosion_quiver(n: u32, partition: &[u32]) -> Result<Quiver, QuiverError> {
    let sum: u32 = partition.iter().sum();
    if sum != n {
        return Err(QuiverError::PartitionSumMismatch { parts: partition.to_vec(), sum, n });
    }
    if partition.contains(&0) {
        return Err(QuiverError::InvalidParameter("partition parts must be positive".into()));
    }
    let chain = build_linear_nilpotent_quiver(n)?;
    let mut nodes: Vec<QuiverNode> = chain.nodes[..chain.nodes.len() - 1].to_vec();
    let mut edges: Vec<(usize, usize)> = (1..nodes.len()).map(|k| (k - 1, k)).collect();
    let anchor = nodes.len() - 1;
    for (i, &part) in partition.iter().enumerate() {
        let mut prev = anchor;
        for k in (1..=part).rev() {
            nodes.push(QuiverNode::gauge(format!("l{}_{k}", i + 1), GaugeGroup::unitary(k)));
            edges.push((prev, nodes.len() - 1));
            prev = nodes.len() - 1;
        }
    }
    Ok(Quiver::with_parts(nodes, edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DnVariant {
    /// `n` SO(2) gauge nodes on USp(2n-2).
    #[default]
    Bouquet,
    /// SO(2n) flavor node on USp(2n-2).
    Flavor,
}

/// Alternating chain SO(2)-USp(2)-SO(4)-...-USp(2n-2) terminated by either an
/// SO(2n) flavor node `f` or a bouquet of SO(2) nodes `b1..bn`.
pub fn build_dn_implosion_quiver(n: u32, variant: DnVariant) -> Result<Quiver, QuiverError> {
    if n < 2 {
        return Err(QuiverError::InvalidParameter(format!("D_n chain needs n >= 2, got {n}")));
    }
    let mut nodes = Vec::new();
    for k in 1..n {
        nodes.push(QuiverNode::gauge(format!("so{}", 2 * k), GaugeGroup::orthogonal(2 * k)));
        nodes.push(QuiverNode::gauge(format!("usp{}", 2 * k), GaugeGroup::symplectic(2 * k)));
    }
    let mut edges: Vec<(usize, usize)> = (1..nodes.len()).map(|k| (k - 1, k)).collect();
    nodes.push(QuiverNode::flavor("f", GaugeGroup::orthogonal(2 * n)));
    edges.push((nodes.len() - 2, nodes.len() - 1));
    let flavored = Quiver::with_parts(nodes, edges);
    match variant {
        DnVariant::Flavor => Ok(flavored),
        DnVariant::Bouquet => bouquet_replace(&flavored, "f", 2 * n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2(d: u32) -> Quiver {
        Quiver::new(
            vec![
                QuiverNode::gauge("g", GaugeGroup::unitary(1)),
                QuiverNode::flavor("f", GaugeGroup::unitary(d)),
            ],
            vec![("g".into(), "f".into())],
        )
        .unwrap()
    }

    #[test]
    fn group_ranks() {
        assert_eq!(GaugeGroup::unitary(3).rank(), 3);
        assert_eq!(GaugeGroup::orthogonal(4).rank(), 2);
        assert_eq!(GaugeGroup::orthogonal(5).rank(), 2);
        assert_eq!(GaugeGroup::symplectic(4).rank(), 2);
        assert!(GaugeGroup::symplectic(3).validate().is_err());
    }

    #[test]
    fn validation_errors_name_location() {
        let err = Quiver::new(
            vec![
                QuiverNode::flavor("a", GaugeGroup::unitary(1)),
                QuiverNode::flavor("b", GaugeGroup::unitary(1)),
            ],
            vec![("a".into(), "b".into())],
        )
        .unwrap_err();
        assert!(matches!(err, QuiverError::FlavorFlavorEdge { edge: 0, .. }));

        let err = Quiver::new(
            vec![QuiverNode::gauge("a", GaugeGroup::unitary(1))],
            vec![("a".into(), "zz".into())],
        )
        .unwrap_err();
        assert_eq!(err, QuiverError::UnknownEndpoint { edge: 0, id: "zz".into() });

        let err = Quiver::new(
            vec![
                QuiverNode::gauge("a", GaugeGroup::unitary(2)),
                QuiverNode::gauge("b", GaugeGroup::symplectic(2)),
            ],
            vec![("a".into(), "b".into())],
        )
        .unwrap_err();
        assert!(matches!(err, QuiverError::MixedFamilyEdge { edge: 0, .. }));

        let err = Quiver::new(
            vec![
                QuiverNode::gauge("a", GaugeGroup::orthogonal(2)),
                QuiverNode::gauge("b", GaugeGroup::orthogonal(4)),
            ],
            vec![("a".into(), "b".into())],
        )
        .unwrap_err();
        assert!(matches!(err, QuiverError::MixedFamilyEdge { .. }));

        let err = Quiver::new(
            vec![
                QuiverNode::gauge("a", GaugeGroup::unitary(1)),
                QuiverNode::gauge("a", GaugeGroup::unitary(1)),
            ],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, QuiverError::DuplicateNode { index: 1, id: "a".into() });
    }

    #[test]
    fn json_schema() {
        let q = fig2(3);
        let v: serde_json::Value = serde_json::to_value(&q).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "nodes": [
                    {"id": "g", "kind": "gauge", "group": {"family": "U", "n": 1}},
                    {"id": "f", "kind": "flavor", "group": {"family": "U", "n": 3}}
                ],
                "edges": [["g", "f"]]
            })
        );
        let back: Quiver = serde_json::from_value(v).unwrap();
        assert_eq!(back, q);
        assert!(Quiver::from_json_str(r#"{"nodes":[],"edges":[["x","y"]]}"#)
            .unwrap_err()
            .contains("edge #0"));
    }

    #[test]
    fn balance_examples() {
        let fig1 = build_linear_nilpotent_quiver(6).unwrap();
        assert_eq!(node_balance(&fig1, "c5").unwrap(), 0);
        let bouquet = build_bouquet_quiver(6).unwrap();
        assert_eq!(node_balance(&bouquet, "b1").unwrap(), 3);
        let lone =
            Quiver::new(vec![QuiverNode::gauge("x", GaugeGroup::unitary(3))], vec![]).unwrap();
        assert_eq!(node_balance(&lone, "x").unwrap(), -6);
        assert_eq!(
            node_balance(&fig1, "f").unwrap_err(),
            QuiverError::FlavorNodeHasNoBalance("f".into())
        );
        assert_eq!(
            node_balance(&fig1, "nope").unwrap_err(),
            QuiverError::UnknownNode("nope".into())
        );
    }

    #[test]
    fn orthosymplectic_parity_error() {
        let q = Quiver::new(
            vec![
                QuiverNode::gauge("s", GaugeGroup::orthogonal(3)),
                QuiverNode::flavor("f", GaugeGroup::symplectic(2)),
                QuiverNode::flavor("h", GaugeGroup::symplectic(2)),
                QuiverNode::flavor("k", GaugeGroup::symplectic(2)),
            ],
            vec![("s".into(), "f".into()), ("s".into(), "h".into()), ("s".into(), "k".into())],
        )
        .unwrap();
        // sum 6 + 2 = 8, fine; now USp node with odd shifted sum
        assert_eq!(node_balance(&q, "s").unwrap(), 1);
        let q = Quiver::new(
            vec![
                QuiverNode::gauge("u", GaugeGroup::symplectic(2)),
                QuiverNode::flavor("f", GaugeGroup::orthogonal(3)),
            ],
            vec![("u".into(), "f".into())],
        )
        .unwrap();
        assert!(matches!(node_balance(&q, "u"), Err(QuiverError::NonIntegralBalance { .. })));
    }

    #[test]
    fn balance_reports() {
        let r = balance_report(&build_linear_nilpotent_quiver(6).unwrap()).unwrap();
        assert_eq!(r.balanced.len(), 5);
        assert!(r.all_balanced && !r.positively_balanced);

        let r = balance_report(&fig2(2)).unwrap();
        assert_eq!(r.balances, vec![("g".to_string(), 0)]);
        assert!(r.all_balanced);

        let r = balance_report(&fig2(4)).unwrap();
        assert_eq!(r.balances, vec![("g".to_string(), 2)]);
        assert!(r.positively_balanced && !r.all_balanced);

        let r = balance_report(&build_bouquet_quiver(2).unwrap()).unwrap();
        assert!(r.minimally_unbalanced && !r.has_negative_below_minus_one);
    }

    #[test]
    fn dynkin_classification() {
        let comps =
            balanced_subquiver_classification(&build_linear_nilpotent_quiver(6).unwrap()).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].label, DynkinLabel::A(5));

        let comps = balanced_subquiver_classification(&build_bouquet_quiver(3).unwrap()).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(matches!(
            &comps[0].label,
            DynkinLabel::Unrecognized { shape } if shape.contains("star with 4 legs")
        ));

        assert!(balanced_subquiver_classification(&fig2(4)).unwrap().is_empty());
    }

    #[test]
    fn ade_templates() {
        assert_eq!(classify_graph(&tee_graph([1, 1, 2]), false), DynkinLabel::D(5));
        assert_eq!(classify_graph(&tee_graph([1, 2, 2]), false), DynkinLabel::E(6));
        assert_eq!(classify_graph(&tee_graph([2, 1, 3]), false), DynkinLabel::E(7));
        assert_eq!(classify_graph(&tee_graph([4, 2, 1]), false), DynkinLabel::E(8));
        assert_eq!(classify_graph(&tee_graph([1, 1, 1]), false), DynkinLabel::D(4));
        assert!(matches!(
            classify_graph(&tee_graph([2, 2, 2]), false),
            DynkinLabel::Unrecognized { .. }
        ));
        assert!(matches!(classify_graph(&path_graph(2), true), DynkinLabel::Unrecognized { .. }));
    }

    #[test]
    fn symmetry_predictions() {
        let p = predict_global_symmetry(&build_linear_nilpotent_quiver(6).unwrap()).unwrap();
        assert_eq!(p.semisimple.len(), 1);
        assert_eq!(p.semisimple[0].label.group_name(), "SU(6)");
        assert_eq!(p.abelian_rank, 0);
        assert_eq!(p.total_dimension, 35);

        let p = predict_global_symmetry(&build_bouquet_quiver(6).unwrap()).unwrap();
        assert_eq!(p.semisimple[0].label, DynkinLabel::A(5));
        assert_eq!(p.abelian_rank, 5);
        assert_eq!(p.total_dimension, 36 + 6 - 2);

        let p = predict_global_symmetry(&fig2(4)).unwrap();
        assert!(p.semisimple.is_empty());
        assert_eq!(p.abelian_rank, 1);
    }

    #[test]
    fn decoupling_detection() {
        for n in 2..6 {
            assert!(detect_decoupled_u1(&build_bouquet_quiver(n).unwrap()));
        }
        assert!(!detect_decoupled_u1(&fig2(3)));
        assert!(!detect_decoupled_u1(&build_dn_implosion_quiver(3, DnVariant::Bouquet).unwrap()));
        assert!(!detect_decoupled_u1(&Quiver::empty()));
    }

    #[test]
    fn ungauging() {
        let b = build_bouquet_quiver(3).unwrap();
        let u = ungauge(&b, "b1").unwrap();
        assert_eq!(u.nodes().len(), 5);
        assert_eq!(u.node("b1").unwrap().kind, NodeKind::Fixed);
        assert!(!detect_decoupled_u1(&u));
        assert_eq!(ungauge(&b, "c2").unwrap_err(), QuiverError::NotAbelianGaugeNode("c2".into()));
        assert!(ungauge(&b, "b1").unwrap().is_isomorphic_to(&ungauge(&b, "b2").unwrap()));
        assert!(!u.is_isomorphic_to(&b));
    }

    #[test]
    fn ranks_and_dimensions() {
        let b3 = ungauge(&build_bouquet_quiver(3).unwrap(), "b1").unwrap();
        assert_eq!(gauge_group_rank(&b3), 5);
        assert_eq!(expected_coulomb_dimension_real(&b3).unwrap(), 20);
        let d3 = build_dn_implosion_quiver(3, DnVariant::Bouquet).unwrap();
        assert_eq!(gauge_group_rank(&d3), 9);
        assert_eq!(expected_coulomb_dimension_real(&d3).unwrap(), 36);
        assert_eq!(gauge_group_rank(&Quiver::empty()), 0);
        assert_eq!(expected_coulomb_dimension_real(&Quiver::empty()).unwrap(), 0);
        assert_eq!(
            expected_coulomb_dimension_real(&build_bouquet_quiver(3).unwrap()).unwrap_err(),
            QuiverError::DecoupledU1Unresolved
        );
    }

    #[test]
    fn higgs_dimensions() {
        let conv = GaugeDimConvention::QuotientDecoupled;
        assert_eq!(
            higgs_quaternionic_dimension(&build_bouquet_quiver(3).unwrap(), conv).unwrap(),
            1
        );
        assert_eq!(
            higgs_quaternionic_dimension(&build_bouquet_quiver(5).unwrap(), conv).unwrap(),
            6
        );
        assert_eq!(higgs_quaternionic_dimension(&fig2(1), GaugeDimConvention::Unitary).unwrap(), 0);
        assert!(matches!(
            higgs_quaternionic_dimension(
                &build_dn_implosion_quiver(2, DnVariant::Flavor).unwrap(),
                conv
            ),
            Err(QuiverError::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn constructors() {
        let q = build_linear_nilpotent_quiver(2).unwrap();
        assert_eq!(q.nodes().len(), 2);
        assert_eq!(node_balance(&q, "c1").unwrap(), 0);

        let q = build_linear_nilpotent_quiver(3).unwrap();
        assert_eq!(
            q.nodes().iter().map(|n| n.group).collect::<Vec<_>>(),
            vec![GaugeGroup::unitary(1), GaugeGroup::unitary(2), GaugeGroup::unitary(3)]
        );

        let b6 = build_bouquet_quiver(6).unwrap();
        assert_eq!(b6.nodes().len(), 11);
        assert_eq!(b6.neighbors(b6.node_index("c5").unwrap()).count(), 7);

        let b2 = build_bouquet_quiver(2).unwrap();
        let a3 = Quiver::new(
            (0..3).map(|k| QuiverNode::gauge(format!("x{k}"), GaugeGroup::unitary(1))).collect(),
            vec![("x0".into(), "x1".into()), ("x1".into(), "x2".into())],
        )
        .unwrap();
        assert!(b2.is_isomorphic_to(&a3));

        let b3 = build_bouquet_quiver(3).unwrap();
        let center = b3.node_index("c2").unwrap();
        assert_eq!(b3.neighbors(center).count(), 4);

        let fig1 = build_linear_nilpotent_quiver(6).unwrap();
        assert_eq!(
            bouquet_replace(&fig1, "f", 5).unwrap_err(),
            QuiverError::DimensionMismatch { id: "f".into(), actual: 6, requested: 5 }
        );
        assert_eq!(
            bouquet_replace(&fig1, "c1", 1).unwrap_err(),
            QuiverError::NotAFlavorNode("c1".into())
        );
    }

    #[test]
    fn partial_implosions() {
        let p = build_partial_implosion_quiver(3, &[1, 1, 1]).unwrap();
        assert!(p.is_isomorphic_to(&build_bouquet_quiver(3).unwrap()));

        let p = build_partial_implosion_quiver(4, &[2, 2]).unwrap();
        assert_eq!(gauge_group_rank(&p), 12);
        assert_eq!(gauge_group_rank(&ungauge(&p, "l1_1").unwrap()), (16 - 2 + 8) / 2);
        assert_eq!(node_balance(&p, "l1_2").unwrap(), 4 - 2 - 2);

        let p = build_partial_implosion_quiver(2, &[2]).unwrap();
        assert_eq!(p.nodes().len(), 3);
        assert_eq!(p.node("l1_2").unwrap().group, GaugeGroup::unitary(2));

        assert!(matches!(
            build_partial_implosion_quiver(4, &[2, 1]),
            Err(QuiverError::PartitionSumMismatch { sum: 3, n: 4, .. })
        ));
    }

    #[test]
    fn dn_chains() {
        let q = build_dn_implosion_quiver(3, DnVariant::Bouquet).unwrap();
        let groups: Vec<String> = q.nodes().iter().map(|n| n.group.to_string()).collect();
        assert_eq!(groups, vec!["SO(2)", "USp(2)", "SO(4)", "USp(4)", "SO(2)", "SO(2)", "SO(2)"]);
        let q = build_dn_implosion_quiver(3, DnVariant::Flavor).unwrap();
        assert_eq!(q.node("f").unwrap().group, GaugeGroup::orthogonal(6));
        for id in ["so2", "usp2", "so4", "usp4"] {
            assert_eq!(node_balance(&q, id).unwrap(), 0, "{id}");
        }
    }
}
