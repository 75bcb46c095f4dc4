//! Matchings, utilities and exact blocking-pair tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{EdgeId, GameInstance, Graph, NodeId};
use crate::rational::Rational;

/// A matching stored as a symmetric partner table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    partner: Vec<Option<NodeId>>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Matching { partner: vec![None; n] }
    }

    /// Builds a matching from node pairs, checking that each pair is an edge
    /// and no node appears twice.
    pub fn from_pairs(graph: &Graph, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut m = Matching::empty(graph.node_count());
        for (u, v) in pairs {
            if u >= graph.node_count() || v >= graph.node_count() || graph.edge_between(u, v).is_none() {
                return Err(Error::InvalidMatching(format!("({u}, {v}) is not an edge")));
            }
            if m.partner[u].is_some() || m.partner[v].is_some() {
                return Err(Error::InvalidMatching(format!("pair ({u}, {v}) reuses a matched node")));
            }
            m.partner[u] = Some(v);
            m.partner[v] = Some(u);
        }
        Ok(m)
    }

    pub fn from_edges(graph: &Graph, edges: impl IntoIterator<Item = EdgeId>) -> Result<Self> {
        Self::from_pairs(graph, edges.into_iter().map(|e| graph.endpoints(e)))
    }

    pub fn node_count(&self) -> usize {
        self.partner.len()
    }

    pub fn partner(&self, v: NodeId) -> Option<NodeId> {
        self.partner[v]
    }

    pub fn is_matched(&self, v: NodeId) -> bool {
        self.partner[v].is_some()
    }

    /// Number of matched edges.
    pub fn len(&self) -> usize {
        self.partner.iter().flatten().count() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.partner.iter().all(Option::is_none)
    }

    /// Matched pairs `(lo, hi)` in increasing order.
    pub fn pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.partner.iter().enumerate().filter_map(|(u, p)| p.filter(|&v| u < v).map(|v| (u, v))).collect()
    }

    /// Matched edge ids in increasing order of their pairs.
    pub fn edges(&self, graph: &Graph) -> Vec<EdgeId> {
        self.pairs().into_iter().map(|(u, v)| graph.edge_between(u, v).expect("matched pair is an edge")).collect()
    }

    /// Edge currently holding `v`.
    pub fn matched_edge(&self, graph: &Graph, v: NodeId) -> Option<EdgeId> {
        self.partner[v].map(|p| graph.edge_between(v, p).expect("matched pair is an edge"))
    }

    pub(crate) fn unmatch(&mut self, v: NodeId) {
        if let Some(p) = self.partner[v].take() {
            self.partner[p] = None;
        }
    }

    pub(crate) fn set_pair(&mut self, u: NodeId, v: NodeId) {
        self.unmatch(u);
        self.unmatch(v);
        self.partner[u] = Some(v);
        self.partner[v] = Some(u);
    }

    /// Checks symmetry and that every pair is an edge of `graph`.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        if self.partner.len() != graph.node_count() {
            return Err(Error::InvalidMatching(format!(
                "matching covers {} nodes, graph has {}",
                self.partner.len(),
                graph.node_count()
            )));
        }
        for (u, p) in self.partner.iter().enumerate() {
            if let Some(v) = *p {
                if v >= self.partner.len() || self.partner[v] != Some(u) {
                    return Err(Error::InvalidMatching(format!("partner table is not symmetric at node {u}")));
                }
                if graph.edge_between(u, v).is_none() {
                    return Err(Error::InvalidMatching(format!("({u}, {v}) is not an edge")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(graph: &Graph, text: &str) -> Result<Self> {
        let doc: MatchingDoc = serde_json::from_str(text)?;
        Self::from_pairs(graph, doc.pairs.into_iter().map(|[u, v]| (u, v)))
    }

    pub fn to_doc(&self) -> MatchingDoc {
        MatchingDoc { pairs: self.pairs().into_iter().map(|(u, v)| [u, v]).collect() }
    }
}

/// JSON form of a matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingDoc {
    pub pairs: Vec<[NodeId; 2]>,
}

/// Reward `R_v`: the payoff of the matched edge, zero when unmatched.
pub fn node_reward(inst: &GameInstance, m: &Matching, v: NodeId) -> Rational {
    match m.matched_edge(inst.graph(), v) {
        Some(e) => inst.payoff(v, e).clone(),
        None => Rational::zero(),
    }
}

/// `U_v = R_v + sum over u != v of alpha_{d(v,u)} R_u`.
pub fn perceived_utility(inst: &GameInstance, m: &Matching, v: NodeId) -> Rational {
    let mut total = Rational::zero();
    for u in 0..inst.node_count() {
        if let Some(e) = m.matched_edge(inst.graph(), u) {
            let w = inst.weight(v, u);
            if !w.is_zero() {
                total += w * inst.payoff(u, e);
            }
        }
    }
    total
}

/// Per-node rewards and perceived utilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilityProfile {
    pub reward: Vec<Rational>,
    pub perceived: Vec<Rational>,
}

pub fn utility_profile(inst: &GameInstance, m: &Matching) -> UtilityProfile {
    let n = inst.node_count();
    UtilityProfile {
        reward: (0..n).map(|v| node_reward(inst, m, v)).collect(),
        perceived: (0..n).map(|v| perceived_utility(inst, m, v)).collect(),
    }
}

/// Social value `sum over matched edges of r_e`.
pub fn matching_value(inst: &GameInstance, m: &Matching) -> Rational {
    m.edges(inst.graph()).into_iter().map(|e| inst.reward(e)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// At least one of the two deviating nodes was unmatched.
    Swivel,
    /// Both deviating nodes leave a partner.
    Biswivel,
    /// Biswivel certified by the relaxed test.
    RelaxedBiswivel,
}

/// A pair `(u, v)` breaking away from its partners to match each other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deviation {
    pub kind: DeviationKind,
    pub pair: (NodeId, NodeId),
    pub removed: Vec<(NodeId, NodeId)>,
}

/// One strict inequality of a blocking test, `lhs > rhs` for `node`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inequality {
    pub node: NodeId,
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
}

impl Inequality {
    fn new(node: NodeId, lhs: Rational, rhs: Rational) -> Self {
        let holds = lhs > rhs;
        Inequality { node, lhs, rhs, holds }
    }
}

/// Outcome of a blocking test with the inequalities that decided it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair: (NodeId, NodeId),
    /// `None` when the two nodes are already matched to each other.
    pub kind: Option<DeviationKind>,
    pub blocking: bool,
    pub conditions: Vec<Inequality>,
}

impl PairVerdict {
    /// The deviation this pair would perform in `m`.
    pub fn deviation(&self, m: &Matching) -> Option<Deviation> {
        let kind = self.kind?;
        let (u, v) = self.pair;
        let removed = [u, v].iter().filter_map(|&x| m.partner(x).map(|p| (x.min(p), x.max(p)))).collect();
        Some(Deviation { kind, pair: self.pair, removed })
    }
}

fn q_payoff(inst: &GameInstance, x: NodeId, y: NodeId, e: EdgeId, a1: &Rational) -> Rational {
    inst.payoff(x, e) + a1 * inst.payoff(y, e)
}

fn evaluate_pair(inst: &GameInstance, m: &Matching, u: NodeId, v: NodeId, relaxed: bool) -> Result<PairVerdict> {
    let g = inst.graph();
    if u >= g.node_count() || v >= g.node_count() {
        return Err(Error::NotAnEdge(u, v));
    }
    let e = g.edge_between(u, v).ok_or(Error::NotAnEdge(u, v))?;
    let pair = (u.min(v), u.max(v));
    if m.partner(u) == Some(v) {
        return Ok(PairVerdict { pair, kind: None, blocking: false, conditions: Vec::new() });
    }
    let (u, v) = pair;
    let a1 = inst.friendship().alpha1();
    let q_u = q_payoff(inst, u, v, e, &a1);
    let q_v = q_payoff(inst, v, u, e, &a1);

    let (kind, conditions) = match (m.partner(u), m.partner(v)) {
        (Some(w), Some(z)) => {
            let e_uw = g.edge_between(u, w).unwrap();
            let e_vz = g.edge_between(v, z).unwrap();
            let (c_uz, c_vw) = if relaxed {
                let a2 = inst.friendship().alpha2();
                (a2.clone(), a2)
            } else {
                (inst.weight(u, z).clone(), inst.weight(v, w).clone())
            };
            let rhs_u = q_payoff(inst, u, w, e_uw, &a1) + &a1 * inst.payoff(v, e_vz) + c_uz * inst.payoff(z, e_vz);
            let rhs_v = q_payoff(inst, v, z, e_vz, &a1) + &a1 * inst.payoff(u, e_uw) + c_vw * inst.payoff(w, e_uw);
            let kind = if relaxed { DeviationKind::RelaxedBiswivel } else { DeviationKind::Biswivel };
            (kind, vec![Inequality::new(u, q_u, rhs_u), Inequality::new(v, q_v, rhs_v)])
        }
        (Some(w), None) => (DeviationKind::Swivel, swivel_conditions(inst, u, w, v, q_u, q_v, &a1)),
        (None, Some(z)) => {
            let mut c = swivel_conditions(inst, v, z, u, q_v, q_u, &a1);
            c.reverse();
            (DeviationKind::Swivel, c)
        }
        (None, None) => (
            DeviationKind::Swivel,
            vec![Inequality::new(u, q_u, Rational::zero()), Inequality::new(v, q_v, Rational::zero())],
        ),
    };
    let blocking = conditions.iter().all(|c| c.holds);
    Ok(PairVerdict { pair, kind: Some(kind), blocking, conditions })
}

/// Conditions for matched `x` (partner `w`) and unmatched `y` to pair up.
fn swivel_conditions(
    inst: &GameInstance,
    x: NodeId,
    w: NodeId,
    y: NodeId,
    q_x: Rational,
    q_y: Rational,
    a1: &Rational,
) -> Vec<Inequality> {
    let e_xw = inst.graph().edge_between(x, w).unwrap();
    let rhs_x = q_payoff(inst, x, w, e_xw, a1);
    let rhs_y = a1 * inst.payoff(x, e_xw) + inst.weight(y, w) * inst.payoff(w, e_xw);
    vec![Inequality::new(x, q_x, rhs_x), Inequality::new(y, q_y, rhs_y)]
}

/// Exact blocking test for the edge `(u, v)` against matching `m`.
pub fn is_improving_pair(inst: &GameInstance, m: &Matching, u: NodeId, v: NodeId) -> Result<PairVerdict> {
    evaluate_pair(inst, m, u, v, false)
}

/// Relaxed test: the distance-dependent cross terms of a biswivel use `alpha_2`.
pub fn is_relaxed_blocking_pair(inst: &GameInstance, m: &Matching, u: NodeId, v: NodeId) -> Result<PairVerdict> {
    evaluate_pair(inst, m, u, v, true)
}

/// Every blocking pair of `m`, in edge order.
pub fn blocking_pairs(inst: &GameInstance, m: &Matching) -> Vec<(NodeId, NodeId)> {
    inst.graph()
        .edges()
        .iter()
        .filter(|&&(u, v)| is_improving_pair(inst, m, u, v).expect("graph edge").blocking)
        .copied()
        .collect()
}

/// True iff no edge of the graph is a blocking pair.
pub fn is_stable(inst: &GameInstance, m: &Matching) -> bool {
    inst.graph().edges().iter().all(|&(u, v)| !is_improving_pair(inst, m, u, v).expect("graph edge").blocking)
}

/// Applies a deviation, failing if it no longer fits `m`.
pub fn apply_deviation(m: &Matching, dev: &Deviation) -> Result<Matching> {
    let (u, v) = dev.pair;
    if u >= m.node_count() || v >= m.node_count() || u == v {
        return Err(Error::StaleDeviation(format!("pair ({u}, {v}) is out of range")));
    }
    if m.partner(u) == Some(v) {
        return Err(Error::StaleDeviation(format!("({u}, {v}) are already matched")));
    }
    let mut current: Vec<(NodeId, NodeId)> =
        [u, v].iter().filter_map(|&x| m.partner(x).map(|p| (x.min(p), x.max(p)))).collect();
    let mut removed = dev.removed.clone();
    current.sort_unstable();
    removed.sort_unstable();
    if current != removed {
        return Err(Error::StaleDeviation(format!(
            "pair ({u}, {v}) would remove {current:?}, deviation lists {removed:?}"
        )));
    }
    let expected = match current.len() {
        2 => matches!(dev.kind, DeviationKind::Biswivel | DeviationKind::RelaxedBiswivel),
        _ => dev.kind == DeviationKind::Swivel,
    };
    if !expected {
        return Err(Error::StaleDeviation(format!(
            "kind {:?} does not fit the matched status of ({u}, {v})",
            dev.kind
        )));
    }
    let mut next = m.clone();
    next.set_pair(u, v);
    Ok(next)
}
