//! Matching-game instances: graph, rewards, sharing rule and friendship vector.
//!
//! Edges are stored canonically as `(lo, hi)` with `lo < hi`, sorted
//! lexicographically, and addressed by their position (`EdgeId`). Per-edge
//! data in a [`SharingRule`] follows that canonical order, with pairs given as
//! `(value for lo, value for hi)`.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Simple undirected graph on dense node ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    adj: Vec<Vec<(NodeId, EdgeId)>>,
    index: HashMap<(NodeId, NodeId), EdgeId>,
}

impl Graph {
    /// Builds a graph; edge order is canonicalized.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("parallel edge ({}, {})", w[0].0, w[0].1)));
        }
        let mut adj = vec![Vec::new(); n];
        let mut index = HashMap::with_capacity(list.len());
        for (id, &(u, v)) in list.iter().enumerate() {
            adj[u].push((v, id));
            adj[v].push((u, id));
            index.insert((u, v), id);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Graph { n, edges: list, adj, index })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e]
    }

    /// Neighbors of `v` with the connecting edge, sorted by neighbor id.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.index.get(&(u.min(v), u.max(v))).copied()
    }

    /// The endpoint of `e` opposite to `v`.
    pub fn other(&self, e: EdgeId, v: NodeId) -> Option<NodeId> {
        let (a, b) = self.edges[e];
        if v == a {
            Some(b)
        } else if v == b {
            Some(a)
        } else {
            None
        }
    }

    /// Copy of the graph without the listed edges. Edge ids are renumbered.
    pub fn without_edges(&self, removed: &[EdgeId]) -> Graph {
        let keep = self.edges.iter().enumerate().filter(|(id, _)| !removed.contains(id)).map(|(_, &e)| e);
        Graph::new(self.n, keep).expect("subgraph of a valid graph")
    }
}

/// All-pairs hop distances by BFS from every node; `None` marks disconnected pairs.
pub fn build_distances(graph: &Graph) -> Vec<Vec<Option<u32>>> {
    let n = graph.node_count();
    let mut dist = vec![vec![None; n]; n];
    let mut queue = VecDeque::new();
    for (s, row) in dist.iter_mut().enumerate() {
        row[s] = Some(0);
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            let dx = row[x].unwrap();
            for &(y, _) in graph.neighbors(x) {
                if row[y].is_none() {
                    row[y] = Some(dx + 1);
                    queue.push_back(y);
                }
            }
        }
    }
    dist
}

/// Distance-indexed friendship coefficients `alpha_1 >= alpha_2 >= ... >= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FriendshipVector {
    alpha: Vec<Rational>,
}

impl FriendshipVector {
    pub fn new(alpha: Vec<Rational>) -> Result<Self> {
        let one = Rational::one();
        let mut prev = &one;
        for (i, a) in alpha.iter().enumerate() {
            if a.is_negative() || a > prev {
                return Err(Error::InvalidInstance(format!(
                    "friendship vector must satisfy 1 >= a1 >= a2 >= ... >= 0 (violated at index {})",
                    i + 1
                )));
            }
            prev = a;
        }
        Ok(FriendshipVector { alpha })
    }

    pub fn none() -> Self {
        FriendshipVector::default()
    }

    /// Coefficient for hop distance `d >= 1`; entries past the list are zero.
    pub fn at(&self, d: u32) -> Rational {
        assert!(d >= 1, "alpha is indexed from distance 1");
        self.alpha.get(d as usize - 1).cloned().unwrap_or_else(Rational::zero)
    }

    /// Weight node `v` puts on another node's reward at the given distance.
    /// Distance zero is the node itself (weight one); disconnected pairs weigh zero.
    pub fn weight(&self, distance: Option<u32>) -> Rational {
        match distance {
            None => Rational::zero(),
            Some(0) => Rational::one(),
            Some(d) => self.at(d),
        }
    }

    pub fn alpha1(&self) -> Rational {
        self.at(1)
    }

    pub fn alpha2(&self) -> Rational {
        self.at(2)
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(Rational::is_zero)
    }

    /// True when only direct neighbors carry weight.
    pub fn is_local(&self) -> bool {
        self.alpha.iter().skip(1).all(Rational::is_zero)
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.alpha
    }
}

/// How an edge reward is split between its endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum SharingRule {
    /// Both endpoints receive `r_e` in the matching game; as a share this is `r_e / 2`.
    Equal,
    /// Arbitrary fixed shares per edge.
    Oblivious { shares: Vec<(Rational, Rational)> },
    /// `r^u = lambda_u / (lambda_u + lambda_v) * r`.
    Matthew { lambda: Vec<Rational> },
    /// `r^u = lambda_v / (lambda_u + lambda_v) * r`.
    Parasite { lambda: Vec<Rational> },
    /// `r^u = h_uv + beta_v`, hence `r_uv = 2 h_uv + beta_u + beta_v`.
    Trust { beta: Vec<Rational>, h: Vec<Rational> },
}

impl SharingRule {
    pub fn name(&self) -> &'static str {
        match self {
            SharingRule::Equal => "equal",
            SharingRule::Oblivious { .. } => "oblivious",
            SharingRule::Matthew { .. } => "matthew",
            SharingRule::Parasite { .. } => "parasite",
            SharingRule::Trust { .. } => "trust",
        }
    }

    /// Rewards implied by the rule alone, where it determines them.
    pub fn implied_rewards(&self, graph: &Graph) -> Option<Vec<Rational>> {
        match self {
            SharingRule::Oblivious { shares } => Some(shares.iter().map(|(a, b)| a + b).collect()),
            SharingRule::Trust { beta, h } => {
                Some(graph.edges().iter().zip(h).map(|(&(u, v), h)| h + h + &beta[u] + &beta[v]).collect())
            }
            _ => None,
        }
    }

    /// Shares `(for lo, for hi)` of edge `(lo, hi)` with total reward `r`.
    fn split(&self, e: EdgeId, (lo, hi): (NodeId, NodeId), r: &Rational) -> (Rational, Rational) {
        match self {
            SharingRule::Equal => {
                let half = r / Rational::from_integer(2);
                (half.clone(), half)
            }
            SharingRule::Oblivious { shares } => shares[e].clone(),
            SharingRule::Matthew { lambda } => {
                let total = &lambda[lo] + &lambda[hi];
                (r * &lambda[lo] / &total, r * &lambda[hi] / &total)
            }
            SharingRule::Parasite { lambda } => {
                let total = &lambda[lo] + &lambda[hi];
                (r * &lambda[hi] / &total, r * &lambda[lo] / &total)
            }
            SharingRule::Trust { beta, h } => (&h[e] + &beta[hi], &h[e] + &beta[lo]),
        }
    }

    fn validate(&self, graph: &Graph, rewards: &[Rational]) -> Result<()> {
        let n = graph.node_count();
        let m = graph.edge_count();
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        match self {
            SharingRule::Equal => {}
            SharingRule::Oblivious { shares } => {
                if shares.len() != m {
                    return bad(format!("oblivious rule needs {m} share pairs, got {}", shares.len()));
                }
                for (e, (a, b)) in shares.iter().enumerate() {
                    let (u, v) = graph.endpoints(e);
                    if a.is_negative() || b.is_negative() {
                        return bad(format!("negative share on edge ({u}, {v})"));
                    }
                    if a + b != rewards[e] {
                        return bad(format!("shares on edge ({u}, {v}) do not sum to its reward"));
                    }
                }
            }
            SharingRule::Matthew { lambda } | SharingRule::Parasite { lambda } => {
                if lambda.len() != n {
                    return bad(format!("{} rule needs {n} lambda values, got {}", self.name(), lambda.len()));
                }
                if let Some(i) = lambda.iter().position(|l| !l.is_positive()) {
                    return bad(format!("lambda of node {i} must be positive"));
                }
            }
            SharingRule::Trust { beta, h } => {
                if beta.len() != n || h.len() != m {
                    return bad(format!("trust rule needs {n} beta and {m} h values"));
                }
                if beta.iter().chain(h).any(Rational::is_negative) {
                    return bad("trust parameters must be nonnegative".into());
                }
                let implied = self.implied_rewards(graph).unwrap();
                if let Some(e) = (0..m).find(|&e| implied[e] != rewards[e]) {
                    let (u, v) = graph.endpoints(e);
                    return bad(format!("reward on edge ({u}, {v}) is not 2h + beta_u + beta_v"));
                }
            }
        }
        Ok(())
    }
}

/// Immutable matching-game instance with cached shares and distance weights.
#[derive(Debug, Clone)]
pub struct GameInstance {
    graph: Graph,
    rewards: Vec<Rational>,
    sharing: SharingRule,
    friendship: FriendshipVector,
    distances: Vec<Vec<Option<u32>>>,
    shares: Vec<(Rational, Rational)>,
    weights: Vec<Vec<Rational>>,
}

impl PartialEq for GameInstance {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.rewards == other.rewards
            && self.sharing == other.sharing
            && self.friendship == other.friendship
    }
}

impl GameInstance {
    pub fn new(
        graph: Graph,
        rewards: Vec<Rational>,
        sharing: SharingRule,
        friendship: FriendshipVector,
    ) -> Result<Self> {
        if rewards.len() != graph.edge_count() {
            return Err(Error::InvalidInstance(format!("{} rewards for {} edges", rewards.len(), graph.edge_count())));
        }
        if let Some(e) = rewards.iter().position(|r| !r.is_positive()) {
            let (u, v) = graph.endpoints(e);
            return Err(Error::InvalidInstance(format!("reward on edge ({u}, {v}) must be positive")));
        }
        sharing.validate(&graph, &rewards)?;
        let distances = build_distances(&graph);
        let shares = (0..graph.edge_count()).map(|e| sharing.split(e, graph.endpoints(e), &rewards[e])).collect();
        let weights = distances.iter().map(|row| row.iter().map(|&d| friendship.weight(d)).collect()).collect();
        Ok(GameInstance { graph, rewards, sharing, friendship, distances, shares, weights })
    }

    /// Instance whose rewards follow from the rule (oblivious or trust).
    pub fn from_rule(graph: Graph, sharing: SharingRule, friendship: FriendshipVector) -> Result<Self> {
        let rewards = sharing.implied_rewards(&graph).ok_or_else(|| {
            Error::InvalidInstance(format!("{} rule does not determine edge rewards", sharing.name()))
        })?;
        Self::new(graph, rewards, sharing, friendship)
    }

    /// Same instance under a different friendship vector.
    pub fn with_friendship(&self, friendship: FriendshipVector) -> Self {
        let weights = self.distances.iter().map(|row| row.iter().map(|&d| friendship.weight(d)).collect()).collect();
        GameInstance { friendship, weights, ..self.clone() }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn rewards(&self) -> &[Rational] {
        &self.rewards
    }

    pub fn reward(&self, e: EdgeId) -> &Rational {
        &self.rewards[e]
    }

    pub fn sharing(&self) -> &SharingRule {
        &self.sharing
    }

    pub fn friendship(&self) -> &FriendshipVector {
        &self.friendship
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> Option<u32> {
        self.distances[u][v]
    }

    pub fn distances(&self) -> &[Vec<Option<u32>>] {
        &self.distances
    }

    /// `alpha_{uv}`: the weight `u` gives to `v`'s reward (one when `u == v`).
    pub fn weight(&self, u: NodeId, v: NodeId) -> &Rational {
        &self.weights[u][v]
    }

    pub fn is_equal_sharing(&self) -> bool {
        matches!(self.sharing, SharingRule::Equal)
    }

    fn side(&self, e: EdgeId, node: NodeId) -> Option<bool> {
        let (lo, hi) = self.graph.endpoints(e);
        if node == lo {
            Some(false)
        } else if node == hi {
            Some(true)
        } else {
            None
        }
    }

    /// Share `r^node_e`. Under equal sharing this is `r_e / 2`.
    pub fn reward_share(&self, node: NodeId, e: EdgeId) -> Result<Rational> {
        let (u, v) = self.graph.endpoints(e);
        match self.side(e, node) {
            Some(false) => Ok(self.shares[e].0.clone()),
            Some(true) => Ok(self.shares[e].1.clone()),
            None => Err(Error::NotIncident { node, u, v }),
        }
    }

    /// Reward `node` collects when `e` is matched. Equal sharing pays `r_e` to
    /// both endpoints, every other rule pays the share.
    pub fn payoff(&self, node: NodeId, e: EdgeId) -> &Rational {
        if self.is_equal_sharing() {
            return &self.rewards[e];
        }
        match self.side(e, node) {
            Some(false) => &self.shares[e].0,
            Some(true) => &self.shares[e].1,
            None => panic!("node {node} not incident to edge {e}"),
        }
    }

    /// `q^x_{xy} = r^x_{xy} + alpha_1 r^y_{xy}`.
    pub fn q_value(&self, x: NodeId, e: EdgeId) -> Result<Rational> {
        let own = self.reward_share(x, e)?;
        let y = self.graph.other(e, x).unwrap();
        let theirs = self.reward_share(y, e)?;
        Ok(own + self.friendship.alpha1() * theirs)
    }

    /// Largest ratio of endpoint shares over all edges; 1 on edgeless graphs.
    pub fn compute_r(&self) -> Result<Rational> {
        let mut best = Rational::one();
        for (e, (a, b)) in self.shares.iter().enumerate() {
            if a.is_zero() || b.is_zero() {
                let (u, v) = self.graph.endpoints(e);
                return Err(Error::UndefinedRatio(u, v));
            }
            let ratio = if a >= b { a / b } else { b / a };
            best = best.max(ratio);
        }
        Ok(best)
    }

    /// `Q = (R + alpha_1) / (1 + alpha_1 R)`.
    pub fn compute_q(&self) -> Result<Rational> {
        let r = self.compute_r()?;
        Ok(q_from_r(&r, &self.friendship.alpha1()))
    }

    /// `Q' = (1 + alpha_1)(1 + R) / (1 + alpha_1 (R + 1))`.
    pub fn compute_q_prime(&self) -> Result<Rational> {
        let r = self.compute_r()?;
        Ok(q_prime_from_r(&r, &self.friendship.alpha1()))
    }
}

pub fn q_from_r(r: &Rational, alpha1: &Rational) -> Rational {
    (r + alpha1) / (Rational::one() + alpha1 * r)
}

pub fn q_prime_from_r(r: &Rational, alpha1: &Rational) -> Rational {
    let one = Rational::one();
    (&one + alpha1) * (&one + r) / (&one + alpha1 * (r + &one))
}

/// One edge of an instance document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub u: NodeId,
    pub v: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Rational>,
}

/// JSON form of a [`GameInstance`]. Per-edge sharing data follows the
/// document's own edge order and orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub nodes: usize,
    pub edges: Vec<EdgeDoc>,
    pub sharing: SharingRule,
    #[serde(default)]
    pub alpha: Vec<Rational>,
}

impl InstanceDoc {
    pub fn into_instance(self) -> Result<GameInstance> {
        let m = self.edges.len();
        let per_edge = |len: usize, what: &str| -> Result<()> {
            if len != m {
                return Err(Error::InvalidInstance(format!("{what} has {len} entries for {m} edges")));
            }
            Ok(())
        };
        // Canonical order, remembering which records were flipped.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| {
            let e = &self.edges[i];
            (e.u.min(e.v), e.u.max(e.v))
        });
        let flipped = |i: usize| self.edges[i].u > self.edges[i].v;
        let sharing = match self.sharing {
            SharingRule::Oblivious { shares } => {
                per_edge(shares.len(), "share list")?;
                let shares = order
                    .iter()
                    .map(|&i| {
                        let (a, b) = shares[i].clone();
                        if flipped(i) {
                            (b, a)
                        } else {
                            (a, b)
                        }
                    })
                    .collect();
                SharingRule::Oblivious { shares }
            }
            SharingRule::Trust { beta, h } => {
                per_edge(h.len(), "trust h list")?;
                SharingRule::Trust { beta, h: order.iter().map(|&i| h[i].clone()).collect() }
            }
            other => other,
        };
        let graph = Graph::new(self.nodes, order.iter().map(|&i| (self.edges[i].u, self.edges[i].v)))?;
        let implied = sharing.implied_rewards(&graph);
        let mut rewards = Vec::with_capacity(m);
        for (pos, &i) in order.iter().enumerate() {
            let r = match (&self.edges[i].r, &implied) {
                (Some(r), _) => r.clone(),
                (None, Some(implied)) => implied[pos].clone(),
                (None, None) => {
                    let e = &self.edges[i];
                    return Err(Error::InvalidInstance(format!("edge ({}, {}) has no reward", e.u, e.v)));
                }
            };
            rewards.push(r);
        }
        GameInstance::new(graph, rewards, sharing, FriendshipVector::new(self.alpha)?)
    }

    pub fn from_instance(inst: &GameInstance) -> Self {
        InstanceDoc {
            nodes: inst.node_count(),
            edges: inst
                .graph()
                .edges()
                .iter()
                .zip(inst.rewards())
                .map(|(&(u, v), r)| EdgeDoc { u, v, r: Some(r.clone()) })
                .collect(),
            sharing: inst.sharing().clone(),
            alpha: inst.friendship().as_slice().to_vec(),
        }
    }
}

impl GameInstance {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceDoc::from_instance(self)).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn path4() -> Graph {
        // w - u - v - z as 0 - 1 - 2 - 3
        Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn distances_on_small_graphs() {
        let single = Graph::new(2, [(0, 1)]).unwrap();
        let d = build_distances(&single);
        assert_eq!(d[0][1], Some(1));
        assert_eq!(d[0][0], Some(0));

        let d = build_distances(&path4());
        assert_eq!(d[0][3], Some(3));
        assert_eq!(d[3][0], Some(3));

        let apart = Graph::new(2, []).unwrap();
        let d = build_distances(&apart);
        assert_eq!(d[0][1], None);
        assert!(FriendshipVector::new(vec![rat(1, 2)]).unwrap().weight(d[0][1]).is_zero());
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(2, [(0, 0)]).is_err());
        assert!(Graph::new(2, [(0, 2)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn friendship_vector_must_be_monotone() {
        assert!(FriendshipVector::new(vec![rat(1, 2), rat(1, 4)]).is_ok());
        assert!(FriendshipVector::new(vec![rat(1, 4), rat(1, 2)]).is_err());
        assert!(FriendshipVector::new(vec![rat(3, 2)]).is_err());
        assert!(FriendshipVector::new(vec![rat(-1, 2)]).is_err());
        let f = FriendshipVector::new(vec![rat(1, 2)]).unwrap();
        assert_eq!(f.at(1), rat(1, 2));
        assert!(f.at(2).is_zero());
    }

    #[test]
    fn matthew_shares() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let sym = GameInstance::new(
            g.clone(),
            vec![rat(2, 1)],
            SharingRule::Matthew { lambda: vec![rat(1, 1), rat(1, 1)] },
            FriendshipVector::none(),
        )
        .unwrap();
        assert_eq!(sym.reward_share(0, 0).unwrap(), rat(1, 1));
        assert_eq!(sym.reward_share(1, 0).unwrap(), rat(1, 1));

        let big_r = rat(7, 1);
        let skew = GameInstance::new(
            g,
            vec![&big_r + &Rational::one()],
            SharingRule::Matthew { lambda: vec![rat(1, 1), big_r.clone()] },
            FriendshipVector::none(),
        )
        .unwrap();
        assert_eq!(skew.reward_share(0, 0).unwrap(), rat(1, 1));
        assert_eq!(skew.compute_r().unwrap(), big_r);
        assert!(matches!(skew.reward_share(2, 0), Err(Error::NotIncident { .. })));
    }

    #[test]
    fn trust_share_formula() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let inst = GameInstance::from_rule(
            g,
            SharingRule::Trust { beta: vec![rat(1, 1), rat(3, 1)], h: vec![rat(2, 1)] },
            FriendshipVector::none(),
        )
        .unwrap();
        assert_eq!(inst.reward_share(0, 0).unwrap(), rat(5, 1));
        assert_eq!(inst.reward(0), &rat(8, 1));
    }

    #[test]
    fn ratios_r_and_q() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let equal =
            GameInstance::new(g.clone(), vec![rat(2, 1)], SharingRule::Equal, FriendshipVector::none()).unwrap();
        assert_eq!(equal.compute_r().unwrap(), Rational::one());
        assert_eq!(equal.compute_q().unwrap(), Rational::one());
        let equal_f = equal.with_friendship(FriendshipVector::new(vec![rat(1, 2)]).unwrap());
        assert_eq!(equal_f.compute_q().unwrap(), Rational::one());
        assert_eq!(equal_f.q_value(0, 0).unwrap(), rat(3, 2));
        assert_eq!(equal_f.q_value(1, 0).unwrap(), rat(3, 2));

        let obl = GameInstance::from_rule(
            g.clone(),
            SharingRule::Oblivious { shares: vec![(rat(3, 1), rat(1, 1))] },
            FriendshipVector::none(),
        )
        .unwrap();
        assert_eq!(obl.compute_r().unwrap(), rat(3, 1));
        assert_eq!(obl.compute_q().unwrap(), rat(3, 1));
        assert_eq!(obl.q_value(0, 0).unwrap(), rat(3, 1));

        let zero = GameInstance::from_rule(
            g,
            SharingRule::Oblivious { shares: vec![(rat(3, 1), Rational::zero())] },
            FriendshipVector::none(),
        )
        .unwrap();
        assert!(matches!(zero.compute_r(), Err(Error::UndefinedRatio(0, 1))));
    }

    #[test]
    fn q_tends_to_two_for_half_friendship() {
        let half = rat(1, 2);
        let q = q_from_r(&Rational::from_integer(1_000_000), &half);
        assert!(q < rat(2, 1));
        assert!(rat(2, 1) - q < rat(1, 100_000));
    }

    #[test]
    fn oblivious_shares_must_sum_to_reward() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let err = GameInstance::new(
            g,
            vec![rat(5, 1)],
            SharingRule::Oblivious { shares: vec![(rat(3, 1), rat(1, 1))] },
            FriendshipVector::none(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn json_reorients_flipped_edges() {
        let text = r#"{"nodes":3,"edges":[{"u":2,"v":1,"r":"4"},{"u":0,"v":1,"r":"1/2"}],
            "sharing":{"rule":"oblivious","shares":[["3","1"],["0.25","1/4"]]},"alpha":["1/2"]}"#;
        let inst = GameInstance::from_json(text).unwrap();
        assert_eq!(inst.graph().edges(), &[(0, 1), (1, 2)]);
        let e = inst.graph().edge_between(1, 2).unwrap();
        assert_eq!(inst.reward_share(2, e).unwrap(), rat(3, 1));
        assert_eq!(inst.reward_share(1, e).unwrap(), rat(1, 1));
        let again = GameInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn json_rejects_missing_reward() {
        let text = r#"{"nodes":2,"edges":[{"u":0,"v":1}],"sharing":{"rule":"equal"}}"#;
        assert!(GameInstance::from_json(text).is_err());
    }
}
