//! Preference structure induced by reward shares: preference cycles, the
//! greedy mutual-best algorithm, and stable roommates over q-values.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{EdgeId, GameInstance, NodeId};
use crate::matching::{is_stable, Matching};
use crate::oracle::{for_each_matching, Limits};
use crate::rational::Rational;

/// What a node ranks its neighbors by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefKey {
    /// The node's own share `r^x_{xy}`.
    Raw,
    /// `q^x_{xy} = r^x_{xy} + alpha_1 r^y_{xy}`.
    Q,
}

fn key(inst: &GameInstance, mode: PrefKey, x: NodeId, e: EdgeId) -> Rational {
    match mode {
        PrefKey::Raw => inst.reward_share(x, e).expect("incident"),
        PrefKey::Q => inst.q_value(x, e).expect("incident"),
    }
}

/// Per-node neighbor rankings, best first, ties to the smaller id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceProfile {
    pub mode: PrefKey,
    /// `keys[x]` pairs each neighbor of `x` (in adjacency order) with its key.
    pub keys: Vec<Vec<(NodeId, Rational)>>,
    pub lists: Vec<Vec<NodeId>>,
    rank: Vec<Vec<Option<usize>>>,
}

impl PreferenceProfile {
    pub fn build(inst: &GameInstance, mode: PrefKey) -> Self {
        let n = inst.node_count();
        let keys: Vec<Vec<(NodeId, Rational)>> = (0..n)
            .map(|x| inst.graph().neighbors(x).iter().map(|&(y, e)| (y, key(inst, mode, x, e))).collect())
            .collect();
        let mut lists = Vec::with_capacity(n);
        let mut rank = vec![vec![None; n]; n];
        for (x, ks) in keys.iter().enumerate() {
            let mut order: Vec<&(NodeId, Rational)> = ks.iter().collect();
            order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let list: Vec<NodeId> = order.into_iter().map(|&(y, _)| y).collect();
            for (i, &y) in list.iter().enumerate() {
                rank[x][y] = Some(i);
            }
            lists.push(list);
        }
        PreferenceProfile { mode, keys, lists, rank }
    }

    /// Position of `y` in `x`'s list (0 is best).
    pub fn rank(&self, x: NodeId, y: NodeId) -> Option<usize> {
        self.rank[x][y]
    }

    fn key_of(&self, x: NodeId, y: NodeId) -> &Rational {
        &self.keys[x].iter().find(|(z, _)| *z == y).expect("neighbor").1
    }

    /// True when `x` strictly ranks `y` above its partner in `m` (being single is worst).
    pub fn prefers(&self, m: &Matching, x: NodeId, y: NodeId) -> bool {
        match m.partner(x) {
            None => true,
            Some(p) => self.rank[x][y] < self.rank[x][p],
        }
    }

    /// Roommates stability: no unmatched edge whose endpoints both prefer each other.
    pub fn is_stable(&self, inst: &GameInstance, m: &Matching) -> bool {
        inst.graph()
            .edges()
            .iter()
            .all(|&(u, v)| m.partner(u) == Some(v) || !(self.prefers(m, u, v) && self.prefers(m, v, u)))
    }
}

/// Finds a cycle `(u_1, ..., u_k)`, `k >= 3`, along which every node weakly
/// prefers its successor to its predecessor and at least one preference is
/// strict. The cycle returned starts at the smallest possible node.
pub fn detect_preference_cycle(inst: &GameInstance, mode: PrefKey) -> Option<Vec<NodeId>> {
    let prefs = PreferenceProfile::build(inst, mode);
    if !arc_graph_has_strict_cycle(inst, &prefs) {
        return None;
    }
    let n = inst.node_count();
    for start in 0..n {
        let mut path = vec![start];
        let mut on_path = vec![false; n];
        on_path[start] = true;
        if extend_cycle(inst, &prefs, &mut path, &mut on_path, false) {
            return Some(path);
        }
    }
    None
}

/// Transition `a -> b -> c` is allowed when `b` weakly prefers `c` to `a`.
/// A preference cycle is a closed walk of transitions with a strict one, so a
/// strict transition inside a strongly connected component is necessary.
fn arc_graph_has_strict_cycle(inst: &GameInstance, prefs: &PreferenceProfile) -> bool {
    let g = inst.graph();
    let mut arcs: DiGraph<(), bool> = DiGraph::new();
    let m = g.edge_count();
    // Arc 2e runs lo -> hi, arc 2e + 1 runs hi -> lo.
    for _ in 0..2 * m {
        arcs.add_node(());
    }
    let arc = |from: NodeId, to: NodeId| {
        let e = g.edge_between(from, to).unwrap();
        NodeIndex::new(2 * e + usize::from(from > to))
    };
    for b in 0..g.node_count() {
        for &(a, _) in g.neighbors(b) {
            for &(c, _) in g.neighbors(b) {
                if c == a {
                    continue;
                }
                let (kc, ka) = (prefs.key_of(b, c), prefs.key_of(b, a));
                if kc >= ka {
                    arcs.add_edge(arc(a, b), arc(b, c), kc > ka);
                }
            }
        }
    }
    let mut comp = vec![usize::MAX; 2 * m];
    for (i, scc) in tarjan_scc(&arcs).iter().enumerate() {
        for ix in scc {
            comp[ix.index()] = i;
        }
    }
    arcs.edge_indices().any(|ei| {
        let (s, t) = arcs.edge_endpoints(ei).unwrap();
        arcs[ei] && comp[s.index()] == comp[t.index()]
    })
}

fn extend_cycle(
    inst: &GameInstance,
    prefs: &PreferenceProfile,
    path: &mut Vec<NodeId>,
    on_path: &mut [bool],
    strict: bool,
) -> bool {
    let start = path[0];
    let last = *path.last().unwrap();
    let prev = (path.len() >= 2).then(|| path[path.len() - 2]);
    for &(next, _) in inst.graph().neighbors(last) {
        // Weak preference at `last` for `next` over `prev`.
        let step_strict = match prev {
            Some(p) => {
                if next == p {
                    continue;
                }
                let (kn, kp) = (prefs.key_of(last, next), prefs.key_of(last, p));
                if kn < kp {
                    continue;
                }
                kn > kp
            }
            None => false,
        };
        if next == start {
            if path.len() < 3 {
                continue;
            }
            // Close the cycle: check the conditions at `start`.
            let (k_succ, k_pred) = (prefs.key_of(start, path[1]), prefs.key_of(start, last));
            if k_succ >= k_pred && (strict || step_strict || k_succ > k_pred) {
                return true;
            }
            continue;
        }
        if next < start || on_path[next] {
            continue;
        }
        path.push(next);
        on_path[next] = true;
        if extend_cycle(inst, prefs, path, on_path, strict || step_strict) {
            return true;
        }
        on_path[next] = false;
        path.pop();
    }
    false
}

/// Result of the greedy algorithm with its measured work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyOutcome {
    pub matching: Matching,
    /// Adjacency entries inspected to extract each matched pair.
    pub work_per_pair: Vec<usize>,
}

/// Repeatedly matches a mutually best pair, found by following best-successor
/// pointers among the remaining nodes until a node repeats; the repeated node
/// and its successor form the pair.
pub fn greedy_mutual_best(inst: &GameInstance, mode: PrefKey) -> Result<GreedyOutcome> {
    if let Some(cycle) = detect_preference_cycle(inst, mode) {
        return Err(Error::PreferenceCycle(cycle));
    }
    let prefs = PreferenceProfile::build(inst, mode);
    let n = inst.node_count();
    let g = inst.graph();
    let mut alive = vec![true; n];
    let mut matching = Matching::empty(n);
    let mut work_per_pair = Vec::new();
    while let Some(first) = (0..n).find(|&x| alive[x] && g.neighbors(x).iter().any(|&(y, _)| alive[y])) {
        let mut work = 0;
        let best_of = |x: NodeId, work: &mut usize| -> NodeId {
            let mut best: Option<(NodeId, &Rational)> = None;
            for (y, k) in &prefs.keys[x] {
                *work += 1;
                if !alive[*y] {
                    continue;
                }
                // Adjacency is sorted by id, so strict improvement keeps ties at the smaller id.
                if best.is_none_or(|(_, bk)| k > bk) {
                    best = Some((*y, k));
                }
            }
            best.expect("alive neighbor").0
        };
        let mut seen = vec![usize::MAX; n];
        let mut walk = vec![first];
        seen[first] = 0;
        let (a, b) = loop {
            let x = *walk.last().unwrap();
            let y = best_of(x, &mut work);
            if seen[y] != usize::MAX {
                break (y, walk[seen[y] + 1]);
            }
            seen[y] = walk.len();
            walk.push(y);
        };
        matching.set_pair(a, b);
        alive[a] = false;
        alive[b] = false;
        work_per_pair.push(work);
    }
    Ok(GreedyOutcome { matching, work_per_pair })
}

/// Stable roommates over q-value preferences. Cycle-free preferences use the
/// greedy algorithm, otherwise all matchings are searched. A returned matching
/// is always stable in the friendship game.
pub fn solve_srp_q(inst: &GameInstance) -> Result<Option<Matching>> {
    solve_srp_q_with(inst, Limits::default().enumeration_n)
}

pub fn solve_srp_q_with(inst: &GameInstance, limit: usize) -> Result<Option<Matching>> {
    let found = match greedy_mutual_best(inst, PrefKey::Q) {
        Ok(out) => Some(out.matching),
        Err(Error::PreferenceCycle(_)) => {
            if inst.node_count() > limit {
                return Err(Error::TooLarge { n: inst.node_count(), limit });
            }
            let prefs = PreferenceProfile::build(inst, PrefKey::Q);
            let mut first = None;
            for_each_matching(inst.graph(), |m| {
                if first.is_none() && prefs.is_stable(inst, m) {
                    first = Some(m.clone());
                }
            });
            first
        }
        Err(e) => return Err(e),
    };
    match found {
        Some(m) if !is_stable(inst, &m) => Err(Error::NotStable),
        other => Ok(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{FriendshipVector, Graph, SharingRule};
    use crate::rational::rat;

    fn cyclic_triangle() -> GameInstance {
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let shares = vec![(rat(2, 1), rat(1, 1)), (rat(1, 1), rat(2, 1)), (rat(2, 1), rat(1, 1))];
        GameInstance::from_rule(g, SharingRule::Oblivious { shares }, FriendshipVector::none()).unwrap()
    }

    #[test]
    fn triangle_cycle_is_found() {
        let inst = cyclic_triangle();
        assert_eq!(detect_preference_cycle(&inst, PrefKey::Raw), Some(vec![0, 1, 2]));
        assert!(matches!(greedy_mutual_best(&inst, PrefKey::Raw), Err(Error::PreferenceCycle(_))));
        assert_eq!(solve_srp_q(&inst).unwrap(), None);
    }

    #[test]
    fn equal_shares_have_no_cycle() {
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let inst = GameInstance::new(g, vec![rat(1, 1); 3], SharingRule::Equal, FriendshipVector::none()).unwrap();
        assert_eq!(detect_preference_cycle(&inst, PrefKey::Raw), None);
        let out = greedy_mutual_best(&inst, PrefKey::Raw).unwrap();
        assert_eq!(out.matching.pairs(), vec![(0, 1)]);
    }

    #[test]
    fn single_edge_is_matched() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let inst = GameInstance::new(g, vec![rat(3, 1)], SharingRule::Equal, FriendshipVector::none()).unwrap();
        let out = greedy_mutual_best(&inst, PrefKey::Raw).unwrap();
        assert_eq!(out.matching.pairs(), vec![(0, 1)]);
        assert_eq!(out.work_per_pair, vec![2]);
    }

    #[test]
    fn matthew_gadget_greedy_is_stable() {
        // w = 0, u = 1, v = 2, z = 3 with lambda_w = lambda_z = R.
        let big_r = rat(5, 1);
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let outer = &big_r + &Rational::one();
        let inst = GameInstance::new(
            g,
            vec![outer.clone(), rat(2, 1), outer],
            SharingRule::Matthew { lambda: vec![big_r.clone(), rat(1, 1), rat(1, 1), big_r] },
            FriendshipVector::none(),
        )
        .unwrap();
        assert_eq!(detect_preference_cycle(&inst, PrefKey::Raw), None);
        let out = greedy_mutual_best(&inst, PrefKey::Raw).unwrap();
        assert!(is_stable(&inst, &out.matching));
        // Node 0's only neighbor is 1, and 1 breaks its tie toward 0.
        assert_eq!(out.matching.pairs(), vec![(0, 1), (2, 3)]);
        let m = inst.edge_count();
        assert!(out.work_per_pair.iter().all(|&w| w <= 2 * m));
    }

    #[test]
    fn preference_lists_break_ties_by_id() {
        let g = Graph::new(3, [(0, 1), (0, 2)]).unwrap();
        let inst =
            GameInstance::new(g, vec![rat(1, 1), rat(1, 1)], SharingRule::Equal, FriendshipVector::none()).unwrap();
        let prefs = PreferenceProfile::build(&inst, PrefKey::Raw);
        assert_eq!(prefs.lists[0], vec![1, 2]);
        assert_eq!(prefs.rank(0, 2), Some(1));
    }
}
