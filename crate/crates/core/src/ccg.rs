//! Convex contribution games: budgets spread over incident edges, per-edge
//! reward functions, pairwise equilibria and their link to stable matchings.

use serde::{Deserialize, Serialize};

use crate::dynamics::run_brbp;
use crate::error::{Error, Result};
use crate::instance::{build_distances, q_from_r, EdgeId, FriendshipVector, GameInstance, Graph, NodeId, SharingRule};
use crate::matching::{is_stable, Matching};
use crate::oracle::{enumerate_stable_matchings_with, max_weight_matching_with, ratio, Limits};
use crate::rational::Rational;

pub const DEFAULT_GRID_K: usize = 8;

/// Shape of an edge reward function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `c x y`
    Product,
    /// `c min(x, y)`; not convex in each argument.
    Min,
    /// `c (x y)^k`
    #[serde(rename = "powprod")]
    PowerProduct,
}

/// How an edge's reward reaches its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum Split {
    /// Both endpoints receive the whole reward.
    Equal,
    /// By the game's brand values, `lambda_u / (lambda_u + lambda_v)`.
    Matthew,
    /// By contribution, `x / (x + y)`.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardFunction {
    pub family: Family,
    pub c: Rational,
    pub k: u32,
    pub split: Split,
}

impl RewardFunction {
    pub fn new(family: Family, c: Rational, k: u32, split: Split) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::InvalidGame("reward coefficient must be positive".into()));
        }
        if family == Family::PowerProduct && k == 0 {
            return Err(Error::InvalidGame("power-product exponent must be at least 1".into()));
        }
        Ok(RewardFunction { family, c, k, split })
    }

    pub fn product(c: Rational, split: Split) -> Self {
        Self::new(Family::Product, c, 1, split).expect("valid")
    }

    pub fn min(c: Rational, split: Split) -> Self {
        Self::new(Family::Min, c, 1, split).expect("valid")
    }

    /// `f(x, y)`
    pub fn eval(&self, x: &Rational, y: &Rational) -> Rational {
        match self.family {
            Family::Product => &self.c * x * y,
            Family::Min => &self.c * x.clone().min(y.clone()),
            Family::PowerProduct => &self.c * (x * y).pow(self.k),
        }
    }

    /// Whether `f` is convex in each argument.
    pub fn is_convex(&self) -> bool {
        self.family != Family::Min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    AtMost,
    Exact,
}

/// Allocation `(s_lo, s_hi)` on every edge, in canonical edge order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyProfile {
    pub alloc: Vec<(Rational, Rational)>,
}

impl StrategyProfile {
    pub fn zeros(m: usize) -> Self {
        StrategyProfile { alloc: vec![(Rational::zero(), Rational::zero()); m] }
    }

    pub fn get(&self, g: &Graph, node: NodeId, e: EdgeId) -> &Rational {
        let (lo, _) = g.endpoints(e);
        if node == lo {
            &self.alloc[e].0
        } else {
            &self.alloc[e].1
        }
    }

    fn set(&mut self, g: &Graph, node: NodeId, e: EdgeId, value: Rational) {
        let (lo, _) = g.endpoints(e);
        if node == lo {
            self.alloc[e].0 = value;
        } else {
            self.alloc[e].1 = value;
        }
    }

    pub fn spent(&self, g: &Graph, node: NodeId) -> Rational {
        g.neighbors(node).iter().map(|&(_, e)| self.get(g, node, e)).sum()
    }

    pub fn to_doc(&self, g: &Graph) -> ProfileDoc {
        ProfileDoc {
            allocations: g
                .edges()
                .iter()
                .zip(&self.alloc)
                .map(|(&(u, v), (su, sv))| AllocationDoc { edge: [u, v], s_u: su.clone(), s_v: sv.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationDoc {
    pub edge: [NodeId; 2],
    pub s_u: Rational,
    pub s_v: Rational,
}

/// JSON form of a profile; edges not listed receive nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub allocations: Vec<AllocationDoc>,
}

#[derive(Debug, Clone)]
pub struct ContributionGame {
    graph: Graph,
    budgets: Vec<Rational>,
    functions: Vec<RewardFunction>,
    friendship: FriendshipVector,
    mode: BudgetMode,
    brand: Option<Vec<Rational>>,
    weights: Vec<Vec<Rational>>,
}

impl PartialEq for ContributionGame {
    fn eq(&self, o: &Self) -> bool {
        self.graph == o.graph
            && self.budgets == o.budgets
            && self.functions == o.functions
            && self.friendship == o.friendship
            && self.mode == o.mode
            && self.brand == o.brand
    }
}

impl ContributionGame {
    /// `functions` follows the canonical edge order of `graph`.
    pub fn new(
        graph: Graph,
        budgets: Vec<Rational>,
        functions: Vec<RewardFunction>,
        friendship: FriendshipVector,
        mode: BudgetMode,
        brand: Option<Vec<Rational>>,
    ) -> Result<Self> {
        let n = graph.node_count();
        if budgets.len() != n {
            return Err(Error::InvalidGame(format!("{} budgets for {n} nodes", budgets.len())));
        }
        if functions.len() != graph.edge_count() {
            return Err(Error::InvalidGame(format!("{} functions for {} edges", functions.len(), graph.edge_count())));
        }
        if let Some(v) = budgets.iter().position(Rational::is_negative) {
            return Err(Error::InvalidGame(format!("budget of node {v} is negative")));
        }
        if mode == BudgetMode::Exact {
            if let Some(v) = (0..n).find(|&v| graph.degree(v) == 0 && budgets[v].is_positive()) {
                return Err(Error::InvalidGame(format!("node {v} must spend its budget but has no edge")));
            }
        }
        if functions.iter().any(|f| f.split == Split::Matthew) {
            match &brand {
                Some(l) if l.len() == n && l.iter().all(Rational::is_positive) => {}
                _ => return Err(Error::InvalidGame("matthew split needs a positive brand value per node".into())),
            }
        }
        let weights =
            build_distances(&graph).iter().map(|row| row.iter().map(|&d| friendship.weight(d)).collect()).collect();
        Ok(ContributionGame { graph, budgets, functions, friendship, mode, brand, weights })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn budgets(&self) -> &[Rational] {
        &self.budgets
    }

    pub fn functions(&self) -> &[RewardFunction] {
        &self.functions
    }

    pub fn friendship(&self) -> &FriendshipVector {
        &self.friendship
    }

    pub fn mode(&self) -> BudgetMode {
        self.mode
    }

    pub fn brand(&self) -> Option<&[Rational]> {
        self.brand.as_deref()
    }

    pub fn with_mode(&self, mode: BudgetMode) -> Result<Self> {
        Self::new(
            self.graph.clone(),
            self.budgets.clone(),
            self.functions.clone(),
            self.friendship.clone(),
            mode,
            self.brand.clone(),
        )
    }

    /// Endpoint rewards `(f^lo, f^hi)` of edge `e` at contributions `(x_lo, x_hi)`.
    pub fn endpoint_rewards(&self, e: EdgeId, x: &Rational, y: &Rational) -> (Rational, Rational) {
        let f = &self.functions[e];
        let total = f.eval(x, y);
        match f.split {
            Split::Equal => (total.clone(), total),
            Split::Matthew => {
                let (lo, hi) = self.graph.endpoints(e);
                let l = self.brand.as_ref().expect("validated");
                let sum = &l[lo] + &l[hi];
                (&total * &l[lo] / &sum, &total * &l[hi] / &sum)
            }
            Split::Proportional => {
                let sum = x + y;
                if sum.is_zero() {
                    (Rational::zero(), Rational::zero())
                } else {
                    (&total * x / &sum, &total * y / &sum)
                }
            }
        }
    }

    /// Checks nonnegativity and the budget constraint of the game's mode.
    pub fn validate_profile(&self, p: &StrategyProfile) -> Result<()> {
        if p.alloc.len() != self.graph.edge_count() {
            return Err(Error::InvalidProfile(format!(
                "{} allocations for {} edges",
                p.alloc.len(),
                self.graph.edge_count()
            )));
        }
        if p.alloc.iter().any(|(a, b)| a.is_negative() || b.is_negative()) {
            return Err(Error::InvalidProfile("negative contribution".into()));
        }
        for v in 0..self.graph.node_count() {
            let spent = p.spent(&self.graph, v);
            let ok = match self.mode {
                BudgetMode::AtMost => spent <= self.budgets[v],
                BudgetMode::Exact => spent == self.budgets[v],
            };
            if !ok {
                return Err(Error::InvalidProfile(format!(
                    "node {v} spends {spent} against budget {} ({:?} mode)",
                    self.budgets[v], self.mode
                )));
            }
        }
        Ok(())
    }

    fn edge_payout(&self, e: EdgeId, (a, b): &(Rational, Rational)) -> (Rational, Rational) {
        if a.is_zero() || b.is_zero() {
            (Rational::zero(), Rational::zero())
        } else {
            self.endpoint_rewards(e, a, b)
        }
    }

    /// Per-node rewards `R_v` under a profile.
    pub fn rewards(&self, p: &StrategyProfile) -> Vec<Rational> {
        let mut r = vec![Rational::zero(); self.graph.node_count()];
        for (e, &(lo, hi)) in self.graph.edges().iter().enumerate() {
            let (ra, rb) = self.edge_payout(e, &p.alloc[e]);
            r[lo] += ra;
            r[hi] += rb;
        }
        r
    }

    fn perceived_from(&self, rewards: &[Rational], v: NodeId) -> Rational {
        self.weights[v].iter().zip(rewards).filter(|(w, r)| !w.is_zero() && !r.is_zero()).map(|(w, r)| w * r).sum()
    }

    pub fn perceived_utility(&self, p: &StrategyProfile, v: NodeId) -> Rational {
        self.perceived_from(&self.rewards(p), v)
    }

    /// Social value `sum over edges of f_e`.
    pub fn profile_value(&self, p: &StrategyProfile) -> Rational {
        self.functions.iter().zip(&p.alloc).map(|(f, (a, b))| f.eval(a, b)).sum()
    }

    pub fn profile_from_doc(&self, doc: &ProfileDoc) -> Result<StrategyProfile> {
        let mut p = StrategyProfile::zeros(self.graph.edge_count());
        let mut seen = vec![false; self.graph.edge_count()];
        for a in &doc.allocations {
            let [u, v] = a.edge;
            let e = self.graph.edge_between(u, v).ok_or(Error::NotAnEdge(u, v))?;
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::InvalidProfile(format!("edge ({u}, {v}) listed twice")));
            }
            p.set(&self.graph, u, e, a.s_u.clone());
            p.set(&self.graph, v, e, a.s_v.clone());
        }
        self.validate_profile(&p)?;
        Ok(p)
    }
}

/// Matching game whose rewards are the full-budget rewards `f_e(B_u, B_v)`.
pub fn corresponding_matching_game(ccg: &ContributionGame) -> Result<GameInstance> {
    reward_game(ccg, ccg.graph.clone(), &(0..ccg.graph.edge_count()).collect::<Vec<_>>())
}

/// Corresponding game on `graph`, a subgraph whose edges map to `orig` edge ids.
fn reward_game(ccg: &ContributionGame, graph: Graph, orig: &[EdgeId]) -> Result<GameInstance> {
    if let Some(v) = ccg.budgets.iter().position(|b| !b.is_positive()) {
        return Err(Error::InvalidGame(format!("corresponding game needs positive budgets (node {v})")));
    }
    let b = &ccg.budgets;
    let full = |e: EdgeId| {
        let (lo, hi) = ccg.graph.endpoints(e);
        ccg.endpoint_rewards(e, &b[lo], &b[hi])
    };
    let rewards: Vec<Rational> = orig
        .iter()
        .map(|&e| {
            let (lo, hi) = ccg.graph.endpoints(e);
            ccg.functions[e].eval(&b[lo], &b[hi])
        })
        .collect();
    let splits: Vec<Split> = orig.iter().map(|&e| ccg.functions[e].split).collect();
    let all = |s: Split| splits.iter().all(|&x| x == s);
    let sharing = if all(Split::Equal) {
        SharingRule::Equal
    } else if all(Split::Matthew) {
        SharingRule::Matthew { lambda: ccg.brand.clone().expect("validated") }
    } else if all(Split::Proportional) {
        SharingRule::Matthew { lambda: b.clone() }
    } else if splits.contains(&Split::Equal) {
        return Err(Error::Unsupported("a single split family when equal split is involved".into()));
    } else {
        SharingRule::Oblivious { shares: orig.iter().map(|&e| full(e)).collect() }
    };
    GameInstance::new(graph, rewards, sharing, ccg.friendship.clone())
}

/// Matched nodes put their whole budget on the matched edge, everyone else
/// contributes nothing. Requires the matching to be stable in the
/// corresponding game.
pub fn matching_to_equilibrium(ccg: &ContributionGame, m: &Matching) -> Result<StrategyProfile> {
    if ccg.mode != BudgetMode::AtMost {
        return Err(Error::Unsupported("at-most budget mode".into()));
    }
    let game = corresponding_matching_game(ccg)?;
    m.validate(&ccg.graph)?;
    if !is_stable(&game, m) {
        return Err(Error::NotStable);
    }
    Ok(saturate(ccg, m, BudgetMode::AtMost))
}

fn saturate(ccg: &ContributionGame, m: &Matching, unmatched: BudgetMode) -> StrategyProfile {
    let g = &ccg.graph;
    let mut p = StrategyProfile::zeros(g.edge_count());
    for v in 0..g.node_count() {
        match m.matched_edge(g, v) {
            Some(e) => p.set(g, v, e, ccg.budgets[v].clone()),
            None if unmatched == BudgetMode::Exact && g.degree(v) > 0 => {
                let share = &ccg.budgets[v] / Rational::from_integer(g.degree(v) as i64);
                for &(_, e) in g.neighbors(v) {
                    p.set(g, v, e, share.clone());
                }
            }
            None => {}
        }
    }
    p
}

/// Maximum-weight matching over full-budget rewards, realized on saturated
/// edges. Unmatched nodes idle in at-most mode and spread evenly in exact mode.
pub fn tight_social_optimum(ccg: &ContributionGame) -> Result<StrategyProfile> {
    let g = &ccg.graph;
    let b = &ccg.budgets;
    let positive: Vec<EdgeId> = (0..g.edge_count())
        .filter(|&e| {
            let (lo, hi) = g.endpoints(e);
            ccg.functions[e].eval(&b[lo], &b[hi]).is_positive()
        })
        .collect();
    let sub = Graph::new(g.node_count(), positive.iter().map(|&e| g.endpoints(e)))?;
    let rewards = positive
        .iter()
        .map(|&e| {
            let (lo, hi) = g.endpoints(e);
            ccg.functions[e].eval(&b[lo], &b[hi])
        })
        .collect();
    let inst = GameInstance::new(sub, rewards, SharingRule::Equal, FriendshipVector::none())?;
    let (m, _) = max_weight_matching_with(&inst, Limits::default().optimum_n)?;
    let m = Matching::from_pairs(g, m.pairs())?;
    Ok(saturate(ccg, &m, ccg.mode))
}

fn require_tight_budget_setting(ccg: &ContributionGame) -> Result<()> {
    if ccg.mode != BudgetMode::Exact {
        return Err(Error::Unsupported("exact budget mode".into()));
    }
    if ccg.functions.iter().any(|f| f.split != Split::Equal) {
        return Err(Error::Unsupported("equal split on every edge".into()));
    }
    if !ccg.friendship.is_local() {
        return Err(Error::Unsupported("friendship limited to direct neighbors".into()));
    }
    Ok(())
}

/// Edges `(u, v)` where `u` and `v` each have another, degree-one neighbor
/// (`x` and `y`) and both would rather defect to those pendants:
/// `(1 + a) r_uv < (1 + a) r_ux + a r_vy` and symmetrically for `v`.
pub fn detect_forbidden_edges(ccg: &ContributionGame) -> Result<Vec<EdgeId>> {
    require_tight_budget_setting(ccg)?;
    let g = &ccg.graph;
    let b = &ccg.budgets;
    let a = ccg.friendship.alpha1();
    let one = Rational::one();
    let r = |e: EdgeId| {
        let (lo, hi) = g.endpoints(e);
        ccg.functions[e].eval(&b[lo], &b[hi])
    };
    let best_pendant = |u: NodeId, other: NodeId| {
        g.neighbors(u).iter().filter(|&&(x, _)| x != other && g.degree(x) == 1).map(|&(_, e)| r(e)).max()
    };
    let mut out = Vec::new();
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let (Some(rux), Some(rvy)) = (best_pendant(u, v), best_pendant(v, u)) else {
            continue;
        };
        let stay = (&one + &a) * r(e);
        let u_leaves = stay < (&one + &a) * &rux + &a * &rvy;
        let v_leaves = stay < (&one + &a) * &rvy + &a * &rux;
        if u_leaves && v_leaves {
            out.push(e);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TightBudgetOutcome {
    pub forbidden: Vec<EdgeId>,
    /// Stable matching of the reduced game, as pairs of the original graph.
    pub matching: Matching,
    pub profile: StrategyProfile,
}

/// Removes forbidden edges, runs best-relaxed-blocking-pair dynamics on the
/// reduced corresponding game, saturates matched edges and spreads every
/// unmatched budget evenly over the node's original edges.
pub fn tight_budget_equilibrium(ccg: &ContributionGame) -> Result<TightBudgetOutcome> {
    let forbidden = detect_forbidden_edges(ccg)?;
    let g = &ccg.graph;
    let kept: Vec<EdgeId> = (0..g.edge_count()).filter(|e| !forbidden.contains(e)).collect();
    let reduced = reward_game(ccg, g.without_edges(&forbidden), &kept)?;
    let (m, trace) = run_brbp(&reduced)?;
    if !trace.converged() {
        return Err(Error::Unsupported("converging dynamics on the reduced game".into()));
    }
    let matching = Matching::from_pairs(g, m.pairs())?;
    let profile = saturate(ccg, &matching, BudgetMode::Exact);
    Ok(TightBudgetOutcome { forbidden, matching, profile })
}

/// An improving deviation with the movers' utilities before and after.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeWitness {
    pub kind: String,
    pub movers: Vec<NodeId>,
    pub before: Vec<Rational>,
    pub after: Vec<Rational>,
    pub profile: ProfileDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeVerdict {
    pub equilibrium: bool,
    /// Always "grid-certified": continuous deviations are sampled on a grid.
    pub certification: String,
    pub grid_k: usize,
    pub witness: Option<PeWitness>,
}

/// A node's candidate replacement allocations over its incident edges.
struct Moves {
    edges: Vec<EdgeId>,
    options: Vec<Vec<Rational>>,
}

fn current_alloc(ccg: &ContributionGame, p: &StrategyProfile, v: NodeId) -> Vec<Rational> {
    ccg.graph.neighbors(v).iter().map(|&(_, e)| p.get(&ccg.graph, v, e).clone()).collect()
}

/// Full budget on one edge, plus grid fractions of each positive source
/// (an edge, or unspent budget in at-most mode) moved to another edge.
/// With `onto` set, only moves that add to that edge.
fn node_moves(ccg: &ContributionGame, p: &StrategyProfile, v: NodeId, k: usize, onto: Option<EdgeId>) -> Moves {
    let edges: Vec<EdgeId> = ccg.graph.neighbors(v).iter().map(|&(_, e)| e).collect();
    let cur = current_alloc(ccg, p, v);
    let budget = &ccg.budgets[v];
    let free = budget - &cur.iter().sum::<Rational>();
    let mut options = Vec::new();
    for j in 0..edges.len() {
        if onto.is_some_and(|e| e != edges[j]) {
            continue;
        }
        let mut full = vec![Rational::zero(); edges.len()];
        full[j] = budget.clone();
        if full != cur {
            options.push(full);
        }
        // Sources: each other edge, then free budget (index len).
        for s in 0..=edges.len() {
            if s == j {
                continue;
            }
            let avail = if s == edges.len() {
                if ccg.mode == BudgetMode::Exact {
                    continue;
                }
                free.clone()
            } else {
                cur[s].clone()
            };
            if !avail.is_positive() {
                continue;
            }
            for t in 1..=k {
                let amount = &avail * Rational::new(t as i64, k as i64);
                let mut next = cur.clone();
                if s < edges.len() {
                    next[s] -= &amount;
                }
                next[j] += amount;
                if next != cur {
                    options.push(next);
                }
            }
        }
    }
    options.dedup();
    Moves { edges, options }
}

fn apply_alloc(ccg: &ContributionGame, p: &mut StrategyProfile, v: NodeId, edges: &[EdgeId], alloc: &[Rational]) {
    for (&e, a) in edges.iter().zip(alloc) {
        p.set(&ccg.graph, v, e, a.clone());
    }
}

/// Searches for an improving unilateral or pairwise deviation. Candidates are
/// visited in a fixed order: unilateral moves by node, moves onto a common
/// edge by edge, then pairs of nodes each moving fully to a distinct edge.
pub fn is_pairwise_equilibrium(ccg: &ContributionGame, p: &StrategyProfile, grid_k: usize) -> Result<PeVerdict> {
    ccg.validate_profile(p)?;
    let k = grid_k.max(1);
    let g = &ccg.graph;
    let n = g.node_count();
    let base = ccg.rewards(p);
    let before: Vec<Rational> = (0..n).map(|v| ccg.perceived_from(&base, v)).collect();
    let verdict = |witness: Option<PeWitness>| PeVerdict {
        equilibrium: witness.is_none(),
        certification: "grid-certified".into(),
        grid_k: k,
        witness,
    };

    // Only edges at the movers change, so rewards are patched from `base`.
    let improves = |q: &StrategyProfile, movers: &[NodeId]| -> Option<Vec<Rational>> {
        let mut r = base.clone();
        let mut touched: Vec<EdgeId> = movers.iter().flat_map(|&v| g.neighbors(v).iter().map(|&(_, e)| e)).collect();
        touched.sort_unstable();
        touched.dedup();
        for e in touched {
            let (lo, hi) = g.endpoints(e);
            let (old, new) = (&p.alloc[e], &q.alloc[e]);
            if old == new {
                continue;
            }
            let (a, b) = ccg.edge_payout(e, old);
            r[lo] -= a;
            r[hi] -= b;
            let (a, b) = ccg.edge_payout(e, new);
            r[lo] += a;
            r[hi] += b;
        }
        let after: Vec<Rational> = movers.iter().map(|&v| ccg.perceived_from(&r, v)).collect();
        movers.iter().zip(&after).all(|(&v, a)| a > &before[v]).then_some(after)
    };
    let witness = |kind: &str, movers: Vec<NodeId>, after: Vec<Rational>, q: &StrategyProfile| PeWitness {
        kind: kind.into(),
        before: movers.iter().map(|&v| before[v].clone()).collect(),
        movers,
        after,
        profile: q.to_doc(g),
    };

    for v in 0..n {
        let moves = node_moves(ccg, p, v, k, None);
        for opt in &moves.options {
            let mut q = p.clone();
            apply_alloc(ccg, &mut q, v, &moves.edges, opt);
            if let Some(after) = improves(&q, &[v]) {
                return Ok(verdict(Some(witness("unilateral", vec![v], after, &q))));
            }
        }
    }

    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let mu = node_moves(ccg, p, u, k, Some(e));
        let mv = node_moves(ccg, p, v, k, Some(e));
        for ou in &mu.options {
            for ov in &mv.options {
                let mut q = p.clone();
                apply_alloc(ccg, &mut q, u, &mu.edges, ou);
                apply_alloc(ccg, &mut q, v, &mv.edges, ov);
                if let Some(after) = improves(&q, &[u, v]) {
                    return Ok(verdict(Some(witness("bilateral", vec![u, v], after, &q))));
                }
            }
        }
    }

    for u in 0..n {
        for v in u + 1..n {
            for &(_, eu) in g.neighbors(u) {
                for &(_, ev) in g.neighbors(v) {
                    if eu == ev {
                        continue;
                    }
                    let mut q = p.clone();
                    for &(_, e) in g.neighbors(u) {
                        q.set(g, u, e, Rational::zero());
                    }
                    for &(_, e) in g.neighbors(v) {
                        q.set(g, v, e, Rational::zero());
                    }
                    q.set(g, u, eu, ccg.budgets[u].clone());
                    q.set(g, v, ev, ccg.budgets[v].clone());
                    if let Some(after) = improves(&q, &[u, v]) {
                        return Ok(verdict(Some(witness("two_edge", vec![u, v], after, &q))));
                    }
                }
            }
        }
    }
    Ok(verdict(None))
}

/// Every node spreads its whole budget evenly over its edges.
pub fn uniform_profile(ccg: &ContributionGame) -> StrategyProfile {
    saturate(ccg, &Matching::empty(ccg.graph.node_count()), BudgetMode::Exact)
}

/// Follows improving deviations from `start` until none is found or `cap` steps pass.
pub fn local_search(
    ccg: &ContributionGame,
    start: StrategyProfile,
    grid_k: usize,
    cap: usize,
) -> Result<Option<StrategyProfile>> {
    let mut p = start;
    for _ in 0..=cap {
        let v = is_pairwise_equilibrium(ccg, &p, grid_k)?;
        match v.witness {
            None => return Ok(Some(p)),
            Some(w) => p = ccg.profile_from_doc(&w.profile)?,
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumEntry {
    pub source: String,
    pub profile: ProfileDoc,
    pub value: Rational,
    pub ratio: Rational,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcgAuditReport {
    pub mode: BudgetMode,
    pub grid_k: usize,
    pub optimum: Rational,
    pub optimum_profile: ProfileDoc,
    pub q: Option<Rational>,
    pub bound: Option<Rational>,
    pub equilibria: Vec<EquilibriumEntry>,
}

impl CcgAuditReport {
    pub fn all_within_bound(&self) -> bool {
        self.equilibria.iter().all(|e| e.within_bound)
    }

    pub fn worst_ratio(&self) -> Option<&Rational> {
        self.equilibria.iter().map(|e| &e.ratio).max()
    }
}

/// Compares grid-certified equilibria (from stable matchings, the tight-budget
/// construction and local search) with the tight social optimum.
pub fn ccg_audit(ccg: &ContributionGame, grid_k: usize, search_cap: usize) -> Result<CcgAuditReport> {
    let g = &ccg.graph;
    let opt = tight_social_optimum(ccg)?;
    let optimum = ccg.profile_value(&opt);
    let game = corresponding_matching_game(ccg).ok();
    let q = game.as_ref().and_then(|gm| gm.compute_r().ok()).map(|r| q_from_r(&r, &ccg.friendship.alpha1()));
    let bound = q.as_ref().map(|q| q + &Rational::one());

    let mut candidates: Vec<(String, StrategyProfile)> = Vec::new();
    if let (Some(gm), BudgetMode::AtMost) = (&game, ccg.mode) {
        for m in enumerate_stable_matchings_with(gm, Limits::default().enumeration_n)? {
            candidates.push((format!("stable matching {:?}", m.pairs()), saturate(ccg, &m, BudgetMode::AtMost)));
        }
    }
    if ccg.mode == BudgetMode::Exact && require_tight_budget_setting(ccg).is_ok() && game.is_some() {
        candidates.push(("tight budget".into(), tight_budget_equilibrium(ccg)?.profile));
    }
    if let Some(p) = local_search(ccg, uniform_profile(ccg), grid_k, search_cap)? {
        candidates.push(("local search".into(), p));
    }

    let mut equilibria = Vec::new();
    for (source, p) in candidates {
        if !is_pairwise_equilibrium(ccg, &p, grid_k)?.equilibrium {
            continue;
        }
        let value = ccg.profile_value(&p);
        let r = ratio(&optimum, &value)?;
        let within_bound = bound.as_ref().is_none_or(|b| &r <= b);
        equilibria.push(EquilibriumEntry { source, profile: p.to_doc(g), value, ratio: r, within_bound });
    }
    Ok(CcgAuditReport { mode: ccg.mode, grid_k, optimum, optimum_profile: opt.to_doc(g), q, bound, equilibria })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub edge: [NodeId; 2],
    pub family: Family,
    pub c: Rational,
    #[serde(default = "default_k")]
    pub k: u32,
    pub split: Split,
}

fn default_k() -> u32 {
    1
}

/// JSON form of a contribution game; the graph is given by the function list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcgDoc {
    pub nodes: usize,
    #[serde(default)]
    pub alpha: Vec<Rational>,
    pub budgets: Vec<Rational>,
    pub mode: BudgetMode,
    pub functions: Vec<FunctionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<Vec<Rational>>,
}

impl ContributionGame {
    pub fn from_doc(doc: CcgDoc) -> Result<Self> {
        let graph = Graph::new(doc.nodes, doc.functions.iter().map(|f| (f.edge[0], f.edge[1])))?;
        let mut functions: Vec<Option<RewardFunction>> = vec![None; graph.edge_count()];
        for f in &doc.functions {
            let e = graph.edge_between(f.edge[0], f.edge[1]).expect("edge from list");
            functions[e] = Some(RewardFunction::new(f.family, f.c.clone(), f.k, f.split)?);
        }
        let functions = functions.into_iter().map(|f| f.expect("every edge listed")).collect();
        Self::new(graph, doc.budgets, functions, FriendshipVector::new(doc.alpha)?, doc.mode, doc.brand)
    }

    pub fn to_doc(&self) -> CcgDoc {
        CcgDoc {
            nodes: self.graph.node_count(),
            alpha: self.friendship.as_slice().to_vec(),
            budgets: self.budgets.clone(),
            mode: self.mode,
            functions: self
                .graph
                .edges()
                .iter()
                .zip(&self.functions)
                .map(|(&(u, v), f)| FunctionDoc {
                    edge: [u, v],
                    family: f.family,
                    c: f.c.clone(),
                    k: f.k,
                    split: f.split,
                })
                .collect(),
            brand: self.brand.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }
}
