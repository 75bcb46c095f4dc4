//! Gadget instances with known ratios, and seeded random instances.
//!
//! Path gadgets number their nodes `w = 0, u = 1, v = 2, z = 3`, giving edges
//! `(w, u)`, `(u, v)`, `(v, z)` in that order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ccg::{BudgetMode, ContributionGame, Family, RewardFunction, Split};
use crate::error::{Error, Result};
use crate::instance::{FriendshipVector, GameInstance, Graph, SharingRule};
use crate::oracle::enumerate_stable_matchings;
use crate::rational::{rat, Rational};

fn path_graph() -> Graph {
    Graph::new(4, [(0, 1), (1, 2), (2, 3)]).expect("path")
}

fn alpha1_only(alpha1: &Rational) -> Result<FriendshipVector> {
    FriendshipVector::new(vec![alpha1.clone()])
}

fn check_unit_interval(name: &str, x: &Rational) -> Result<()> {
    if x.is_negative() || x > &Rational::one() {
        return Err(Error::InvalidInstance(format!("{name} must lie in [0, 1]")));
    }
    Ok(())
}

fn check_positive(name: &str, x: &Rational) -> Result<()> {
    if !x.is_positive() {
        return Err(Error::InvalidInstance(format!("{name} must be positive")));
    }
    Ok(())
}

fn check_ratio(r: &Rational) -> Result<()> {
    if r < &Rational::one() {
        return Err(Error::InvalidInstance("R must be at least 1".into()));
    }
    Ok(())
}

/// Three-edge path, equal sharing, all rewards one.
pub fn gen_path3_equal() -> GameInstance {
    GameInstance::new(path_graph(), vec![Rational::one(); 3], SharingRule::Equal, FriendshipVector::none())
        .expect("valid gadget")
}

/// Path with outer rewards 1 and middle reward `(1 + 2 a1 + eps) / (1 + a1)`;
/// only the middle edge is stable, with ratio `(2 + 2 a1) / (1 + 2 a1 + eps)`.
pub fn gen_pos_tight(alpha1: &Rational, eps: &Rational) -> Result<GameInstance> {
    check_unit_interval("alpha_1", alpha1)?;
    check_positive("epsilon", eps)?;
    let one = Rational::one();
    let mid = (&one + &Rational::from_integer(2) * alpha1 + eps) / (&one + alpha1);
    GameInstance::new(path_graph(), vec![one.clone(), mid, one], SharingRule::Equal, alpha1_only(alpha1)?)
}

/// Matthew path: brand `R` at the pendants, 1 inside, outer rewards `R + 1`,
/// middle reward 2, or `2 + 2 eps` for the stability variant.
pub fn gen_matthew_poa_tight(big_r: &Rational, pos_eps: Option<&Rational>) -> Result<GameInstance> {
    check_ratio(big_r)?;
    let one = Rational::one();
    let two = Rational::from_integer(2);
    let mid = match pos_eps {
        Some(eps) => {
            check_positive("epsilon", eps)?;
            &two + &two * eps
        }
        None => two,
    };
    let outer = big_r + &one;
    GameInstance::new(
        path_graph(),
        vec![outer.clone(), mid, outer],
        SharingRule::Matthew { lambda: vec![big_r.clone(), one.clone(), one, big_r.clone()] },
        FriendshipVector::none(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RsVariant {
    Poa,
    Pos { eps: Rational },
}

/// Oblivious-share path under friendship `a1`.
///
/// Outer edges give the inner node `1 / (1 + a1 R)` and the pendant
/// `R / (1 + a1 R)`, so the inner node's q-value there is 1. The anarchy
/// variant gives each middle endpoint `1 / (1 + a1)`, making both matchings
/// stable with ratio `1 + Q`. The stability variant raises the middle shares to
/// `((1 + a1 (R + 1)) / (1 + a1 R) + eps) / (1 + a1)`, leaving the middle edge as
/// the only stable matching with ratio
/// `(1 + a1)(1 + R) / (1 + a1 (R + 1) + eps (1 + a1 R))`, which tends to `Q'`.
pub fn gen_friendship_rs_tight(big_r: &Rational, alpha1: &Rational, variant: &RsVariant) -> Result<GameInstance> {
    check_ratio(big_r)?;
    check_unit_interval("alpha_1", alpha1)?;
    let one = Rational::one();
    let denom = &one + alpha1 * big_r;
    let inner = &one / &denom;
    let pendant = big_r / &denom;
    let mid = match variant {
        RsVariant::Poa => &one / (&one + alpha1),
        RsVariant::Pos { eps } => {
            check_positive("epsilon", eps)?;
            ((&one + alpha1 * (big_r + &one)) / &denom + eps) / (&one + alpha1)
        }
    };
    let shares = vec![(pendant.clone(), inner.clone()), (mid.clone(), mid), (inner, pendant)];
    GameInstance::from_rule(path_graph(), SharingRule::Oblivious { shares }, alpha1_only(alpha1)?)
}

/// Closed form of the stability-variant ratio for any `eps >= 0`.
pub fn friendship_rs_pos_ratio(big_r: &Rational, alpha1: &Rational, eps: &Rational) -> Rational {
    let one = Rational::one();
    (&one + alpha1) * (&one + big_r) / (&one + alpha1 * (big_r + &one) + eps * (&one + alpha1 * big_r))
}

/// Triangle whose nodes each get 2 toward their successor and 1 toward their
/// predecessor around `0 -> 1 -> 2 -> 0`.
pub fn gen_cyclic_triangle() -> GameInstance {
    let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).expect("triangle");
    let (two, one) = (Rational::from_integer(2), Rational::one());
    // Canonical edges: (0,1), (0,2), (1,2).
    let shares = vec![(two.clone(), one.clone()), (one.clone(), two.clone()), (two, one)];
    GameInstance::from_rule(g, SharingRule::Oblivious { shares }, FriendshipVector::none()).expect("valid gadget")
}

/// Node ids of the five-cycle fixture.
pub const FIVE_CYCLE_NAMES: [&str; 5] = ["p", "q", "x", "y", "z"];

/// Matthew five-cycle `p - q - x - y - z - p` that has stable matchings without
/// friendship but none at `alpha_1 = 4/5`.
pub fn gen_nonexistence_friendship_matthew() -> GameInstance {
    let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).expect("cycle");
    let lambda = vec![rat(5, 1), rat(1, 1), rat(1, 1), rat(101, 100), rat(12, 1)];
    // Canonical edges: (p,q), (p,z), (q,x), (x,y), (y,z).
    let rewards = vec![rat(107, 1), rat(119, 1), rat(100, 1), rat(102, 1), rat(113, 1)];
    GameInstance::new(g, rewards, SharingRule::Matthew { lambda }, FriendshipVector::new(vec![rat(4, 5)]).unwrap())
        .expect("valid fixture")
}

/// Seeded search for a Matthew five-cycle without stable matchings at
/// `alpha_1 = 4/5`: integer brands in `[1, 200]` and integer rewards in
/// `[50, 150]`. Returns the first hit and the attempt it was found on.
pub fn search_nonexistence_matthew(seed: u64, attempts: usize) -> Option<(GameInstance, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).expect("cycle");
    let alpha = FriendshipVector::new(vec![rat(4, 5)]).unwrap();
    for attempt in 0..attempts {
        let lambda: Vec<Rational> = (0..5).map(|_| Rational::from_integer(rng.random_range(1..=200))).collect();
        let rewards: Vec<Rational> = (0..5).map(|_| Rational::from_integer(rng.random_range(50..=150))).collect();
        let inst = GameInstance::new(g.clone(), rewards, SharingRule::Matthew { lambda }, alpha.clone()).ok()?;
        if enumerate_stable_matchings(&inst).ok()?.is_empty() {
            return Some((inst, attempt));
        }
    }
    None
}

/// Rescales every reward `r` to `1 + r eps` and attaches a pendant helper node
/// `n + v` to each original node `v` by an edge of reward 1. Needs equal
/// sharing and `eps * max r < 1`, so that pairing everyone with a helper is
/// the unique optimum.
pub fn augment_with_auxiliary_neighbors(inst: &GameInstance, eps: &Rational) -> Result<GameInstance> {
    if !inst.is_equal_sharing() {
        return Err(Error::Unsupported("equal sharing".into()));
    }
    check_positive("epsilon", eps)?;
    let one = Rational::one();
    if let Some(max) = inst.rewards().iter().max() {
        if eps * max >= one {
            return Err(Error::InvalidInstance("epsilon times the largest reward must stay below 1".into()));
        }
    }
    let n = inst.node_count();
    let g = inst.graph();
    let edges = g.edges().iter().copied().chain((0..n).map(|v| (v, n + v)));
    let graph = Graph::new(2 * n, edges)?;
    let mut rewards = vec![one.clone(); graph.edge_count()];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        rewards[graph.edge_between(u, v).unwrap()] = &one + inst.reward(e) * eps;
    }
    GameInstance::new(graph, rewards, SharingRule::Equal, inst.friendship().clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Equal,
    Oblivious,
    Matthew,
    Parasite,
    Trust,
}

/// Parameters for [`gen_random`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub n: usize,
    pub density: f64,
    /// Inclusive integer range of edge rewards.
    pub rewards: (i64, i64),
    pub rule: RuleKind,
    pub alpha: Vec<Rational>,
}

/// Random instance: each pair becomes an edge with probability `density`.
/// Oblivious shares split rewards in tenths (never zero), Matthew and
/// parasite brands are integers in `[1, 10]`, trust offsets `beta` integers in
/// `[0, 5]` and edge terms `h` in `[1, 5]`, so every share is positive.
pub fn gen_random(seed: u64, spec: &RandomSpec) -> Result<GameInstance> {
    let (lo, hi) = spec.rewards;
    if lo < 1 || hi < lo {
        return Err(Error::InvalidInstance("reward range must be positive and nonempty".into()));
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(Error::InvalidInstance("density must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..spec.n {
        for v in u + 1..spec.n {
            if rng.random_bool(spec.density) {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::new(spec.n, edges)?;
    let m = graph.edge_count();
    let friendship = FriendshipVector::new(spec.alpha.clone())?;
    let reward = |rng: &mut ChaCha8Rng| Rational::from_integer(rng.random_range(lo..=hi));
    let brands = |rng: &mut ChaCha8Rng| (0..spec.n).map(|_| Rational::from_integer(rng.random_range(1..=10))).collect();
    match spec.rule {
        RuleKind::Equal => {
            let rewards = (0..m).map(|_| reward(&mut rng)).collect();
            GameInstance::new(graph, rewards, SharingRule::Equal, friendship)
        }
        RuleKind::Oblivious => {
            let shares = (0..m)
                .map(|_| {
                    let r = reward(&mut rng);
                    let a = &r * Rational::new(rng.random_range(1..=9), 10);
                    let b = &r - &a;
                    (a, b)
                })
                .collect();
            GameInstance::from_rule(graph, SharingRule::Oblivious { shares }, friendship)
        }
        RuleKind::Matthew | RuleKind::Parasite => {
            let rewards = (0..m).map(|_| reward(&mut rng)).collect();
            let lambda = brands(&mut rng);
            let rule = if spec.rule == RuleKind::Matthew {
                SharingRule::Matthew { lambda }
            } else {
                SharingRule::Parasite { lambda }
            };
            GameInstance::new(graph, rewards, rule, friendship)
        }
        RuleKind::Trust => {
            let beta: Vec<Rational> = (0..spec.n).map(|_| Rational::from_integer(rng.random_range(0..=5))).collect();
            let h = graph.edges().iter().map(|_| Rational::from_integer(rng.random_range(1..=5))).collect();
            GameInstance::from_rule(graph, SharingRule::Trust { beta, h }, friendship)
        }
    }
}

/// Parameters for [`gen_random_ccg`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCcgSpec {
    pub n: usize,
    pub density: f64,
    /// Families drawn uniformly per edge.
    pub families: Vec<Family>,
    pub split: Split,
    pub mode: BudgetMode,
    pub alpha: Vec<Rational>,
}

/// Random contribution game with integer budgets in `[1, 3]`, coefficients in
/// `[1, 5]`, power-product exponents in `{1, 2}` and brands in `[1, 10]`.
/// In exact mode isolated nodes get budget zero.
pub fn gen_random_ccg(seed: u64, spec: &RandomCcgSpec) -> Result<ContributionGame> {
    if spec.families.is_empty() {
        return Err(Error::InvalidGame("at least one reward family is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..spec.n {
        for v in u + 1..spec.n {
            if rng.random_bool(spec.density) {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::new(spec.n, edges)?;
    let budgets = (0..spec.n)
        .map(|v| {
            let b = rng.random_range(1..=3);
            if spec.mode == BudgetMode::Exact && graph.degree(v) == 0 {
                Rational::zero()
            } else {
                Rational::from_integer(b)
            }
        })
        .collect();
    let functions = (0..graph.edge_count())
        .map(|_| {
            let family = spec.families[rng.random_range(0..spec.families.len())];
            let c = Rational::from_integer(rng.random_range(1..=5));
            let k = rng.random_range(1..=2);
            RewardFunction::new(family, c, k, spec.split)
        })
        .collect::<Result<Vec<_>>>()?;
    let brand = (spec.split == Split::Matthew)
        .then(|| (0..spec.n).map(|_| Rational::from_integer(rng.random_range(1..=10))).collect());
    ContributionGame::new(graph, budgets, functions, FriendshipVector::new(spec.alpha.clone())?, spec.mode, brand)
}

/// Path with budgets 1, middle reward `min(x, y)` and outer rewards
/// `(1 - eps) min(x, y)`, equal split.
pub fn gen_tight_budget_path(eps: &Rational, alpha1: &Rational, mode: BudgetMode) -> Result<ContributionGame> {
    check_positive("epsilon", eps)?;
    check_unit_interval("alpha_1", alpha1)?;
    let one = Rational::one();
    let outer = RewardFunction::new(Family::Min, &one - eps, 1, Split::Equal)?;
    let mid = RewardFunction::min(one.clone(), Split::Equal);
    ContributionGame::new(path_graph(), vec![one; 4], vec![outer.clone(), mid, outer], alpha1_only(alpha1)?, mode, None)
}
