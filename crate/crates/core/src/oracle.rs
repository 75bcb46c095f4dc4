//! Exact ground truth by exhaustive search: optimum matchings, stable-set
//! enumeration, and price of anarchy / stability audits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{q_from_r, q_prime_from_r, GameInstance, Graph, NodeId, SharingRule};
use crate::matching::{is_stable, matching_value, Matching, MatchingDoc};
use crate::rational::Rational;

/// Size limits for the exhaustive routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub optimum_n: usize,
    pub enumeration_n: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { optimum_n: 22, enumeration_n: 12 }
    }
}

fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    Ok(())
}

/// Maximum-weight matching by memoized search over sets of undecided nodes.
///
/// The lowest undecided node is either matched to an undecided neighbor or
/// left single. Among optima the witness has the lexicographically least
/// partner table, with matched entries ordered before unmatched ones.
pub fn max_weight_matching(inst: &GameInstance) -> Result<(Matching, Rational)> {
    max_weight_matching_with(inst, Limits::default().optimum_n)
}

pub fn max_weight_matching_with(inst: &GameInstance, limit: usize) -> Result<(Matching, Rational)> {
    let n = inst.node_count();
    check_size(n, limit.min(63))?;
    let g = inst.graph();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut memo: HashMap<u64, Rational> = HashMap::new();
    let best = solve(inst, full, &mut memo);

    let mut m = Matching::empty(n);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1u64 << i);
        let target = value_of(inst, mask, &mut memo);
        let mut chosen = None;
        for &(j, e) in g.neighbors(i) {
            if rest & (1u64 << j) != 0 && inst.reward(e) + value_of(inst, rest & !(1u64 << j), &mut memo) == target {
                chosen = Some(j);
                break;
            }
        }
        match chosen {
            Some(j) => {
                m.set_pair(i, j);
                mask = rest & !(1u64 << j);
            }
            None => mask = rest,
        }
    }
    Ok((m, best))
}

fn value_of(inst: &GameInstance, mask: u64, memo: &mut HashMap<u64, Rational>) -> Rational {
    solve(inst, mask, memo)
}

fn solve(inst: &GameInstance, mask: u64, memo: &mut HashMap<u64, Rational>) -> Rational {
    if mask == 0 {
        return Rational::zero();
    }
    if let Some(v) = memo.get(&mask) {
        return v.clone();
    }
    let i = mask.trailing_zeros() as usize;
    let rest = mask & !(1u64 << i);
    let mut best = solve(inst, rest, memo);
    for &(j, e) in inst.graph().neighbors(i) {
        if rest & (1u64 << j) != 0 {
            let cand = inst.reward(e) + solve(inst, rest & !(1u64 << j), memo);
            if cand > best {
                best = cand;
            }
        }
    }
    memo.insert(mask, best.clone());
    best
}

/// Visits every matching of `graph` in canonical order: the lowest free node
/// is matched to each free neighbor in increasing order, then left single.
pub fn for_each_matching(graph: &Graph, mut visit: impl FnMut(&Matching)) {
    let mut m = Matching::empty(graph.node_count());
    let mut decided = vec![false; graph.node_count()];
    walk(graph, 0, &mut decided, &mut m, &mut visit);
}

fn walk(graph: &Graph, from: usize, decided: &mut [bool], m: &mut Matching, visit: &mut impl FnMut(&Matching)) {
    let Some(i) = (from..decided.len()).find(|&i| !decided[i]) else {
        visit(m);
        return;
    };
    decided[i] = true;
    for &(j, _) in graph.neighbors(i) {
        if !decided[j] {
            decided[j] = true;
            m.set_pair(i, j);
            walk(graph, i + 1, decided, m, visit);
            m.unmatch(i);
            decided[j] = false;
        }
    }
    walk(graph, i + 1, decided, m, visit);
    decided[i] = false;
}

/// All matchings of the instance's graph, in canonical order.
pub fn all_matchings(inst: &GameInstance, limit: usize) -> Result<Vec<Matching>> {
    check_size(inst.node_count(), limit)?;
    let mut out = Vec::new();
    for_each_matching(inst.graph(), |m| out.push(m.clone()));
    Ok(out)
}

/// Every stable matching, in canonical order.
pub fn enumerate_stable_matchings(inst: &GameInstance) -> Result<Vec<Matching>> {
    enumerate_stable_matchings_with(inst, Limits::default().enumeration_n)
}

pub fn enumerate_stable_matchings_with(inst: &GameInstance, limit: usize) -> Result<Vec<Matching>> {
    check_size(inst.node_count(), limit)?;
    let mut out = Vec::new();
    for_each_matching(inst.graph(), |m| {
        if is_stable(inst, m) {
            out.push(m.clone());
        }
    });
    Ok(out)
}

/// `optimum / value`, with the empty-graph case reading as one.
pub fn ratio(optimum: &Rational, value: &Rational) -> Result<Rational> {
    if optimum.is_zero() {
        return Ok(Rational::one());
    }
    if value.is_zero() {
        return Err(Error::UnboundedRatio);
    }
    Ok(optimum / value)
}

fn stable_extremes(inst: &GameInstance, limits: Limits) -> Result<(Rational, Option<(Rational, Rational)>)> {
    let (_, opt) = max_weight_matching_with(inst, limits.optimum_n)?;
    let values: Vec<Rational> =
        enumerate_stable_matchings_with(inst, limits.enumeration_n)?.iter().map(|m| matching_value(inst, m)).collect();
    let worst = values.iter().min().cloned();
    let best = values.iter().max().cloned();
    Ok((opt, worst.zip(best)))
}

/// Optimum over the worst stable value; `None` without stable matchings.
pub fn price_of_anarchy(inst: &GameInstance) -> Result<Option<Rational>> {
    let (opt, ext) = stable_extremes(inst, Limits::default())?;
    ext.map(|(worst, _)| ratio(&opt, &worst)).transpose()
}

/// Optimum over the best stable value; `None` without stable matchings.
pub fn price_of_stability(inst: &GameInstance) -> Result<Option<Rational>> {
    let (opt, ext) = stable_extremes(inst, Limits::default())?;
    ext.map(|(_, best)| ratio(&opt, &best)).transpose()
}

/// Which quantity a bound constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTarget {
    Poa,
    Pos,
    QPrime,
}

/// A single bound comparison; `observed` is absent when the quantity does not exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub target: BoundTarget,
    pub bound: Rational,
    pub observed: Option<Rational>,
    pub holds: bool,
}

impl BoundCheck {
    fn upper(name: &str, target: BoundTarget, bound: Rational, observed: &Option<Rational>) -> Self {
        let holds = observed.as_ref().is_none_or(|o| o <= &bound);
        BoundCheck { name: name.into(), target, bound, observed: observed.clone(), holds }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableEntry {
    pub pairs: Vec<[NodeId; 2]>,
    pub value: Rational,
}

/// Full audit of one instance against every bound that applies to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rule: String,
    pub alpha: Vec<Rational>,
    pub optimum: Rational,
    pub optimum_matching: MatchingDoc,
    pub stable: Vec<StableEntry>,
    pub worst_stable: Option<Rational>,
    pub best_stable: Option<Rational>,
    pub poa: Option<Rational>,
    pub pos: Option<Rational>,
    pub r: Option<Rational>,
    pub q: Option<Rational>,
    pub q_prime: Option<Rational>,
    pub bounds: Vec<BoundCheck>,
}

impl AuditReport {
    pub fn has_stable(&self) -> bool {
        !self.stable.is_empty()
    }

    pub fn all_bounds_hold(&self) -> bool {
        self.bounds.iter().all(|b| b.holds)
    }

    pub fn bound(&self, name: &str) -> Option<&BoundCheck> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

pub fn audit_bounds(inst: &GameInstance) -> Result<AuditReport> {
    audit_bounds_with(inst, Limits::default())
}

pub fn audit_bounds_with(inst: &GameInstance, limits: Limits) -> Result<AuditReport> {
    let (opt_m, optimum) = max_weight_matching_with(inst, limits.optimum_n)?;
    let stable: Vec<StableEntry> = enumerate_stable_matchings_with(inst, limits.enumeration_n)?
        .iter()
        .map(|m| StableEntry { pairs: m.to_doc().pairs, value: matching_value(inst, m) })
        .collect();
    let worst = stable.iter().map(|s| &s.value).min().cloned();
    let best = stable.iter().map(|s| &s.value).max().cloned();
    let poa = worst.as_ref().map(|w| ratio(&optimum, w)).transpose()?;
    let pos = best.as_ref().map(|b| ratio(&optimum, b)).transpose()?;

    let f = inst.friendship();
    let a1 = f.alpha1();
    let a2 = f.alpha2();
    let one = Rational::one();
    let two = Rational::from_integer(2);
    let r = inst.compute_r().ok();
    let q = r.as_ref().map(|r| q_from_r(r, &a1));
    let q_prime = r.as_ref().map(|r| q_prime_from_r(r, &a1));

    let mut bounds = Vec::new();
    if inst.is_equal_sharing() {
        bounds.push(BoundCheck::upper("poa<=2", BoundTarget::Poa, two.clone(), &poa));
        let pos_bound = (&two + &two * &a1) / (&one + &two * &a1 + &a2);
        bounds.push(BoundCheck::upper("pos<=(2+2a1)/(1+2a1+a2)", BoundTarget::Pos, pos_bound, &pos));
    }
    if let (Some(r), Some(q), Some(qp)) = (&r, &q, &q_prime) {
        let q1 = q + &one;
        if f.is_zero() {
            bounds.push(BoundCheck::upper("poa<=1+R", BoundTarget::Poa, r + &one, &poa));
        }
        bounds.push(BoundCheck::upper("poa<=1+Q", BoundTarget::Poa, q1.clone(), &poa));
        bounds.push(BoundCheck::upper("pos<=1+Q", BoundTarget::Pos, q1.clone(), &pos));
        bounds.push(BoundCheck {
            name: "Q<Q'<=Q+1".into(),
            target: BoundTarget::QPrime,
            bound: q1.clone(),
            observed: Some(qp.clone()),
            holds: q < qp && qp <= &q1,
        });
    }
    if matches!(inst.sharing(), SharingRule::Trust { .. }) && f.is_zero() {
        bounds.push(BoundCheck::upper("poa<=3", BoundTarget::Poa, Rational::from_integer(3), &poa));
    }
    if let (Some(pa), Some(ps)) = (&poa, &pos) {
        bounds.push(BoundCheck {
            name: "pos<=poa".into(),
            target: BoundTarget::Pos,
            bound: pa.clone(),
            observed: Some(ps.clone()),
            holds: ps <= pa,
        });
    }

    Ok(AuditReport {
        rule: inst.sharing().name().into(),
        alpha: f.as_slice().to_vec(),
        optimum,
        optimum_matching: opt_m.to_doc(),
        stable,
        worst_stable: worst,
        best_stable: best,
        poa,
        pos,
        r,
        q,
        q_prime,
        bounds,
    })
}
