//! Improvement dynamics over matchings with full traces.
//!
//! Best-relaxed-blocking-pair dynamics start from a maximum-weight matching and
//! repeatedly satisfy the relaxed blocking pair of largest reward. Ties go to the
//! lexicographically smallest pair `(lo, hi)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Result;
use crate::instance::{GameInstance, NodeId};
use crate::matching::{
    apply_deviation, is_improving_pair, is_relaxed_blocking_pair, matching_value, Deviation, DeviationKind, Matching,
    PairVerdict,
};
use crate::oracle::max_weight_matching;
use crate::rational::Rational;

pub const ARBITRARY_DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    CapHit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub deviation: Deviation,
    /// Reward of the added edge.
    pub r: Rational,
    /// Matching value after the step.
    pub value: Rational,
    pub matching: Matching,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicsTrace {
    pub initial: Matching,
    pub initial_value: Rational,
    pub steps: Vec<TraceStep>,
    /// Step indices that open a phase (each a biswivel).
    pub phase_starts: Vec<usize>,
    pub edge_count: usize,
    pub cap: usize,
    pub termination: Termination,
}

impl DynamicsTrace {
    fn new(inst: &GameInstance, initial: Matching, cap: usize) -> Self {
        DynamicsTrace {
            initial_value: matching_value(inst, &initial),
            initial,
            steps: Vec::new(),
            phase_starts: Vec::new(),
            edge_count: inst.edge_count(),
            cap,
            termination: Termination::Converged,
        }
    }

    fn push(&mut self, inst: &GameInstance, dev: Deviation, next: Matching) {
        let e = inst.graph().edge_between(dev.pair.0, dev.pair.1).expect("deviation uses an edge");
        if dev.kind != DeviationKind::Swivel {
            self.phase_starts.push(self.steps.len());
        }
        self.steps.push(TraceStep {
            r: inst.reward(e).clone(),
            value: matching_value(inst, &next),
            deviation: dev,
            matching: next,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_matching(&self) -> &Matching {
        self.steps.last().map_or(&self.initial, |s| &s.matching)
    }

    /// One JSON object per line: deviations, with phase markers ahead of the
    /// step that opens each phase.
    pub fn json_lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.steps.len() + self.phase_starts.len());
        let mut phases = self.phase_starts.iter().peekable();
        for (i, s) in self.steps.iter().enumerate() {
            if phases.peek() == Some(&&i) {
                phases.next();
                out.push(json!({"kind": "phase", "step": i + 1}).to_string());
            }
            out.push(
                json!({
                    "step": i + 1,
                    "kind": s.deviation.kind,
                    "pair": [s.deviation.pair.0, s.deviation.pair.1],
                    "r": s.r,
                    "value": s.value,
                })
                .to_string(),
            );
        }
        out
    }
}

/// Default cap for best-pair dynamics: `2 m^2`.
pub fn brbp_cap(m: usize) -> usize {
    2 * m * m
}

fn best_pair(
    inst: &GameInstance,
    m: &Matching,
    test: fn(&GameInstance, &Matching, NodeId, NodeId) -> Result<PairVerdict>,
) -> Option<PairVerdict> {
    let mut best: Option<(PairVerdict, &Rational)> = None;
    for (e, &(u, v)) in inst.graph().edges().iter().enumerate() {
        let r = inst.reward(e);
        if best.as_ref().is_some_and(|(_, br)| r <= *br) {
            continue;
        }
        let verdict = test(inst, m, u, v).expect("graph edge");
        if verdict.blocking {
            best = Some((verdict, r));
        }
    }
    best.map(|(v, _)| v)
}

/// Relaxed blocking pair of maximum reward, ties to the smallest pair.
pub fn best_relaxed_blocking_pair(inst: &GameInstance, m: &Matching) -> Option<(NodeId, NodeId)> {
    best_pair(inst, m, is_relaxed_blocking_pair).map(|v| v.pair)
}

/// Blocking pair of maximum reward, ties to the smallest pair.
pub fn best_blocking_pair(inst: &GameInstance, m: &Matching) -> Option<(NodeId, NodeId)> {
    best_pair(inst, m, is_improving_pair).map(|v| v.pair)
}

fn run_best(
    inst: &GameInstance,
    start: Matching,
    cap: usize,
    test: fn(&GameInstance, &Matching, NodeId, NodeId) -> Result<PairVerdict>,
) -> Result<(Matching, DynamicsTrace)> {
    start.validate(inst.graph())?;
    let mut trace = DynamicsTrace::new(inst, start.clone(), cap);
    let mut m = start;
    while let Some(verdict) = best_pair(inst, &m, test) {
        if trace.steps.len() >= cap {
            trace.termination = Termination::CapHit;
            break;
        }
        let dev = verdict.deviation(&m).expect("blocking pair is unmatched");
        let next = apply_deviation(&m, &dev)?;
        trace.push(inst, dev, next.clone());
        m = next;
    }
    Ok((m, trace))
}

/// Best-relaxed-blocking-pair dynamics from a maximum-weight matching, capped at `2 m^2`.
pub fn run_brbp(inst: &GameInstance) -> Result<(Matching, DynamicsTrace)> {
    let (start, _) = max_weight_matching(inst)?;
    run_brbp_from(inst, start, brbp_cap(inst.edge_count()))
}

pub fn run_brbp_from(inst: &GameInstance, start: Matching, cap: usize) -> Result<(Matching, DynamicsTrace)> {
    run_best(inst, start, cap, is_relaxed_blocking_pair)
}

/// Best-blocking-pair dynamics from `start`.
pub fn run_best_blocking_pair(inst: &GameInstance, start: Matching, cap: usize) -> Result<(Matching, DynamicsTrace)> {
    run_best(inst, start, cap, is_improving_pair)
}

/// Uniformly random blocking pair at every step, drawn from a seeded ChaCha8 stream.
pub fn run_arbitrary_dynamics(
    inst: &GameInstance,
    start: Matching,
    seed: u64,
    cap: usize,
) -> Result<(Matching, DynamicsTrace)> {
    start.validate(inst.graph())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = DynamicsTrace::new(inst, start.clone(), cap);
    let mut m = start;
    loop {
        let blocking: Vec<PairVerdict> = inst
            .graph()
            .edges()
            .iter()
            .map(|&(u, v)| is_improving_pair(inst, &m, u, v).expect("graph edge"))
            .filter(|v| v.blocking)
            .collect();
        if blocking.is_empty() {
            break;
        }
        if trace.steps.len() >= cap {
            trace.termination = Termination::CapHit;
            break;
        }
        let pick = &blocking[rng.random_range(0..blocking.len())];
        let dev = pick.deviation(&m).expect("blocking pair is unmatched");
        let next = apply_deviation(&m, &dev)?;
        trace.push(inst, dev, next.clone());
        m = next;
    }
    Ok((m, trace))
}

/// Replays a trace from its initial matching, failing on any stale step.
pub fn replay_trace(trace: &DynamicsTrace) -> Result<Matching> {
    let mut m = trace.initial.clone();
    for s in &trace.steps {
        m = apply_deviation(&m, &s.deviation)?;
    }
    Ok(m)
}

/// Structural checks on a best-relaxed-blocking-pair trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub first_is_relaxed_biswivel: bool,
    pub relaxed_biswivels: usize,
    pub edge_count: usize,
    pub biswivel_edges_distinct: bool,
    pub reward_order_holds: bool,
    pub phase_values_monotone: bool,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.first_is_relaxed_biswivel
            && self.relaxed_biswivels <= self.edge_count
            && self.biswivel_edges_distinct
            && self.reward_order_holds
            && self.phase_values_monotone
    }
}

pub fn assert_trace_lemmas(trace: &DynamicsTrace) -> LemmaReport {
    let steps = &trace.steps;
    let is_rb = |s: &TraceStep| s.deviation.kind == DeviationKind::RelaxedBiswivel;
    let first_is_relaxed_biswivel = steps.first().is_none_or(is_rb);

    let mut pairs: Vec<(NodeId, NodeId)> = steps.iter().filter(|s| is_rb(s)).map(|s| s.deviation.pair).collect();
    let relaxed_biswivels = pairs.len();
    pairs.sort_unstable();
    pairs.dedup();
    let biswivel_edges_distinct = pairs.len() == relaxed_biswivels;

    // Every step before a relaxed biswivel added an edge at least as rewarding.
    let mut reward_order_holds = true;
    let mut min_so_far: Option<&Rational> = None;
    for s in steps {
        if is_rb(s) && min_so_far.is_some_and(|m| m < &s.r) {
            reward_order_holds = false;
        }
        min_so_far = Some(min_so_far.map_or(&s.r, |m| m.min(&s.r)));
    }

    let mut phase_values_monotone = true;
    for (i, s) in steps.iter().enumerate() {
        if i > 0 && !is_rb(s) && s.value < steps[i - 1].value {
            phase_values_monotone = false;
        }
    }

    LemmaReport {
        first_is_relaxed_biswivel,
        relaxed_biswivels,
        edge_count: trace.edge_count,
        biswivel_edges_distinct,
        reward_order_holds,
        phase_values_monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{FriendshipVector, Graph, SharingRule};
    use crate::matching::is_stable;
    use crate::rational::rat;

    fn path(rewards: [Rational; 3], alpha: Vec<Rational>) -> GameInstance {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        GameInstance::new(g, rewards.to_vec(), SharingRule::Equal, FriendshipVector::new(alpha).unwrap()).unwrap()
    }

    #[test]
    fn unit_path_needs_no_deviation() {
        for alpha in [vec![], vec![rat(1, 2)]] {
            let inst = path([rat(1, 1), rat(1, 1), rat(1, 1)], alpha);
            let (m, trace) = run_brbp(&inst).unwrap();
            assert!(trace.is_empty());
            assert_eq!(m.pairs(), vec![(0, 1), (2, 3)]);
            assert!(assert_trace_lemmas(&trace).passed());
        }
    }

    #[test]
    fn pos_gadget_single_relaxed_biswivel() {
        let inst = path([rat(1, 1), rat(7, 5), rat(1, 1)], vec![rat(1, 2)]);
        let start = max_weight_matching(&inst).unwrap().0;
        assert_eq!(best_relaxed_blocking_pair(&inst, &start), Some((1, 2)));
        let (m, trace) = run_brbp(&inst).unwrap();
        assert_eq!(m.pairs(), vec![(1, 2)]);
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.steps[0].deviation.kind, DeviationKind::RelaxedBiswivel);
        assert_eq!(trace.steps[0].value, rat(7, 5));
        assert_eq!(trace.phase_starts, vec![0]);
        assert!(is_stable(&inst, &m));
        assert!(assert_trace_lemmas(&trace).passed());
        assert_eq!(replay_trace(&trace).unwrap(), m);
    }

    #[test]
    fn equal_reward_ties_go_to_smallest_pair() {
        // Two disjoint copies of the gadget: pairs (1,2) and (5,6) block with equal reward.
        let g = Graph::new(8, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)]).unwrap();
        let r = vec![rat(1, 1), rat(3, 2), rat(1, 1), rat(1, 1), rat(3, 2), rat(1, 1)];
        let inst = GameInstance::new(g, r, SharingRule::Equal, FriendshipVector::none()).unwrap();
        let outer = Matching::from_pairs(inst.graph(), [(0, 1), (2, 3), (4, 5), (6, 7)]).unwrap();
        for _ in 0..3 {
            assert_eq!(best_relaxed_blocking_pair(&inst, &outer), Some((1, 2)));
        }
        let (_, a) = run_brbp(&inst).unwrap();
        let (_, b) = run_brbp(&inst).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps[0].deviation.pair, (1, 2));
    }

    #[test]
    fn brbp_equals_bbp_when_alphas_coincide() {
        let inst = path([rat(1, 1), rat(9, 5), rat(1, 1)], vec![rat(1, 3), rat(1, 3)]);
        let start = max_weight_matching(&inst).unwrap().0;
        let (_, a) = run_brbp(&inst).unwrap();
        let (_, b) = run_best_blocking_pair(&inst, start, 100).unwrap();
        let key = |t: &DynamicsTrace| {
            t.steps.iter().map(|s| (s.deviation.pair, s.r.clone(), s.value.clone())).collect::<Vec<_>>()
        };
        assert_eq!(a.len(), 1);
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn arbitrary_dynamics_is_seed_deterministic() {
        let inst = path([rat(1, 1), rat(2, 1), rat(3, 1)], vec![]);
        let empty = Matching::empty(4);
        let (m1, t1) = run_arbitrary_dynamics(&inst, empty.clone(), 7, 100).unwrap();
        let (m2, t2) = run_arbitrary_dynamics(&inst, empty, 7, 100).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(m1, m2);
        assert!(is_stable(&inst, &m1));
        let (_, t3) = run_arbitrary_dynamics(&inst, m1, 7, 100).unwrap();
        assert!(t3.is_empty());
    }

    #[test]
    fn cap_hit_is_reported() {
        let inst = path([rat(1, 1), rat(2, 1), rat(3, 1)], vec![]);
        let (_, t) = run_arbitrary_dynamics(&inst, Matching::empty(4), 1, 0).unwrap();
        assert_eq!(t.termination, Termination::CapHit);
        assert!(!t.converged());
    }

    #[test]
    fn json_lines_carry_phase_markers() {
        let inst = path([rat(1, 1), rat(7, 5), rat(1, 1)], vec![rat(1, 2)]);
        let (_, trace) = run_brbp(&inst).unwrap();
        let lines = trace.json_lines();
        assert_eq!(lines[0], r#"{"kind":"phase","step":1}"#);
        assert_eq!(lines[1], r#"{"kind":"relaxed_biswivel","pair":[1,2],"r":"7/5","step":1,"value":"7/5"}"#);
    }

    #[test]
    fn empty_trace_passes_lemmas() {
        let inst = path([rat(1, 1), rat(1, 1), rat(1, 1)], vec![]);
        let trace = DynamicsTrace::new(&inst, Matching::empty(4), 0);
        assert!(assert_trace_lemmas(&trace).passed());
    }
}
