//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. All comparisons are exact rationals.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use friendmatch::ccg::{
    ccg_audit, corresponding_matching_game, detect_forbidden_edges, is_pairwise_equilibrium, matching_to_equilibrium,
    tight_budget_equilibrium, tight_social_optimum, BudgetMode, Family, Split, StrategyProfile, DEFAULT_GRID_K,
};
use friendmatch::dynamics::{assert_trace_lemmas, brbp_cap, run_brbp};
use friendmatch::generators::{
    friendship_rs_pos_ratio, gen_cyclic_triangle, gen_friendship_rs_tight, gen_matthew_poa_tight,
    gen_nonexistence_friendship_matthew, gen_path3_equal, gen_pos_tight, gen_random, gen_random_ccg,
    gen_tight_budget_path, RandomCcgSpec, RandomSpec, RsVariant, RuleKind,
};
use friendmatch::matching::{is_stable, matching_value};
use friendmatch::oracle::{audit_bounds, enumerate_stable_matchings, for_each_matching, max_weight_matching, ratio};
use friendmatch::roommates::{detect_preference_cycle, greedy_mutual_best, solve_srp_q, PrefKey};
use friendmatch::{rat, Error, FriendshipVector, GameInstance, Matching, Rational};

const ALPHA_GRID: [(i64, i64); 7] = [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)];

struct Outcome {
    failures: Vec<String>,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { failures: Vec::new(), detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn alpha(rng: &mut ChaCha8Rng) -> Vec<Rational> {
    let i = rng.random_range(0..ALPHA_GRID.len());
    let j = rng.random_range(0..=i);
    let (a, b) = ALPHA_GRID[i];
    let (c, d) = ALPHA_GRID[j];
    vec![rat(a, b), rat(c, d)]
}

fn random_spec(rng: &mut ChaCha8Rng, max_n: usize, rule: RuleKind, alpha: Vec<Rational>) -> RandomSpec {
    RandomSpec {
        n: rng.random_range(3..=max_n),
        density: [0.3, 0.5, 0.7][rng.random_range(0..3)],
        rewards: (1, 6),
        rule,
        alpha,
    }
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let one = Rational::one();
    let two = Rational::from_integer(2);

    let path = gen_path3_equal();
    let report = audit_bounds(&path).unwrap();
    out.check(report.poa == Some(two.clone()), || format!("path3 PoA {:?}", report.poa));

    for (a1, eps) in [
        (rat(0, 1), rat(1, 10)),
        (rat(1, 4), rat(1, 10)),
        (rat(1, 2), rat(1, 10)),
        (rat(1, 1), rat(1, 10)),
        (rat(1, 2), rat(1, 100)),
    ] {
        let inst = gen_pos_tight(&a1, &eps).unwrap();
        let stable: Vec<_> = enumerate_stable_matchings(&inst).unwrap().iter().map(Matching::pairs).collect();
        out.check(stable == vec![vec![(1, 2)]], || format!("pos gadget a1={a1} stable set {stable:?}"));
        let expected = (&two + &two * &a1) / (&one + &two * &a1 + &eps);
        let pos = audit_bounds(&inst).unwrap().pos;
        out.check(pos.as_ref() == Some(&expected), || {
            format!("pos gadget a1={a1} eps={eps}: PoS {pos:?} vs {expected}")
        });
    }

    for r in [1, 2, 5, 10] {
        let big_r = Rational::from_integer(r);
        let poa = audit_bounds(&gen_matthew_poa_tight(&big_r, None).unwrap()).unwrap().poa;
        out.check(poa == Some(&big_r + &one), || format!("matthew R={r}: PoA {poa:?}"));
        let eps = rat(1, 10);
        let pos = audit_bounds(&gen_matthew_poa_tight(&big_r, Some(&eps)).unwrap()).unwrap().pos;
        out.check(pos == Some((&big_r + &one) / (&one + &eps)), || format!("matthew R={r}: PoS {pos:?}"));
    }

    let eps = rat(1, 1000);
    let mut limit_checks = 0;
    for r in [1, 2, 5] {
        for (a, b) in [(0, 1), (1, 4), (1, 2), (1, 1)] {
            let (big_r, a1) = (Rational::from_integer(r), rat(a, b));
            let inst = gen_friendship_rs_tight(&big_r, &a1, &RsVariant::Poa).unwrap();
            let q = inst.compute_q().unwrap();
            let poa = audit_bounds(&inst).unwrap().poa;
            out.check(poa == Some(&q + &one), || format!("rs R={r} a1={a1}: PoA {poa:?} vs 1+Q {}", &q + &one));

            let inst = gen_friendship_rs_tight(&big_r, &a1, &RsVariant::Pos { eps: eps.clone() }).unwrap();
            let q_prime = inst.compute_q_prime().unwrap();
            let report = audit_bounds(&inst).unwrap();
            let closed = friendship_rs_pos_ratio(&big_r, &a1, &eps);
            out.check(report.stable.len() == 1, || {
                format!("rs R={r} a1={a1}: {} stable matchings", report.stable.len())
            });
            out.check(report.pos.as_ref() == Some(&closed), || {
                format!("rs R={r} a1={a1}: PoS {:?} vs {closed}", report.pos)
            });
            out.check(report.pos.as_ref().is_some_and(|p| p < &q_prime), || {
                format!("rs R={r} a1={a1}: PoS not below Q'")
            });
            out.check(friendship_rs_pos_ratio(&big_r, &a1, &Rational::zero()) == q_prime, || {
                format!("rs R={r} a1={a1}: limit is not Q'")
            });
            limit_checks += 1;
        }
    }
    let elapsed = start.elapsed();
    out.check(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"));
    out.detail = format!(
        "path3 PoA 2; pos gadget 5 settings; matthew R in {{1,2,5,10}}; {limit_checks} (R, a1) pairs: PoA = 1+Q, PoS = eps-closed form < Q' with eps->0 limit Q'; {:.0?}",
        elapsed
    );
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    let alphas = [vec![rat(1, 2)], vec![rat(1, 2), rat(1, 4)], vec![rat(1, 1), rat(1, 1)]];
    let results: Vec<(usize, Vec<String>)> = (0..500u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let spec = random_spec(&mut rng, 10, RuleKind::Equal, vec![]);
            let base = gen_random(seed, &spec).unwrap();
            let variants: Vec<GameInstance> =
                alphas.iter().map(|a| base.with_friendship(FriendshipVector::new(a.clone()).unwrap())).collect();
            let mut checked = 0;
            let mut bad = Vec::new();
            for_each_matching(base.graph(), |m| {
                if is_stable(&base, m) {
                    checked += 1;
                    for v in &variants {
                        if !is_stable(v, m) {
                            bad.push(format!(
                                "seed {seed}: {:?} unstable at alpha {:?}",
                                m.pairs(),
                                v.friendship().as_slice()
                            ));
                        }
                    }
                }
            });
            (checked, bad)
        })
        .collect();
    let checked: usize = results.iter().map(|r| r.0).sum();
    for (_, bad) in results {
        out.failures.extend(bad);
    }
    out.detail =
        format!("500 instances, {checked} matchings stable at alpha = 0, each checked at 3 friendship vectors");
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let results: Vec<(usize, Vec<String>)> = (0..500u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
            let a = alpha(&mut rng);
            let spec = random_spec(&mut rng, 10, RuleKind::Equal, a.clone());
            let inst = gen_random(seed, &spec).unwrap();
            let mut bad = Vec::new();
            let (m, trace) = run_brbp(&inst).unwrap();
            let (_, opt) = max_weight_matching(&inst).unwrap();
            let cap = brbp_cap(inst.edge_count());
            if !trace.converged() || trace.len() > cap {
                bad.push(format!("seed {seed}: {} steps, cap {cap}, {:?}", trace.len(), trace.termination));
            }
            if !is_stable(&inst, &m) {
                bad.push(format!("seed {seed}: output not stable"));
            }
            let (one, two) = (Rational::one(), Rational::from_integer(2));
            let lhs = matching_value(&inst, &m) * (&two + &two * &a[0]);
            let rhs = (&one + &two * &a[0] + &a[1]) * &opt;
            if lhs < rhs {
                bad.push(format!("seed {seed}: value below the stability bound"));
            }
            let lemmas = assert_trace_lemmas(&trace);
            if !lemmas.passed() {
                bad.push(format!("seed {seed}: trace lemmas {lemmas:?}"));
            }
            (trace.len(), bad)
        })
        .collect();
    let steps: usize = results.iter().map(|r| r.0).sum();
    let longest = results.iter().map(|r| r.0).max().unwrap_or(0);
    for (_, bad) in results {
        out.failures.extend(bad);
    }
    let elapsed = start.elapsed();
    out.check(elapsed.as_secs() < 60, || format!("took {elapsed:?}"));
    out.detail = format!("500 instances, {steps} deviations in total (longest run {longest}); {elapsed:.1?}");
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    let sweeps: [(&str, RuleKind, bool); 4] = [
        ("equal", RuleKind::Equal, true),
        ("trust", RuleKind::Trust, false),
        ("oblivious a=0", RuleKind::Oblivious, false),
        ("oblivious+friendship", RuleKind::Oblivious, true),
    ];
    let mut summary = Vec::new();
    for (si, (name, rule, friendship)) in sweeps.iter().enumerate() {
        let results: Vec<(bool, Vec<String>)> = (0..500u64)
            .into_par_iter()
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(3000 + 1000 * si as u64 + seed);
                let a = if *friendship { alpha(&mut rng) } else { vec![] };
                let spec = random_spec(&mut rng, 8, *rule, a);
                let inst = gen_random(seed, &spec).unwrap();
                let report = audit_bounds(&inst).unwrap();
                let bad = report
                    .bounds
                    .iter()
                    .filter(|b| !b.holds)
                    .map(|b| format!("{name} seed {seed}: {} bound {} observed {:?}", b.name, b.bound, b.observed))
                    .collect();
                (report.has_stable(), bad)
            })
            .collect();
        let with_stable = results.iter().filter(|r| r.0).count();
        summary.push(format!("{name} {with_stable}/500 with stable set"));
        for (_, bad) in results {
            out.failures.extend(bad);
        }
    }
    out.detail = format!("{}; Q < Q' <= Q+1 checked on all", summary.join(", "));
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    let mut cycles = 0;
    let mut greedy_runs = 0;
    let mut max_work_ratio = 0.0f64;
    for (si, rule) in [RuleKind::Matthew, RuleKind::Trust].into_iter().enumerate() {
        for seed in 0..300u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + 1000 * si as u64 + seed);
            let inst = gen_random(seed, &random_spec(&mut rng, 10, rule, vec![])).unwrap();
            if let Some(c) = detect_preference_cycle(&inst, PrefKey::Raw) {
                cycles += 1;
                out.failures.push(format!("{rule:?} seed {seed}: cycle {c:?}"));
                continue;
            }
            let g = greedy_mutual_best(&inst, PrefKey::Raw).unwrap();
            greedy_runs += 1;
            let stable = enumerate_stable_matchings(&inst).unwrap();
            out.check(is_stable(&inst, &g.matching) && stable.contains(&g.matching), || {
                format!("{rule:?} seed {seed}: greedy output {:?} not stable", g.matching.pairs())
            });
            let m = inst.edge_count().max(1);
            for &w in &g.work_per_pair {
                max_work_ratio = max_work_ratio.max(w as f64 / (2 * m) as f64);
                out.check(w <= 2 * m, || {
                    format!("{rule:?} seed {seed}: pair extraction read {w} entries, 2|E| = {}", 2 * m)
                });
            }
        }
    }
    let mut srp_found = 0;
    let mut srp_runs = 0;
    for (si, rule) in [RuleKind::Matthew, RuleKind::Oblivious, RuleKind::Parasite].into_iter().enumerate() {
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(8000 + 1000 * si as u64 + seed);
            let a = alpha(&mut rng);
            let inst = gen_random(seed, &random_spec(&mut rng, 9, rule, a)).unwrap();
            srp_runs += 1;
            match solve_srp_q(&inst) {
                Ok(Some(m)) => {
                    srp_found += 1;
                    out.check(is_stable(&inst, &m), || format!("{rule:?} seed {seed}: srp output unstable"));
                }
                Ok(None) => {}
                Err(Error::NotStable) => {
                    out.failures.push(format!("{rule:?} seed {seed}: srp output failed is_stable"))
                }
                Err(e) => out.failures.push(format!("{rule:?} seed {seed}: {e}")),
            }
        }
    }
    out.detail = format!(
        "{cycles} preference cycles over 600 matthew/trust instances; {greedy_runs} greedy outputs oracle-stable; max pair work {:.2} x 2|E|; srp-q returned {srp_found}/{srp_runs}, all stable",
        max_work_ratio
    );
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let tri = gen_cyclic_triangle();
    let tri_stable = enumerate_stable_matchings(&tri).unwrap().len();
    out.check(tri_stable == 0, || format!("triangle has {tri_stable} stable matchings"));
    let five = gen_nonexistence_friendship_matthew();
    let with = enumerate_stable_matchings(&five).unwrap().len();
    let without = enumerate_stable_matchings(&five.with_friendship(FriendshipVector::none())).unwrap().len();
    out.check(with == 0, || format!("five-cycle has {with} stable matchings at a1 = 4/5"));
    out.check(without > 0, || "five-cycle has no stable matching at alpha = 0".into());
    out.detail =
        format!("triangle: {tri_stable} stable; five-cycle: {without} stable at alpha = 0, {with} at a1 = 4/5");
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let splits = [Split::Equal, Split::Matthew, Split::Proportional];
    let results: Vec<(usize, usize, Vec<String>)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
            let split = splits[seed as usize % 3];
            let a = if split == Split::Proportional { vec![] } else { alpha(&mut rng) };
            let spec = RandomCcgSpec {
                n: rng.random_range(2..=8),
                density: [0.3, 0.5][rng.random_range(0..2)],
                families: vec![Family::Product, Family::PowerProduct],
                split,
                mode: BudgetMode::AtMost,
                alpha: a,
            };
            let ccg = gen_random_ccg(seed, &spec).unwrap();
            let game = corresponding_matching_game(&ccg).unwrap();
            let mut bad = Vec::new();
            let stable = enumerate_stable_matchings(&game).unwrap();
            for m in &stable {
                let p = matching_to_equilibrium(&ccg, m).unwrap();
                let verdict = is_pairwise_equilibrium(&ccg, &p, DEFAULT_GRID_K).unwrap();
                if !verdict.equilibrium {
                    bad.push(format!("seed {seed} {split:?}: {:?} not PE, witness {:?}", m.pairs(), verdict.witness));
                }
                if ccg.profile_value(&p) != matching_value(&game, m) {
                    bad.push(format!("seed {seed}: profile value differs from matching value"));
                }
            }
            let report = ccg_audit(&ccg, DEFAULT_GRID_K, 30).unwrap();
            if !report.all_within_bound() {
                bad.push(format!(
                    "seed {seed} {split:?}: ratio {:?} above 1+Q {:?}",
                    report.worst_ratio(),
                    report.bound
                ));
            }
            (stable.len(), report.equilibria.len(), bad)
        })
        .collect();
    let maps: usize = results.iter().map(|r| r.0).sum();
    let audited: usize = results.iter().map(|r| r.1).sum();
    for (_, _, bad) in results {
        out.failures.extend(bad);
    }
    out.detail = format!("200 games, {maps} stable matchings mapped and grid-certified (K = {DEFAULT_GRID_K}), {audited} audited equilibria within 1+Q");
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let (eps, a) = (rat(1, 20), rat(1, 2));
    let at_most = gen_tight_budget_path(&eps, &a, BudgetMode::AtMost).unwrap();
    let exact = gen_tight_budget_path(&eps, &a, BudgetMode::Exact).unwrap();
    let (one, zero) = (Rational::one(), Rational::zero());
    let middle = |pendant: &Rational| StrategyProfile {
        alloc: vec![(pendant.clone(), zero.clone()), (one.clone(), one.clone()), (zero.clone(), pendant.clone())],
    };

    let v = is_pairwise_equilibrium(&at_most, &middle(&zero), DEFAULT_GRID_K).unwrap();
    out.check(v.equilibrium, || format!("at-most middle profile rejected: {:?}", v.witness));

    let v = is_pairwise_equilibrium(&exact, &middle(&one), DEFAULT_GRID_K).unwrap();
    match &v.witness {
        Some(w) => {
            let target = vec![rat(19, 10), rat(19, 10)];
            let (wu, wv) = (w.profile.allocations[0].s_v.clone(), w.profile.allocations[2].s_u.clone());
            out.check(
                w.movers == vec![1, 2]
                    && w.after == target
                    && w.before == vec![rat(3, 2), rat(3, 2)]
                    && wu == one
                    && wv == one,
                || format!("exact witness {w:?}"),
            );
        }
        None => out.failures.push("exact middle profile certified".into()),
    }

    let forbidden = detect_forbidden_edges(&exact).unwrap();
    out.check(forbidden == vec![1], || format!("forbidden edges {forbidden:?}"));
    let eq = tight_budget_equilibrium(&exact).unwrap();
    let outer = StrategyProfile {
        alloc: vec![(one.clone(), one.clone()), (zero.clone(), zero.clone()), (one.clone(), one.clone())],
    };
    out.check(eq.profile == outer, || format!("tight budget profile {:?}", eq.profile));
    let certified = is_pairwise_equilibrium(&exact, &eq.profile, DEFAULT_GRID_K).unwrap().equilibrium;
    out.check(certified, || "outer profile not certified".into());
    let opt = exact.profile_value(&tight_social_optimum(&exact).unwrap());
    let value = exact.profile_value(&eq.profile);
    let bound = (&one + &a + &a) / (&one + &one + &a + &a);
    out.check(&value / &opt >= bound, || format!("value ratio {} below {bound}", &value / &opt));
    out.check(start.elapsed().as_secs_f64() < 1.0, || format!("took {:?}", start.elapsed()));
    out.detail = format!(
        "witness 19/10 > 3/2 per mover, forbidden {{(1,2)}}, equilibrium value {value} vs optimum {opt} (ratio {}), {:.0?}",
        ratio(&opt, &value).unwrap(),
        start.elapsed()
    );
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_friendmatch");
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).output().expect("binary runs");
        (o.status.code(), o.stdout)
    };
    let setup: [&[&str]; 4] = [
        &[
            "gen",
            "random",
            "--seed",
            "17",
            "--n",
            "8",
            "--density",
            "0.5",
            "--rule",
            "oblivious",
            "--alpha",
            "1/2",
            "--out",
            &path("rand.json"),
        ],
        &["gen", "pos-tight", "--alpha1", "1/2", "--eps", "1/10", "--out", &path("pos.json")],
        &[
            "gen",
            "tight-budget-path",
            "--eps",
            "1/20",
            "--alpha1",
            "1/2",
            "--mode",
            "exact",
            "--out",
            &path("ccg.json"),
        ],
        &["gen", "random-ccg", "--seed", "4", "--n", "6", "--split", "matthew", "--out", &path("rccg.json")],
    ];
    for args in setup {
        let (code, _) = run(args);
        out.check(code == Some(0), || format!("{args:?} exited {code:?}"));
    }
    std::fs::write(path("manifest.json"), format!("[\"{}\", \"{}\"]", path("rand.json"), path("pos.json"))).unwrap();
    let commands: Vec<Vec<String>> = [
        vec!["gen", "random", "--seed", "17", "--n", "8", "--density", "0.5", "--rule", "trust"],
        vec!["solve", &path("rand.json")],
        vec!["solve", &path("pos.json"), "--method", "brbp"],
        vec!["audit", &path("manifest.json")],
        vec!["audit", &path("pos.json"), "--format", "table"],
        vec!["dynamics", &path("rand.json"), "--method", "arbitrary", "--seed", "5", "--start", "empty"],
        vec!["dynamics", &path("pos.json")],
        vec!["ccg", &path("ccg.json")],
        vec!["ccg", &path("rccg.json"), "--seed", "3"],
    ]
    .iter()
    .map(|c| c.iter().map(|s| s.to_string()).collect())
    .collect();
    for cmd in &commands {
        let args: Vec<&str> = cmd.iter().map(String::as_str).collect();
        let first = run(&args);
        let second = run(&args);
        out.check(first == second, || format!("{} differs between runs", cmd[..2].join(" ")));
        out.check(matches!(first.0, Some(0) | Some(2)), || format!("{} exited {:?}", cmd[..2].join(" "), first.0));
    }
    out.detail = format!("{} commands run twice with byte-identical output", commands.len());
    out
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("tight-gadget exactness", criterion_1),
        ("containment of alpha = 0 stable matchings", criterion_2),
        ("brbp convergence and quality", criterion_3),
        ("price of anarchy / stability bound sweeps", criterion_4),
        ("existence machinery", criterion_5),
        ("nonexistence fixtures", criterion_6),
        ("contribution game correspondence", criterion_7),
        ("tight-budget path reproduction", criterion_8),
        ("determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        if o.failures.is_empty() {
            println!("{label}: PASS  {name}: {}", o.detail);
        } else {
            failed += 1;
            println!("{label}: FAIL  {name}: {} violation(s)", o.failures.len());
            for f in o.failures.iter().take(10) {
                println!("    {f}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
