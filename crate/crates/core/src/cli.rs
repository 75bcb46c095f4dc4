//! Command-line front end. Every command writes one report to stdout and
//! returns an exit code: 0 on success, 1 on usage, IO or limit errors and
//! violated bounds, 2 on a certified negative result.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ccg::{
    ccg_audit, corresponding_matching_game, detect_forbidden_edges, is_pairwise_equilibrium, local_search,
    matching_to_equilibrium, tight_budget_equilibrium, tight_social_optimum, uniform_profile, BudgetMode,
    CcgAuditReport, ContributionGame, Family, PeVerdict, ProfileDoc, Split, DEFAULT_GRID_K,
};
use crate::dynamics::{
    assert_trace_lemmas, brbp_cap, run_arbitrary_dynamics, run_best_blocking_pair, run_brbp_from, LemmaReport,
    Termination, ARBITRARY_DEFAULT_CAP,
};
use crate::generators::{
    augment_with_auxiliary_neighbors, gen_cyclic_triangle, gen_friendship_rs_tight, gen_matthew_poa_tight,
    gen_nonexistence_friendship_matthew, gen_path3_equal, gen_pos_tight, gen_random, gen_random_ccg,
    gen_tight_budget_path, search_nonexistence_matthew, RandomCcgSpec, RandomSpec, RsVariant, RuleKind,
};
use crate::matching::{is_improving_pair, is_stable, matching_value, MatchingDoc, PairVerdict};
use crate::oracle::{
    audit_bounds_with, enumerate_stable_matchings_with, max_weight_matching_with, AuditReport, Limits,
};
use crate::roommates::{detect_preference_cycle, greedy_mutual_best, solve_srp_q_with, PrefKey};
use crate::{Error, FriendshipVector, GameInstance, Matching, Rational};

#[derive(Debug, Parser)]
#[command(name = "friendmatch", version, about = "Stable matching games with friendship and unequal sharing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for random generators and arbitrary dynamics.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Friendship vector override, comma separated (e.g. `1/2,1/4`).
    #[arg(long, global = true, value_parser = parse_alpha, allow_hyphen_values = true)]
    pub alpha: Option<AlphaList>,
    /// Grid resolution for contribution-game deviations.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID_K, value_parser = clap::value_parser!(usize))]
    pub grid_k: usize,
    /// Largest node count for exhaustive enumeration.
    #[arg(long, global = true)]
    pub max_n: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Parsed `--alpha` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaList(pub Vec<Rational>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Write a gadget or random instance.
    Gen(GenArgs),
    /// Find a stable matching.
    Solve(SolveArgs),
    /// Compare prices of anarchy and stability with their bounds.
    Audit(AuditArgs),
    /// Run improvement dynamics and print the trace as JSON lines.
    Dynamics(DynamicsArgs),
    /// Build or check contribution-game equilibria.
    Ccg(CcgArgs),
    /// Check a matching for stability or a profile for pairwise equilibrium.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Gadget {
    Path3,
    PosTight,
    MatthewPoaTight,
    FriendshipRsTight,
    NonexistenceMatthew,
    CyclicTriangle,
    Random,
    RandomCcg,
    TightBudgetPath,
    Augment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Poa,
    Pos,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub gadget: Gadget,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, value_parser = parse_serde::<RuleKind>, default_value = "equal")]
    pub rule: RuleKind,
    #[arg(long, default_value_t = 1)]
    pub min_reward: i64,
    #[arg(long, default_value_t = 10)]
    pub max_reward: i64,
    #[arg(long, value_parser = parse_rational, default_value = "1/2")]
    pub alpha1: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "1/10")]
    pub eps: Rational,
    /// Share ratio `R`.
    #[arg(long = "r", value_parser = parse_rational, default_value = "2")]
    pub big_r: Rational,
    #[arg(long, value_enum, default_value_t = Variant::Poa)]
    pub variant: Variant,
    /// Stability variant for the Matthew gadget.
    #[arg(long)]
    pub pos: bool,
    #[arg(long, value_parser = parse_serde::<BudgetMode>, default_value = "atmost")]
    pub mode: BudgetMode,
    #[arg(long, value_parser = parse_split, default_value = "equal")]
    pub split: Split,
    #[arg(long, value_parser = parse_serde::<Family>, value_delimiter = ',', default_value = "product,powprod")]
    pub families: Vec<Family>,
    /// Search for a nonexistence instance instead of writing the fixture.
    #[arg(long)]
    pub attempts: Option<usize>,
    /// Instance to augment.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Auto,
    Brbp,
    Greedy,
    SrpQ,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = SolveMethod::Auto)]
    pub method: SolveMethod,
    #[arg(long, value_parser = parse_serde::<PrefKey>, default_value = "raw")]
    pub prefs: PrefKey,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Instance, contribution game, or JSON array of paths.
    pub input: PathBuf,
    /// Local-search steps for contribution games.
    #[arg(long, default_value_t = 50)]
    pub search_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsMethod {
    Brbp,
    Bbp,
    Arbitrary,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = DynamicsMethod::Brbp)]
    pub method: DynamicsMethod,
    #[arg(long)]
    pub cap: Option<usize>,
    /// `optimum`, `empty`, or a matching file.
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Debug, Args)]
pub struct CcgArgs {
    pub game: PathBuf,
    /// Profile to check instead of constructing an equilibrium.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, value_parser = parse_serde::<BudgetMode>)]
    pub mode: Option<BudgetMode>,
    #[arg(long, default_value_t = 50)]
    pub search_cap: usize,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub input: PathBuf,
    #[arg(long, conflicts_with = "profile")]
    pub matching: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_alpha(s: &str) -> Result<AlphaList, String> {
    if s.trim().is_empty() {
        return Ok(AlphaList(Vec::new()));
    }
    s.split(',').map(parse_rational).collect::<Result<_, _>>().map(AlphaList)
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown value `{s}`"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "equal" => Ok(Split::Equal),
        "matthew" => Ok(Split::Matthew),
        "proportional" => Ok(Split::Proportional),
        _ => Err(format!("unknown split `{s}`")),
    }
}

/// Report of `solve`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    /// Algorithm that produced the answer.
    pub solver: String,
    pub matching: Option<MatchingDoc>,
    pub value: Option<Rational>,
    pub stable: bool,
    /// Blocking pairs of the returned matching; empty certifies stability.
    pub blocking_pairs: Vec<[usize; 2]>,
    pub deviations: Option<usize>,
    pub termination: Option<Termination>,
}

/// Closing record of `dynamics`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicsSummary {
    pub kind: String,
    pub method: DynamicsMethod,
    pub steps: usize,
    pub phases: usize,
    pub cap: usize,
    pub termination: Termination,
    pub initial_value: Rational,
    pub matching: MatchingDoc,
    pub value: Rational,
    pub stable: bool,
    pub lemmas: Option<LemmaReport>,
    pub lemmas_pass: Option<bool>,
}

/// Audit of one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum AuditOutput {
    Matching(AuditReport),
    Contribution(CcgAuditReport),
}

impl AuditOutput {
    fn exit_code(&self) -> i32 {
        match self {
            AuditOutput::Matching(r) if !r.all_bounds_hold() => 1,
            AuditOutput::Matching(r) if !r.has_stable() => 2,
            AuditOutput::Contribution(r) if !r.all_within_bound() => 1,
            AuditOutput::Contribution(r) if r.equilibria.is_empty() => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub report: Option<AuditOutput>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcgReport {
    pub mode: BudgetMode,
    pub forbidden: Option<Vec<[usize; 2]>>,
    /// How the profile was obtained: a file, a stable matching, the tight-budget
    /// construction or local search.
    pub source: Option<String>,
    pub profile: Option<ProfileDoc>,
    pub value: Option<Rational>,
    pub optimum: Rational,
    pub verdict: Option<PeVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub matching: MatchingDoc,
    pub value: Rational,
    pub stable: bool,
    pub blocking: Vec<PairVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckReport {
    Stability(StabilityReport),
    Equilibrium(PeVerdict),
}

struct Ctx<'a> {
    global: &'a GlobalArgs,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn limits(&self) -> Limits {
        let d = Limits::default();
        match self.global.max_n {
            Some(n) => Limits { optimum_n: d.optimum_n.max(n), enumeration_n: n },
            None => d,
        }
    }

    fn emit<T: Serialize>(&mut self, report: &T, table: impl FnOnce(&T) -> String) -> Result<(), Error> {
        let text = match self.global.format {
            Format::Json => serde_json::to_string_pretty(report)?,
            Format::Table => table(report),
        };
        writeln!(self.out, "{}", text.trim_end())?;
        Ok(())
    }

    fn friendship(&self) -> Result<Option<FriendshipVector>, Error> {
        self.global.alpha.clone().map(|a| FriendshipVector::new(a.0)).transpose()
    }

    fn load_instance(&self, path: &Path) -> Result<GameInstance, Error> {
        let inst = GameInstance::from_json(&read(path)?)?;
        Ok(match self.friendship()? {
            Some(f) => inst.with_friendship(f),
            None => inst,
        })
    }

    fn load_game(&self, path: &Path, mode: Option<BudgetMode>) -> Result<ContributionGame, Error> {
        let mut doc: crate::ccg::CcgDoc = serde_json::from_str(&read(path)?)?;
        if let Some(a) = &self.global.alpha {
            doc.alpha = a.0.clone();
        }
        if let Some(m) = mode {
            doc.mode = m;
        }
        ContributionGame::from_doc(doc)
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn is_contribution_game(text: &str) -> bool {
    serde_json::from_str::<Value>(text).is_ok_and(|v| v.get("functions").is_some())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut ctx = Ctx { global: &cli.global, out };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(&mut ctx, a),
        Command::Solve(a) => cmd_solve(&mut ctx, a),
        Command::Audit(a) => cmd_audit(&mut ctx, a),
        Command::Dynamics(a) => cmd_dynamics(&mut ctx, a),
        Command::Ccg(a) => cmd_ccg(&mut ctx, a),
        Command::Check(a) => cmd_check(&mut ctx, a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_gen(ctx: &mut Ctx, a: &GenArgs) -> Result<i32, Error> {
    let alpha = ctx.global.alpha.clone().map(|a| a.0).unwrap_or_default();
    let matching_game = |inst: GameInstance| -> Result<String, Error> {
        Ok(match ctx.friendship()? {
            Some(f) => inst.with_friendship(f),
            None => inst,
        }
        .to_json())
    };
    let text = match a.gadget {
        Gadget::Path3 => matching_game(gen_path3_equal())?,
        Gadget::PosTight => matching_game(gen_pos_tight(&a.alpha1, &a.eps)?)?,
        Gadget::MatthewPoaTight => matching_game(gen_matthew_poa_tight(&a.big_r, a.pos.then_some(&a.eps))?)?,
        Gadget::FriendshipRsTight => {
            let variant = match a.variant {
                Variant::Poa => RsVariant::Poa,
                Variant::Pos => RsVariant::Pos { eps: a.eps.clone() },
            };
            matching_game(gen_friendship_rs_tight(&a.big_r, &a.alpha1, &variant)?)?
        }
        Gadget::NonexistenceMatthew => match a.attempts {
            None => matching_game(gen_nonexistence_friendship_matthew())?,
            Some(attempts) => match search_nonexistence_matthew(ctx.global.seed, attempts) {
                Some((inst, _)) => matching_game(inst)?,
                None => {
                    eprintln!("no instance found in {attempts} attempts");
                    return Ok(2);
                }
            },
        },
        Gadget::CyclicTriangle => matching_game(gen_cyclic_triangle())?,
        Gadget::Random => {
            let spec =
                RandomSpec { n: a.n, density: a.density, rewards: (a.min_reward, a.max_reward), rule: a.rule, alpha };
            gen_random(ctx.global.seed, &spec)?.to_json()
        }
        Gadget::RandomCcg => {
            let spec = RandomCcgSpec {
                n: a.n,
                density: a.density,
                families: a.families.clone(),
                split: a.split,
                mode: a.mode,
                alpha,
            };
            gen_random_ccg(ctx.global.seed, &spec)?.to_json()
        }
        Gadget::TightBudgetPath => gen_tight_budget_path(&a.eps, &a.alpha1, a.mode)?.to_json(),
        Gadget::Augment => {
            let input = a.input.as_ref().ok_or_else(|| Error::InvalidInstance("augment needs --input".into()))?;
            matching_game(augment_with_auxiliary_neighbors(&ctx.load_instance(input)?, &a.eps)?)?
        }
    };
    match &a.out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => writeln!(ctx.out, "{text}")?,
    }
    Ok(0)
}

fn cmd_solve(ctx: &mut Ctx, a: &SolveArgs) -> Result<i32, Error> {
    let inst = ctx.load_instance(&a.instance)?;
    let limits = ctx.limits();
    let method = match a.method {
        SolveMethod::Auto if inst.is_equal_sharing() => SolveMethod::Brbp,
        SolveMethod::Auto if inst.friendship().is_zero() && detect_preference_cycle(&inst, a.prefs).is_none() => {
            SolveMethod::Greedy
        }
        SolveMethod::Auto => SolveMethod::SrpQ,
        m => m,
    };
    let mut report = SolveReport {
        method: a.method,
        solver: String::new(),
        matching: None,
        value: None,
        stable: false,
        blocking_pairs: Vec::new(),
        deviations: None,
        termination: None,
    };
    let found = match method {
        SolveMethod::Brbp => {
            report.solver = "brbp".into();
            let (start, _) = max_weight_matching_with(&inst, limits.optimum_n)?;
            let (m, trace) = run_brbp_from(&inst, start, brbp_cap(inst.edge_count()))?;
            report.deviations = Some(trace.len());
            report.termination = Some(trace.termination);
            Some(m)
        }
        SolveMethod::Greedy => {
            report.solver = "greedy".into();
            Some(greedy_mutual_best(&inst, a.prefs)?.matching)
        }
        _ => {
            report.solver = "srp-q".into();
            solve_srp_q_with(&inst, limits.enumeration_n)?
        }
    };
    // Incomplete methods fall back to enumeration when run in auto mode.
    let found = match found {
        Some(m) if a.method == SolveMethod::Auto && !is_stable(&inst, &m) => {
            report.solver.push_str("+enumeration");
            enumerate_stable_matchings_with(&inst, limits.enumeration_n)?.into_iter().next()
        }
        other => other,
    };
    if let Some(m) = &found {
        report.value = Some(matching_value(&inst, m));
        report.stable = is_stable(&inst, m);
        report.blocking_pairs = crate::matching::blocking_pairs(&inst, m).into_iter().map(|(u, v)| [u, v]).collect();
        report.matching = Some(m.to_doc());
    }
    let code = if report.stable { 0 } else { 2 };
    ctx.emit(&report, |r| {
        let mut s = format!("solver    {}\n", r.solver);
        match (&r.matching, &r.value) {
            (Some(m), Some(v)) => {
                let _ = writeln!(s, "matching  {:?}\nvalue     {v}\nstable    {}", m.pairs, r.stable);
            }
            _ => s.push_str("matching  none\n"),
        }
        if let Some(d) = r.deviations {
            let _ = writeln!(s, "steps     {d}");
        }
        s
    })?;
    Ok(code)
}

fn audit_one(
    text: &str,
    ctx_alpha: Option<&Vec<Rational>>,
    limits: Limits,
    grid_k: usize,
    search_cap: usize,
) -> Result<AuditOutput, Error> {
    if is_contribution_game(text) {
        let mut doc: crate::ccg::CcgDoc = serde_json::from_str(text)?;
        if let Some(a) = ctx_alpha {
            doc.alpha = a.clone();
        }
        return Ok(AuditOutput::Contribution(ccg_audit(&ContributionGame::from_doc(doc)?, grid_k, search_cap)?));
    }
    let mut inst = GameInstance::from_json(text)?;
    if let Some(a) = ctx_alpha {
        inst = inst.with_friendship(FriendshipVector::new(a.clone())?);
    }
    Ok(AuditOutput::Matching(audit_bounds_with(&inst, limits)?))
}

fn audit_table(out: &AuditOutput) -> String {
    let opt = |r: &Option<Rational>| r.as_ref().map_or("none".to_string(), Rational::to_string);
    let mut s = String::new();
    match out {
        AuditOutput::Matching(r) => {
            let _ = writeln!(s, "rule {}  optimum {}  stable {}", r.rule, r.optimum, r.stable.len());
            let _ = writeln!(s, "poa {}  pos {}  q {}  q' {}", opt(&r.poa), opt(&r.pos), opt(&r.q), opt(&r.q_prime));
            for b in &r.bounds {
                let _ = writeln!(
                    s,
                    "  {:<24} {:>12} <= {:<12} {}",
                    b.name,
                    opt(&b.observed),
                    b.bound.to_string(),
                    if b.holds { "ok" } else { "VIOLATED" }
                );
            }
        }
        AuditOutput::Contribution(r) => {
            let _ = writeln!(s, "optimum {}  bound {}  equilibria {}", r.optimum, opt(&r.bound), r.equilibria.len());
            for e in &r.equilibria {
                let _ = writeln!(s, "  {:<40} value {:<10} ratio {}", e.source, e.value.to_string(), e.ratio);
            }
        }
    }
    s
}

fn cmd_audit(ctx: &mut Ctx, a: &AuditArgs) -> Result<i32, Error> {
    let text = read(&a.input)?;
    let limits = ctx.limits();
    let (alpha, grid_k) = (ctx.global.alpha.clone().map(|a| a.0), ctx.global.grid_k);
    if let Ok(paths) = serde_json::from_str::<Vec<String>>(&text) {
        let base = a.input.parent().unwrap_or(Path::new("."));
        let entries: Vec<ManifestEntry> = paths
            .par_iter()
            .map(|p| {
                let full = base.join(p);
                let result = read(&full).and_then(|t| audit_one(&t, alpha.as_ref(), limits, grid_k, a.search_cap));
                match result {
                    Ok(r) => ManifestEntry { path: p.clone(), report: Some(r), error: None },
                    Err(e) => ManifestEntry { path: p.clone(), report: None, error: Some(e.to_string()) },
                }
            })
            .collect();
        let codes: Vec<i32> = entries.iter().map(|e| e.report.as_ref().map_or(1, AuditOutput::exit_code)).collect();
        let code = if codes.contains(&1) { 1 } else { codes.into_iter().max().unwrap_or(0) };
        ctx.emit(&entries, |es| {
            es.iter()
                .map(|e| match (&e.report, &e.error) {
                    (Some(r), _) => format!("== {}\n{}", e.path, audit_table(r)),
                    (None, err) => format!("== {}\nerror: {}\n", e.path, err.as_deref().unwrap_or("")),
                })
                .collect()
        })?;
        return Ok(code);
    }
    let report = audit_one(&text, alpha.as_ref(), limits, grid_k, a.search_cap)?;
    ctx.emit(&report, audit_table)?;
    Ok(report.exit_code())
}

fn cmd_dynamics(ctx: &mut Ctx, a: &DynamicsArgs) -> Result<i32, Error> {
    let inst = ctx.load_instance(&a.instance)?;
    let limits = ctx.limits();
    let default_start = if a.method == DynamicsMethod::Brbp { "optimum" } else { "empty" };
    let start_spec = a.start.as_deref().unwrap_or(default_start);
    let start = match start_spec {
        "optimum" => max_weight_matching_with(&inst, limits.optimum_n)?.0,
        "empty" => Matching::empty(inst.node_count()),
        path => Matching::from_json(inst.graph(), &read(Path::new(path))?)?,
    };
    let (m, trace) = match a.method {
        DynamicsMethod::Brbp => run_brbp_from(&inst, start, a.cap.unwrap_or(brbp_cap(inst.edge_count())))?,
        DynamicsMethod::Bbp => run_best_blocking_pair(&inst, start, a.cap.unwrap_or(ARBITRARY_DEFAULT_CAP))?,
        DynamicsMethod::Arbitrary => {
            run_arbitrary_dynamics(&inst, start, ctx.global.seed, a.cap.unwrap_or(ARBITRARY_DEFAULT_CAP))?
        }
    };
    // Lemmas hold for runs from a maximum-weight matching.
    let lemmas = (a.method == DynamicsMethod::Brbp && start_spec == "optimum").then(|| assert_trace_lemmas(&trace));
    let summary = DynamicsSummary {
        kind: "summary".into(),
        method: a.method,
        steps: trace.len(),
        phases: trace.phase_starts.len(),
        cap: trace.cap,
        termination: trace.termination,
        initial_value: trace.initial_value.clone(),
        matching: m.to_doc(),
        value: matching_value(&inst, &m),
        stable: is_stable(&inst, &m),
        lemmas_pass: lemmas.as_ref().map(LemmaReport::passed),
        lemmas,
    };
    match ctx.global.format {
        Format::Json => {
            for line in trace.json_lines() {
                writeln!(ctx.out, "{line}")?;
            }
            writeln!(ctx.out, "{}", serde_json::to_string(&summary)?)?;
        }
        Format::Table => {
            for (i, s) in trace.steps.iter().enumerate() {
                let mark = if trace.phase_starts.contains(&i) { "*" } else { " " };
                writeln!(
                    ctx.out,
                    "{mark}{:>6}  {:<16} {:?}  r {}  value {}",
                    i + 1,
                    serde_json::to_value(s.deviation.kind)?.as_str().unwrap_or(""),
                    s.deviation.pair,
                    s.r,
                    s.value
                )?;
            }
            writeln!(
                ctx.out,
                "{} steps, {} phases, {:?}; final {:?} value {} stable {}",
                summary.steps,
                summary.phases,
                summary.termination,
                summary.matching.pairs,
                summary.value,
                summary.stable
            )?;
            if let Some(pass) = summary.lemmas_pass {
                writeln!(ctx.out, "trace lemmas {}", if pass { "pass" } else { "FAIL" })?;
            }
        }
    }
    Ok(if trace.converged() { 0 } else { 2 })
}

fn ccg_table(r: &CcgReport) -> String {
    let mut s = format!("mode {:?}  optimum {}\n", r.mode, r.optimum);
    if let Some(f) = &r.forbidden {
        let _ = writeln!(s, "forbidden {f:?}");
    }
    if let (Some(src), Some(p)) = (&r.source, &r.profile) {
        let _ = writeln!(s, "profile from {src}, value {}", r.value.as_ref().map_or("-".into(), Rational::to_string));
        for al in &p.allocations {
            let _ = writeln!(s, "  {:?}  {} / {}", al.edge, al.s_u, al.s_v);
        }
    }
    match &r.verdict {
        Some(v) if v.equilibrium => {
            let _ = writeln!(s, "pairwise equilibrium ({}, K = {})", v.certification, v.grid_k);
        }
        Some(v) => {
            let w = v.witness.as_ref().expect("witness when not an equilibrium");
            let _ =
                writeln!(s, "not an equilibrium: {} move by {:?}, {:?} -> {:?}", w.kind, w.movers, w.before, w.after);
        }
        None => s.push_str("no equilibrium found\n"),
    }
    s
}

fn cmd_ccg(ctx: &mut Ctx, a: &CcgArgs) -> Result<i32, Error> {
    let ccg = ctx.load_game(&a.game, a.mode)?;
    let g = ccg.graph();
    let k = ctx.global.grid_k;
    let forbidden = match ccg.mode() {
        BudgetMode::Exact => detect_forbidden_edges(&ccg).ok(),
        BudgetMode::AtMost => None,
    };
    let (source, profile) = if let Some(path) = &a.profile {
        let doc: ProfileDoc = serde_json::from_str(&read(path)?)?;
        (Some(path.display().to_string()), Some(ccg.profile_from_doc(&doc)?))
    } else {
        let mut found = None;
        if ccg.mode() == BudgetMode::Exact {
            if let Ok(t) = tight_budget_equilibrium(&ccg) {
                found = Some(("tight budget".to_string(), t.profile));
            }
        } else if let Ok(game) = corresponding_matching_game(&ccg) {
            if let Some(m) = enumerate_stable_matchings_with(&game, ctx.limits().enumeration_n)?.into_iter().next() {
                found = Some((format!("stable matching {:?}", m.pairs()), matching_to_equilibrium(&ccg, &m)?));
            }
        }
        if found.is_none() {
            if let Some(p) = local_search(&ccg, uniform_profile(&ccg), k, a.search_cap)? {
                found = Some(("local search".to_string(), p));
            }
        }
        found.map_or((None, None), |(s, p)| (Some(s), Some(p)))
    };
    let verdict = profile.as_ref().map(|p| is_pairwise_equilibrium(&ccg, p, k)).transpose()?;
    let report = CcgReport {
        mode: ccg.mode(),
        forbidden: forbidden.map(|f| f.into_iter().map(|e| g.endpoints(e)).map(|(u, v)| [u, v]).collect()),
        source,
        value: profile.as_ref().map(|p| ccg.profile_value(p)),
        profile: profile.as_ref().map(|p| p.to_doc(g)),
        optimum: ccg.profile_value(&tight_social_optimum(&ccg)?),
        verdict,
    };
    ctx.emit(&report, ccg_table)?;
    Ok(match &report.verdict {
        Some(v) if v.equilibrium => 0,
        _ => 2,
    })
}

fn cmd_check(ctx: &mut Ctx, a: &CheckArgs) -> Result<i32, Error> {
    let text = read(&a.input)?;
    let report = if is_contribution_game(&text) {
        let path = a.profile.as_ref().ok_or_else(|| Error::InvalidProfile("checking a game needs --profile".into()))?;
        let ccg = ctx.load_game(&a.input, None)?;
        let p = ccg.profile_from_doc(&serde_json::from_str(&read(path)?)?)?;
        CheckReport::Equilibrium(is_pairwise_equilibrium(&ccg, &p, ctx.global.grid_k)?)
    } else {
        let path = a
            .matching
            .as_ref()
            .ok_or_else(|| Error::InvalidMatching("checking an instance needs --matching".into()))?;
        let inst = ctx.load_instance(&a.input)?;
        let m = Matching::from_json(inst.graph(), &read(path)?)?;
        let blocking = inst
            .graph()
            .edges()
            .iter()
            .map(|&(u, v)| is_improving_pair(&inst, &m, u, v))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|v| v.blocking)
            .collect::<Vec<_>>();
        CheckReport::Stability(StabilityReport {
            matching: m.to_doc(),
            value: matching_value(&inst, &m),
            stable: blocking.is_empty(),
            blocking,
        })
    };
    let ok = match &report {
        CheckReport::Stability(s) => s.stable,
        CheckReport::Equilibrium(v) => v.equilibrium,
    };
    ctx.emit(&report, |r| match r {
        CheckReport::Stability(s) => {
            let mut t = format!("matching {:?} value {} stable {}\n", s.matching.pairs, s.value, s.stable);
            for b in &s.blocking {
                let kind = b
                    .kind
                    .map(|k| serde_json::to_value(k).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default());
                let _ = writeln!(t, "  blocking {:?} ({})", b.pair, kind.as_deref().unwrap_or("-"));
            }
            t
        }
        CheckReport::Equilibrium(v) => match &v.witness {
            None => format!("pairwise equilibrium ({}, K = {})\n", v.certification, v.grid_k),
            Some(w) => {
                format!("not an equilibrium: {} move by {:?}, {:?} -> {:?}\n", w.kind, w.movers, w.before, w.after)
            }
        },
    })?;
    Ok(if ok { 0 } else { 2 })
}
