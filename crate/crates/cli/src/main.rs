//! Command line front end for the ensemble toolkit: voting, evaluation,
//! agreement and correlation analysis, fold selection, augmentation budgets,
//! stratified splits, configuration search, flip analysis, and the synthetic
//! pool simulator, all driven from a prediction-pool manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gatevote_core::analysis::flip_analysis;
use gatevote_core::domain::{
    default_threshold, Branch, ClassLabel, ClassMode, EnsembleConfig, Role, VoterMeta,
};
use gatevote_core::io::atomic_write;
use gatevote_core::io::formats::{read_gold, read_labels, read_sim_config, render_labels};
use gatevote_core::io::manifest::{load_pool, write_pool, LoadedPool};
use gatevote_core::io::report::{
    alpha_table, budget_table, eval_table, flip_table, folds_table, rank_table, search_table,
    split_table, structured, trace_jsonl, Format,
};
use gatevote_core::metrics::{evaluate, pairwise_alpha_decomposition};
use gatevote_core::search::{search_top, SearchOptions, SearchSpace};
use gatevote_core::selection::{
    augmentation_budget, rank_specialists, stratified_kfold, top_k_folds, FoldProfile,
    SplitSample, DEFAULT_CAP, DEFAULT_TARGET,
};
use gatevote_core::simulator::simulate;
use gatevote_core::voting::ensemble_predict_traced;

/// Ensemble classification over cached per-voter prediction files.
#[derive(Parser)]
#[command(name = "gatevote", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble over the pool and emit its predictions.
    Vote(VoteArgs),
    /// Score a prediction file against gold labels.
    Eval(EvalArgs),
    /// Decompose pool agreement into within- and cross-branch alphas.
    Agreement(AgreementArgs),
    /// Rank branches by fold-profile correlation against a reference branch.
    Correlate(CorrelateArgs),
    /// Keep each branch's best folds by cross-validation F1.
    SelectFolds(SelectFoldsArgs),
    /// Plan per-class synthetic-sample budgets.
    Budget(BudgetArgs),
    /// Assign whole dialogues to stratified cross-validation folds.
    Split(SplitArgs),
    /// Exhaustively score ensemble configurations and rank the best.
    Search(SearchArgs),
    /// Compare a base ensemble against base plus a probe branch.
    Flips(FlipsArgs),
    /// Generate a synthetic prediction pool from a simulator config.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// Fixed-width text, reals rounded to 3 decimals.
    Table,
    /// Pretty JSON that round-trips losslessly.
    Structured,
}

impl FormatArg {
    fn format(self) -> Format {
        match self {
            FormatArg::Table => Format::Table,
            FormatArg::Structured => Format::Structured,
        }
    }
}

/// Output controls shared by every report-emitting subcommand.
#[derive(Args)]
struct Emit {
    /// Report format.
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Write output to this file (atomic replace) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Emit {
    fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => Ok(atomic_write(path, text.as_bytes())?),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct ManifestArg {
    /// Pool manifest path.
    #[arg(long, env = "GATEVOTE_MANIFEST")]
    manifest: PathBuf,
}

impl ManifestArg {
    fn load(&self) -> Result<LoadedPool> {
        load_pool(&self.manifest)
            .with_context(|| format!("loading pool manifest {}", self.manifest.display()))
    }
}

#[derive(Args)]
struct VoteArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Gatekeeper branch spec BRANCH[:f0,f1,...]; repeatable.
    #[arg(long = "gatekeepers", value_name = "SPEC", required = true)]
    gatekeepers: Vec<String>,
    /// Specialist branch spec BRANCH[:f0,f1,...]; repeatable.
    #[arg(long = "specialists", value_name = "SPEC")]
    specialists: Vec<String>,
    /// Override threshold; defaults to a gatekeeper majority.
    #[arg(long)]
    threshold: Option<usize>,
    /// Tie-break class.
    #[arg(long, default_value_t = 7)]
    tie_break: u8,
    /// Count gatekeeper 0 votes in the defence tally (sensitivity analysis).
    #[arg(long)]
    count_zero_votes: bool,
    /// Write the per-sample voting trace to this file as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction label file (sample_id,label).
    #[arg(long)]
    pred: PathBuf,
    /// Gold label file (sample_id,label).
    #[arg(long)]
    gold: PathBuf,
    /// Classes averaged by macro-F1, e.g. "1-8" or "0,5,7".
    #[arg(long, default_value = "1-8")]
    classes: String,
    /// Average only over subset classes present in gold or predictions.
    #[arg(long)]
    skip_absent: bool,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct AgreementArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Branch whose fold profile every other branch is ranked against.
    #[arg(long)]
    reference: String,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct SelectFoldsArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Folds kept per branch.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct BudgetArgs {
    /// Nine comma-separated original counts for classes 0..8; defaults to
    /// the manifest's gold class counts.
    #[arg(long)]
    counts: Option<String>,
    /// Pool manifest path, read only when --counts is absent.
    #[arg(long, env = "GATEVOTE_MANIFEST")]
    manifest: Option<PathBuf>,
    /// Target sample count per class.
    #[arg(long, default_value_t = DEFAULT_TARGET)]
    target: usize,
    /// Cap on synthetic samples as a multiple of the original count.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Classes excluded from augmentation; empty string excludes none.
    #[arg(long, default_value = "0,7")]
    exclude: String,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Fold count.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed for the greedy pass's shuffles and tie-breaks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the dialogue-to-fold assignment CSV (dialogue_id,fold) here.
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Ensemble sizes to enumerate, comma-separated.
    #[arg(long, default_value = "6,9,12")]
    sizes: String,
    /// Override thresholds to sweep, comma-separated.
    #[arg(long, default_value = "1,2,3")]
    thresholds: String,
    /// Rows kept per ensemble size.
    #[arg(long, default_value_t = 5)]
    top_n: usize,
    /// Voters each branch contributes (its best folds by f1_cv).
    #[arg(long, default_value_t = 3)]
    folds_per_branch: usize,
    /// Tie-break class.
    #[arg(long, default_value_t = 7)]
    tie_break: u8,
    /// Force a branch into the gatekeeper candidate pool; repeatable.
    #[arg(long = "as-gatekeeper", value_name = "BRANCH")]
    as_gatekeeper: Vec<String>,
    /// Force a branch into the specialist candidate pool; repeatable.
    #[arg(long = "as-specialist", value_name = "BRANCH")]
    as_specialist: Vec<String>,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct FlipsArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Gatekeeper branch spec shared by both ensembles; repeatable.
    #[arg(long = "gatekeepers", value_name = "SPEC", required = true)]
    gatekeepers: Vec<String>,
    /// Base specialist branch spec BRANCH[:f0,f1,...]; repeatable.
    #[arg(long = "base", value_name = "SPEC")]
    base: Vec<String>,
    /// Probe branch spec added on top of the base ensemble.
    #[arg(long = "probe", value_name = "SPEC")]
    probe: String,
    /// Boundary classes whose flips are counted separately.
    #[arg(long, default_value = "6,7")]
    boundary: String,
    /// Override threshold; defaults to a gatekeeper majority.
    #[arg(long)]
    threshold: Option<usize>,
    /// Tie-break class.
    #[arg(long, default_value_t = 7)]
    tie_break: u8,
    /// Count gatekeeper 0 votes in the defence tally (sensitivity analysis).
    #[arg(long)]
    count_zero_votes: bool,
    #[command(flatten)]
    emit: Emit,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulator config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the generated pool; prints the manifest path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Vote(args) => run_vote(args),
        Command::Eval(args) => run_eval(args),
        Command::Agreement(args) => run_agreement(args),
        Command::Correlate(args) => run_correlate(args),
        Command::SelectFolds(args) => run_select_folds(args),
        Command::Budget(args) => run_budget(args),
        Command::Split(args) => run_split(args),
        Command::Search(args) => run_search(args),
        Command::Flips(args) => run_flips(args),
        Command::Simulate(args) => run_simulate(args),
    }
}

/// One requested branch: its id and, optionally, explicit fold indexes.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BranchSpec {
    branch_id: String,
    folds: Option<Vec<u32>>,
}

/// Parses branch specs from one flag value. Grammar: specs separated by
/// commas, each `BRANCH` or `BRANCH:f0,f1,...`. A purely numeric token
/// extends the fold list of the preceding spec, so `A:0,1,B` reads as
/// branch A with folds 0 and 1 plus branch B with all folds.
fn parse_branch_specs(value: &str) -> Result<Vec<BranchSpec>> {
    let mut specs: Vec<BranchSpec> = Vec::new();
    for token in value.split(',') {
        let token = token.trim();
        if token.is_empty() {
            bail!("empty branch spec in {value:?}");
        }
        if let Some((branch, fold)) = token.split_once(':') {
            if branch.is_empty() {
                bail!("missing branch name in spec {token:?}");
            }
            let fold = parse_fold(fold, value)?;
            specs.push(BranchSpec {
                branch_id: branch.to_string(),
                folds: Some(vec![fold]),
            });
        } else if token.chars().all(|c| c.is_ascii_digit()) {
            let fold = parse_fold(token, value)?;
            match specs.last_mut().and_then(|s| s.folds.as_mut()) {
                Some(folds) => folds.push(fold),
                None => bail!("fold index {token} must follow a BRANCH:fold spec in {value:?}"),
            }
        } else {
            specs.push(BranchSpec {
                branch_id: token.to_string(),
                folds: None,
            });
        }
    }
    Ok(specs)
}

fn parse_fold(text: &str, value: &str) -> Result<u32> {
    text.parse()
        .map_err(|_| anyhow!("fold index {text:?} in {value:?} is not an integer"))
}

/// Parses every occurrence of a repeatable branch-spec flag.
fn parse_spec_flags(values: &[String]) -> Result<Vec<BranchSpec>> {
    let mut specs = Vec::new();
    for value in values {
        specs.extend(parse_branch_specs(value)?);
    }
    let mut seen = BTreeSet::new();
    for spec in &specs {
        if !seen.insert(spec.branch_id.as_str()) {
            bail!("branch {:?} given more than once", spec.branch_id);
        }
    }
    Ok(specs)
}

/// The voters a branch spec selects, ordered by fold index, plus the
/// branch's class mode.
fn resolve_branch(registry: &[VoterMeta], spec: &BranchSpec) -> Result<(Vec<String>, ClassMode)> {
    let members: Vec<&VoterMeta> = registry
        .iter()
        .filter(|m| m.branch_id == spec.branch_id)
        .collect();
    let by_fold: BTreeMap<u32, &VoterMeta> =
        members.iter().map(|m| (m.fold, *m)).collect();
    if members.is_empty() {
        let known: Vec<&str> = {
            let mut ids: Vec<&str> =
                registry.iter().map(|m| m.branch_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        };
        bail!(
            "unknown branch {:?}; the pool has {}",
            spec.branch_id,
            known.join(", ")
        );
    }
    if by_fold.len() != members.len() {
        bail!("branch {:?} has duplicate fold indexes", spec.branch_id);
    }
    let folds: Vec<u32> = match &spec.folds {
        Some(folds) => folds.clone(),
        None => by_fold.keys().copied().collect(),
    };
    let mut voter_ids = Vec::with_capacity(folds.len());
    for fold in folds {
        let meta = by_fold
            .get(&fold)
            .ok_or_else(|| anyhow!("branch {:?} has no fold {fold}", spec.branch_id))?;
        voter_ids.push(meta.voter_id.clone());
    }
    Ok((voter_ids, members[0].class_mode))
}

/// Resolves a flag's specs into one flat voter list; `nine_class` reports
/// whether any selected branch votes on all nine classes.
fn resolve_specs(
    registry: &[VoterMeta],
    specs: &[BranchSpec],
) -> Result<(Vec<String>, bool)> {
    let mut voter_ids = Vec::new();
    let mut nine_class = false;
    for spec in specs {
        let (ids, mode) = resolve_branch(registry, spec)?;
        voter_ids.extend(ids);
        nine_class |= mode == ClassMode::NineClass;
    }
    Ok((voter_ids, nine_class))
}

/// Parses a class set like "1-8", "0,5,7", or "1,3-5". An empty string is
/// the empty set.
fn parse_class_set(text: &str) -> Result<BTreeSet<ClassLabel>> {
    let mut classes = BTreeSet::new();
    for token in text.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let (lo, hi) = match token.split_once('-') {
            Some((lo, hi)) => (parse_class(lo)?, parse_class(hi)?),
            None => {
                let class = parse_class(token)?;
                (class, class)
            }
        };
        if hi < lo {
            bail!("empty class range {token:?}");
        }
        for value in lo.value()..=hi.value() {
            classes.insert(ClassLabel::new(value).expect("value between valid bounds"));
        }
    }
    Ok(classes)
}

fn parse_class(text: &str) -> Result<ClassLabel> {
    let value: u8 = text
        .trim()
        .parse()
        .map_err(|_| anyhow!("class {text:?} is not an integer 0..8"))?;
    Ok(ClassLabel::new(value)?)
}

fn parse_usize_set(text: &str, what: &str) -> Result<BTreeSet<usize>> {
    let mut values = BTreeSet::new();
    for token in text.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let value: usize = token
            .parse()
            .map_err(|_| anyhow!("{what} {token:?} is not an integer"))?;
        values.insert(value);
    }
    if values.is_empty() {
        bail!("no {what} given");
    }
    Ok(values)
}

/// The sample ids a pool-wide command runs over: the gold ids when the
/// manifest has gold, otherwise the named voter's ids.
fn sample_ids(pool: &LoadedPool, fallback_voter: &str) -> Vec<String> {
    if let Some(gold) = &pool.gold {
        return gold.ids().cloned().collect();
    }
    pool.predictions
        .iter()
        .find(|p| p.meta.voter_id == fallback_voter)
        .map(|p| p.entries.keys().cloned().collect())
        .unwrap_or_default()
}

fn run_vote(args: VoteArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let (gatekeepers, _) = resolve_specs(&pool.registry, &parse_spec_flags(&args.gatekeepers)?)?;
    let (specialists, nine_class) =
        resolve_specs(&pool.registry, &parse_spec_flags(&args.specialists)?)?;
    let threshold = match args.threshold {
        Some(t) => t,
        None => default_threshold(gatekeepers.len())?,
    };
    let first_voter = gatekeepers
        .first()
        .cloned()
        .ok_or_else(|| anyhow!("no gatekeeper voters selected"))?;
    let config = EnsembleConfig {
        gatekeeper_voters: gatekeepers,
        specialist_voters: specialists,
        threshold_t: threshold,
        tie_break: ClassLabel::new(args.tie_break)?,
        allow_nine_class_specialists: nine_class,
        count_zero_votes: args.count_zero_votes,
    };
    let samples = sample_ids(&pool, &first_voter);
    let traces = ensemble_predict_traced(&config, &pool.predictions, &samples)?;
    if let Some(path) = &args.trace {
        atomic_write(path, trace_jsonl(&traces)?.as_bytes())?;
    }
    let predictions: BTreeMap<String, ClassLabel> = traces
        .into_iter()
        .map(|t| (t.sample_id, t.winning_label))
        .collect();
    let text = match args.emit.format.format() {
        Format::Table => render_labels(&predictions),
        Format::Structured => structured(&predictions)?,
    };
    args.emit.write(&text)
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let gold = read_gold(&args.gold)?;
    let classes = parse_class_set(&args.classes)?;
    if classes.is_empty() {
        bail!("--classes selects no classes");
    }
    let report = evaluate(&pred, &gold, &classes, args.skip_absent)?;
    let text = match args.emit.format.format() {
        Format::Table => eval_table(&report),
        Format::Structured => structured(&report)?,
    };
    args.emit.write(&text)
}

fn run_agreement(args: AgreementArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let decomposition = pairwise_alpha_decomposition(&pool.predictions)?;
    let text = match args.emit.format.format() {
        Format::Table => alpha_table(&decomposition),
        Format::Structured => structured(&decomposition)?,
    };
    args.emit.write(&text)
}

fn branch_members(registry: &[VoterMeta]) -> BTreeMap<&str, Vec<&VoterMeta>> {
    let mut branches: BTreeMap<&str, Vec<&VoterMeta>> = BTreeMap::new();
    for meta in registry {
        branches.entry(meta.branch_id.as_str()).or_default().push(meta);
    }
    branches
}

fn run_correlate(args: CorrelateArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let branches = branch_members(&pool.registry);
    let reference = branches
        .get(args.reference.as_str())
        .ok_or_else(|| anyhow!("unknown reference branch {:?}", args.reference))?;
    let reference_profile = FoldProfile::of_branch(reference)?;
    let mut candidates = Vec::new();
    for (&branch_id, members) in &branches {
        if branch_id == args.reference {
            continue;
        }
        candidates.push((branch_id.to_string(), FoldProfile::of_branch(members)?));
    }
    if candidates.is_empty() {
        bail!("the pool has no branch besides the reference");
    }
    let rows = rank_specialists(&candidates, &reference_profile)?;
    let text = match args.emit.format.format() {
        Format::Table => rank_table(&rows),
        Format::Structured => structured(&rows)?,
    };
    args.emit.write(&text)
}

fn run_select_folds(args: SelectFoldsArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let mut selections = Vec::new();
    for members in branch_members(&pool.registry).values() {
        selections.push(top_k_folds(members, args.top_k)?);
    }
    let text = match args.emit.format.format() {
        Format::Table => folds_table(&selections),
        Format::Structured => structured(&selections)?,
    };
    args.emit.write(&text)
}

fn parse_counts(text: &str) -> Result<BTreeMap<ClassLabel, usize>> {
    let values: Vec<&str> = text.split(',').collect();
    if values.len() != 9 {
        bail!("--counts needs 9 comma-separated values, got {}", values.len());
    }
    let mut counts = BTreeMap::new();
    for (class, token) in ClassLabel::all().zip(values) {
        let count: usize = token
            .trim()
            .parse()
            .map_err(|_| anyhow!("count {token:?} is not an integer"))?;
        counts.insert(class, count);
    }
    Ok(counts)
}

fn run_budget(args: BudgetArgs) -> Result<()> {
    let counts = match (&args.counts, &args.manifest) {
        (Some(text), _) => parse_counts(text)?,
        (None, Some(path)) => {
            let pool = load_pool(path)
                .with_context(|| format!("loading pool manifest {}", path.display()))?;
            let gold = pool
                .gold
                .ok_or_else(|| anyhow!("manifest {} has no gold labels", path.display()))?;
            // all nine classes, zero-filled where gold has no samples
            let mut counts: BTreeMap<ClassLabel, usize> =
                ClassLabel::all().map(|c| (c, 0)).collect();
            counts.extend(gold.class_counts());
            counts
        }
        (None, None) => bail!("either --counts or --manifest is required"),
    };
    let excluded = parse_class_set(&args.exclude)?;
    let budget = augmentation_budget(&counts, args.target, args.cap, &excluded);
    let text = match args.emit.format.format() {
        Format::Table => budget_table(&budget),
        Format::Structured => structured(&budget)?,
    };
    args.emit.write(&text)
}

fn run_split(args: SplitArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let gold = pool
        .gold
        .as_ref()
        .ok_or_else(|| anyhow!("split needs gold labels in the manifest"))?;
    let dialogues = pool
        .dialogues
        .as_ref()
        .ok_or_else(|| anyhow!("split needs a dialogue map in the manifest"))?;
    let mut samples = Vec::with_capacity(gold.len());
    for (sample_id, label) in gold.iter() {
        let dialogue_id = dialogues
            .get(sample_id)
            .ok_or_else(|| anyhow!("sample {sample_id:?} is missing from the dialogue map"))?;
        samples.push(SplitSample {
            sample_id: sample_id.clone(),
            dialogue_id: dialogue_id.clone(),
            label,
        });
    }
    let report = stratified_kfold(&samples, args.k, args.seed)?;
    if let Some(path) = &args.assignment {
        let mut text = String::from("dialogue_id,fold\n");
        for (dialogue_id, fold) in &report.assignment.fold_of {
            text.push_str(dialogue_id);
            text.push(',');
            text.push_str(&fold.to_string());
            text.push('\n');
        }
        atomic_write(path, text.as_bytes())?;
    }
    let text = match args.emit.format.format() {
        Format::Table => split_table(&report),
        Format::Structured => structured(&report)?,
    };
    args.emit.write(&text)
}

fn run_search(args: SearchArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let gold = pool
        .gold
        .as_ref()
        .ok_or_else(|| anyhow!("search needs gold labels in the manifest"))?;
    let mut role_overrides = BTreeMap::new();
    for branch in &args.as_gatekeeper {
        role_overrides.insert(branch.clone(), Role::Gatekeeper);
    }
    for branch in &args.as_specialist {
        if role_overrides.insert(branch.clone(), Role::Specialist) == Some(Role::Gatekeeper) {
            bail!("branch {branch:?} named by both --as-gatekeeper and --as-specialist");
        }
    }
    let options = SearchOptions {
        folds_per_branch: args.folds_per_branch,
        ensemble_sizes: parse_usize_set(&args.sizes, "ensemble size")?,
        thresholds: parse_usize_set(&args.thresholds, "threshold")?,
        tie_break: ClassLabel::new(args.tie_break)?,
        role_overrides,
    };
    let space = SearchSpace::from_registry(&pool.registry, options)?;
    let result = search_top(&space, &pool.predictions, gold, args.top_n)?;
    let text = match args.emit.format.format() {
        Format::Table => search_table(&result),
        Format::Structured => structured(&result)?,
    };
    args.emit.write(&text)
}

fn run_flips(args: FlipsArgs) -> Result<()> {
    let pool = args.manifest.load()?;
    let (gatekeepers, _) = resolve_specs(&pool.registry, &parse_spec_flags(&args.gatekeepers)?)?;
    let (base, base_nine) = resolve_specs(&pool.registry, &parse_spec_flags(&args.base)?)?;
    let probe_specs = parse_spec_flags(std::slice::from_ref(&args.probe))?;
    let probe_spec = match probe_specs.as_slice() {
        [spec] => spec,
        _ => bail!("--probe takes exactly one branch spec"),
    };
    let (probe_ids, probe_nine) = resolve_specs(&pool.registry, &probe_specs)?;
    let probe_meta = pool
        .registry
        .iter()
        .find(|m| m.branch_id == probe_spec.branch_id)
        .expect("probe branch resolved against this registry");
    let probe_branch = Branch {
        branch_id: probe_meta.branch_id.clone(),
        role: probe_meta.role,
        method: probe_meta.method,
        class_mode: probe_meta.class_mode,
        base_model: probe_meta.base_model.clone(),
        aug: probe_meta.aug,
        voter_ids: probe_ids.clone(),
    };
    let threshold = match args.threshold {
        Some(t) => t,
        None => default_threshold(gatekeepers.len())?,
    };
    let first_voter = gatekeepers
        .first()
        .cloned()
        .ok_or_else(|| anyhow!("no gatekeeper voters selected"))?;
    let base_config = EnsembleConfig {
        gatekeeper_voters: gatekeepers.clone(),
        specialist_voters: base.clone(),
        threshold_t: threshold,
        tie_break: ClassLabel::new(args.tie_break)?,
        allow_nine_class_specialists: base_nine || probe_nine,
        count_zero_votes: args.count_zero_votes,
    };
    let mut full_config = base_config.clone();
    full_config.gatekeeper_voters = gatekeepers;
    full_config.specialist_voters = base.into_iter().chain(probe_ids).collect();
    let boundary = parse_class_set(&args.boundary)?;
    let samples = sample_ids(&pool, &first_voter);
    let report = flip_analysis(
        &base_config,
        &full_config,
        &pool.predictions,
        &probe_branch,
        &samples,
        &boundary,
    )?;
    let text = match args.emit.format.format() {
        Format::Table => flip_table(&report),
        Format::Structured => structured(&report)?,
    };
    args.emit.write(&text)
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut config = read_sim_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (gold, pool) = simulate(&config)?;
    let manifest_path = write_pool(&args.out, &pool, &gold)?;
    println!("{}", manifest_path.display());
    Ok(())
}
