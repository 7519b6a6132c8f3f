//! Command-line front end: argument parsing, budgets, thread pool setup and
//! JSON/CSV reports.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chains::{build_chains, count_chains, DEFAULT_MAX_CHAINS};
use crate::concentration::{lemma_trial, PartitePolynomial};
use crate::formulas::{brute_force_val, brute_force_val_gray, build_phi, eval_value, DEFAULT_MAX_CONSTRAINTS};
use crate::instances::{
    gen_flat_lcc, gen_heavy_pair, gen_planted, gen_random_matchings, heavy_pair_degree, solution_space,
    validate_normal_form, MatchingFamily,
};
use crate::kikuchi::KikuchiBudget;
use crate::partition::{decompose, verify_partition, DecomposeConfig, GreedyMode, VerifyConfig};
use crate::spectral::{certify, CertifyConfig};
use crate::{seed, Error, Result, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Parser, Debug, Serialize)]
#[command(name = "lcc-refute", version = VERSION, about = "Refutation pipeline for 3-query locally correctable codes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Budgets and threading shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Worker threads (0 lets the pool decide).
    #[arg(long, global = true, env = "LCC_REFUTE_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_CHAINS)]
    pub max_chains: u64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_CONSTRAINTS)]
    pub max_constraints: u64,
    /// Largest Kikuchi dimension for dense vectors.
    #[arg(long, global = true, default_value_t = 1 << 26)]
    pub max_dim: u128,
    /// Largest Kikuchi dimension for materialized matrices.
    #[arg(long, global = true, default_value_t = 1 << 21)]
    pub max_materialize_dim: u128,
    #[arg(long, global = true, default_value_t = 100_000_000)]
    pub max_nnz: u128,
}

impl Global {
    fn budget(&self) -> KikuchiBudget {
        KikuchiBudget { max_dim: self.max_dim, max_materialize_dim: self.max_materialize_dim, max_nnz: self.max_nnz }
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a matching family.
    Gen(GenArgs),
    /// Check a family file for structural and normal-form defects.
    Validate(FamilyArgs),
    /// Count and optionally dump chains.
    Chains(ChainsArgs),
    /// Build and verify the regular decomposition.
    Decompose(DecomposeArgs),
    /// Run the full pipeline and emit a certificate.
    Refute(RefuteArgs),
    /// Exhaustive value of the chain formula at a random `b`.
    Bruteforce(BruteArgs),
    /// Monte Carlo check of the partite tail bound.
    Concentration(ConcentrationArgs),
    /// Summarize existing reports.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Random,
    HeavyPair,
    FlatLcc,
    Planted,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AllParents,
    CompleteParents,
}

impl From<Mode> for GreedyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::AllParents => GreedyMode::AllParents,
            Mode::CompleteParents => GreedyMode::CompleteParents,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    /// Matching size.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Matchings sharing the heavy pair.
    #[arg(long, default_value_t = 8)]
    pub heavy: usize,
    /// Message dimension for the structured kinds.
    #[arg(long, default_value_t = 3)]
    pub dim: u32,
    /// Triples per matching for planted families.
    #[arg(long, default_value_t = 2)]
    pub cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FamilyArgs {
    pub family: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ChainsArgs {
    pub family: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub t: usize,
    /// Writes the enumerated chains, one per line.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct DecomposeArgs {
    pub family: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 4)]
    pub d: u64,
    #[arg(long, value_enum, default_value_t = Mode::AllParents)]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Includes chain ids of every piece.
    #[arg(long)]
    pub with_chains: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Per-level piece counts as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RefuteArgs {
    pub family: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    #[arg(long, default_value_t = 4)]
    pub d: u64,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub level: Option<usize>,
    /// Overrides the pruning threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub big_gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = Mode::AllParents)]
    pub mode: Mode,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Inequality chain as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BruteArgs {
    pub family: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub b_seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ConcentrationArgs {
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub monomials: usize,
    /// Probability that a monomial touches a group.
    #[arg(long, default_value_t = 1.0)]
    pub fill: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    if cli.global.threads > 0 {
        // A pool set up earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global();
    }
    match execute(&cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VALIDATION,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_budget() {
                EXIT_BUDGET
            } else {
                EXIT_VALIDATION
            }
        }
    }
}

/// Report envelope: command, version, resolved config, result and verdict.
fn envelope(cli: &Cli, name: &str, ok: bool, result: Value) -> Value {
    json!({
        "command": name,
        "version": VERSION,
        "config": { "global": cli.global, "args": cli.command },
        "ok": ok,
        "result": result,
    })
}

fn emit(doc: &Value, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<MatchingFamily> {
    MatchingFamily::load(path).map_err(|e| match e {
        Error::Parse(p) => Error::invalid(format!("{}: line {}, column {}: {p}", path.display(), p.line(), p.column())),
        other => other,
    })
}

fn execute(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => {
            let fam = match a.kind {
                Kind::Random => gen_random_matchings(a.n, a.m, a.seed)?,
                Kind::HeavyPair => gen_heavy_pair(a.n, a.m, a.heavy, a.seed)?,
                Kind::FlatLcc => gen_flat_lcc(a.dim)?.0,
                Kind::Planted => gen_planted(a.dim, a.cap, a.seed)?,
            };
            fam.save(&a.output)?;
            let result = json!({
                "path": a.output,
                "n": fam.n,
                "edges": fam.edge_count(),
                "min_matching": fam.min_matching_size(),
                "max_matching": fam.max_matching_size(),
            });
            emit(&envelope(cli, "gen", true, result), None)?;
            Ok(true)
        }
        Command::Validate(a) => {
            let fam = load(&a.family)?;
            let structural = fam.structural_violations();
            let (dimension, violations) = if structural.is_empty() {
                let sol = solution_space(&fam)?;
                let v = validate_normal_form(&fam, &sol);
                (Some(sol.dimension), v)
            } else {
                (None, structural)
            };
            let ok = violations.is_empty();
            let heavy = heavy_pair_degree(&fam);
            let result = json!({
                "n": fam.n,
                "field_char": fam.field_char,
                "edges": fam.edge_count(),
                "min_matching": fam.min_matching_size(),
                "max_matching": fam.max_matching_size(),
                "delta_eff": fam.delta_eff(),
                "heavy_pair_degree": heavy.degree,
                "dimension": dimension,
                "violations": violations,
            });
            emit(&envelope(cli, "validate", ok, result), a.output.as_deref())?;
            Ok(ok)
        }
        Command::Chains(a) => {
            let fam = load(&a.family)?;
            let counts = count_chains(&fam, a.t);
            let mut result = json!({
                "t": a.t,
                "total": counts.total.to_string(),
                "per_head": counts.per_head.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            if let Some(path) = &a.dump {
                let cs = build_chains(&fam, a.t, g.max_chains)?;
                std::fs::write(path, cs.dump())?;
                result["dumped"] = json!(cs.len());
            }
            emit(&envelope(cli, "chains", true, result), a.output.as_deref())?;
            Ok(true)
        }
        Command::Decompose(a) => {
            let fam = load(&a.family)?;
            let cs = build_chains(&fam, a.r, g.max_chains)?;
            let cfg = DecomposeConfig { mode: a.mode.into(), ..DecomposeConfig::new(a.d) };
            let part = decompose(&fam, &cs, &cfg)?;
            let report = verify_partition(&fam, &part, &cs, &VerifyConfig { seed: a.seed, ..VerifyConfig::new(a.d) });
            let ok = report.all_pass();
            if let Some(path) = &a.csv {
                let rows: Vec<Vec<String>> = (0..=a.r)
                    .map(|t| vec![t.to_string(), part.count_at(t).to_string(), report.max_piece_sizes[t].to_string()])
                    .collect();
                write_csv(path, &["t", "pieces", "max_piece_size"], &rows)?;
            }
            let result = json!({ "partition": part.to_json(a.with_chains), "verification": report });
            emit(&envelope(cli, "decompose", ok, result), a.output.as_deref())?;
            Ok(ok)
        }
        Command::Refute(a) => {
            let fam = load(&a.family)?;
            let cfg = CertifyConfig {
                trials: a.trials,
                seed: a.seed,
                level: a.level,
                threshold: a.threshold,
                gamma: a.gamma,
                big_gamma: a.big_gamma,
                c: a.c,
                mode: a.mode.into(),
                max_chains: g.max_chains,
                max_constraints: g.max_constraints,
                budget: g.budget(),
                ..CertifyConfig::new(a.r, a.ell, a.d)
            };
            let cert = certify(&fam, &cfg)?;
            if let Some(path) = &a.csv {
                let rows: Vec<Vec<String>> = cert
                    .inequality_chain
                    .iter()
                    .map(|c| vec![c.name.clone(), c.lhs.to_string(), c.rhs.to_string(), c.holds.to_string()])
                    .collect();
                write_csv(path, &["inequality", "lhs", "rhs", "holds"], &rows)?;
            }
            let ok = cert.sound;
            let mut doc = envelope(cli, "refute", ok, serde_json::to_value(&cert)?);
            // Certificates keep their fields at the top level too.
            for key in ["k_bound", "k_ldc", "k_true", "sound"] {
                doc[key] = doc["result"][key].clone();
            }
            emit(&doc, a.output.as_deref())?;
            Ok(ok)
        }
        Command::Bruteforce(a) => {
            let fam = load(&a.family)?;
            let sol = solution_space(&fam)?;
            let cs = build_chains(&fam, a.r, g.max_chains)?;
            let inst = build_phi(&fam, &cs, &sol.info_set, g.max_constraints)?;
            let mut rng = seed::rng(a.b_seed, "bruteforce-b");
            let b: Vec<u32> = (0..inst.heads.len()).map(|_| rng.gen_range(0..2)).collect();
            let (val, argmax) = brute_force_val(&inst, &b)?;
            let at_argmax = eval_value(&inst, &b, &argmax, None)?;
            let gray = brute_force_val_gray(&inst, &b)?;
            let ok = val == at_argmax && val == gray;
            let result = json!({
                "constraints": inst.constraints.len(),
                "b": b,
                "val": val,
                "eval_at_argmax": at_argmax,
                "val_gray": gray,
                "argmax": argmax,
            });
            emit(&envelope(cli, "bruteforce", ok, result), a.output.as_deref())?;
            Ok(ok)
        }
        Command::Concentration(a) => {
            let poly = PartitePolynomial::random(a.r, a.n, a.monomials, a.fill, a.seed);
            let trial = lemma_trial(&poly, a.p, a.beta, a.trials, a.seed)?;
            if let Some(path) = &a.csv {
                let row = vec![
                    trial.hypothesis.mu.to_string(),
                    trial.gamma.to_string(),
                    trial.beta.to_string(),
                    trial.bound.threshold.to_string(),
                    trial.bound.bound.to_string(),
                    trial.tail.frequency.to_string(),
                    trial.tail.stderr.to_string(),
                ];
                write_csv(path, &["mu", "gamma", "beta", "threshold", "bound", "frequency", "stderr"], &[row])?;
            }
            let ok = trial.holds;
            emit(&envelope(cli, "concentration", ok, serde_json::to_value(&trial)?), a.output.as_deref())?;
            Ok(ok)
        }
        Command::Report(a) => {
            let mut entries = Vec::with_capacity(a.reports.len());
            for path in &a.reports {
                let text = std::fs::read_to_string(path)?;
                let doc: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::invalid(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))?;
                entries.push(json!({
                    "path": path,
                    "command": doc["command"],
                    "version": doc["version"],
                    "ok": doc["ok"].as_bool().unwrap_or(false),
                }));
            }
            let ok = entries.iter().all(|e| e["ok"] == json!(true));
            if let Some(path) = &a.csv {
                let rows: Vec<Vec<String>> = entries
                    .iter()
                    .map(|e| {
                        vec![
                            e["path"].as_str().unwrap_or_default().to_string(),
                            e["command"].as_str().unwrap_or_default().to_string(),
                            e["ok"].to_string(),
                        ]
                    })
                    .collect();
                write_csv(path, &["path", "command", "ok"], &rows)?;
            }
            emit(&envelope(cli, "report", ok, json!({ "reports": entries })), a.output.as_deref())?;
            Ok(ok)
        }
    }
}
