//! Command-line front end. Every subcommand writes one JSON document to
//! stdout. Exit codes: 0 success, 1 usage error, 2 data or validation
//! error, 3 infeasible request.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{benchmark, compare_strategies, ScoreKind};
use crate::decoders::{decode_all_lengths, Strategy};
use crate::error::{Error, Result};
use crate::generator::{generate_batch, generate_instance, GeneratorConfig};
use crate::instance::{DecodingPath, Hypothesis, Instance, Translation};
use crate::io::{digest, load_instance, round_log, serialize_instance, LoadedInstance};
use crate::oracle::{argmax_translation, Oracle, DEFAULT_CAP};
use crate::scoring;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dagdecode", version, about = "Decode and analyze directed acyclic decoder lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Greedy,
    Lookahead,
    Viterbi,
    JointViterbi,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Greedy => Strategy::Greedy,
            StrategyArg::Lookahead => Strategy::Lookahead,
            StrategyArg::Viterbi => Strategy::Viterbi,
            StrategyArg::JointViterbi => Strategy::JointViterbi,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleMode {
    Path,
    Joint,
    Marginal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreArg {
    Path,
    Joint,
    Marginal,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Path => ScoreKind::Path,
            ScoreArg::Joint => ScoreKind::Joint,
            ScoreArg::Marginal => ScoreKind::Marginal,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write seeded synthetic instance files `inst_<seed>.json`.
    Gen {
        #[arg(long)]
        length: usize,
        #[arg(long)]
        vocab: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        transition_concentration: f64,
        #[arg(long, default_value_t = 1.0)]
        emission_concentration: f64,
        #[arg(long, default_value_t = 0.0)]
        sparsity: f64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Decode one instance file.
    Decode {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Length penalty; 0 selects the raw best length. Typical range 0.95..1.05.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        input: PathBuf,
        /// Also emit the best hypothesis of every feasible length (Viterbi family only).
        #[arg(long)]
        all_lengths: bool,
        /// Accept instances that fail validation.
        #[arg(long)]
        no_validate: bool,
    },
    /// Score a given path and token sequence.
    Score {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated 1-based positions, e.g. "1,2,4".
        #[arg(long)]
        path: String,
        /// Comma-separated token ids, e.g. "0,1,0".
        #[arg(long)]
        tokens: String,
        #[arg(long)]
        marginal: bool,
        #[arg(long)]
        no_validate: bool,
    },
    /// Brute-force enumeration over every path.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: OracleMode,
        #[arg(long)]
        tokens: Option<String>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        no_validate: bool,
    },
    /// Compare strategies over every `*.json` instance in a directory.
    Analyze {
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "greedy,lookahead,viterbi,joint-viterbi")]
        strategies: Vec<StrategyArg>,
        #[arg(long, value_enum, default_value = "joint")]
        score: ScoreArg,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        no_validate: bool,
    },
    /// Time strategies on generated instances.
    Bench {
        #[arg(long)]
        length: usize,
        #[arg(long)]
        vocab: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "greedy,lookahead,viterbi,joint-viterbi")]
        strategies: Vec<StrategyArg>,
        #[arg(long, value_enum, default_value = "greedy")]
        baseline: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
}

/// Parses `argv` (including the program name), runs the subcommand, and
/// returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => write!(err, "{e}"),
            };
            return EXIT_USAGE;
        }
    };
    match execute(cli.command) {
        Ok(doc) => {
            let doc = round_floats(doc);
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json values serialize"));
            EXIT_OK
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn execute(command: Command) -> CliResult<Value> {
    match command {
        Command::Gen {
            length,
            vocab,
            seed,
            count,
            out,
            transition_concentration,
            emission_concentration,
            sparsity,
            workers,
        } => {
            let config = GeneratorConfig {
                length,
                vocab_size: vocab,
                seed,
                transition_concentration,
                emission_concentration,
                sparsity,
            };
            cmd_gen(&config, count, &out, workers)
        }
        Command::Decode {
            strategy,
            beta,
            input,
            all_lengths,
            no_validate,
        } => cmd_decode(strategy.into(), beta, &input, all_lengths, !no_validate),
        Command::Score {
            input,
            path,
            tokens,
            marginal,
            no_validate,
        } => cmd_score(&input, &path, &tokens, marginal, !no_validate),
        Command::Oracle {
            input,
            mode,
            tokens,
            cap,
            no_validate,
        } => cmd_oracle(&input, mode, tokens.as_deref(), cap, !no_validate),
        Command::Analyze {
            inputs,
            strategies,
            score,
            beta,
            workers,
            no_validate,
        } => {
            let strategies: Vec<Strategy> = strategies.into_iter().map(Into::into).collect();
            cmd_analyze(&inputs, &strategies, score.into(), beta, workers, !no_validate)
        }
        Command::Bench {
            length,
            vocab,
            count,
            reps,
            strategies,
            baseline,
            seed,
            beta,
        } => {
            let strategies: Vec<Strategy> = strategies.into_iter().map(Into::into).collect();
            cmd_bench(length, vocab, count, reps, &strategies, baseline.into(), seed, beta)
        }
    }
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Lib(Error::Io(e.to_string())))?;
    Ok(pool.install(f))
}

fn check_beta(beta: f64) -> CliResult<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--beta must be finite and >= 0, got {beta}")))
    }
}

fn parse_list(flag: &str, text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("{flag} '{text}': {e}")))
}

fn input_doc(path: &Path, loaded: &LoadedInstance) -> Value {
    json!({ "file": path.display().to_string(), "sha256": loaded.sha256 })
}

fn hypothesis_doc(instance: &Instance, h: &Hypothesis) -> Value {
    let mut doc = json!({
        "length": h.len(),
        "path": h.path,
        "tokens": h.tokens,
        "path_logprob": h.path_logprob,
        "emission_logprob": h.emission_logprob,
        "joint_logprob": h.joint_logprob,
    });
    if let Some(vocab) = instance.vocab() {
        let text: Vec<&str> = h.tokens.tokens().iter().map(|&y| vocab[y].as_str()).collect();
        doc["token_text"] = json!(text);
    }
    doc
}

fn cmd_gen(config: &GeneratorConfig, count: usize, out: &Path, workers: usize) -> CliResult<Value> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let files = with_workers(workers, || {
        (0..count as u64)
            .into_par_iter()
            .map(|k| -> Result<Value> {
                let cfg = config.with_seed(config.seed.wrapping_add(k));
                let instance = generate_instance(&cfg)?;
                let doc = serialize_instance(&instance, Some(json!({ "generator": cfg })));
                let path = out.join(format!("inst_{}.json", cfg.seed));
                fs::write(&path, &doc).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Ok(json!({ "file": path.display().to_string(), "sha256": digest(doc.as_bytes()) }))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(json!({
        "command": "gen",
        "config": config,
        "count": count,
        "files": files,
    }))
}

fn cmd_decode(strategy: Strategy, beta: f64, input: &Path, all_lengths: bool, validate: bool) -> CliResult<Value> {
    check_beta(beta)?;
    if all_lengths && strategy.mode().is_none() {
        return Err(CliError::Usage(format!(
            "--all-lengths needs a Viterbi-family strategy, got {strategy}"
        )));
    }
    let loaded = load_instance(input, validate)?;
    let instance = &loaded.instance;
    let decoded = strategy.decode(instance, beta)?;
    let mut doc = json!({
        "command": "decode",
        "input": input_doc(input, &loaded),
        "config": { "strategy": strategy, "beta": beta, "validate": validate },
        "hypothesis": hypothesis_doc(instance, &decoded.hypothesis),
        "chosen_length": decoded.hypothesis.len(),
    });
    if let Some(selection) = &decoded.selection {
        doc["length_scores"] = json!(selection.per_length);
    }
    if let (true, Some(mode)) = (all_lengths, strategy.mode()) {
        let all: Vec<Value> = decode_all_lengths(instance, mode)?
            .iter()
            .map(|h| hypothesis_doc(instance, h))
            .collect();
        doc["all_lengths"] = json!(all);
    }
    Ok(doc)
}

fn cmd_score(input: &Path, path: &str, tokens: &str, marginal: bool, validate: bool) -> CliResult<Value> {
    let positions = parse_list("--path", path)?;
    let tokens = Translation(parse_list("--tokens", tokens)?);
    let loaded = load_instance(input, validate)?;
    let instance = &loaded.instance;
    let path = DecodingPath::new(positions, instance.length())?;
    let h = Hypothesis::scored(instance, path, tokens)?;
    let mut doc = json!({
        "command": "score",
        "input": input_doc(input, &loaded),
        "config": { "validate": validate },
        "path": h.path,
        "tokens": h.tokens,
        "path_logprob": h.path_logprob,
        "emission_logprob": h.emission_logprob,
        "joint_logprob": h.joint_logprob,
    });
    if marginal {
        doc["marginal_logprob"] = json!(scoring::marginal_translation_log_prob(instance, &h.tokens)?);
    }
    Ok(doc)
}

fn cmd_oracle(input: &Path, mode: OracleMode, tokens: Option<&str>, cap: usize, validate: bool) -> CliResult<Value> {
    let loaded = load_instance(input, validate)?;
    let instance = &loaded.instance;
    let oracle = Oracle::new(cap);
    let mut doc = json!({
        "command": "oracle",
        "input": input_doc(input, &loaded),
    });
    match mode {
        OracleMode::Path | OracleMode::Joint => {
            let (name, result) = match mode {
                OracleMode::Path => ("path", oracle.brute_force_best_path(instance)?),
                _ => ("joint", oracle.brute_force_best_joint(instance)?),
            };
            doc["config"] = json!({ "mode": name, "cap": cap, "validate": validate });
            doc["result"] = json!(result);
            if name == "joint" {
                doc["global_best_tokens"] = json!(argmax_translation(instance, &result.global_best.path));
            }
        }
        OracleMode::Marginal => {
            let tokens = tokens.ok_or_else(|| CliError::Usage("--mode marginal needs --tokens".into()))?;
            let tokens = Translation(parse_list("--tokens", tokens)?);
            let p = oracle.brute_force_marginal(instance, &tokens)?;
            doc["config"] = json!({ "mode": "marginal", "cap": cap, "validate": validate });
            doc["tokens"] = json!(tokens);
            doc["probability"] = json!(p);
            doc["log_probability"] = json!(p.ln());
        }
    }
    Ok(doc)
}

fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_analyze(
    dir: &Path,
    strategies: &[Strategy],
    score: ScoreKind,
    beta: f64,
    workers: usize,
    validate: bool,
) -> CliResult<Value> {
    check_beta(beta)?;
    if strategies.is_empty() {
        return Err(CliError::Usage("--strategies must name at least one strategy".into()));
    }
    let files = instance_files(dir)?;
    if files.is_empty() {
        return Err(Error::Precondition(format!("no *.json instances in {}", dir.display())).into());
    }
    let report = with_workers(workers, || -> Result<(Vec<Value>, Value)> {
        let loaded: Vec<LoadedInstance> = files
            .par_iter()
            .map(|f| load_instance(f, validate))
            .collect::<Result<_>>()?;
        let inputs: Vec<Value> = files.iter().zip(&loaded).map(|(f, l)| input_doc(f, l)).collect();
        let instances: Vec<Instance> = loaded.into_iter().map(|l| l.instance).collect();
        let report = compare_strategies(&instances, strategies, score, beta)?;
        Ok((inputs, json!(report)))
    })??;
    Ok(json!({
        "command": "analyze",
        "inputs": report.0,
        "config": { "strategies": strategies, "score": score, "beta": beta, "validate": validate },
        "report": report.1,
    }))
}

#[derive(Serialize)]
struct BenchConfig<'a> {
    generator: &'a GeneratorConfig,
    count: usize,
    repetitions: usize,
    strategies: &'a [Strategy],
    baseline: Strategy,
    beta: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    length: usize,
    vocab: usize,
    count: usize,
    reps: usize,
    strategies: &[Strategy],
    baseline: Strategy,
    seed: u64,
    beta: f64,
) -> CliResult<Value> {
    check_beta(beta)?;
    let generator = GeneratorConfig::new(length, vocab, seed);
    let instances = generate_batch(&generator, count)?;
    let timings = benchmark(&instances, strategies, reps, beta, baseline)?;
    Ok(json!({
        "command": "bench",
        "config": BenchConfig {
            generator: &generator,
            count,
            repetitions: reps,
            strategies,
            baseline,
            beta,
        },
        "timings": timings,
    }))
}

/// Rounds every float to 12 significant digits. Non-finite values are
/// already `null` by the time they reach a `Value`.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(round_log)
            .map_or(Value::Null, |x| json!(x)),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}
