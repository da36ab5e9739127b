//! Strategy comparisons over instance sets: average scores, pairwise win
//! rates, optimum match rates and wall-clock timings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoders::{build_viterbi_table, Decoded, Mode, Strategy};
use crate::error::{Error, Result};
use crate::instance::{Hypothesis, Instance};
use crate::logspace::{rel_close_log, LOG_ZERO};
use crate::scoring::marginal_translation_log_prob;

/// Relative tolerance (linear space) under which two scores tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// `log P(A|X)` of the output path.
    Path,
    /// `log P(A, Y|X)` of the output.
    Joint,
    /// `log P(Y|X)` of the output tokens, summed over all paths.
    Marginal,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(ScoreKind::Path),
            "joint" => Ok(ScoreKind::Joint),
            "marginal" => Ok(ScoreKind::Marginal),
            other => Err(Error::Parse(format!("unknown score kind '{other}'"))),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Path => "path",
            ScoreKind::Joint => "joint",
            ScoreKind::Marginal => "marginal",
        })
    }
}

pub fn score_hypothesis(instance: &Instance, hypothesis: &Hypothesis, kind: ScoreKind) -> Result<f64> {
    match kind {
        ScoreKind::Path => Ok(hypothesis.path_logprob),
        ScoreKind::Joint => Ok(hypothesis.joint_logprob),
        ScoreKind::Marginal => marginal_translation_log_prob(instance, &hypothesis.tokens),
    }
}

/// Head-to-head counts for an ordered strategy pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseRate {
    pub first: Strategy,
    pub second: Strategy,
    /// Fraction of instances where `first` scores strictly higher.
    pub first_wins: f64,
    /// Fraction of instances where `second` scores strictly higher.
    pub second_wins: f64,
    pub ties: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingStats {
    pub mean_secs: f64,
    pub std_secs: f64,
    pub samples: usize,
    /// `mean_secs` divided by the baseline's mean.
    pub ratio_to_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub baseline: Strategy,
    pub repetitions: usize,
    pub per_strategy: BTreeMap<Strategy, TimingStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub score_kind: ScoreKind,
    pub beta: f64,
    pub instance_count: usize,
    pub strategies: Vec<Strategy>,
    pub per_strategy_avg_logprob: BTreeMap<Strategy, f64>,
    /// One entry per unordered pair, in strategy list order.
    pub pairwise: Vec<PairwiseRate>,
    /// Fraction of instances whose output attains the joint optimum at the
    /// output's own length.
    pub optimum_match_rate: BTreeMap<Strategy, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingReport>,
}

impl StrategyReport {
    /// Fraction of instances where `a` strictly beats `b`.
    pub fn win_rate(&self, a: Strategy, b: Strategy) -> Option<f64> {
        self.pairwise.iter().find_map(|p| {
            if p.first == a && p.second == b {
                Some(p.first_wins)
            } else if p.first == b && p.second == a {
                Some(p.second_wins)
            } else {
                None
            }
        })
    }

    pub fn tie_rate(&self, a: Strategy, b: Strategy) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|p| (p.first, p.second) == (a, b) || (p.first, p.second) == (b, a))
            .map(|p| p.ties)
    }
}

/// Decoded outputs of every strategy on one instance.
#[derive(Debug, Clone)]
pub struct DecodedInstance {
    pub outputs: Vec<Decoded>,
}

/// Decodes every instance with every strategy. Instances are processed in
/// parallel on the current rayon pool; output order follows input order.
pub fn decode_instances(
    instances: &[Instance],
    strategies: &[Strategy],
    beta: f64,
) -> Result<Vec<DecodedInstance>> {
    instances
        .par_iter()
        .map(|inst| {
            let outputs = strategies
                .iter()
                .map(|s| s.decode(inst, beta))
                .collect::<Result<Vec<_>>>()?;
            Ok(DecodedInstance { outputs })
        })
        .collect()
}

/// Whether `hypothesis` reaches the best joint score at its own length.
pub fn attains_length_optimum(instance: &Instance, hypothesis: &Hypothesis) -> bool {
    let table = build_viterbi_table(instance, Mode::Joint);
    let optimum = table.alpha(hypothesis.len(), instance.length());
    rel_close_log(hypothesis.joint_logprob, optimum, TIE_TOLERANCE)
}

fn mean(values: &[f64]) -> f64 {
    if values.iter().any(|&v| v == LOG_ZERO) {
        return LOG_ZERO;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Builds a report from already-decoded outputs. Pure: the same inputs
/// always give a bit-identical report.
pub fn report_from_decoded(
    instances: &[Instance],
    decoded: &[DecodedInstance],
    strategies: &[Strategy],
    score_kind: ScoreKind,
    beta: f64,
) -> Result<StrategyReport> {
    if instances.is_empty() {
        return Err(Error::Precondition("empty instance set".into()));
    }
    if decoded.len() != instances.len() || decoded.iter().any(|d| d.outputs.len() != strategies.len()) {
        return Err(Error::Shape("decoded outputs do not match instances and strategies".into()));
    }
    let n = instances.len();
    let scores: Vec<Vec<f64>> = instances
        .par_iter()
        .zip(decoded)
        .map(|(inst, d)| {
            d.outputs
                .iter()
                .map(|o| score_hypothesis(inst, &o.hypothesis, score_kind))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let matches: Vec<Vec<bool>> = instances
        .par_iter()
        .zip(decoded)
        .map(|(inst, d)| {
            d.outputs
                .iter()
                .map(|o| attains_length_optimum(inst, &o.hypothesis))
                .collect()
        })
        .collect();

    let mut per_strategy_avg_logprob = BTreeMap::new();
    let mut optimum_match_rate = BTreeMap::new();
    for (k, &s) in strategies.iter().enumerate() {
        let column: Vec<f64> = scores.iter().map(|row| row[k]).collect();
        per_strategy_avg_logprob.insert(s, mean(&column));
        let hits = matches.iter().filter(|row| row[k]).count();
        optimum_match_rate.insert(s, hits as f64 / n as f64);
    }

    let mut pairwise = Vec::new();
    for a in 0..strategies.len() {
        for b in a + 1..strategies.len() {
            let (mut wins_a, mut wins_b, mut ties) = (0usize, 0usize, 0usize);
            for row in &scores {
                if rel_close_log(row[a], row[b], TIE_TOLERANCE) {
                    ties += 1;
                } else if row[a] > row[b] {
                    wins_a += 1;
                } else {
                    wins_b += 1;
                }
            }
            pairwise.push(PairwiseRate {
                first: strategies[a],
                second: strategies[b],
                first_wins: wins_a as f64 / n as f64,
                second_wins: wins_b as f64 / n as f64,
                ties: ties as f64 / n as f64,
            });
        }
    }

    Ok(StrategyReport {
        score_kind,
        beta,
        instance_count: n,
        strategies: strategies.to_vec(),
        per_strategy_avg_logprob,
        pairwise,
        optimum_match_rate,
        timings: None,
    })
}

pub fn compare_strategies(
    instances: &[Instance],
    strategies: &[Strategy],
    score_kind: ScoreKind,
    beta: f64,
) -> Result<StrategyReport> {
    if instances.is_empty() {
        return Err(Error::Precondition("empty instance set".into()));
    }
    let decoded = decode_instances(instances, strategies, beta)?;
    report_from_decoded(instances, &decoded, strategies, score_kind, beta)
}

/// Fraction of instances where `strategy` attains the joint optimum at its
/// own output length, within [`TIE_TOLERANCE`].
pub fn optimum_match_rate(instances: &[Instance], strategy: Strategy, beta: f64) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let hits = instances
        .par_iter()
        .map(|inst| strategy.decode(inst, beta).map(|d| attains_length_optimum(inst, &d.hypothesis)))
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / instances.len() as f64)
}

/// Sequential, single-threaded wall-clock timing of each decode call.
/// One untimed warm-up pass precedes `repetitions` timed passes.
pub fn benchmark(
    instances: &[Instance],
    strategies: &[Strategy],
    repetitions: usize,
    beta: f64,
    baseline: Strategy,
) -> Result<TimingReport> {
    if repetitions < 3 {
        return Err(Error::Precondition(format!(
            "benchmark needs at least 3 repetitions, got {repetitions}"
        )));
    }
    if instances.is_empty() {
        return Err(Error::Precondition("empty instance set".into()));
    }
    if !strategies.contains(&baseline) {
        return Err(Error::Precondition(format!(
            "baseline {baseline} is not among the benchmarked strategies"
        )));
    }
    for inst in instances {
        for s in strategies {
            std::hint::black_box(s.decode(inst, beta)?);
        }
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(repetitions * instances.len()); strategies.len()];
    for _ in 0..repetitions {
        for inst in instances {
            for (k, s) in strategies.iter().enumerate() {
                let start = Instant::now();
                let out = s.decode(std::hint::black_box(inst), beta);
                let elapsed = start.elapsed().as_secs_f64();
                std::hint::black_box(out?);
                samples[k].push(elapsed);
            }
        }
    }
    let stats: Vec<(f64, f64, usize)> = samples
        .iter()
        .map(|xs| {
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (m, var.sqrt(), xs.len())
        })
        .collect();
    let base_idx = strategies.iter().position(|&s| s == baseline).expect("checked above");
    let base_mean = stats[base_idx].0;
    let per_strategy = strategies
        .iter()
        .zip(stats)
        .map(|(&s, (mean_secs, std_secs, samples))| {
            (
                s,
                TimingStats {
                    mean_secs,
                    std_secs,
                    samples,
                    ratio_to_baseline: mean_secs / base_mean,
                },
            )
        })
        .collect();
    Ok(TimingReport {
        baseline,
        repetitions,
        per_strategy,
    })
}
