//! Greedy, lookahead, Viterbi and joint-Viterbi decoding.
//!
//! The Viterbi family fills a table `alpha(i, t)`: the best log-score of a
//! length-`i` prefix path ending at position `t`, with backpointers
//! `psi(i, t)`. In [`Mode::Path`] the score is `log P(A|X)`. In
//! [`Mode::Joint`] every hop `t -> t'` additionally earns the best emission
//! at `t'`, and the first position's best emission seeds `alpha(1, 1)`, so
//! the score is `max_Y log P(A, Y|X)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{DecodingPath, Hypothesis, Instance, Translation};
use crate::logspace::{argmax_first, LOG_ZERO};
use crate::scoring::argmax_emission;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Path,
    Joint,
}

/// Best-prefix scores, `L` steps by `L` positions, with backpointers.
///
/// Only `alpha` is materialized. A backpointer `psi(i, t)` is recovered on
/// demand as the smallest predecessor whose extension reproduces
/// `alpha(i, t)` exactly; the scan repeats the fill's arithmetic, so the
/// match is exact and ties resolve as they would in an eager table.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiTable<'a> {
    instance: &'a Instance,
    mode: Mode,
    alpha: Vec<f64>,
    /// Score earned on arriving at each position: 0 in path mode, the best
    /// emission log-probability in joint mode.
    bonus: Vec<f64>,
}

impl ViterbiTable<'_> {
    pub fn length(&self) -> usize {
        self.instance.length()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `alpha(step, position)`, both 1-based.
    pub fn alpha(&self, step: usize, position: usize) -> f64 {
        self.alpha[(step - 1) * self.length() + (position - 1)]
    }

    /// Predecessor position of `(step, position)`; `None` for step 1 and
    /// for unreachable cells.
    pub fn psi(&self, step: usize, position: usize) -> Option<usize> {
        let target = self.alpha(step, position);
        if step < 2 || target == LOG_ZERO {
            return None;
        }
        let bonus = self.bonus[position - 1];
        (step - 1..position).find(|&src| {
            let base = self.alpha(step - 1, src);
            base != LOG_ZERO && base + self.instance.log_transition(src, position) + bonus == target
        })
    }

    /// `alpha(i, L)` for every step `i`.
    pub fn terminal_scores(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let l = self.length();
        (1..=l).map(move |i| (i, self.alpha(i, l)))
    }

    /// Steps `i` with finite `alpha(i, L)`.
    pub fn feasible_lengths(&self) -> Vec<usize> {
        self.terminal_scores()
            .filter(|&(_, a)| a != LOG_ZERO)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn build_viterbi_table(instance: &Instance, mode: Mode) -> ViterbiTable<'_> {
    let l = instance.length();
    let mut alpha = vec![LOG_ZERO; l * l];

    let bonus: Vec<f64> = match mode {
        Mode::Path => vec![0.0; l],
        Mode::Joint => (1..=l)
            .map(|t| argmax_emission(instance, t).map_or(LOG_ZERO, |(_, lp)| lp))
            .collect(),
    };
    alpha[0] = bonus[0];

    for step in 1..l {
        let (done, rest) = alpha.split_at_mut(step * l);
        let prev = &done[(step - 1) * l..];
        let cur = &mut rest[..l];
        // a prefix of `step` hops cannot sit before 0-based position `step - 1`
        for src in (step - 1)..l - 1 {
            let base = prev[src];
            if base == LOG_ZERO {
                continue;
            }
            let row = &instance.transition_row(src + 1)[src + 1..];
            let gain = &bonus[src + 1..];
            for ((c, &e), &b) in cur[src + 1..].iter_mut().zip(row).zip(gain) {
                // must stay in sync with the expression in `psi`
                let h = base + e + b;
                *c = if h > *c { h } else { *c };
            }
        }
        if cur.iter().all(|&a| a == LOG_ZERO) {
            break;
        }
    }

    ViterbiTable {
        instance,
        mode,
        alpha,
        bonus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthScore {
    pub length: usize,
    /// `alpha(length, L)`
    pub raw: f64,
    /// `raw / length^beta`
    pub penalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthSelection {
    pub chosen_length: usize,
    pub beta: f64,
    /// Feasible lengths only, ascending.
    pub per_length: Vec<LengthScore>,
}

impl LengthSelection {
    pub fn chosen(&self) -> &LengthScore {
        self.per_length
            .iter()
            .find(|s| s.length == self.chosen_length)
            .expect("chosen length is among the scored lengths")
    }
}

/// Picks the output length maximizing `alpha(i, L) / i^beta`. The table
/// holds log-scores already, so the penalty divides a log-probability.
/// Ties go to the longer length.
pub fn select_length(table: &ViterbiTable, beta: f64) -> Result<LengthSelection> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Precondition(format!(
            "length penalty must be finite and >= 0, got {beta}"
        )));
    }
    let per_length: Vec<LengthScore> = table
        .terminal_scores()
        .filter(|&(_, raw)| raw != LOG_ZERO)
        .map(|(length, raw)| LengthScore {
            length,
            raw,
            penalized: raw / (length as f64).powf(beta),
        })
        .collect();
    let mut best: Option<&LengthScore> = None;
    for s in &per_length {
        if best.map_or(true, |b| s.penalized >= b.penalized) {
            best = Some(s);
        }
    }
    let chosen_length = best.ok_or(Error::UnreachableTerminal)?.length;
    Ok(LengthSelection {
        chosen_length,
        beta,
        per_length,
    })
}

/// Follows backpointers from `(length, L)` back to position 1.
pub fn backtrace(table: &ViterbiTable, length: usize) -> Result<DecodingPath> {
    let l = table.length();
    if length == 0 || length > l || table.alpha(length, l) == LOG_ZERO {
        return Err(Error::InfeasibleLength {
            length,
            reason: "no path of this length reaches the terminal position".into(),
        });
    }
    let mut positions = vec![0; length];
    positions[length - 1] = l;
    for i in (1..length).rev() {
        positions[i - 1] = table
            .psi(i + 1, positions[i])
            .expect("finite alpha entries have a predecessor");
    }
    DecodingPath::new(positions, l)
}

fn argmax_tokens(instance: &Instance, path: &DecodingPath) -> Result<Translation> {
    path.positions()
        .iter()
        .map(|&a| argmax_emission(instance, a).map(|(y, _)| y))
        .collect::<Result<Vec<_>>>()
        .map(Translation)
}

/// Follows the most probable transition from position 1 until reaching `L`.
pub fn greedy_decode(instance: &Instance) -> Result<Hypothesis> {
    let l = instance.length();
    let mut positions = vec![1];
    let mut t = 1;
    while t < l {
        let row = &instance.transition_row(t)[t..];
        let step = argmax_first(row).ok_or(Error::DeadEnd(t))?;
        t += step + 1;
        positions.push(t);
    }
    let path = DecodingPath::new(positions, l)?;
    let tokens = argmax_tokens(instance, &path)?;
    Hypothesis::scored(instance, path, tokens)
}

/// Chooses each next (position, token) by transition times emission
/// probability. The first token is the best emission at position 1.
pub fn lookahead_decode(instance: &Instance) -> Result<Hypothesis> {
    let l = instance.length();
    let best: Vec<(usize, f64)> = (1..=l)
        .map(|t| argmax_emission(instance, t))
        .collect::<Result<_>>()?;
    let mut positions = vec![1];
    let mut tokens = vec![best[0].0];
    let mut t = 1;
    let mut scores = vec![LOG_ZERO; l];
    while t < l {
        let row = &instance.transition_row(t)[t..];
        let scores = &mut scores[..row.len()];
        for (k, (s, &e)) in scores.iter_mut().zip(row).enumerate() {
            *s = e + best[t + k].1;
        }
        let step = argmax_first(scores).ok_or(Error::DeadEnd(t))?;
        t += step + 1;
        positions.push(t);
        tokens.push(best[t - 1].0);
    }
    let path = DecodingPath::new(positions, l)?;
    Hypothesis::scored(instance, path, Translation(tokens))
}

/// A hypothesis plus, for the Viterbi family, the length selection behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decoded {
    pub hypothesis: Hypothesis,
    pub selection: Option<LengthSelection>,
}

fn viterbi_family(instance: &Instance, mode: Mode, beta: f64) -> Result<Decoded> {
    let table = build_viterbi_table(instance, mode);
    let selection = select_length(&table, beta)?;
    let path = backtrace(&table, selection.chosen_length)?;
    let tokens = argmax_tokens(instance, &path)?;
    Ok(Decoded {
        hypothesis: Hypothesis::scored(instance, path, tokens)?,
        selection: Some(selection),
    })
}

/// Most probable path (under the length penalty), then the argmax token at
/// each visited position.
pub fn viterbi_decode(instance: &Instance, beta: f64) -> Result<Hypothesis> {
    viterbi_family(instance, Mode::Path, beta).map(|d| d.hypothesis)
}

/// Most probable (path, translation) pair under the length penalty.
pub fn joint_viterbi_decode(instance: &Instance, beta: f64) -> Result<Hypothesis> {
    viterbi_family(instance, Mode::Joint, beta).map(|d| d.hypothesis)
}

/// One backtraced hypothesis per feasible length, ascending.
pub fn decode_all_lengths(instance: &Instance, mode: Mode) -> Result<Vec<Hypothesis>> {
    let table = build_viterbi_table(instance, mode);
    table
        .feasible_lengths()
        .into_iter()
        .map(|m| {
            let path = backtrace(&table, m)?;
            let tokens = argmax_tokens(instance, &path)?;
            Hypothesis::scored(instance, path, tokens)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Greedy,
    Lookahead,
    Viterbi,
    JointViterbi,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Greedy,
        Strategy::Lookahead,
        Strategy::Viterbi,
        Strategy::JointViterbi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Lookahead => "lookahead",
            Strategy::Viterbi => "viterbi",
            Strategy::JointViterbi => "joint-viterbi",
        }
    }

    pub fn mode(self) -> Option<Mode> {
        match self {
            Strategy::Viterbi => Some(Mode::Path),
            Strategy::JointViterbi => Some(Mode::Joint),
            Strategy::Greedy | Strategy::Lookahead => None,
        }
    }

    /// Decodes `instance`. `beta` only affects the Viterbi family.
    pub fn decode(self, instance: &Instance, beta: f64) -> Result<Decoded> {
        match self {
            Strategy::Greedy => greedy_decode(instance).map(|hypothesis| Decoded {
                hypothesis,
                selection: None,
            }),
            Strategy::Lookahead => lookahead_decode(instance).map(|hypothesis| Decoded {
                hypothesis,
                selection: None,
            }),
            Strategy::Viterbi => viterbi_family(instance, Mode::Path, beta),
            Strategy::JointViterbi => viterbi_family(instance, Mode::Joint, beta),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown strategy '{s}'")))
    }
}
