//! Lattice instances, decoding paths and hypotheses.
//!
//! Positions are 1-based everywhere in the public API: a path over a lattice
//! of length `L` starts at position 1 and ends at position `L`. Token ids are
//! 0-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, LOG_ZERO};
use crate::scoring;

/// Tolerance on row log-normalizers.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// A decoding problem: transition and emission log-probabilities over a
/// lattice of `length` positions and a vocabulary of `vocab_size` tokens.
///
/// Transitions are stored source-major: entry `(t, t')` is the log
/// probability of hopping from position `t` to position `t'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    length: usize,
    vocab_size: usize,
    log_transitions: Vec<f64>,
    log_emissions: Vec<f64>,
    vocab: Option<Vec<String>>,
}

impl Instance {
    /// Builds an instance from row tables. Only shapes are checked here; see
    /// [`Instance::validate`] for the probabilistic invariants.
    pub fn new(
        length: usize,
        vocab_size: usize,
        log_transitions: Vec<Vec<f64>>,
        log_emissions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if length == 0 {
            return Err(Error::Shape("lattice length must be positive".into()));
        }
        if vocab_size == 0 {
            return Err(Error::Shape("vocabulary size must be positive".into()));
        }
        let log_transitions = flatten("log_transitions", log_transitions, length, length)?;
        let log_emissions = flatten("log_emissions", log_emissions, length, vocab_size)?;
        Ok(Self {
            length,
            vocab_size,
            log_transitions,
            log_emissions,
            vocab: None,
        })
    }

    /// Like [`Instance::new`] but rejects instances with violations.
    pub fn new_validated(
        length: usize,
        vocab_size: usize,
        log_transitions: Vec<Vec<f64>>,
        log_emissions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let instance = Self::new(length, vocab_size, log_transitions, log_emissions)?;
        instance.ensure_valid()?;
        Ok(instance)
    }

    /// Builds an instance from linear-space probability rows. Zeros become `-inf`.
    pub fn from_probabilities(transitions: &[Vec<f64>], emissions: &[Vec<f64>]) -> Result<Self> {
        let length = emissions.len();
        let vocab_size = emissions.first().map_or(0, Vec::len);
        let to_log = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(|&p| p.ln()).collect())
                .collect()
        };
        Self::new(length, vocab_size, to_log(transitions), to_log(emissions))
    }

    pub fn with_vocab(mut self, vocab: Vec<String>) -> Result<Self> {
        if vocab.len() != self.vocab_size {
            return Err(Error::Shape(format!(
                "vocab has {} entries, expected {}",
                vocab.len(),
                self.vocab_size
            )));
        }
        self.vocab = Some(vocab);
        Ok(self)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    /// Log-probability of the hop `from -> to` (1-based positions).
    pub fn log_transition(&self, from: usize, to: usize) -> f64 {
        self.log_transitions[(from - 1) * self.length + (to - 1)]
    }

    /// Outgoing transition row of `from`; index `k` holds the hop to position `k + 1`.
    pub fn transition_row(&self, from: usize) -> &[f64] {
        let start = (from - 1) * self.length;
        &self.log_transitions[start..start + self.length]
    }

    pub fn log_emission(&self, position: usize, token: usize) -> f64 {
        self.log_emissions[(position - 1) * self.vocab_size + token]
    }

    /// Emission row of `position`, indexed by token id.
    pub fn emission_row(&self, position: usize) -> &[f64] {
        let start = (position - 1) * self.vocab_size;
        &self.log_emissions[start..start + self.vocab_size]
    }

    /// Every invariant violation, in row order. Empty iff the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let l = self.length;
        for t in 1..=l {
            let row = self.transition_row(t);
            for (k, &v) in row.iter().enumerate() {
                let target = k + 1;
                if v.is_nan() {
                    out.push(Violation::new(ViolationKind::NotANumber, Table::Transitions, t, f64::NAN));
                } else if v > 0.0 {
                    out.push(Violation::new(ViolationKind::PositiveLogProb, Table::Transitions, t, v));
                } else if target <= t && v != LOG_ZERO {
                    out.push(Violation::new(
                        ViolationKind::BackwardTransition { target },
                        Table::Transitions,
                        t,
                        v,
                    ));
                }
            }
            if t == l {
                continue;
            }
            let forward = &row[t..];
            if forward.iter().all(|&v| v == LOG_ZERO) {
                out.push(Violation::new(ViolationKind::DeadEnd, Table::Transitions, t, LOG_ZERO));
                continue;
            }
            let lse = log_sum_exp(forward.iter().copied());
            if !(lse.abs() <= NORMALIZATION_TOLERANCE) {
                out.push(Violation::new(ViolationKind::Normalization, Table::Transitions, t, lse));
            }
        }
        for t in 1..=self.length {
            let row = self.emission_row(t);
            for &v in row {
                if v.is_nan() {
                    out.push(Violation::new(ViolationKind::NotANumber, Table::Emissions, t, f64::NAN));
                } else if v > 0.0 {
                    out.push(Violation::new(ViolationKind::PositiveLogProb, Table::Emissions, t, v));
                }
            }
            let lse = log_sum_exp(row.iter().copied());
            if !(lse.abs() <= NORMALIZATION_TOLERANCE) {
                out.push(Violation::new(ViolationKind::Normalization, Table::Emissions, t, lse));
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(violations))
        }
    }
}

fn flatten(name: &str, rows: Vec<Vec<f64>>, n_rows: usize, n_cols: usize) -> Result<Vec<f64>> {
    if rows.len() != n_rows {
        return Err(Error::Shape(format!(
            "{name} has {} rows, expected {n_rows}",
            rows.len()
        )));
    }
    let mut flat = Vec::with_capacity(n_rows * n_cols);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::Shape(format!(
                "{name} row {} has {} entries, expected {n_cols}",
                i + 1,
                row.len()
            )));
        }
        flat.extend(row);
    }
    Ok(flat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Transitions,
    Emissions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    /// Row log-normalizer differs from zero by more than the tolerance.
    Normalization,
    /// Non-terminal row has no finite outgoing transition.
    DeadEnd,
    /// Finite transition to a position that is not strictly later.
    BackwardTransition { target: usize },
    PositiveLogProb,
    NotANumber,
}

/// One failed invariant. `row` is a 1-based position; `residual` is the
/// measured offending value (the row log-normalizer for normalization
/// failures, the entry itself otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub table: Table,
    pub row: usize,
    pub residual: f64,
}

impl Violation {
    fn new(kind: ViolationKind, table: Table, row: usize, residual: f64) -> Self {
        Self {
            kind,
            table,
            row,
            residual,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let table = match self.table {
            Table::Transitions => "transition",
            Table::Emissions => "emission",
        };
        match self.kind {
            ViolationKind::Normalization => write!(
                f,
                "{table} row {} normalization: log-sum-exp = {:e}",
                self.row, self.residual
            ),
            ViolationKind::DeadEnd => write!(f, "{table} row {} is a dead end", self.row),
            ViolationKind::BackwardTransition { target } => write!(
                f,
                "{table} row {} has finite entry {:e} to non-later position {target}",
                self.row, self.residual
            ),
            ViolationKind::PositiveLogProb => write!(
                f,
                "{table} row {} has positive log-probability {:e}",
                self.row, self.residual
            ),
            ViolationKind::NotANumber => write!(f, "{table} row {} contains NaN", self.row),
        }
    }
}

/// Strictly increasing 1-based positions from 1 to `L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct DecodingPath(Vec<usize>);

impl DecodingPath {
    pub fn new(positions: Vec<usize>, length: usize) -> Result<Self> {
        let (first, last) = match (positions.first(), positions.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(Error::PathShape("empty path".into())),
        };
        if first != 1 {
            return Err(Error::PathShape(format!("path starts at {first}, expected 1")));
        }
        if last != length {
            return Err(Error::PathShape(format!(
                "path ends at {last}, expected {length}"
            )));
        }
        if let Some(w) = positions.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::PathShape(format!(
                "positions not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self(positions))
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for DecodingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Token ids emitted along a path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Translation(pub Vec<usize>);

impl Translation {
    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A decoded path with its tokens and log-scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub path: DecodingPath,
    pub tokens: Translation,
    /// `log P(A|X)`
    pub path_logprob: f64,
    /// `log P(Y|X,A)`
    pub emission_logprob: f64,
    /// `log P(A,Y|X)`, always `path_logprob + emission_logprob`.
    pub joint_logprob: f64,
}

impl Hypothesis {
    /// Scores `tokens` along `path` through the scoring module.
    pub fn scored(instance: &Instance, path: DecodingPath, tokens: Translation) -> Result<Self> {
        let path_logprob = scoring::path_log_prob(instance, &path)?;
        let emission_logprob = scoring::translation_given_path_log_prob(instance, &path, &tokens)?;
        Ok(Self {
            path,
            tokens,
            path_logprob,
            emission_logprob,
            joint_logprob: path_logprob + emission_logprob,
        })
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::{i2, i4};
    use super::*;

    #[test]
    fn canonical_instances_are_valid() {
        assert!(i2().validate().is_empty());
        assert!(i4().validate().is_empty());
    }

    #[test]
    fn i4_rows_normalize_under_independent_summation() {
        // linear-space Kahan summation of each row, independent of log_sum_exp
        let inst = i4();
        for t in 1..inst.length() {
            let mut sum = 0.0f64;
            let mut c = 0.0f64;
            for &v in &inst.transition_row(t)[t..] {
                let y = v.exp() - c;
                let s = sum + y;
                c = (s - sum) - y;
                sum = s;
            }
            assert!((sum - 1.0).abs() < 1e-12, "row {t}: {sum}");
        }
    }

    #[test]
    fn halved_row_is_reported() {
        let inst = i2();
        let mut trans: Vec<Vec<f64>> = (1..=2).map(|t| inst.transition_row(t).to_vec()).collect();
        trans[0][1] = 0.5f64.ln();
        let emis: Vec<Vec<f64>> = (1..=2).map(|t| inst.emission_row(t).to_vec()).collect();
        let bad = Instance::new(2, 2, trans, emis).unwrap();
        let v = bad.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Normalization);
        assert_eq!(v[0].table, Table::Transitions);
        assert_eq!(v[0].row, 1);
        assert!((v[0].residual - 0.5f64.ln()).abs() < 1e-15);
        assert!(v[0].to_string().contains("row 1"));
    }

    #[test]
    fn dead_end_backward_and_terminal_rows() {
        let ninf = f64::NEG_INFINITY;
        let trans = vec![
            vec![ninf, 0.0, ninf],
            vec![0.0, ninf, ninf],
            vec![ninf, ninf, -0.1],
        ];
        let emis = vec![vec![0.0]; 3];
        let inst = Instance::new(3, 1, trans, emis).unwrap();
        let kinds: Vec<_> = inst.validate().into_iter().map(|v| (v.row, v.kind)).collect();
        assert!(kinds.contains(&(2, ViolationKind::BackwardTransition { target: 1 })));
        assert!(kinds.contains(&(2, ViolationKind::DeadEnd)));
        assert!(kinds.contains(&(3, ViolationKind::BackwardTransition { target: 3 })));
    }

    #[test]
    fn positive_log_prob_is_reported() {
        let inst = Instance::new(1, 2, vec![vec![f64::NEG_INFINITY]], vec![vec![0.1, -5.0]]).unwrap();
        let v = inst.validate();
        assert!(v.iter().any(|v| v.kind == ViolationKind::PositiveLogProb));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            Instance::new(4, 2, vec![vec![0.0; 3]; 3], vec![vec![0.0; 2]; 4]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            Instance::new(2, 2, vec![vec![0.0; 2]; 2], vec![vec![0.0; 3]; 2]),
            Err(Error::Shape(_))
        ));
        assert!(i2().with_vocab(vec!["a".into()]).is_err());
    }

    #[test]
    fn path_invariants() {
        assert!(DecodingPath::new(vec![1, 2, 3, 4], 4).is_ok());
        assert!(DecodingPath::new(vec![1], 1).is_ok());
        for bad in [vec![1, 3, 2, 4], vec![2, 4], vec![1, 3], vec![], vec![1, 1, 4]] {
            assert!(matches!(DecodingPath::new(bad, 4), Err(Error::PathShape(_))));
        }
        assert_eq!(DecodingPath::new(vec![1, 2, 4], 4).unwrap().to_string(), "1,2,4");
    }

    #[test]
    fn hypothesis_joint_is_sum() {
        let inst = i4();
        let h = Hypothesis::scored(
            &inst,
            DecodingPath::new(vec![1, 2, 4], 4).unwrap(),
            Translation(vec![0, 1, 1]),
        )
        .unwrap();
        assert_eq!(h.joint_logprob, h.path_logprob + h.emission_logprob);
    }
}
