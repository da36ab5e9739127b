//! Brute-force ground truth for small lattices.
//!
//! Everything here works in linear probability space by enumerating every
//! path explicitly. Nothing is shared with the log-space dynamic programs it
//! is meant to check.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{DecodingPath, Instance, Translation};

pub const DEFAULT_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPath {
    pub path: DecodingPath,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerationResult {
    /// Best path per length, for lengths with nonzero probability.
    pub best_per_length: BTreeMap<usize, ScoredPath>,
    pub global_best: ScoredPath,
    pub path_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP }
    }
}

impl Oracle {
    pub fn new(cap: usize) -> Self {
        Self { cap }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn check_cap(&self, instance: &Instance) -> Result<()> {
        if instance.length() > self.cap {
            return Err(Error::CapExceeded {
                length: instance.length(),
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Every endpoint-anchored path: one per subset of the interior
    /// positions `2..L-1`, in subset-bitmask order.
    pub fn enumerate_paths(&self, instance: &Instance) -> Result<impl Iterator<Item = DecodingPath>> {
        self.check_cap(instance)?;
        let l = instance.length();
        let interior = l.saturating_sub(2);
        Ok((0u64..1 << interior).map(move |mask| {
            let mut positions = vec![1];
            positions.extend((0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 2));
            if l > 1 {
                positions.push(l);
            }
            DecodingPath::new(positions, l).expect("enumerated paths are well formed")
        }))
    }

    /// Exact maximum of `P(A|X)` per length and overall.
    pub fn brute_force_best_path(&self, instance: &Instance) -> Result<EnumerationResult> {
        self.best_by(instance, |path| path_probability(instance, path))
    }

    /// Exact maximum of `P(A, Y|X)` with `Y` the per-position argmax tokens.
    pub fn brute_force_best_joint(&self, instance: &Instance) -> Result<EnumerationResult> {
        let best_emission = best_emissions(instance);
        self.best_by(instance, |path| {
            path_probability(instance, path)
                * path
                    .positions()
                    .iter()
                    .map(|&a| best_emission[a - 1].1)
                    .product::<f64>()
        })
    }

    /// `P(Y|X)` summed over every path of matching length, with compensated summation.
    pub fn brute_force_marginal(&self, instance: &Instance, tokens: &Translation) -> Result<f64> {
        self.check_cap(instance)?;
        let m = tokens.len();
        let l = instance.length();
        if m == 0 || m > l || (m == 1 && l > 1) {
            return Err(Error::InfeasibleLength {
                length: m,
                reason: format!("no path of this length in a lattice of length {l}"),
            });
        }
        if let Some(&token) = tokens.tokens().iter().find(|&&y| y >= instance.vocab_size()) {
            return Err(Error::Vocab {
                token,
                vocab_size: instance.vocab_size(),
            });
        }
        let mut sum = NeumaierSum::default();
        for path in self.enumerate_paths(instance)?.filter(|p| p.len() == m) {
            let emission: f64 = path
                .positions()
                .iter()
                .zip(tokens.tokens())
                .map(|(&a, &y)| instance.log_emission(a, y).exp())
                .product();
            sum.add(path_probability(instance, &path) * emission);
        }
        Ok(sum.total())
    }

    fn best_by<F>(&self, instance: &Instance, score: F) -> Result<EnumerationResult>
    where
        F: Fn(&DecodingPath) -> f64,
    {
        let mut best_per_length: BTreeMap<usize, ScoredPath> = BTreeMap::new();
        let mut path_count = 0u64;
        for path in self.enumerate_paths(instance)? {
            path_count += 1;
            let probability = score(&path);
            if probability <= 0.0 {
                continue;
            }
            let candidate = ScoredPath { path, probability };
            match best_per_length.get_mut(&candidate.path.len()) {
                Some(cur) if !beats(&candidate, cur) => {}
                Some(cur) => *cur = candidate,
                None => {
                    best_per_length.insert(candidate.path.len(), candidate);
                }
            }
        }
        // ties between lengths go to the longer one
        let global_best = best_per_length
            .values()
            .fold(None::<&ScoredPath>, |acc, s| match acc {
                Some(b) if s.probability < b.probability => Some(b),
                _ => Some(s),
            })
            .cloned()
            .ok_or(Error::UnreachableTerminal)?;
        Ok(EnumerationResult {
            best_per_length,
            global_best,
            path_count,
        })
    }
}

/// Same-length tie-break matching backpointer tracing: the path whose
/// positions, read from the end backwards, are lexicographically smaller wins.
fn beats(candidate: &ScoredPath, incumbent: &ScoredPath) -> bool {
    match candidate.probability.partial_cmp(&incumbent.probability) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => candidate
            .path
            .positions()
            .iter()
            .rev()
            .lt(incumbent.path.positions().iter().rev()),
        _ => false,
    }
}

fn path_probability(instance: &Instance, path: &DecodingPath) -> f64 {
    path.positions()
        .windows(2)
        .map(|w| instance.log_transition(w[0], w[1]).exp())
        .product()
}

/// Per-position (token, probability) maxima; smallest token on ties.
fn best_emissions(instance: &Instance) -> Vec<(usize, f64)> {
    (1..=instance.length())
        .map(|t| {
            instance
                .emission_row(t)
                .iter()
                .map(|lp| lp.exp())
                .enumerate()
                .fold((0, f64::MIN), |(bi, bp), (i, p)| if p > bp { (i, p) } else { (bi, bp) })
        })
        .collect()
}

/// Argmax tokens along `path`, computed in linear space.
pub fn argmax_translation(instance: &Instance, path: &DecodingPath) -> Translation {
    let best = best_emissions(instance);
    Translation(path.positions().iter().map(|&a| best[a - 1].0).collect())
}

#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
