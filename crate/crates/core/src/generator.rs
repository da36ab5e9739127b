//! Seeded synthetic lattices with Dirichlet-distributed rows.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::logspace::{log_sum_exp, LOG_ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub length: usize,
    pub vocab_size: usize,
    pub seed: u64,
    /// Symmetric Dirichlet concentration for transition rows.
    pub transition_concentration: f64,
    /// Symmetric Dirichlet concentration for emission rows.
    pub emission_concentration: f64,
    /// Fraction of each row's successors to forbid. At least one successor
    /// always survives.
    pub sparsity: f64,
}

impl GeneratorConfig {
    pub fn new(length: usize, vocab_size: usize, seed: u64) -> Self {
        Self {
            length,
            vocab_size,
            seed,
            transition_concentration: 1.0,
            emission_concentration: 1.0,
            sparsity: 0.0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn check(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Config("length must be positive".into()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocabulary size must be positive".into()));
        }
        for (name, c) in [
            ("transition_concentration", self.transition_concentration),
            ("emission_concentration", self.emission_concentration),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {c}")));
            }
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!(
                "sparsity must lie in [0, 1) to leave every row a successor, got {}",
                self.sparsity
            )));
        }
        Ok(())
    }
}

/// Log of a Gamma(shape, 1) draw. Small shapes use the boost
/// `G(a) = G(a + 1) * U^(1/a)` in log form, which stays finite where a
/// direct draw would underflow to zero.
fn log_gamma_draw<R: Rng>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape checked positive");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape checked positive");
        let u: f64 = 1.0 - rng.gen::<f64>();
        g.sample(rng).ln() + u.ln() / shape
    }
}

/// One symmetric Dirichlet draw of size `n`, as normalized log-probabilities.
fn log_dirichlet<R: Rng>(rng: &mut R, n: usize, concentration: f64) -> Vec<f64> {
    let mut logs: Vec<f64> = (0..n).map(|_| log_gamma_draw(rng, concentration)).collect();
    let norm = log_sum_exp(logs.iter().copied());
    logs.iter_mut().for_each(|v| *v -= norm);
    logs
}

/// Deterministic for a given config; every output passes validation.
pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance> {
    config.check()?;
    let l = config.length;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut transitions = vec![vec![LOG_ZERO; l]; l];
    for (t, row) in transitions.iter_mut().enumerate().take(l - 1) {
        let successors = l - t - 1;
        let forbidden = ((config.sparsity * successors as f64).floor() as usize).min(successors - 1);
        let mut allowed = vec![true; successors];
        for k in sample(&mut rng, successors, forbidden) {
            allowed[k] = false;
        }
        let kept: Vec<usize> = (0..successors).filter(|&k| allowed[k]).collect();
        let probs = log_dirichlet(&mut rng, kept.len(), config.transition_concentration);
        for (k, lp) in kept.into_iter().zip(probs) {
            row[t + 1 + k] = lp;
        }
    }
    let emissions: Vec<Vec<f64>> = (0..l)
        .map(|_| log_dirichlet(&mut rng, config.vocab_size, config.emission_concentration))
        .collect();

    Instance::new_validated(l, config.vocab_size, transitions, emissions)
}

/// `count` instances with seeds `seed, seed + 1, ...`.
pub fn generate_batch(config: &GeneratorConfig, count: usize) -> Result<Vec<Instance>> {
    (0..count as u64)
        .map(|k| generate_instance(&config.with_seed(config.seed.wrapping_add(k))))
        .collect()
}
