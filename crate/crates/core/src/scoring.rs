//! Exact probability computations over a lattice.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{DecodingPath, Instance, Translation};
use crate::logspace::{argmax_first, log_sum_exp, LOG_ZERO};

/// Mean row entropies in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyStats {
    /// Mean over non-terminal rows of the transition row entropy.
    pub transition_entropy: f64,
    /// Mean over all positions of the emission row entropy.
    pub prediction_entropy: f64,
}

fn check_path(instance: &Instance, path: &DecodingPath) -> Result<()> {
    // DecodingPath is checked on construction, but against its own length.
    if path.positions().last() != Some(&instance.length()) {
        return Err(Error::PathShape(format!(
            "path {path} does not end at lattice length {}",
            instance.length()
        )));
    }
    Ok(())
}

fn check_tokens(instance: &Instance, tokens: &Translation) -> Result<()> {
    match tokens.tokens().iter().find(|&&y| y >= instance.vocab_size()) {
        Some(&token) => Err(Error::Vocab {
            token,
            vocab_size: instance.vocab_size(),
        }),
        None => Ok(()),
    }
}

/// `log P(A|X)`: sum of hop log-probabilities; `-inf` if any hop is impossible.
pub fn path_log_prob(instance: &Instance, path: &DecodingPath) -> Result<f64> {
    check_path(instance, path)?;
    Ok(path
        .positions()
        .windows(2)
        .map(|w| instance.log_transition(w[0], w[1]))
        .sum())
}

/// `log P(Y|X,A)`: sum of the emission log-probabilities of each token at its position.
pub fn translation_given_path_log_prob(
    instance: &Instance,
    path: &DecodingPath,
    tokens: &Translation,
) -> Result<f64> {
    check_path(instance, path)?;
    if tokens.len() != path.len() {
        return Err(Error::Shape(format!(
            "{} tokens for a path of length {}",
            tokens.len(),
            path.len()
        )));
    }
    check_tokens(instance, tokens)?;
    Ok(path
        .positions()
        .iter()
        .zip(tokens.tokens())
        .map(|(&a, &y)| instance.log_emission(a, y))
        .sum())
}

/// `log P(A,Y|X)`.
pub fn joint_log_prob(instance: &Instance, path: &DecodingPath, tokens: &Translation) -> Result<f64> {
    let emission = translation_given_path_log_prob(instance, path, tokens)?;
    Ok(path_log_prob(instance, path)? + emission)
}

/// `log P(Y|X)`, summed over every path whose length matches `tokens`.
///
/// Forward recursion with target index outer and lattice position inner:
/// `f(i, t) = em(t, y_i) + lse_{t' < t} f(i-1, t') + E(t', t)`, with the
/// first row seeded at position 1 only.
pub fn marginal_translation_log_prob(instance: &Instance, tokens: &Translation) -> Result<f64> {
    let l = instance.length();
    let m = tokens.len();
    if m == 0 {
        return Err(Error::Shape("empty token sequence".into()));
    }
    check_tokens(instance, tokens)?;
    if m > l {
        return Err(Error::InfeasibleLength {
            length: m,
            reason: format!("longer than the lattice length {l}"),
        });
    }
    if m == 1 && l > 1 {
        return Err(Error::InfeasibleLength {
            length: m,
            reason: "paths must visit both endpoints".into(),
        });
    }
    let y = tokens.tokens();

    let mut prev = vec![LOG_ZERO; l];
    prev[0] = instance.log_emission(1, y[0]);
    let mut cur = vec![LOG_ZERO; l];
    for (i, &yi) in y.iter().enumerate().skip(1) {
        // i is 0-based; step i can only reach positions >= i
        cur.iter_mut().for_each(|c| *c = LOG_ZERO);
        for t in i..l {
            let incoming = log_sum_exp(
                (i - 1..t).map(|s| prev[s] + instance.log_transition(s + 1, t + 1)),
            );
            if incoming != LOG_ZERO {
                cur[t] = incoming + instance.log_emission(t + 1, yi);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[l - 1])
}

fn shannon_entropy(log_probs: &[f64]) -> f64 {
    let h: f64 = log_probs
        .iter()
        .filter(|&&lp| lp != LOG_ZERO)
        .map(|&lp| -lp.exp() * lp)
        .sum();
    h.max(0.0)
}

pub fn entropy_stats(instance: &Instance) -> EntropyStats {
    let l = instance.length();
    let transition_entropy = if l > 1 {
        (1..l)
            .map(|t| shannon_entropy(&instance.transition_row(t)[t..]))
            .sum::<f64>()
            / (l - 1) as f64
    } else {
        0.0
    };
    let prediction_entropy = (1..=l)
        .map(|t| shannon_entropy(instance.emission_row(t)))
        .sum::<f64>()
        / l as f64;
    EntropyStats {
        transition_entropy,
        prediction_entropy,
    }
}

/// Most probable token at `position`; ties go to the smallest id.
pub fn argmax_emission(instance: &Instance, position: usize) -> Result<(usize, f64)> {
    if position == 0 || position > instance.length() {
        return Err(Error::Position {
            position,
            length: instance.length(),
        });
    }
    let row = instance.emission_row(position);
    // an all -inf row cannot pass validation; fall back to token 0
    let token = argmax_first(row).unwrap_or(0);
    Ok((token, row[token]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{i2, i4};

    fn path(p: &[usize], l: usize) -> DecodingPath {
        DecodingPath::new(p.to_vec(), l).unwrap()
    }

    fn toks(t: &[usize]) -> Translation {
        Translation(t.to_vec())
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn path_scores() {
        assert_eq!(path_log_prob(&i2(), &path(&[1, 2], 2)).unwrap(), 0.0);
        assert!(close(path_log_prob(&i4(), &path(&[1, 2, 3, 4], 4)).unwrap(), 0.42f64.ln()));
        assert!(DecodingPath::new(vec![1, 3, 2, 4], 4).is_err());
        // a path built for another lattice length is rejected
        assert!(matches!(
            path_log_prob(&i4(), &path(&[1, 2], 2)),
            Err(Error::PathShape(_))
        ));
    }

    #[test]
    fn conditional_translation_scores() {
        let v = translation_given_path_log_prob(&i2(), &path(&[1, 2], 2), &toks(&[0, 1])).unwrap();
        assert!(close(v, 0.72f64.ln()));
        let v = translation_given_path_log_prob(&i4(), &path(&[1, 4], 4), &toks(&[0, 1])).unwrap();
        assert!(close(v, (0.9f64 * 0.7).ln()));
        assert!(matches!(
            translation_given_path_log_prob(&i2(), &path(&[1, 2], 2), &toks(&[0])),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            translation_given_path_log_prob(&i2(), &path(&[1, 2], 2), &toks(&[0, 2])),
            Err(Error::Vocab { token: 2, vocab_size: 2 })
        ));
    }

    #[test]
    fn joint_scores() {
        assert!(close(joint_log_prob(&i2(), &path(&[1, 2], 2), &toks(&[0, 1])).unwrap(), 0.72f64.ln()));
        assert!(close(
            joint_log_prob(&i4(), &path(&[1, 2, 3, 4], 4), &toks(&[0, 1, 0, 1])).unwrap(),
            0.127008f64.ln()
        ));
        assert!(close(joint_log_prob(&i4(), &path(&[1, 4], 4), &toks(&[0, 1])).unwrap(), 0.063f64.ln()));
    }

    #[test]
    fn marginals() {
        assert!(close(marginal_translation_log_prob(&i2(), &toks(&[0, 1])).unwrap(), 0.72f64.ln()));
        assert!(close(marginal_translation_log_prob(&i4(), &toks(&[0, 1])).unwrap(), 0.063f64.ln()));
        assert!(close(
            marginal_translation_log_prob(&i4(), &toks(&[0, 1, 0])).unwrap(),
            0.05616f64.ln()
        ));
        assert!(matches!(
            marginal_translation_log_prob(&i4(), &toks(&[0, 1, 0, 1, 0])),
            Err(Error::InfeasibleLength { length: 5, .. })
        ));
        assert!(matches!(
            marginal_translation_log_prob(&i4(), &toks(&[0])),
            Err(Error::InfeasibleLength { length: 1, .. })
        ));
        assert!(matches!(
            marginal_translation_log_prob(&i4(), &toks(&[])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_position_lattice() {
        let inst = Instance::from_probabilities(&[vec![0.0]], &[vec![0.25, 0.75]]).unwrap();
        assert!(inst.validate().is_empty());
        assert!(close(marginal_translation_log_prob(&inst, &toks(&[1])).unwrap(), 0.75f64.ln()));
        assert_eq!(path_log_prob(&inst, &path(&[1], 1)).unwrap(), 0.0);
        assert_eq!(entropy_stats(&inst).transition_entropy, 0.0);
    }

    #[test]
    fn entropies() {
        let h = |ps: &[f64]| -ps.iter().map(|p| p * p.ln()).sum::<f64>();
        let s = entropy_stats(&i2());
        assert_eq!(s.transition_entropy, 0.0);
        assert!(close(s.prediction_entropy, (h(&[0.9, 0.1]) + h(&[0.2, 0.8])) / 2.0));

        let uniform = Instance::from_probabilities(
            &[vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0], vec![0.0; 3]],
            &[vec![1.0], vec![1.0], vec![1.0]],
        )
        .unwrap();
        let s = entropy_stats(&uniform);
        // rows: ln 2 and 0
        assert!(close(s.transition_entropy, 2f64.ln() / 2.0));
        assert_eq!(s.prediction_entropy, 0.0);

        let row1 = shannon_entropy(&i4().transition_row(1)[1..]);
        assert!((row1 - 0.8018185525).abs() < 1e-9);
    }

    #[test]
    fn argmax_tokens() {
        let (tok, lp) = argmax_emission(&i2(), 1).unwrap();
        assert_eq!(tok, 0);
        assert!(close(lp, 0.9f64.ln()));
        let (tok, lp) = argmax_emission(&i4(), 2).unwrap();
        assert_eq!(tok, 1);
        assert!(close(lp, 0.6f64.ln()));
        let tie = Instance::from_probabilities(&[vec![0.0]], &[vec![0.5, 0.5]]).unwrap();
        assert_eq!(argmax_emission(&tie, 1).unwrap().0, 0);
        assert!(matches!(argmax_emission(&i2(), 0), Err(Error::Position { .. })));
        assert!(matches!(argmax_emission(&i2(), 3), Err(Error::Position { .. })));
    }
}
