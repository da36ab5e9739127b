//! Natural-log arithmetic helpers. `-inf` is the log of zero.

pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Max-shifted log-sum-exp. The empty sum is `-inf`.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    if max.is_infinite() {
        return max;
    }
    max + iter.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == LOG_ZERO {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Whether two log-probabilities agree within `tol` relative error in
/// linear space. Two `-inf` values agree.
pub fn rel_close_log(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_nan() || b.is_nan() || a.is_infinite() || b.is_infinite() {
        return false;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    (-(lo - hi).exp_m1()) <= tol
}

/// Index of the maximum entry; ties go to the smallest index. `None` when
/// every entry is `-inf` (or the slice is empty).
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v == LOG_ZERO {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_basic() {
        let v = [0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
        assert!(log_sum_exp(v).abs() < 1e-15);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), LOG_ZERO);
        assert_eq!(log_sum_exp([LOG_ZERO, LOG_ZERO]), LOG_ZERO);
        // large magnitudes do not overflow
        let big = log_sum_exp([1000.0, 1000.0]);
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log_add_matches_lse() {
        let (a, b) = (-3.2, -0.7);
        assert!((log_add(a, b) - log_sum_exp([a, b])).abs() < 1e-15);
        assert_eq!(log_add(LOG_ZERO, -1.0), -1.0);
        assert_eq!(log_add(LOG_ZERO, LOG_ZERO), LOG_ZERO);
    }

    #[test]
    fn argmax_ties_and_empty() {
        assert_eq!(argmax_first(&[-1.0, -0.5, -0.5]), Some(1));
        assert_eq!(argmax_first(&[LOG_ZERO, LOG_ZERO]), None);
        assert_eq!(argmax_first(&[0.5f64.ln(), 0.5f64.ln()]), Some(0));
    }

    #[test]
    fn relative_closeness() {
        assert!(rel_close_log(LOG_ZERO, LOG_ZERO, 1e-9));
        assert!(rel_close_log(-2.0, -2.0 + 1e-12, 1e-9));
        assert!(!rel_close_log(-2.0, -2.0 + 1e-6, 1e-9));
        assert!(!rel_close_log(-2.0, LOG_ZERO, 1e-9));
    }
}
