//! Scalar helpers shared by the loss, engine and specialist modules.
//!
//! Transcendental functions go through `libm` in every build so that game
//! transcripts are bit-identical across platforms and with or without `std`.

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// `e^x - 1`, accurate near zero.
#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

/// `ln(1 + x)`, accurate near zero.
#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// Difference of two extended nonnegative losses.
///
/// `∞ - ∞` is read as `0`; `finite - ∞` is `-∞` and `∞ - finite` is `+∞`,
/// which is what IEEE arithmetic already gives for the last two.
#[inline]
pub fn loss_diff(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY && b == f64::INFINITY {
        0.0
    } else {
        a - b
    }
}

/// `ln Σ e^{x_i}` with a max shift. Returns `-∞` for an empty slice or when
/// every term is `-∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// Normalizes log-weights into probabilities (softmax with a max shift).
pub fn normalize_log_weights(log_w: &[f64]) -> alloc::vec::Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let n = log_w.len() as f64;
        return log_w.iter().map(|_| 1.0 / n).collect();
    }
    let shifted: alloc::vec::Vec<f64> = log_w.iter().map(|&x| exp(x - max)).collect();
    let total: f64 = shifted.iter().sum();
    shifted.into_iter().map(|w| w / total).collect()
}

/// Outcome of a bracketing bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisects a function that is positive at `lo` and negative at `hi`
/// (the caller has already established the signs at the ends).
///
/// Stops when the bracket is no wider than `tol`, when the midpoint hits an
/// exact zero, when floating point can no longer split the bracket, or after
/// `max_iter` halvings. Returns `None` if the function evaluates to NaN.
pub fn bisect_decreasing<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Option<Bracket>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    while hi - lo > tol && iterations < max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let value = f(mid);
        if value.is_nan() {
            return None;
        }
        if value > 0.0 {
            lo = mid;
        } else if value < 0.0 {
            hi = mid;
        } else {
            return Some(Bracket { lo: mid, hi: mid, iterations });
        }
    }
    Some(Bracket { lo, hi, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_difference_convention() {
        assert_eq!(loss_diff(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(loss_diff(1.0, f64::INFINITY), f64::NEG_INFINITY);
        assert_eq!(loss_diff(f64::INFINITY, 3.0), f64::INFINITY);
        assert_eq!(loss_diff(2.5, 0.5), 2.0);
    }

    #[test]
    fn log_sum_exp_handles_large_and_empty() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        let v = log_sum_exp(&[-1000.0, f64::NEG_INFINITY]);
        assert!((v + 1000.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_weights_sum_to_one() {
        let u = normalize_log_weights(&[-800.0, -801.0, f64::NEG_INFINITY]);
        assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(u[2], 0.0);
        assert!(u[0] > u[1]);
    }

    #[test]
    fn bisection_finds_root_of_decreasing_line() {
        let b = bisect_decreasing(|x| 0.3 - x, 0.0, 1.0, 1e-12, 200).unwrap();
        assert!((b.midpoint() - 0.3).abs() < 1e-12);
        assert!(bisect_decreasing(|_| f64::NAN, 0.0, 1.0, 1e-12, 200).is_none());
    }
}
