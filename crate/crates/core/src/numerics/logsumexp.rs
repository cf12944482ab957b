#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

/// `log Σ exp(log_weight + exponent)` over `(log_weight, exponent)` pairs.
///
/// Entries equal to `-inf` contribute nothing; an all `-inf` (or empty) input
/// returns `-inf`.
pub fn log_sum_exp(log_terms: &[(f64, f64)]) -> f64 {
    let mut acc = LogSumExp::new();
    for &(w, e) in log_terms {
        acc.push(w + e);
    }
    acc.value()
}

/// `log Σ exp(x_i)`.
pub fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub const fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Softmax of `xs` written into `out`; returns the log-normaliser.
pub fn softmax_into(xs: &[f64], out: &mut [f64]) -> f64 {
    let lse = log_sum_exp_slice(xs);
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = (x - lse).exp();
    }
    lse
}
