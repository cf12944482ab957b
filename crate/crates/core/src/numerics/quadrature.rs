//! Gauss–Hermite rules in the probabilists' convention, `E[f(Z)] ≈ Σ wᵢ f(xᵢ)`
//! for `Z ~ N(0, 1)`, and tensor-product Gaussian expectations built on them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 512;
/// Largest dimension accepted by [`gaussian_expectation`].
pub const MAX_TENSOR_DIM: usize = 4;

/// An immutable Gauss–Hermite rule normalised to the standard normal law.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Abscissas in increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights summing to one. The outermost weights of very high orders
    /// underflow to zero; [`Self::log_weights`] stays finite.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }
}

/// Builds the `order`-point rule by Newton iteration on normalised Hermite
/// functions `ψ_n(x) = H̃_n(x) e^{-x²/2}`, which stay O(1) where the bare
/// polynomials overflow.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(invalid(format!(
            "quadrature order {order} outside [{MIN_ORDER}, {MAX_ORDER}]"
        )));
    }
    let n = order;
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let half = (n + 1) / 2;

    // Roots of the physicists' H_n, largest first.
    let mut roots = vec![0.0f64; half];
    let mut log_w = vec![0.0f64; half];

    for i in 0..half {
        let mut z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => {
                let z0 = roots[0];
                z0 - 1.14 * nf.powf(0.426) / z0
            }
            2 => 1.86 * roots[1] - 0.86 * roots[0],
            3 => 1.91 * roots[2] - 0.91 * roots[1],
            _ => 2.0 * roots[i - 1] - roots[i - 2],
        };
        let mut psi_prev = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let (psi_n, psi_nm1) = hermite_functions(n, z, pim4);
            psi_prev = psi_nm1;
            let deriv = (2.0 * nf).sqrt() * psi_nm1 - z * psi_n;
            let z_old = z;
            z -= psi_n / deriv;
            if (z - z_old).abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                context: format!("Gauss-Hermite root {i} of order {n}"),
                iterations: 100,
            });
        }
        // Re-evaluate at the converged root for the weight.
        let (_, psi_nm1) = hermite_functions(n, z, pim4);
        if psi_nm1 != 0.0 {
            psi_prev = psi_nm1;
        }
        roots[i] = z;
        // w = e^{-z²} / (n ψ_{n-1}(z)²), for the e^{-x²} weight function
        log_w[i] = -z * z - nf.ln() - 2.0 * psi_prev.abs().ln();
    }

    // Probabilists' convention: x = √2 z, weights divided by √π.
    let log_sqrt_pi = 0.5 * PI.ln();
    let mut nodes = vec![0.0; n];
    let mut log_weights = vec![0.0; n];
    for i in 0..half {
        let x = core::f64::consts::SQRT_2 * roots[i];
        let lw = log_w[i] - log_sqrt_pi;
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        log_weights[n - 1 - i] = lw;
        log_weights[i] = lw;
    }
    if n % 2 == 1 {
        nodes[half - 1] = 0.0;
    }
    // Renormalise away the last few ulps of the Newton weights.
    let total = crate::numerics::log_sum_exp_slice(&log_weights);
    for lw in &mut log_weights {
        *lw -= total;
    }
    let weights = log_weights.iter().map(|lw| lw.exp()).collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        log_weights,
    })
}

/// Returns `(ψ_n(z), ψ_{n-1}(z))`.
fn hermite_functions(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4 * (-0.5 * z * z).exp();
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Tensor-product estimate of `E[f(Z)]` for `Z ~ N(0, variance_scale · I_dim)`.
pub fn gaussian_expectation<F>(
    mut f: F,
    dim: usize,
    variance_scale: f64,
    rule: &QuadratureRule,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if dim == 0 || dim > MAX_TENSOR_DIM {
        return Err(invalid(format!(
            "tensor dimension {dim} outside [1, {MAX_TENSOR_DIM}]"
        )));
    }
    if !(variance_scale > 0.0) || !variance_scale.is_finite() {
        return Err(invalid("variance scale must be positive and finite"));
    }
    let scale = variance_scale.sqrt();
    let n = rule.order();
    let mut idx = [0usize; MAX_TENSOR_DIM];
    let mut z = [0.0f64; MAX_TENSOR_DIM];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            z[d] = scale * rule.nodes[idx[d]];
            w *= rule.weights[idx[d]];
        }
        let v = f(&z[..dim]);
        if !v.is_finite() {
            return Err(Error::NumericOverflow {
                context: "gaussian_expectation",
                node: z[..dim].to_vec(),
            });
        }
        total += w * v;
        if !advance(&mut idx[..dim], n) {
            break;
        }
    }
    Ok(total)
}

/// Odometer increment over a tensor grid; false once every index wrapped.
#[inline]
pub(crate) fn advance(idx: &mut [usize], n: usize) -> bool {
    for i in idx.iter_mut() {
        *i += 1;
        if *i < n {
            return true;
        }
        *i = 0;
    }
    false
}
