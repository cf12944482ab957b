//! Gaussian expectations of exponential-family transforms of a finite
//! mixture of log-linear terms,
//!
//! ```text
//! E[exp(offset + s·ξ + P · log Σ_k exp(c_k + a_k·ξ))],   ξ ~ N(0, I_r),
//! ```
//!
//! evaluated entirely in log-space. Mixture powers `F^γ`, the per-scenario
//! numerators `p_k L_k F^{γ-1}` and the dual objectives are all of this form.
//!
//! For long horizons the integrands are sharply peaked far from the origin,
//! so a plain Gauss–Hermite rule loses all accuracy. The rule is instead
//! recentred and rescaled at each local mode of the reference integrand
//! (adaptive Gauss–Hermite), and several modes are blended with a smooth
//! partition of unity built from their local Gaussian approximations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;
use once_cell::race::OnceBox;

use crate::error::{invalid, Error, Result};
use crate::numerics::logsumexp::LogSumExp;
use crate::numerics::quadrature::{advance, gauss_hermite_rule, QuadratureRule};

/// Largest reduced dimension handled by the tensor rules.
pub const MAX_DIM: usize = 4;
/// Per-dimension Gauss–Hermite order used by [`Integrator::default_ref`].
pub const DEFAULT_ORDERS: [usize; MAX_DIM] = [64, 64, 32, 16];

const MODE_TOL: f64 = 1e-11;
const MODE_MAX_ITER: usize = 200;
/// Modes whose peak lies this far (in log units) below the best are dropped.
const MODE_CUTOFF: f64 = 40.0;
/// Lower clamp on the curvature used to scale a rule.
const MIN_CURVATURE: f64 = 1e-2;

/// The mixture `log Σ_k exp(c_k + a_k·ξ)` over `ξ ∈ R^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMixture {
    dim: usize,
    log_coefs: Vec<f64>,
    slopes: Vec<f64>,
}

impl LogMixture {
    /// `slopes` holds the `a_k` row-major, `log_coefs.len() × dim`.
    pub fn new(dim: usize, log_coefs: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Unsupported(format!(
                "reduced dimension {dim} outside [1, {MAX_DIM}]"
            )));
        }
        if log_coefs.is_empty() || slopes.len() != log_coefs.len() * dim {
            return Err(invalid("mixture coefficient and slope shapes disagree"));
        }
        if log_coefs.iter().any(|c| c.is_nan() || *c == f64::INFINITY)
            || slopes.iter().any(|a| !a.is_finite())
        {
            return Err(invalid("mixture coefficients must be finite or -inf"));
        }
        if log_coefs.iter().all(|c| *c == f64::NEG_INFINITY) {
            return Err(invalid("mixture has no mass"));
        }
        Ok(LogMixture {
            dim,
            log_coefs,
            slopes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_coefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_coefs.is_empty()
    }

    pub fn log_coefs(&self) -> &[f64] {
        &self.log_coefs
    }

    pub fn slope(&self, k: usize) -> &[f64] {
        &self.slopes[k * self.dim..(k + 1) * self.dim]
    }

    /// Component exponents `c_k + a_k·ξ` written to `out`; returns their LSE.
    pub fn exponents_into(&self, xi: &[f64], out: &mut [f64]) -> f64 {
        let mut acc = LogSumExp::new();
        for (k, o) in out.iter_mut().enumerate().take(self.len()) {
            let c = self.log_coefs[k];
            *o = if c == f64::NEG_INFINITY {
                c
            } else {
                c + dot(self.slope(k), xi)
            };
            acc.push(*o);
        }
        acc.value()
    }

    pub fn log_value(&self, xi: &[f64]) -> f64 {
        let mut buf = [0.0; 64];
        if self.len() <= buf.len() {
            self.exponents_into(xi, &mut buf[..self.len()])
        } else {
            let mut v = vec![0.0; self.len()];
            self.exponents_into(xi, &mut v)
        }
    }
}

/// `offset + slope·ξ + power · log F(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFamily {
    pub offset: f64,
    pub slope: [f64; MAX_DIM],
    pub power: f64,
}

impl ExpFamily {
    /// `F(ξ)^power`.
    pub fn power(power: f64) -> Self {
        ExpFamily {
            offset: 0.0,
            slope: [0.0; MAX_DIM],
            power,
        }
    }

    /// `exp(c_k + a_k·ξ) · F(ξ)^power`, the k-th component times a power.
    pub fn component(mix: &LogMixture, k: usize, power: f64) -> Self {
        let mut slope = [0.0; MAX_DIM];
        slope[..mix.dim].copy_from_slice(mix.slope(k));
        ExpFamily {
            offset: mix.log_coefs[k],
            slope,
            power,
        }
    }

    #[inline]
    fn log_eval(&self, xi: &[f64], log_f: f64) -> f64 {
        if self.offset == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let pf = if self.power == 0.0 { 0.0 } else { self.power * log_f };
        self.offset + dot(&self.slope[..xi.len()], xi) + pf
    }
}

/// A local Gaussian approximation of the reference integrand.
#[derive(Debug, Clone)]
struct Mode {
    centre: Vec<f64>,
    peak: f64,
    // (-H) = V diag(curv) Vᵀ
    axes: DMatrix<f64>,
    curv: Vec<f64>,
    log_det_scale: f64,
}

impl Mode {
    fn quad_log(&self, xi: &[f64]) -> f64 {
        let r = xi.len();
        let mut q = 0.0;
        for j in 0..r {
            let mut u = 0.0;
            for i in 0..r {
                u += self.axes[(i, j)] * (xi[i] - self.centre[i]);
            }
            q += self.curv[j] * u * u;
        }
        self.peak - 0.5 * q
    }
}

/// Adaptive tensor Gauss–Hermite integrator for [`ExpFamily`] expectations.
#[derive(Debug, Clone)]
pub struct Integrator {
    rules: Vec<QuadratureRule>,
}

static DEFAULT: OnceBox<Integrator> = OnceBox::new();

impl Integrator {
    /// `orders[r-1]` is the per-dimension order used for reduced dimension `r`.
    pub fn new(orders: [usize; MAX_DIM]) -> Result<Self> {
        let rules = orders
            .iter()
            .map(|&n| gauss_hermite_rule(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Integrator { rules })
    }

    /// Shared instance with [`DEFAULT_ORDERS`].
    pub fn default_ref() -> &'static Integrator {
        DEFAULT.get_or_init(|| {
            alloc::boxed::Box::new(
                Integrator::new(DEFAULT_ORDERS).expect("default Gauss-Hermite orders are valid"),
            )
        })
    }

    pub fn rule(&self, dim: usize) -> &QuadratureRule {
        &self.rules[dim - 1]
    }

    /// Writes `log E[exp(family_i)]` into `out[i]`.
    ///
    /// Each family is first reduced exactly: the factor `e^{u·ξ}` with
    /// `u = s + P a_j` (anchor component `j`) is a Gaussian change of mean, after
    /// which the integrand depends on `ξ` only through the differences
    /// `(a_k − a_j)·ξ`. Two-component mixtures therefore always reduce to one
    /// dimension, where a trapezoid rule with step halving is used; it converges
    /// geometrically for these analytic integrands, multimodal or not.
    /// Remaining dimensions above one go to [`Integrator::gauss_hermite`].
    pub fn log_expectations(
        &self,
        mix: &LogMixture,
        families: &[ExpFamily],
        out: &mut [f64],
    ) -> Result<()> {
        if families.is_empty() || out.len() != families.len() {
            return Err(invalid("one output slot per family is required"));
        }
        for (fam, o) in families.iter().zip(out.iter_mut()) {
            *o = match reduce(mix, fam)? {
                Reduced::Closed(v) => v,
                Reduced::Mixture(m, f) if m.dim == 1 => trapezoid_1d(&m, &f)?,
                Reduced::Mixture(m, f) => {
                    let mut v = [0.0];
                    self.gauss_hermite(&m, core::slice::from_ref(&f), &mut v)?;
                    v[0]
                }
            };
        }
        Ok(())
    }

    /// Adaptive tensor Gauss–Hermite without the exact reduction. The rule is
    /// adapted to `families[0]`; the others are evaluated on the same nodes,
    /// which is accurate whenever they are dominated by the first pointwise.
    /// Several modes are blended by a partition of unity, which limits the
    /// accuracy of strongly multimodal integrands to roughly `1e-7`.
    pub fn gauss_hermite(
        &self,
        mix: &LogMixture,
        families: &[ExpFamily],
        out: &mut [f64],
    ) -> Result<()> {
        if families.is_empty() || out.len() != families.len() {
            return Err(invalid("one output slot per family is required"));
        }
        let r = mix.dim;
        let modes = find_modes(mix, &families[0])?;
        let rule = self.rule(r);
        let n = rule.order();
        let nodes = rule.nodes();
        let lw = rule.log_weights();

        let mut acc = vec![LogSumExp::new(); families.len()];
        let mut expo = vec![0.0; mix.len()];
        let mut x = [0.0f64; MAX_DIM];
        let mut xi = [0.0f64; MAX_DIM];
        let mut mode_logs = vec![0.0; modes.len()];

        for (j, mode) in modes.iter().enumerate() {
            let mut idx = [0usize; MAX_DIM];
            loop {
                let mut base = mode.log_det_scale;
                let mut half_sq = 0.0;
                for d in 0..r {
                    x[d] = nodes[idx[d]];
                    base += lw[idx[d]];
                    half_sq += x[d] * x[d];
                }
                for d in 0..r {
                    let mut v = mode.centre[d];
                    for e in 0..r {
                        v += mode.axes[(d, e)] * x[e] / mode.curv[e].sqrt();
                    }
                    xi[d] = v;
                }
                let xi = &xi[..r];
                let gauss = 0.5 * half_sq - 0.5 * dot(xi, xi);
                base += gauss;
                if modes.len() > 1 {
                    for (l, m) in modes.iter().enumerate() {
                        mode_logs[l] = m.quad_log(xi);
                    }
                    base += mode_logs[j] - crate::numerics::log_sum_exp_slice(&mode_logs);
                }
                let log_f = mix.exponents_into(xi, &mut expo);
                for (fam, a) in families.iter().zip(acc.iter_mut()) {
                    let v = base + fam.log_eval(xi, log_f);
                    if v.is_nan() || v == f64::INFINITY {
                        return Err(Error::NumericOverflow {
                            context: "mixture quadrature",
                            node: xi.to_vec(),
                        });
                    }
                    a.push(v);
                }
                if !advance(&mut idx[..r], n) {
                    break;
                }
            }
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.value();
        }
        Ok(())
    }

    /// `log E[exp(family)]` for a single family.
    pub fn log_expectation(&self, mix: &LogMixture, family: &ExpFamily) -> Result<f64> {
        let mut out = [0.0];
        self.log_expectations(mix, core::slice::from_ref(family), &mut out)?;
        Ok(out[0])
    }
}

enum Reduced {
    Closed(f64),
    Mixture(LogMixture, ExpFamily),
}

/// Removes the Gaussian shift and the directions the mixture does not vary in.
fn reduce(mix: &LogMixture, fam: &ExpFamily) -> Result<Reduced> {
    let r = mix.dim;
    let s = &fam.slope[..r];
    if fam.offset == f64::NEG_INFINITY {
        return Ok(Reduced::Closed(f64::NEG_INFINITY));
    }
    if fam.power == 0.0 {
        return Ok(Reduced::Closed(fam.offset + 0.5 * dot(s, s)));
    }
    let active: Vec<usize> = (0..mix.len())
        .filter(|&k| mix.log_coefs[k] != f64::NEG_INFINITY)
        .collect();
    let anchor = active
        .iter()
        .copied()
        .max_by(|&a, &b| mix.log_coefs[a].total_cmp(&mix.log_coefs[b]))
        .ok_or(Error::NonFinite("empty mixture"))?;
    let a0 = mix.slope(anchor);
    let mut u = [0.0; MAX_DIM];
    for i in 0..r {
        u[i] = s[i] + fam.power * a0[i];
    }
    let u = &u[..r];
    let offset = fam.offset + 0.5 * dot(u, u);

    let n = active.len();
    let diff = DMatrix::from_fn(n, r, |k, i| mix.slope(active[k])[i] - a0[i]);
    let coefs: Vec<f64> = (0..n)
        .map(|k| {
            let d: f64 = (0..r).map(|i| diff[(k, i)] * u[i]).sum();
            mix.log_coefs[active[k]] + d
        })
        .collect();
    if !offset.is_finite() || coefs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericOverflow {
            context: "mixture reduction",
            node: u.to_vec(),
        });
    }

    let gram = &diff * diff.transpose();
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&j| top > 0.0 && eig.eigenvalues[j] > 1e-12 * top)
        .collect();
    if keep.is_empty() {
        let lse = crate::numerics::log_sum_exp_slice(&coefs);
        return Ok(Reduced::Closed(offset + fam.power * lse));
    }
    let rr = keep.len();
    let mut slopes = Vec::with_capacity(n * rr);
    for k in 0..n {
        for &j in &keep {
            slopes.push(eig.eigenvectors[(k, j)] * eig.eigenvalues[j].sqrt());
        }
    }
    Ok(Reduced::Mixture(
        LogMixture::new(rr, coefs, slopes)?,
        ExpFamily {
            offset,
            slope: [0.0; MAX_DIM],
            power: fam.power,
        },
    ))
}

/// Tail cut-off for the trapezoid window, in log units below the peak.
const TAIL_CUTOFF: f64 = 50.0;
/// Halving at least squares the trapezoid error for these integrands, so a
/// change of `δ` between successive levels leaves an error of order `δ²`.
const TRAPEZOID_TOL: f64 = 1e-7;
const MAX_HALVINGS: usize = 8;

/// `log E[exp(offset + P log F(η))]`, `η ~ N(0, 1)`, by the trapezoid rule on
/// a window covering every mode, halving the step until successive values
/// agree. The step starts below the distance of the nearest complex zero of
/// `F` to the real axis.
fn trapezoid_1d(mix: &LogMixture, fam: &ExpFamily) -> Result<f64> {
    let modes = find_modes(mix, fam)?;
    let mut obj = Objective {
        mix,
        fam,
        expo: vec![0.0; mix.len()],
    };
    let best = modes.iter().map(|m| m.peak).fold(f64::NEG_INFINITY, f64::max);
    let curv = modes.iter().map(|m| m.curv[0]).fold(1.0, f64::max);
    let (bmin, bmax) = (0..mix.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
        let b = mix.slope(k)[0];
        (lo.min(b), hi.max(b))
    });
    let spread = bmax - bmin;
    let mut h = (1.0 / curv.sqrt()).min(1.0);
    if spread > 0.0 {
        h = h.min(core::f64::consts::PI / (2.0 * spread));
    }

    let mut lo = modes.iter().map(|m| m.centre[0]).fold(f64::INFINITY, f64::min);
    let mut hi = modes.iter().map(|m| m.centre[0]).fold(f64::NEG_INFINITY, f64::max);
    let floor = best - TAIL_CUTOFF;
    let walk = |x: &mut f64, step: f64, obj: &mut Objective<'_>| -> Result<()> {
        for _ in 0..100_000 {
            let v = obj.value(&[*x]);
            if v.is_nan() {
                return Err(Error::NonFinite("trapezoid window"));
            }
            if v < floor {
                return Ok(());
            }
            *x += step;
        }
        Err(Error::Convergence {
            context: "trapezoid window".into(),
            iterations: 100_000,
        })
    };
    walk(&mut lo, -0.5, &mut obj)?;
    walk(&mut hi, 0.5, &mut obj)?;

    let n0 = (((hi - lo) / h).ceil() as usize).max(2);
    let mut h = (hi - lo) / n0 as f64;
    let mut acc = LogSumExp::new();
    let push = |x: f64, acc: &mut LogSumExp, obj: &mut Objective<'_>| -> Result<()> {
        let v = obj.value(&[x]);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NumericOverflow {
                context: "mixture quadrature",
                node: vec![x],
            });
        }
        acc.push(v);
        Ok(())
    };
    for i in 0..=n0 {
        push(lo + i as f64 * h, &mut acc, &mut obj)?;
    }
    let norm = fam.offset - 0.5 * (2.0 * core::f64::consts::PI).ln();
    let mut prev = acc.value() + h.ln();
    let mut n = n0;
    for _ in 0..MAX_HALVINGS {
        for i in 0..n {
            push(lo + (i as f64 + 0.5) * h, &mut acc, &mut obj)?;
        }
        n *= 2;
        h *= 0.5;
        let cur = acc.value() + h.ln();
        if (cur - prev).abs() <= TRAPEZOID_TOL {
            return Ok(norm + cur);
        }
        prev = cur;
    }
    Err(Error::Convergence {
        context: "trapezoid step halving".into(),
        iterations: MAX_HALVINGS,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value, gradient and Hessian of `h(ξ) = s·ξ + P·log F(ξ) − ½|ξ|²`.
struct Objective<'a> {
    mix: &'a LogMixture,
    fam: &'a ExpFamily,
    expo: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn value(&mut self, xi: &[f64]) -> f64 {
        let log_f = self.mix.exponents_into(xi, &mut self.expo);
        self.fam.log_eval(xi, log_f) - self.fam.offset - 0.5 * dot(xi, xi)
    }

    /// Returns h and fills gradient/Hessian.
    fn eval(&mut self, xi: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> f64 {
        let r = xi.len();
        let m = self.mix.len();
        let log_f = self.mix.exponents_into(xi, &mut self.expo);
        let p = self.fam.power;
        let mut mean = [0.0; MAX_DIM];
        let mut second = [[0.0; MAX_DIM]; MAX_DIM];
        for k in 0..m {
            let w = (self.expo[k] - log_f).exp();
            if w == 0.0 {
                continue;
            }
            let a = self.mix.slope(k);
            for i in 0..r {
                mean[i] += w * a[i];
                for j in 0..r {
                    second[i][j] += w * a[i] * a[j];
                }
            }
        }
        for i in 0..r {
            grad[i] = self.fam.slope[i] + p * mean[i] - xi[i];
            for j in 0..r {
                let cov = second[i][j] - mean[i] * mean[j];
                hess[(i, j)] = p * cov - if i == j { 1.0 } else { 0.0 };
            }
        }
        self.fam.log_eval(xi, log_f) - self.fam.offset - 0.5 * dot(xi, xi)
    }
}

fn find_modes(mix: &LogMixture, fam: &ExpFamily) -> Result<Vec<Mode>> {
    let r = mix.dim;
    let m = mix.len();
    let mut obj = Objective {
        mix,
        fam,
        expo: vec![0.0; m],
    };

    // Starting points: the stationary point if one component took all the
    // weight, plus the mean-shift image of the origin.
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for k in 0..m {
        if mix.log_coefs[k] == f64::NEG_INFINITY {
            continue;
        }
        let a = mix.slope(k);
        starts.push((0..r).map(|i| fam.slope[i] + fam.power * a[i]).collect());
    }
    {
        let mut g = vec![0.0; r];
        let mut h = DMatrix::zeros(r, r);
        let zero = vec![0.0; r];
        obj.eval(&zero, &mut g, &mut h);
        starts.push(g);
    }

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    for s in starts {
        let (xi, h) = ascend(&mut obj, s);
        if !h.is_finite() {
            continue;
        }
        let dup = found.iter().any(|(c, _)| {
            let d2: f64 = c.iter().zip(&xi).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() <= 1e-6 * (1.0 + dot(c, c).sqrt())
        });
        if !dup {
            found.push((xi, h));
        }
    }
    if found.is_empty() {
        return Err(Error::NonFinite("mode search"));
    }
    let best = found.iter().map(|(_, h)| *h).fold(f64::NEG_INFINITY, f64::max);
    found.retain(|(_, h)| *h >= best - MODE_CUTOFF);

    let mut modes = Vec::with_capacity(found.len());
    let mut g = vec![0.0; r];
    let mut hess = DMatrix::zeros(r, r);
    for (centre, peak) in found {
        obj.eval(&centre, &mut g, &mut hess);
        let neg = -hess.clone();
        let eig = neg.symmetric_eigen();
        let curv: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&e| if e.is_finite() { e.max(MIN_CURVATURE) } else { 1.0 })
            .collect();
        let log_det_scale = -0.5 * curv.iter().map(|c| c.ln()).sum::<f64>();
        modes.push(Mode {
            centre,
            peak,
            axes: eig.eigenvectors,
            curv,
            log_det_scale,
        });
    }
    Ok(modes)
}

/// Damped Newton ascent on `h`, falling back to the mean-shift step where the
/// Hessian is not negative definite.
fn ascend(obj: &mut Objective<'_>, mut xi: Vec<f64>) -> (Vec<f64>, f64) {
    let r = xi.len();
    let mut g = vec![0.0; r];
    let mut hess = DMatrix::zeros(r, r);
    let mut h = obj.eval(&xi, &mut g, &mut hess);
    let mut trial = vec![0.0; r];
    for _ in 0..MODE_MAX_ITER {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= MODE_TOL * (1.0 + dot(&xi, &xi).sqrt()) {
            break;
        }
        let neg = -hess.clone();
        let step: Vec<f64> = match neg.cholesky() {
            Some(ch) => {
                let s = ch.solve(&DVector::from_column_slice(&g));
                s.iter().copied().collect()
            }
            None => g.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..r {
                trial[i] = xi[i] + t * step[i];
            }
            let ht = obj.value(&trial);
            if ht.is_finite() && ht >= h - 1e-14 * h.abs() {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let moved: f64 = (0..r).map(|i| (trial[i] - xi[i]).abs()).fold(0.0, f64::max);
        xi.copy_from_slice(&trial);
        h = obj.eval(&xi, &mut g, &mut hess);
        if moved <= 1e-15 * (1.0 + dot(&xi, &xi).sqrt()) {
            break;
        }
    }
    (xi, h)
}
