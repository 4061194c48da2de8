//! Weights of `(-Δ_h)^{α/2}` on the unit lattice,
//! `K_{β,1} = |Γ(-α/2)|^{-1} ∫_0^∞ G(β,t) t^{-1-α/2} dt` with
//! `G(β,t) = e^{-2Nt} ∏ I_{|β_i|}(2t)`.
//!
//! The `t`-integral is split in three: `(0,1)` by the power series of the
//! Bessel product integrated term by term, `[1,T]` by composite
//! Gauss–Legendre in `ln t` with two-level refinement, and `[T,∞)` by the
//! large-argument expansion of `e^{-x} I_m(x)` integrated exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{bessel_asymptotic_coefficients, gamma, gauss_legendre, ln_gamma, scaled_bessel_i_sequence};

const PANEL_NODES: usize = 20;
const SERIES_TERMS: usize = 30;
const ASYMPTOTIC_TERMS: usize = 8;

/// `K_{β,1}` for all `|β|_∞ <= max_index`, stored once per orbit of the
/// hyperoctahedral group.
#[derive(Debug, Clone)]
pub struct FractionalKernel {
    alpha: f64,
    dim: usize,
    max_index: usize,
    weights: HashMap<Vec<usize>, f64>,
    total: f64,
    error_estimate: f64,
}

fn canonical(beta: &[i64]) -> Vec<usize> {
    let mut c: Vec<usize> = beta.iter().map(|b| b.unsigned_abs() as usize).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c
}

fn canonical_indices(dim: usize, max_index: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, bound: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            if prefix.iter().any(|&v| v > 0) {
                out.push(prefix.clone());
            }
            return;
        }
        for v in 0..=bound {
            prefix.push(v);
            rec(dim, v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, max_index, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// `∫_0^1 t^q e^{-a t} dt = e^{-a} Σ_k a^k / ((q+1)(q+2)…(q+k+1))` for `q > -1`.
fn incomplete_moment(q: f64, a: f64) -> f64 {
    let mut term = 1.0 / (q + 1.0);
    let mut sum = term;
    for k in 1..400 {
        term *= a / (q + k as f64 + 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    (-a).exp() * sum
}

/// `∫_0^1 G(β,t) t^{-1-s} dt` from the series of `∏ I_{m_i}(2t)`.
fn small_time_part(beta: &[usize], s: f64) -> f64 {
    let dim = beta.len();
    // coefficients of the product indexed by power of t
    let mut poly: Vec<f64> = vec![1.0];
    for &m in beta {
        let len = m + 2 * SERIES_TERMS + 1;
        let mut factor = vec![0.0; len];
        for k in 0..SERIES_TERMS {
            let ln_c = -ln_gamma(k as f64 + 1.0) - ln_gamma((m + k) as f64 + 1.0);
            factor[m + 2 * k] = ln_c.exp();
        }
        let mut next = vec![0.0; poly.len() + len - 1];
        for (i, a) in poly.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in factor.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    }
    let a = 2.0 * dim as f64;
    poly.iter()
        .enumerate()
        .filter(|(_, c)| **c > 0.0)
        .map(|(p, c)| c * incomplete_moment(p as f64 - 1.0 - s, a))
        .sum()
}

/// `∫_T^∞ G(β,t) t^{-1-s} dt` from the large-argument expansion.
fn large_time_part(beta: &[usize], s: f64, t_big: f64) -> f64 {
    let dim = beta.len();
    // per factor: e^{-2t} I_m(2t) ~ (4πt)^{-1/2} Σ_k (-1)^k a_k(m) (2t)^{-k}
    let mut series = vec![1.0];
    for &m in beta {
        let a = bessel_asymptotic_coefficients(m, ASYMPTOTIC_TERMS);
        let factor: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 0 { c } else { -c } / 2f64.powi(k as i32))
            .collect();
        let mut next = vec![0.0; ASYMPTOTIC_TERMS];
        for (i, x) in series.iter().enumerate() {
            for (j, y) in factor.iter().enumerate() {
                if i + j < ASYMPTOTIC_TERMS {
                    next[i + j] += x * y;
                }
            }
        }
        series = next;
    }
    let pref = (4.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0);
    series
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let e = s + dim as f64 / 2.0 + j as f64;
            c * t_big.powf(-e) / e
        })
        .sum::<f64>()
        * pref
}

/// `∫_1^T G(β,t) t^{-1-s} dt` for every canonical β (and β = 0 in the
/// last slot) with panels of width `width` in `ln t`.
fn mid_time_part(betas: &[Vec<usize>], dim: usize, max_index: usize, s: f64, t_big: f64, width: f64) -> Vec<f64> {
    let (x, w) = gauss_legendre(PANEL_NODES);
    let u_end = t_big.ln();
    let panels = (u_end / width).ceil() as usize;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let a = p as f64 * width;
            let b = ((p + 1) as f64 * width).min(u_end);
            let c = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            x.iter()
                .zip(&w)
                .map(move |(xi, wi)| (c + r * xi, r * wi))
                .collect::<Vec<_>>()
        })
        .collect();
    let n = betas.len() + 1;
    nodes
        .par_iter()
        .fold(
            || vec![0.0; n],
            |mut acc, &(u, wu)| {
                let t = u.exp();
                let g = scaled_bessel_i_sequence(2.0 * t, max_index);
                let scale = wu * t.powf(-s);
                for (k, beta) in betas.iter().enumerate() {
                    let mut prod = 1.0;
                    for &m in beta {
                        prod *= g[m];
                        if prod == 0.0 {
                            break;
                        }
                    }
                    acc[k] += scale * prod;
                }
                acc[n - 1] += scale * g[0].powi(dim as i32);
                acc
            },
        )
        .reduce(
            || vec![0.0; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// `∫_0^1 (1 - G(0,t)) t^{-1-s} dt`, with `t = v^{1/(1-s)}` removing the
/// endpoint singularity.
fn total_small_time(dim: usize, s: f64) -> Result<f64> {
    let n = dim as f64;
    let one_minus_g0 = |t: f64| {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..40 {
            term *= t * t / (k as f64 * k as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        let ln_g0 = -2.0 * n * t + n * sum.ln_1p();
        -ln_g0.exp_m1()
    };
    let p = 1.0 / (1.0 - s);
    let f = |v: f64| {
        if v == 0.0 {
            return 2.0 * n * p;
        }
        let t = v.powf(p);
        one_minus_g0(t) / t * p
    };
    integrate(&f, 0.0, 1.0, Tolerance::new(1e-15, 1e-14)).map_err(|e| e.context("discrete fractional total mass"))
}

impl FractionalKernel {
    /// Compute all weights with `|β|_∞ <= max_index` to absolute tolerance `tol`.
    pub fn compute(alpha: f64, dim: usize, max_index: usize, tol: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(param(format!("fractional order must lie in (0, 2), got {alpha}")));
        }
        if dim < 1 {
            return Err(param("dimension must be >= 1"));
        }
        if !(tol > 0.0) {
            return Err(param("kernel tolerance must be positive"));
        }
        let s = 0.5 * alpha;
        let gam = gamma(-s).abs();
        let betas = canonical_indices(dim, max_index);
        let t_big = 100f64.max(50.0 * (max_index * max_index) as f64);

        let mut width = 0.5;
        let mut prev = mid_time_part(&betas, dim, max_index, s, t_big, width);
        let mut mid;
        let mut diff;
        let mut levels = 0;
        loop {
            width *= 0.5;
            levels += 1;
            mid = mid_time_part(&betas, dim, max_index, s, t_big, width);
            diff = mid.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / gam;
            if diff <= tol {
                break;
            }
            if levels >= 4 {
                return Err(Error::Convergence {
                    what: "discrete fractional weights".into(),
                    detail: format!("refinement difference {diff:e} above tolerance {tol:e}"),
                });
            }
            prev = mid;
        }

        let small: Vec<f64> = betas.par_iter().map(|b| small_time_part(b, s)).collect();
        let mut weights = HashMap::with_capacity(betas.len());
        for (k, beta) in betas.iter().enumerate() {
            let v = (small[k] + mid[k] + large_time_part(beta, s, t_big)) / gam;
            weights.insert(beta.clone(), v);
        }
        let zero = vec![0usize; dim];
        let g0_tail = mid[betas.len()] + large_time_part(&zero, s, t_big);
        let total = (total_small_time(dim, s)? + 1.0 / s - g0_tail) / gam;
        Ok(Self {
            alpha,
            dim,
            max_index,
            weights,
            total,
            error_estimate: diff,
        })
    }

    /// Shared cache: reuses any previously computed kernel with the same
    /// `(α, N, tol)` and at least `max_index`.
    pub fn cached(alpha: f64, dim: usize, max_index: usize, tol: f64) -> Result<Arc<Self>> {
        type Key = (u64, usize, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<FractionalKernel>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (alpha.to_bits(), dim, tol.to_bits());
        if let Some(k) = cache.lock().expect("kernel cache").get(&key) {
            if k.max_index >= max_index {
                return Ok(Arc::clone(k));
            }
        }
        let kernel = Arc::new(Self::compute(alpha, dim, max_index, tol)?);
        let mut guard = cache.lock().expect("kernel cache");
        let keep = match guard.get(&key) {
            Some(k) => k.max_index < kernel.max_index,
            None => true,
        };
        if keep {
            guard.insert(key, Arc::clone(&kernel));
        }
        Ok(kernel)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    /// `Σ_{β≠0} K_{β,1}` over the whole lattice (equals `K_{0,1}`).
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Largest change between the last two refinement levels.
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    /// `K_{β,1}`, `None` for β = 0 or outside the computed range.
    pub fn weight(&self, beta: &[i64]) -> Option<f64> {
        if beta.len() != self.dim {
            return None;
        }
        self.weights.get(&canonical(beta)).copied()
    }
}
