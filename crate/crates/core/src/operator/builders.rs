use std::sync::OnceLock;

use rayon::prelude::*;

use super::{DiscreteOperator, FractionalKernel, Provenance};
use crate::error::{param, Error, Result};
use crate::levy::{LevyMeasureSpec, MeasureKind};
use crate::quadrature::{integrate_box, BallRegion};
use crate::special::gauss_legendre;

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(param(format!("grid spacing must be positive, got {h}")));
    }
    Ok(())
}

/// Every multi-index in `[-m, m]^N` that is lexicographically positive.
fn positive_half(dim: usize, m: usize) -> Vec<Vec<i64>> {
    let m = m as i64;
    let side = (2 * m + 1) as usize;
    let count = side.pow(dim as u32);
    (0..count)
        .map(|mut k| {
            let mut b = vec![0i64; dim];
            for d in (0..dim).rev() {
                b[d] = (k % side) as i64 - m;
                k /= side;
            }
            b
        })
        .filter(|b| b.iter().find(|v| **v != 0).is_some_and(|v| *v > 0))
        .collect()
}

fn mirrored(half: Vec<(Vec<i64>, f64)>) -> Vec<(Vec<i64>, f64)> {
    let mut all = Vec::with_capacity(2 * half.len());
    for (b, w) in half {
        all.push((b.iter().map(|v| -v).collect(), w));
        all.push((b, w));
    }
    all
}

fn stencil_radius(r_tail: f64, h: f64) -> Result<usize> {
    let m = (r_tail / h + 1e-9).floor();
    if m < 1.0 {
        return Err(param(format!("tail radius {r_tail} is below one grid spacing {h}")));
    }
    Ok(m as usize)
}

/// The trivial discretization `L^h ≡ 0`.
pub fn zero_operator(dim: usize, h: f64) -> Result<DiscreteOperator> {
    check_h(h)?;
    DiscreteOperator::from_entries(dim, h, Vec::new(), 0.0, Provenance::new("zero"))
}

/// Standard second differences: `1/h²` at `±h e_i`.
pub fn local_laplacian_operator(h: f64, dim: usize) -> Result<DiscreteOperator> {
    check_h(h)?;
    let w = 1.0 / (h * h);
    let mut entries = Vec::with_capacity(2 * dim);
    for d in 0..dim {
        for s in [-1, 1] {
            let mut b = vec![0i64; dim];
            b[d] = s;
            entries.push((b, w));
        }
    }
    DiscreteOperator::from_entries(dim, h, entries, 0.0, Provenance::new("local_laplacian").param("h", h))
}

/// Second differences scaled by `(1/2N) ∫_{|z|<r} |z|² dμ`.
pub fn vanishing_viscosity_operator(spec: &LevyMeasureSpec, r: f64, h: f64) -> Result<DiscreteOperator> {
    check_h(h)?;
    let dim = spec.dim();
    if spec.is_zero() {
        return zero_operator(dim, h);
    }
    if !spec.is_radial() {
        return Err(Error::UnsupportedMeasure(
            "the second-difference viscosity form needs a radially symmetric measure".into(),
        ));
    }
    if !(r >= h) {
        return Err(param(format!("viscosity radius r = {r} must be at least h = {h}")));
    }
    let m2 = spec.small_ball_second_moment(r)?;
    let w = m2 / (2.0 * dim as f64 * h * h);
    let entries: Vec<(Vec<i64>, f64)> = (0..dim)
        .flat_map(|d| {
            [-1i64, 1].into_iter().map(move |s| {
                let mut b = vec![0i64; dim];
                b[d] = s;
                (b, w)
            })
        })
        .collect();
    DiscreteOperator::from_entries(
        dim,
        h,
        entries,
        0.0,
        Provenance::new("vanishing_viscosity").param("r", r).param("h", h),
    )
}

fn check_truncation(r: f64, h: f64, r_tail: f64) -> Result<()> {
    check_h(h)?;
    if !(r >= h) {
        return Err(param(format!("cutoff r = {r} must be at least h = {h}")));
    }
    if !(r_tail >= r) {
        return Err(param(format!("tail radius {r_tail} is below the cutoff {r}")));
    }
    Ok(())
}

/// Midpoint rule on `{|z| > r}`: `ω_β = μ((z_β + R_h) ∩ {|z| > r})` for
/// `|β|_∞ <= R_tail/h`; every cell meeting `{|z| > r}` is kept so that
/// weights and tail together account for all of `μ({|z| > r})`.
pub fn midpoint_operator(spec: &LevyMeasureSpec, r: f64, h: f64, r_tail: f64) -> Result<DiscreteOperator> {
    check_truncation(r, h, r_tail)?;
    let dim = spec.dim();
    if spec.is_zero() {
        return zero_operator(dim, h);
    }
    let m = stencil_radius(r_tail, h)?;
    let half: Result<Vec<(Vec<i64>, f64)>> = positive_half(dim, m)
        .into_par_iter()
        .map(|b| {
            let c: Vec<f64> = b.iter().map(|v| *v as f64 * h).collect();
            spec.cell_mass(&c, 0.5 * h, r).map(|w| (b, w))
        })
        .collect();
    let tail = spec.mass_outside_cube((m as f64 + 0.5) * h, r)?;
    DiscreteOperator::from_entries(
        dim,
        h,
        mirrored(half?),
        tail,
        Provenance::new("midpoint")
            .param("r", r)
            .param("h", h)
            .param("r_tail", r_tail),
    )
}

/// `∫_a^b (λ z + κ) c z^{-1-α} dz` for `0 < a < b`.
fn fractional_linear_moment(c: f64, alpha: f64, a: f64, b: f64, lambda: f64, kappa: f64) -> f64 {
    let m0 = (a.powf(-alpha) - b.powf(-alpha)) / alpha;
    let m1 = if (alpha - 1.0).abs() < 1e-12 {
        (b / a).ln()
    } else {
        (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha)
    };
    c * (lambda * m1 + kappa * m0)
}

/// Tensor hat function of node β at `z`.
fn hat(beta: &[i64], h: f64, z: &[f64]) -> f64 {
    beta.iter()
        .zip(z)
        .map(|(b, x)| (1.0 - (x / h - *b as f64).abs()).max(0.0))
        .product()
}

fn multilinear_weight(spec: &LevyMeasureSpec, beta: &[i64], h: f64, r: f64) -> Result<f64> {
    let dim = beta.len();
    if let (MeasureKind::Fractional { alpha }, 1) = (spec.kind(), dim) {
        let j = beta[0].unsigned_abs() as f64;
        let c = spec.normalization();
        let mut w = 0.0;
        // left piece p = z/h − (j − 1), right piece p = (j + 1) − z/h
        let (a, b) = (((j - 1.0) * h).max(r), j * h);
        if b > a {
            w += fractional_linear_moment(c, *alpha, a, b, 1.0 / h, -(j - 1.0));
        }
        let (a, b) = ((j * h).max(r), (j + 1.0) * h);
        if b > a {
            w += fractional_linear_moment(c, *alpha, a, b, -1.0 / h, j + 1.0);
        }
        return Ok(w.max(0.0));
    }
    // split the support into the 2^N boxes where the hat is multilinear
    let mut total = 0.0;
    for corner in 0..(1usize << dim) {
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        for d in 0..dim {
            let c = beta[d] as f64 * h;
            if corner >> d & 1 == 0 {
                lo[d] = c - h;
                hi[d] = c;
            } else {
                lo[d] = c;
                hi[d] = c + h;
            }
        }
        let weight = |z: &[f64]| hat(beta, h, z);
        total += spec.weighted_box_integral(&weight, &lo, &hi, r)?;
    }
    Ok(total)
}

/// Hat-function quadrature: `ω_β = ∫_{|z|>r} p_β dμ` with tensor hats.
pub fn multilinear_operator(spec: &LevyMeasureSpec, r: f64, h: f64, r_tail: f64) -> Result<DiscreteOperator> {
    check_truncation(r, h, r_tail)?;
    let dim = spec.dim();
    if spec.is_zero() {
        return zero_operator(dim, h);
    }
    let m = stencil_radius(r_tail, h)?;
    let half: Result<Vec<(Vec<i64>, f64)>> = positive_half(dim, m)
        .into_par_iter()
        .map(|b| multilinear_weight(spec, &b, h, r).map(|w| (b, w)))
        .collect();
    // neglected part: ∫ (1 − ∏ q(z_d)) dμ with q the sum of the kept hats
    let inner = m as f64 * h;
    let outer = (m as f64 + 1.0) * h;
    let q = |t: f64| ((outer - t.abs()) / h).clamp(0.0, 1.0);
    let far = spec.mass_outside_cube(outer, r)?;
    let edges = [-outer, -inner, inner, outer];
    let mut shell = 0.0;
    let mut idx = vec![0usize; dim];
    'cells: loop {
        if !idx.iter().all(|&i| i == 1) {
            let lo: Vec<f64> = idx.iter().map(|&i| edges[i]).collect();
            let hi: Vec<f64> = idx.iter().map(|&i| edges[i + 1]).collect();
            let weight = |z: &[f64]| 1.0 - z.iter().map(|t| q(*t)).product::<f64>();
            shell += spec.weighted_box_integral(&weight, &lo, &hi, r)?;
        }
        let mut d = 0;
        loop {
            if d == dim {
                break 'cells;
            }
            idx[d] += 1;
            if idx[d] < 3 {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
    DiscreteOperator::from_entries(
        dim,
        h,
        mirrored(half?),
        far + shell,
        Provenance::new("multilinear")
            .param("r", r)
            .param("h", h)
            .param("r_tail", r_tail),
    )
}

/// Lagrange basis polynomial `ℓ_i` on the nodes `0..=k`.
fn lagrange_basis(k: usize, i: usize, s: f64) -> f64 {
    let mut v = 1.0;
    for m in 0..=k {
        if m != i {
            v *= (s - m as f64) / (i as f64 - m as f64);
        }
    }
    v
}

/// `∫_0^k ℓ_i(s) ds`, the Newton–Cotes weights in lattice units.
fn newton_cotes(k: usize) -> Vec<f64> {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| gauss_legendre(8));
    (0..=k)
        .map(|i| {
            x.iter()
                .zip(w)
                .map(|(xi, wi)| {
                    let s = 0.5 * k as f64 * (xi + 1.0);
                    wi * lagrange_basis(k, i, s)
                })
                .sum::<f64>()
                * 0.5
                * k as f64
        })
        .collect()
}

/// Panels (in panel units per axis) that contain lattice coordinate `j`
/// together with the local node number, limited to `|panel| < panels`.
fn panels_of(j: i64, k: usize, panels: i64) -> Vec<(i64, usize)> {
    let k = k as i64;
    let p = j.div_euclid(k);
    let i = j.rem_euclid(k) as usize;
    let mut out = Vec::with_capacity(2);
    if p >= -panels && p < panels {
        out.push((p, i));
    }
    if i == 0 && p > -panels && p - 1 < panels {
        out.push((p - 1, k as usize));
    }
    out
}

/// Lagrange interpolation of `(ψ(x+·) − ψ(x)) μ(·)` on panels of `k` cells
/// aligned at the origin: `ω_β = μ(z_β) ∫_{|z|>r} p^k_β(z) dz`. Negative
/// basis integrals are clamped to zero and reported in the provenance.
pub fn lagrange_operator(spec: &LevyMeasureSpec, k: usize, r: f64, h: f64, r_tail: f64) -> Result<DiscreteOperator> {
    if k > 7 {
        return Err(Error::OrderUnsupported(k));
    }
    if k < 1 {
        return Err(param("Lagrange order must be at least 1"));
    }
    check_truncation(r, h, r_tail)?;
    let dim = spec.dim();
    if spec.is_zero() {
        return zero_operator(dim, h);
    }
    let m = stencil_radius(r_tail, h)?;
    let panels = (m / k).max(1) as i64;
    let reach = panels as usize * k;
    let nc = newton_cotes(k);
    let tol = spec.tolerance();
    let span = k as f64 * h;

    let basis_integral = |beta: &[i64]| -> Result<f64> {
        let per_axis: Vec<Vec<(i64, usize)>> = beta.iter().map(|&j| panels_of(j, k, panels)).collect();
        let mut total = 0.0;
        let mut pos = vec![0usize; dim];
        if per_axis.iter().any(|v| v.is_empty()) {
            return Ok(0.0);
        }
        loop {
            let choice: Vec<(i64, usize)> = (0..dim).map(|d| per_axis[d][pos[d]]).collect();
            let lo: Vec<f64> = choice.iter().map(|(p, _)| *p as f64 * span).collect();
            let hi: Vec<f64> = lo.iter().map(|a| a + span).collect();
            let near2: f64 = lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| {
                    if *a <= 0.0 && *b >= 0.0 {
                        0.0
                    } else {
                        a.abs().min(b.abs()).powi(2)
                    }
                })
                .sum();
            if near2 >= r * r {
                total += choice.iter().map(|(_, i)| h * nc[*i]).product::<f64>();
            } else {
                let f = |z: &[f64]| {
                    choice
                        .iter()
                        .zip(z)
                        .map(|((p, i), x)| lagrange_basis(k, *i, x / h - (*p * k as i64) as f64))
                        .product::<f64>()
                };
                total += integrate_box(&f, &lo, &hi, BallRegion::Outside(r), tol)
                    .map_err(|e| e.context("Lagrange basis integral"))?;
            }
            let mut d = 0;
            loop {
                if d == dim {
                    return Ok(total);
                }
                pos[d] += 1;
                if pos[d] < per_axis[d].len() {
                    break;
                }
                pos[d] = 0;
                d += 1;
            }
        }
    };

    let half: Result<Vec<(Vec<i64>, f64, bool)>> = positive_half(dim, reach)
        .into_par_iter()
        .filter(|b| {
            let z2: f64 = b.iter().map(|v| (*v as f64 * h).powi(2)).sum();
            z2 > r * r
        })
        .map(|b| {
            let z: Vec<f64> = b.iter().map(|v| *v as f64 * h).collect();
            let integral = basis_integral(&b)?;
            let clamped = integral < 0.0;
            Ok((b, spec.density(&z) * integral.max(0.0), clamped))
        })
        .collect();
    let half = half?;
    let clamped = half.iter().filter(|(_, _, c)| *c).count();
    let mut provenance = Provenance::new("lagrange")
        .param("k", k)
        .param("r", r)
        .param("h", h)
        .param("r_tail", r_tail);
    if clamped > 0 {
        provenance
            .notes
            .push(format!("{} negative basis integrals clamped to 0", 2 * clamped));
    }
    let tail = spec.mass_outside_cube(reach as f64 * h, r)?;
    DiscreteOperator::from_entries(
        dim,
        h,
        mirrored(half.into_iter().map(|(b, w, _)| (b, w)).collect()),
        tail,
        provenance,
    )
}

/// Weights `K_{β,h} = h^{-α} K_{β,1}` of `-(-Δ_h)^{α/2}` for
/// `|β|_∞ <= R_tail/h`; the rest of the lattice sum is the tail.
pub fn discrete_fractional_laplacian(
    alpha: f64,
    h: f64,
    dim: usize,
    tol: f64,
    r_tail: f64,
) -> Result<DiscreteOperator> {
    check_h(h)?;
    let m = stencil_radius(r_tail, h)?;
    let kernel = FractionalKernel::cached(alpha, dim, m, tol)?;
    let scale = h.powf(-alpha);
    let half: Vec<(Vec<i64>, f64)> = positive_half(dim, m)
        .into_iter()
        .map(|b| {
            let w = kernel.weight(&b).expect("kernel covers the stencil");
            (b, scale * w)
        })
        .collect();
    let kept: f64 = 2.0 * half.iter().map(|(_, w)| w).sum::<f64>();
    let tail = (scale * kernel.total() - kept).max(0.0);
    let mut provenance = Provenance::new("discrete_fractional")
        .param("alpha", alpha)
        .param("h", h)
        .param("r_tail", r_tail)
        .param("tol", tol);
    provenance
        .notes
        .push(format!("refinement difference {:e}", kernel.error_estimate()));
    DiscreteOperator::from_entries(dim, h, mirrored(half), tail, provenance)
}

/// Second differences along the columns `σ_i` at distance `η`, with the
/// off-grid points `x ± ησ_i` multilinearly interpolated on the grid.
pub fn sigma_operator(dim: usize, columns: &[Vec<f64>], h: f64, eta: f64) -> Result<DiscreteOperator> {
    check_h(h)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(param(format!("η must be positive, got {eta}")));
    }
    let mut entries: std::collections::BTreeMap<Vec<i64>, f64> = std::collections::BTreeMap::new();
    for col in columns {
        if col.len() != dim {
            return Err(param(format!("σ column {col:?} does not have {dim} components")));
        }
        for sign in [1.0, -1.0] {
            let y: Vec<f64> = col.iter().map(|c| sign * eta * c / h).collect();
            let base: Vec<f64> = y.iter().map(|v| v.floor()).collect();
            let frac: Vec<f64> = y.iter().zip(&base).map(|(v, b)| v - b).collect();
            for corner in 0..(1usize << dim) {
                let mut coef = 1.0;
                let mut beta = vec![0i64; dim];
                for d in 0..dim {
                    let up = corner >> d & 1 == 1;
                    coef *= if up { frac[d] } else { 1.0 - frac[d] };
                    beta[d] = base[d] as i64 + up as i64;
                }
                if coef > 0.0 && beta.iter().any(|&b| b != 0) {
                    *entries.entry(beta).or_insert(0.0) += coef / (eta * eta);
                }
            }
        }
    }
    // exact symmetry: average each pair
    let sym: Vec<(Vec<i64>, f64)> = entries
        .iter()
        .map(|(b, w)| {
            let neg: Vec<i64> = b.iter().map(|v| -v).collect();
            let other = entries.get(&neg).copied().unwrap_or(0.0);
            (b.clone(), 0.5 * (w + other))
        })
        .collect();
    DiscreteOperator::from_entries(
        dim,
        h,
        sym,
        0.0,
        Provenance::new("sigma")
            .param("h", h)
            .param("eta", eta)
            .param("columns", columns.len()),
    )
}
