use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param, Result};
use crate::grid::{CellRegion, Field, UniformGrid};
use crate::stepper::{run, SchemeConfig, Source, Trajectory};

use super::equicontinuity::time_modulus;

/// Two sets of data `(u₀, f)` and `(v₀, g)`; sources are slab averages per
/// step, empty for `f ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedData {
    pub u0: Field,
    pub v0: Field,
    pub f: Vec<Field>,
    pub g: Vec<Field>,
}

impl PairedData {
    pub fn without_sources(u0: Field, v0: Field) -> Self {
        Self {
            u0,
            v0,
            f: Vec::new(),
            g: Vec::new(),
        }
    }

    /// `u₀ ≤ v₀` and `f ≤ g` cellwise.
    pub fn is_ordered(&self) -> bool {
        let le = |a: &Field, b: &Field| a.values().iter().zip(b.values()).all(|(x, y)| x <= y);
        le(&self.u0, &self.v0) && self.f.iter().zip(&self.g).all(|(a, b)| le(a, b))
    }
}

/// Options for [`random_pairs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOptions {
    /// Data vanish outside `[-support, support]^N`.
    pub support: f64,
    /// Initial values are drawn from `[0, amplitude]`.
    pub amplitude: f64,
    /// Number of steps with random sources of size up to `source_amplitude`;
    /// `None` for `f = g = 0`.
    pub source_steps: Option<usize>,
    pub source_amplitude: f64,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            support: 2.0,
            amplitude: 1.0,
            source_steps: None,
            source_amplitude: 0.5,
        }
    }
}

/// `count` random pairs; even-numbered pairs are ordered (`v = u + noise`
/// with nonnegative noise), odd-numbered ones independent.
pub fn random_pairs(grid: UniformGrid, count: usize, seed: u64, opts: PairOptions) -> Vec<PairedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = CellRegion::centered(&grid, opts.support);
    let inside: Vec<bool> = (0..grid.len()).map(|k| region.contains(&grid.index(k))).collect();
    let draw = |rng: &mut ChaCha8Rng, amp: f64| -> Field {
        let v = inside
            .iter()
            .map(|&i| if i { rng.random_range(0.0..amp) } else { 0.0 })
            .collect();
        Field::from_values(grid, v).expect("finite random values")
    };
    (0..count)
        .map(|i| {
            let ordered = i % 2 == 0;
            let u0 = draw(&mut rng, opts.amplitude);
            let other = draw(&mut rng, opts.amplitude);
            let v0 = if ordered {
                u0.zip_map(&other, |a, b| a + 0.25 * b).expect("same grid")
            } else {
                other
            };
            let (mut f, mut g) = (Vec::new(), Vec::new());
            if let Some(steps) = opts.source_steps {
                for _ in 0..steps {
                    let a = draw(&mut rng, opts.source_amplitude);
                    let b = draw(&mut rng, opts.source_amplitude);
                    if ordered {
                        g.push(a.zip_map(&b, |x, y| x + y).expect("same grid"));
                    } else {
                        g.push(b);
                    }
                    f.push(a);
                }
            }
            PairedData { u0, v0, f, g }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    /// Largest measured violation (0 when the inequality holds exactly).
    pub violation: f64,
    pub tolerance: f64,
    /// Number of runs or pairs that entered the measurement.
    pub samples: usize,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.violation <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(PropertyCheck::passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub const CSV_HEADER: &'static str = "property,violation,tolerance,samples,passed";

    pub fn csv_rows(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{},{:.6e},{:.6e},{},{}",
                    c.name,
                    c.violation,
                    c.tolerance,
                    c.samples,
                    c.passed()
                )
            })
            .collect()
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<22} violation {:.3e} tolerance {:.3e} [{}]",
                c.name,
                c.violation,
                c.tolerance,
                if c.passed() { "ok" } else { "FAILED" }
            )?;
        }
        Ok(())
    }
}

/// Relative mass tolerance used for the conservation check.
pub const MASS_TOLERANCE: f64 = 1e-7;

fn with_source(config: &SchemeConfig, f: &[Field]) -> SchemeConfig {
    let mut c = config.clone();
    c.source = if f.is_empty() {
        Source::Zero
    } else {
        Source::Steps(f.to_vec())
    };
    c
}

fn stability(traj: &Trajectory) -> (f64, f64) {
    let u0 = traj.initial();
    let (mut l1_bound, mut linf_bound) = (u0.l1_norm(), u0.linf_norm());
    let (mut l1_v, mut linf_v) = (0.0f64, 0.0f64);
    for (j, u) in traj.fields.iter().enumerate().skip(1) {
        let dt = traj.time.dt(j);
        l1_bound += dt * traj.source_l1[j - 1];
        linf_bound += dt * traj.source_linf[j - 1];
        l1_v = l1_v.max(u.l1_norm() - l1_bound);
        linf_v = linf_v.max(u.linf_norm() - linf_bound);
    }
    (l1_v, linf_v)
}

fn positive_source_gap(traj: &Trajectory, f: &[Field], g: &[Field], j: usize) -> Result<f64> {
    if f.is_empty() && g.is_empty() {
        return Ok(0.0);
    }
    let grid = *traj.grid();
    let zero = Field::zeros(grid);
    let mut acc = 0.0;
    for l in 1..=j {
        let a = f.get(l - 1).unwrap_or(&zero);
        let b = g.get(l - 1).unwrap_or(&zero);
        acc += traj.time.dt(l) * a.positive_part_distance(b)?;
    }
    Ok(acc)
}

/// Run every pair through `config` and measure monotonicity (ordered pairs
/// only), `L¹` contraction, `L¹`/`L∞` stability, conservation (when `φ₁` is
/// Lipschitz on the data range) and the time-modulus triangle inequality.
/// Tolerance: `10 · tol · J`, and [`MASS_TOLERANCE`] for conservation.
pub fn property_suite(config: &SchemeConfig, pairs: &[PairedData]) -> Result<PropertyReport> {
    if pairs.is_empty() {
        return Err(param("property suite needs at least one pair"));
    }
    let steps = config.time.steps();
    let tol = 10.0 * config.elliptic_tol * steps as f64;
    let runs: Vec<(Trajectory, Trajectory)> = pairs
        .par_iter()
        .map(|p| {
            let u = run(&with_source(config, &p.f), &p.u0)?;
            let v = run(&with_source(config, &p.g), &p.v0)?;
            Ok((u, v))
        })
        .collect::<Result<_>>()?;

    let mut monotone = (0.0f64, 0usize);
    let mut contraction = 0.0f64;
    let mut l1 = 0.0f64;
    let mut linf = 0.0f64;
    let mut mass = 0.0f64;
    let mut mass_samples = 0usize;
    let mut triangle = 0.0f64;
    for (p, (u, v)) in pairs.iter().zip(&runs) {
        if p.is_ordered() {
            monotone.1 += 1;
            for (a, b) in u.fields.iter().zip(&v.fields) {
                monotone.0 = monotone.0.max(a.positive_part_distance(b)?);
            }
        }
        let (up, vp) = (
            u.initial().positive_part_distance(v.initial())?,
            v.initial().positive_part_distance(u.initial())?,
        );
        for j in 0..u.fields.len() {
            let lhs_uv = u.fields[j].positive_part_distance(&v.fields[j])?;
            let lhs_vu = v.fields[j].positive_part_distance(&u.fields[j])?;
            let rhs_uv = up + positive_source_gap(u, &p.f, &p.g, j)?;
            let rhs_vu = vp + positive_source_gap(u, &p.g, &p.f, j)?;
            contraction = contraction.max(lhs_uv - rhs_uv).max(lhs_vu - rhs_vu);
        }
        for t in [u, v] {
            let (a, b) = stability(t);
            l1 = l1.max(a);
            linf = linf.max(b);
            let range = t.initial().linf_norm()
                + t.source_linf
                    .iter()
                    .enumerate()
                    .map(|(i, s)| t.time.dt(i + 1) * s)
                    .sum::<f64>();
            let lipschitz = config.implicit_op.is_zero() || config.implicit_phi_lipschitz(range);
            if lipschitz {
                mass = mass.max(t.relative_mass_drift());
                mass_samples += 1;
            }
            let region = CellRegion::centered(t.grid(), t.grid().half_extent());
            let omega = time_modulus(t, &region, steps / 2);
            for k in 1..omega.len() {
                if 2 * k <= omega.len() {
                    triangle = triangle.max(omega[2 * k - 1] - 2.0 * omega[k - 1]);
                }
            }
        }
    }
    let n = pairs.len();
    let mk = |name: &str, violation: f64, tolerance: f64, samples: usize| PropertyCheck {
        name: name.into(),
        violation: violation.max(0.0),
        tolerance,
        samples,
    };
    let mut checks = vec![
        mk("monotonicity", monotone.0, tol, monotone.1),
        mk("l1_contraction", contraction, tol, n),
        mk("l1_stability", l1, tol, 2 * n),
        mk("linf_stability", linf, tol, 2 * n),
    ];
    if mass_samples > 0 {
        checks.push(mk("conservation", mass, MASS_TOLERANCE, mass_samples));
    }
    checks.push(mk("time_modulus_triangle", triangle, 1e-12, 2 * n));
    Ok(PropertyReport { checks })
}
