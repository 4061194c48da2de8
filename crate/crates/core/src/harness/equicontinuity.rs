use crate::grid::{translation_modulus, CellRegion};
use crate::stepper::Trajectory;

/// `ω(k) = max_{k' ≤ k} max_j h^N ‖U^j − U^{j−k'}‖_{ℓ¹(K)}` for
/// `k = 1..=max_gap`; nondecreasing by construction.
pub fn time_modulus(traj: &Trajectory, region: &CellRegion, max_gap: usize) -> Vec<f64> {
    let n = traj.fields.len();
    let max_gap = max_gap.min(n.saturating_sub(1));
    let mut out = Vec::with_capacity(max_gap);
    let mut running = 0.0f64;
    for k in 1..=max_gap {
        for j in k..n {
            let d = traj.fields[j]
                .zip_map(&traj.fields[j - k], |a, b| a - b)
                .expect("trajectory fields share a grid")
                .l1_norm_on(region);
            running = running.max(d);
        }
        out.push(running);
    }
    out
}

/// Measured moduli of continuity of a trajectory and the a priori bounds
/// they depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct EquicontinuityEstimate {
    /// Largest `t_j − t_{j−k}` for each gap `k`.
    pub gaps: Vec<f64>,
    pub time_modulus: Vec<f64>,
    /// Shift lengths `s·h`.
    pub shifts: Vec<f64>,
    /// `λ(s h)`: translation modulus of the data over axis shifts up to `s`
    /// cells.
    pub space_modulus: Vec<f64>,
    /// `‖u₀‖_∞ + Σ Δt_l ‖F^l‖_∞`.
    pub range_bound: f64,
    /// `‖u₀‖_{L¹} + Σ Δt_l ‖F^l‖_{L¹}`.
    pub l1_bound: f64,
}

impl EquicontinuityEstimate {
    /// `ω(2k) ≤ 2ω(k)` on the measured data.
    pub fn triangle_violation(&self) -> f64 {
        let w = &self.time_modulus;
        (1..=w.len() / 2)
            .map(|k| w[2 * k - 1] - 2.0 * w[k - 1])
            .fold(0.0, f64::max)
    }
}

pub fn equicontinuity_estimate(
    traj: &Trajectory,
    region: &CellRegion,
    max_gap: usize,
    max_shift: usize,
) -> EquicontinuityEstimate {
    let knots = traj.time.knots();
    let time_modulus = time_modulus(traj, region, max_gap);
    let gaps = (1..=time_modulus.len())
        .map(|k| {
            (k..traj.fields.len())
                .map(|j| knots[j] - knots[j - k])
                .fold(0.0, f64::max)
        })
        .collect();
    let grid = traj.grid();
    let sources: Vec<(f64, crate::grid::Field)> = traj
        .sources
        .iter()
        .enumerate()
        .map(|(i, f)| (traj.time.dt(i + 1), f.clone()))
        .collect();
    let mut space_modulus = Vec::with_capacity(max_shift);
    let mut running = 0.0f64;
    for s in 1..=max_shift as i64 {
        let shifts: Vec<Vec<i64>> = (0..grid.dim())
            .flat_map(|d| {
                [s, -s].into_iter().map(move |v| {
                    let mut xi = vec![0i64; grid.dim()];
                    xi[d] = v;
                    xi
                })
            })
            .collect();
        running = running.max(translation_modulus(traj.initial(), &sources, &shifts));
        space_modulus.push(running);
    }
    let dts: Vec<f64> = (1..traj.fields.len()).map(|j| traj.time.dt(j)).collect();
    EquicontinuityEstimate {
        gaps,
        time_modulus,
        shifts: (1..=max_shift).map(|s| s as f64 * grid.h()).collect(),
        space_modulus,
        range_bound: traj.initial().linf_norm() + dts.iter().zip(&traj.source_linf).map(|(d, s)| d * s).sum::<f64>(),
        l1_bound: traj.initial().l1_norm() + dts.iter().zip(&traj.source_l1).map(|(d, s)| d * s).sum::<f64>(),
    }
}
