//! Uniform cell-centered grids on a bounded box, grid functions with zero
//! extension, cell averaging, norms and interpolants.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::quadrature::{integrate_box, BallRegion, Tolerance};

/// Cells `x_β + h(-1/2, 1/2]^N` with centers `x_β = hβ`,
/// `|β_i| <= half_cells`. The box is `[-R, R]^N` with `R = (half_cells + 1/2) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    dim: usize,
    h: f64,
    half_cells: usize,
}

impl UniformGrid {
    pub fn new(dim: usize, h: f64, half_cells: usize) -> Result<Self> {
        if dim < 1 {
            return Err(param("grid dimension must be >= 1"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(param(format!("grid spacing must be positive, got {h}")));
        }
        Ok(Self { dim, h, half_cells })
    }

    /// Smallest grid of spacing `h` whose box contains `[-extent, extent]^N`.
    pub fn covering(dim: usize, h: f64, extent: f64) -> Result<Self> {
        if !(extent >= 0.0) {
            return Err(param("box extent must be nonnegative"));
        }
        let n = (extent / h - 0.5 - 1e-9).ceil().max(0.0) as usize;
        Self::new(dim, h, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_cells(&self) -> usize {
        self.half_cells
    }

    /// Cells per axis.
    pub fn side(&self) -> usize {
        2 * self.half_cells + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_extent(&self) -> f64 {
        (self.half_cells as f64 + 0.5) * self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn same_as(&self, other: &UniformGrid) -> bool {
        self.dim == other.dim && self.half_cells == other.half_cells && self.h == other.h
    }

    /// Lattice index of flat position `k` (row-major, last axis fastest).
    pub fn index(&self, mut k: usize) -> Vec<i64> {
        let side = self.side();
        let mut idx = vec![0i64; self.dim];
        for d in (0..self.dim).rev() {
            idx[d] = (k % side) as i64 - self.half_cells as i64;
            k /= side;
        }
        idx
    }

    /// Flat position of a lattice index, `None` outside the box.
    pub fn flat(&self, idx: &[i64]) -> Option<usize> {
        let n = self.half_cells as i64;
        let side = self.side();
        let mut k = 0usize;
        for &i in idx {
            if i < -n || i > n {
                return None;
            }
            k = k * side + (i + n) as usize;
        }
        Some(k)
    }

    pub fn center(&self, k: usize) -> Vec<f64> {
        self.index(k).into_iter().map(|i| i as f64 * self.h).collect()
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |k| self.center(k))
    }
}

/// Index box `lo..=hi` (inclusive per axis) used to restrict norms.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRegion {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl CellRegion {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        Self { lo, hi }
    }

    /// All cells whose centers lie in `[-extent, extent]^N`.
    pub fn centered(grid: &UniformGrid, extent: f64) -> Self {
        let m = (extent / grid.h() + 1e-9).floor() as i64;
        let m = m.min(grid.half_cells() as i64);
        Self {
            lo: vec![-m; grid.dim()],
            hi: vec![m; grid.dim()],
        }
    }

    pub fn contains(&self, idx: &[i64]) -> bool {
        idx.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(i, (a, b))| i >= a && i <= b)
    }
}

/// Values on a [`UniformGrid`], zero outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: UniformGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn constant(grid: UniformGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(param("field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    /// Point values at cell centers.
    pub fn from_fn(grid: UniformGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.center(k))).collect();
        Self { grid, values }
    }

    /// Cell averages `h^{-N} ∫_{x_β + R_h} func`.
    pub fn cell_average(grid: UniformGrid, func: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let tol = Tolerance::new(1e-10 * grid.cell_volume(), 1e-12);
        let h = grid.h();
        let vol = grid.cell_volume();
        let values: Result<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let c = grid.center(k);
                let lo: Vec<f64> = c.iter().map(|x| x - 0.5 * h).collect();
                let hi: Vec<f64> = c.iter().map(|x| x + 0.5 * h).collect();
                integrate_box(&func, &lo, &hi, BallRegion::Outside(0.0), tol)
                    .map(|v| v / vol)
                    .map_err(|e| e.context("cell average"))
            })
            .collect();
        Ok(Self { grid, values: values? })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a lattice index, zero outside the box.
    pub fn at(&self, idx: &[i64]) -> f64 {
        self.grid.flat(idx).map_or(0.0, |k| self.values[k])
    }

    pub fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `h^N Σ u`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.sum()
    }

    /// `h^N Σ |u|` over the whole box.
    pub fn l1_norm(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `h^N Σ_{β∈K} |u_β|`.
    pub fn l1_norm_on(&self, region: &CellRegion) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| region.contains(&self.grid.index(*k)))
            .map(|(_, v)| v.abs())
            .sum();
        self.grid.cell_volume() * s
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `h^N Σ (u - v)^+`.
    pub fn positive_part_distance(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).max(0.0))
            .sum();
        Ok(self.grid.cell_volume() * s)
    }

    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(self.grid.cell_volume() * s)
    }

    pub fn linf_distance(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `ψ(· + hξ)` with zero extension.
    pub fn translated(&self, shift: &[i64]) -> Field {
        let mut out = Field::zeros(self.grid);
        let mut idx = vec![0i64; self.grid.dim()];
        for k in 0..self.len() {
            let base = self.grid.index(k);
            for d in 0..idx.len() {
                idx[d] = base[d] + shift[d];
            }
            out.values[k] = self.at(&idx);
        }
        out
    }

    /// `‖ψ - ψ(· + hξ)‖_{L¹(ℝᴺ)}`, including mass shifted out of the box.
    pub fn translation_difference(&self, shift: &[i64]) -> f64 {
        let mut s = 0.0;
        let mut idx = vec![0i64; self.grid.dim()];
        for k in 0..self.len() {
            let base = self.grid.index(k);
            for d in 0..idx.len() {
                idx[d] = base[d] + shift[d];
            }
            s += (self.values[k] - self.at(&idx)).abs();
            // cells outside the box that read this value after the shift
            for d in 0..idx.len() {
                idx[d] = base[d] - shift[d];
            }
            if self.grid.flat(&idx).is_none() {
                s += self.values[k].abs();
            }
        }
        self.grid.cell_volume() * s
    }

    /// True when all values equal their lattice neighbours' pattern under a
    /// coarser grouping: every block of `factor^N` fine cells aligned to the
    /// coarse cell carrying index `β` holds one value up to `tol`.
    pub fn is_blockwise_constant(&self, factor: usize, tol: f64) -> bool {
        if factor <= 1 {
            return true;
        }
        let f = factor as i64;
        let mut max_dev = 0.0f64;
        let mut firsts: std::collections::HashMap<Vec<i64>, f64> = std::collections::HashMap::new();
        for k in 0..self.len() {
            let idx = self.grid.index(k);
            let block: Vec<i64> = idx.iter().map(|i| (i + f / 2).div_euclid(f)).collect();
            let v = self.values[k];
            let first = *firsts.entry(block).or_insert(v);
            max_dev = max_dev.max((v - first).abs());
        }
        max_dev <= tol
    }

    /// Write a snapshot: '#' headers carrying dim, h, R, t, then one line per
    /// cell `i_1 … i_N value`.
    pub fn write_snapshot(&self, out: &mut impl Write, t: f64) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "# dim {}", self.grid.dim()).ok();
        writeln!(s, "# h {:.16e}", self.grid.h()).ok();
        writeln!(s, "# R {:.16e}", self.grid.half_extent()).ok();
        writeln!(s, "# half_cells {}", self.grid.half_cells()).ok();
        writeln!(s, "# t {:.16e}", t).ok();
        for k in 0..self.len() {
            for i in self.grid.index(k) {
                write!(s, "{i} ").ok();
            }
            writeln!(s, "{:.16e}", self.values[k]).ok();
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn save_snapshot(&self, path: &Path, t: f64) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_snapshot(&mut f, t)?;
        f.flush()?;
        Ok(())
    }

    /// Parse a snapshot written by [`Field::write_snapshot`]. Returns the field
    /// and its time stamp.
    pub fn read_snapshot(input: impl BufRead) -> Result<(Field, f64)> {
        let mut dim = None;
        let mut h = None;
        let mut half = None;
        let mut t = None;
        let mut values = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = n + 1;
            let bad = |m: &str| Error::Parse {
                line: line_no,
                message: m.to_string(),
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                let key = parts.next().unwrap_or("");
                let val = parts.next().unwrap_or("");
                match key {
                    "dim" => dim = Some(val.parse::<usize>().map_err(|_| bad("bad dim"))?),
                    "h" => h = Some(val.parse::<f64>().map_err(|_| bad("bad h"))?),
                    "half_cells" => half = Some(val.parse::<usize>().map_err(|_| bad("bad half_cells"))?),
                    "t" => t = Some(val.parse::<f64>().map_err(|_| bad("bad t"))?),
                    _ => {}
                }
                continue;
            }
            let d = dim.ok_or_else(|| bad("data before dim header"))?;
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != d + 1 {
                return Err(bad("wrong number of columns"));
            }
            let v: f64 = parts[d].parse().map_err(|_| bad("bad value"))?;
            values.push(v);
        }
        let grid = UniformGrid::new(
            dim.ok_or_else(|| param("snapshot lacks dim"))?,
            h.ok_or_else(|| param("snapshot lacks h"))?,
            half.ok_or_else(|| param("snapshot lacks half_cells"))?,
        )?;
        Ok((Field::from_values(grid, values)?, t.unwrap_or(0.0)))
    }
}

/// Ordered knots `0 = t_0 < … < t_J = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(param("time grid needs at least one knot"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(param("time knots must be strictly increasing"));
        }
        Ok(Self { knots })
    }

    /// `J` equal steps on `[0, T]`.
    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Self::new(vec![0.0]);
        }
        if !(t_end > 0.0) {
            return Err(param("final time must be positive"));
        }
        let knots = (0..=steps).map(|j| t_end * j as f64 / steps as f64).collect();
        Self::new(knots)
    }

    /// Uniform steps of size at most `dt` covering `[0, T]`.
    pub fn with_max_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(param("time step must be positive"));
        }
        if t_end == 0.0 {
            return Self::new(vec![0.0]);
        }
        let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Self::uniform(t_end, steps)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn steps(&self) -> usize {
        self.knots.len() - 1
    }

    /// `Δt_j = t_j - t_{j-1}` for `j >= 1`.
    pub fn dt(&self, j: usize) -> f64 {
        self.knots[j] - self.knots[j - 1]
    }

    pub fn max_step(&self) -> f64 {
        self.knots.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn final_time(&self) -> f64 {
        *self.knots.last().expect("nonempty")
    }
}

/// Piecewise linear interpolation in time between the bracketing knots.
pub fn time_interpolant(times: &TimeGrid, fields: &[Field], t: f64) -> Result<Field> {
    let knots = times.knots();
    if fields.len() != knots.len() {
        return Err(Error::GridMismatch(format!(
            "{} fields for {} knots",
            fields.len(),
            knots.len()
        )));
    }
    if !(t >= knots[0] && t <= times.final_time()) {
        return Err(param(format!("t = {t} outside the time grid")));
    }
    let j = knots.partition_point(|&s| s < t);
    if knots[j.min(knots.len() - 1)] == t {
        return Ok(fields[j].clone());
    }
    let (a, b) = (knots[j - 1], knots[j]);
    let lam = (t - a) / (b - a);
    fields[j - 1].zip_map(&fields[j], |u, v| (1.0 - lam) * u + lam * v)
}

/// Discrete `λ(ζ) = sup_ξ ‖u_0 − u_0(·+ξ)‖_{L¹} + Σ_j Δt_j ‖F^j − F^j(·+ξ)‖_{L¹}`
/// over the given lattice shifts.
pub fn translation_modulus(u0: &Field, sources: &[(f64, Field)], shifts: &[Vec<i64>]) -> f64 {
    shifts
        .iter()
        .map(|xi| {
            let mut v = u0.translation_difference(xi);
            for (dt, f) in sources {
                v += dt * f.translation_difference(xi);
            }
            v
        })
        .fold(0.0, f64::max)
}

/// `max_j Σ_{β∈K} ∫_{x_β+R_h} |U_β^j − u(x, t_j)| dx`.
pub fn triple_norm(
    times: &TimeGrid,
    fields: &[Field],
    reference: impl Fn(&[f64], f64) -> f64 + Sync,
    region: &CellRegion,
) -> Result<f64> {
    if fields.len() != times.knots().len() {
        return Err(Error::GridMismatch("fields and knots differ in length".into()));
    }
    let mut worst = 0.0f64;
    for (field, &t) in fields.iter().zip(times.knots()) {
        let grid = *field.grid();
        let h = grid.h();
        let tol = Tolerance::new(1e-12 * grid.cell_volume(), 1e-10);
        let cells: Vec<usize> = (0..grid.len()).filter(|&k| region.contains(&grid.index(k))).collect();
        let parts: Result<Vec<f64>> = cells
            .par_iter()
            .map(|&k| {
                let c = grid.center(k);
                let lo: Vec<f64> = c.iter().map(|x| x - 0.5 * h).collect();
                let hi: Vec<f64> = c.iter().map(|x| x + 0.5 * h).collect();
                let u = field.values()[k];
                let g = |x: &[f64]| (u - reference(x, t)).abs();
                integrate_box(&g, &lo, &hi, BallRegion::Outside(0.0), tol).map_err(|e| e.context("triple norm cell"))
            })
            .collect();
        worst = worst.max(parts?.iter().sum());
    }
    Ok(worst)
}

/// One axis of the common refinement of two cell-centered grids: pieces
/// `(length, index in a, index in b)`; `None` marks the zero extension.
fn axis_overlay(a: &UniformGrid, b: &UniformGrid) -> Vec<(f64, Option<i64>, Option<i64>)> {
    let edges = |g: &UniformGrid| -> Vec<f64> {
        let n = g.half_cells() as i64;
        (-n..=n + 1).map(|i| (i as f64 - 0.5) * g.h()).collect()
    };
    let mut pts: Vec<f64> = edges(a);
    pts.extend(edges(b));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    let locate = |g: &UniformGrid, x: f64| -> Option<i64> {
        let i = (x / g.h()).round() as i64;
        if i.unsigned_abs() as usize <= g.half_cells() {
            Some(i)
        } else {
            None
        }
    };
    pts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let ia = if mid.abs() < a.half_extent() {
                locate(a, mid)
            } else {
                None
            };
            let ib = if mid.abs() < b.half_extent() {
                locate(b, mid)
            } else {
                None
            };
            (w[1] - w[0], ia, ib)
        })
        .collect()
}

/// Exact `L¹` and `L∞` distances between the piecewise-constant functions
/// of two fields living on different grids.
pub fn overlay_distances(a: &Field, b: &Field) -> Result<(f64, f64)> {
    let (ga, gb) = (a.grid(), b.grid());
    if ga.dim() != gb.dim() {
        return Err(Error::GridMismatch("dimensions differ".into()));
    }
    let axis = axis_overlay(ga, gb);
    let dim = ga.dim();
    let mut l1 = 0.0;
    let mut linf = 0.0f64;
    let mut pos = vec![0usize; dim];
    let mut ia = vec![0i64; dim];
    let mut ib = vec![0i64; dim];
    loop {
        let mut vol = 1.0;
        let mut in_a = true;
        let mut in_b = true;
        for d in 0..dim {
            let (len, xa, xb) = axis[pos[d]];
            vol *= len;
            match xa {
                Some(i) => ia[d] = i,
                None => in_a = false,
            }
            match xb {
                Some(i) => ib[d] = i,
                None => in_b = false,
            }
        }
        let va = if in_a { a.at(&ia) } else { 0.0 };
        let vb = if in_b { b.at(&ib) } else { 0.0 };
        let diff = (va - vb).abs();
        l1 += vol * diff;
        linf = linf.max(diff);
        let mut d = 0;
        loop {
            if d == dim {
                return Ok((l1, linf));
            }
            pos[d] += 1;
            if pos[d] < axis.len() {
                break;
            }
            pos[d] = 0;
            d += 1;
        }
    }
}
