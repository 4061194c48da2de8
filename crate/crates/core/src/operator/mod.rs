//! Discrete Lévy operators `L^h[ψ](x) = Σ_{β≠0} (ψ(x + hβ) − ψ(x)) ω_β` with
//! finite symmetric stencils and nonnegative weights.

mod builders;
mod fractional;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::grid::{Field, UniformGrid};

pub use builders::{
    discrete_fractional_laplacian, lagrange_operator, local_laplacian_operator, midpoint_operator,
    multilinear_operator, sigma_operator, vanishing_viscosity_operator, zero_operator,
};
pub use fractional::FractionalKernel;

/// Which builder produced an operator, with its parameters and any notes
/// (for instance clamped weights).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub builder: String,
    pub params: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(builder: impl Into<String>) -> Self {
        Self {
            builder: builder.into(),
            ..Self::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.builder)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        for n in &self.notes {
            write!(f, " [{n}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    dim: usize,
    h: f64,
    entries: BTreeMap<Vec<i64>, f64>,
    total_mass: f64,
    tail_mass: f64,
    provenance: Provenance,
}

fn same_spacing(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl DiscreteOperator {
    /// Validate and wrap a stencil. Zero weights are dropped.
    pub fn from_entries(
        dim: usize,
        h: f64,
        entries: impl IntoIterator<Item = (Vec<i64>, f64)>,
        tail_mass: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(param("operator dimension must be >= 1"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(param(format!("grid spacing must be positive, got {h}")));
        }
        if !(tail_mass >= 0.0 && tail_mass.is_finite()) {
            return Err(param("tail mass must be finite and nonnegative"));
        }
        let mut map = BTreeMap::new();
        for (beta, w) in entries {
            if beta.len() != dim {
                return Err(param(format!("offset {beta:?} does not have {dim} components")));
            }
            if beta.iter().all(|&b| b == 0) {
                return Err(param("stencil may not contain the zero offset"));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(param(format!("weight {w} at {beta:?} is not finite and nonnegative")));
            }
            if w > 0.0 {
                *map.entry(beta).or_insert(0.0) += w;
            }
        }
        for (beta, w) in &map {
            let neg: Vec<i64> = beta.iter().map(|b| -b).collect();
            match map.get(&neg) {
                Some(v) if (v - w).abs() <= 1e-14 * w.abs() => {}
                _ => return Err(param(format!("stencil is not symmetric at {beta:?}"))),
            }
        }
        let total_mass = map.values().sum();
        Ok(Self {
            dim,
            h,
            entries: map,
            total_mass,
            tail_mass,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `ν(ℝᴺ) = Σ_β ω_β`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Measure neglected by truncating the stencil.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.entries.iter().map(|(b, w)| (b.as_slice(), *w))
    }

    pub fn weight(&self, beta: &[i64]) -> f64 {
        self.entries.get(beta).copied().unwrap_or(0.0)
    }

    /// Largest `|β|_∞` in the stencil.
    pub fn reach(&self) -> usize {
        self.entries
            .keys()
            .flat_map(|b| b.iter().map(|v| v.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// `Σ_β (|z_β|² ∧ 1) ω_β`.
    pub fn levy_moment(&self) -> f64 {
        self.entries
            .iter()
            .map(|(b, w)| {
                let z2: f64 = b.iter().map(|v| (*v as f64 * self.h).powi(2)).sum();
                z2.min(1.0) * w
            })
            .sum()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn add(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        if self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        if !same_spacing(self.h, other.h) {
            return Err(Error::GridMismatch(format!("spacings {} and {}", self.h, other.h)));
        }
        let mut entries = self.entries.clone();
        for (b, w) in &other.entries {
            *entries.entry(b.clone()).or_insert(0.0) += w;
        }
        let total_mass = entries.values().sum();
        let mut provenance = Provenance::new("sum");
        provenance.notes.push(format!("{}", self.provenance));
        provenance.notes.push(format!("{}", other.provenance));
        Ok(DiscreteOperator {
            dim: self.dim,
            h: self.h,
            entries,
            total_mass,
            tail_mass: self.tail_mass + other.tail_mass,
            provenance,
        })
    }

    /// All weights (and the tail) multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<DiscreteOperator> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(param(format!("operator scale must be finite and nonnegative, got {c}")));
        }
        let entries: BTreeMap<Vec<i64>, f64> = if c == 0.0 {
            BTreeMap::new()
        } else {
            self.entries.iter().map(|(b, w)| (b.clone(), w * c)).collect()
        };
        let total_mass = entries.values().sum();
        Ok(DiscreteOperator {
            dim: self.dim,
            h: self.h,
            entries,
            total_mass,
            tail_mass: self.tail_mass * c,
            provenance: self.provenance.clone().param("scale", c),
        })
    }

    /// The same operator seen on a grid `factor` times finer: offsets
    /// multiplied by `factor`, weights unchanged.
    pub fn refined(&self, factor: usize) -> Result<DiscreteOperator> {
        if factor < 1 {
            return Err(param("refinement factor must be >= 1"));
        }
        let f = factor as i64;
        let entries: BTreeMap<Vec<i64>, f64> = self
            .entries
            .iter()
            .map(|(b, w)| (b.iter().map(|v| v * f).collect(), *w))
            .collect();
        Ok(DiscreteOperator {
            dim: self.dim,
            h: self.h / factor as f64,
            entries,
            total_mass: self.total_mass,
            tail_mass: self.tail_mass,
            provenance: self.provenance.clone().param("refined", factor),
        })
    }

    fn check_grid(&self, grid: &UniformGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "operator dimension {} vs grid dimension {}",
                self.dim,
                grid.dim()
            )));
        }
        if !same_spacing(grid.h(), self.h) {
            return Err(Error::GridMismatch(format!(
                "operator spacing {} vs grid spacing {}",
                self.h,
                grid.h()
            )));
        }
        Ok(())
    }

    /// Row sweep shared by `apply` and `shift_sum`: for every row of the
    /// last axis and every stencil entry, `kernel(out_row, src_row_or_none, shift)`.
    fn sweep(&self, grid: &UniformGrid, values: &[f64], diff: bool) -> Vec<f64> {
        let side = grid.side();
        let n = grid.half_cells() as i64;
        let dim = self.dim;
        let mut out = vec![0.0; values.len()];
        let entries: Vec<(&Vec<i64>, f64)> = self.entries.iter().map(|(b, w)| (b, *w)).collect();
        out.par_chunks_mut(side).enumerate().for_each(|(row, out_row)| {
            // lattice index of the row (all axes but the last)
            let mut lead = vec![0i64; dim - 1];
            let mut r = row;
            for d in (0..dim - 1).rev() {
                lead[d] = (r % side) as i64 - n;
                r /= side;
            }
            let own = &values[row * side..(row + 1) * side];
            for (beta, w) in &entries {
                let mut src_row = 0usize;
                let mut inside = true;
                for d in 0..dim - 1 {
                    let i = lead[d] + beta[d];
                    if i < -n || i > n {
                        inside = false;
                        break;
                    }
                    src_row = src_row * side + (i + n) as usize;
                }
                let shift = beta[dim - 1];
                if !inside {
                    if diff {
                        for (o, v) in out_row.iter_mut().zip(own) {
                            *o -= w * v;
                        }
                    }
                    continue;
                }
                let src = &values[src_row * side..(src_row + 1) * side];
                // positions j with j + shift inside [0, side)
                let lo = (-shift).max(0) as usize;
                let hi = ((side as i64) - shift.max(0)).max(0) as usize;
                let lo = lo.min(side);
                let hi = hi.max(lo).min(side);
                let src_part = if hi > lo {
                    &src[(lo as i64 + shift) as usize..(hi as i64 + shift) as usize]
                } else {
                    &src[..0]
                };
                if diff {
                    for (o, v) in out_row[..lo].iter_mut().zip(&own[..lo]) {
                        *o -= w * v;
                    }
                    for ((o, v), s) in out_row[lo..hi].iter_mut().zip(&own[lo..hi]).zip(src_part) {
                        *o += w * (s - v);
                    }
                    for (o, v) in out_row[hi..].iter_mut().zip(&own[hi..]) {
                        *o -= w * v;
                    }
                } else {
                    for (o, s) in out_row[lo..hi].iter_mut().zip(src_part) {
                        *o += w * s;
                    }
                }
            }
        });
        out
    }

    /// `Σ_β (ψ(x + hβ) − ψ(x)) ω_β` with zero extension outside the box.
    pub fn apply(&self, field: &Field) -> Result<Field> {
        self.check_grid(field.grid())?;
        let out = self.sweep(field.grid(), field.values(), true);
        Field::from_values(*field.grid(), out)
    }

    /// `apply` plus the far-field part `−tail_mass·ψ(x)` of the truncated
    /// measure, for data that vanishes beyond the stencil reach.
    pub fn apply_including_tail(&self, field: &Field) -> Result<Field> {
        let mut out = self.apply(field)?;
        let t = self.tail_mass;
        for (o, v) in out.values_mut().iter_mut().zip(field.values()) {
            *o -= t * v;
        }
        Ok(out)
    }

    /// `Σ_β ω_β p(x + hβ)` with zero extension.
    pub(crate) fn shift_sum(&self, grid: &UniformGrid, values: &[f64]) -> Vec<f64> {
        self.sweep(grid, values, false)
    }

    pub(crate) fn check(&self, grid: &UniformGrid) -> Result<()> {
        self.check_grid(grid)
    }

    /// Dense matrix of `apply` on the given grid.
    pub fn dense_matrix(&self, grid: &UniformGrid) -> Result<DMatrix<f64>> {
        self.check_grid(grid)?;
        let n = grid.len();
        let mut m = DMatrix::zeros(n, n);
        let mut idx = vec![0i64; self.dim];
        for k in 0..n {
            let base = grid.index(k);
            for (beta, w) in &self.entries {
                for d in 0..self.dim {
                    idx[d] = base[d] + beta[d];
                }
                if let Some(j) = grid.flat(&idx) {
                    m[(k, j)] += w;
                }
                m[(k, k)] -= w;
            }
        }
        Ok(m)
    }

    /// Text dump: header lines `# dim`, `# h`, `# total_mass`, `# tail_mass`,
    /// then one line `β_1 … β_N ω` per entry.
    pub fn write_dump(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# dim {}", self.dim)?;
        writeln!(out, "# h {:.16e}", self.h)?;
        writeln!(out, "# total_mass {:.16e}", self.total_mass)?;
        writeln!(out, "# tail_mass {:.16e}", self.tail_mass)?;
        writeln!(out, "# provenance {}", self.provenance)?;
        for (beta, w) in &self.entries {
            for b in beta {
                write!(out, "{b} ")?;
            }
            writeln!(out, "{w:.16e}")?;
        }
        Ok(())
    }

    pub fn read_dump(input: impl BufRead) -> Result<DiscreteOperator> {
        let mut dim = None;
        let mut h = None;
        let mut tail = 0.0;
        let mut provenance = Provenance::new("dump");
        let mut entries = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let bad = |m: &str| Error::Parse {
                line: n + 1,
                message: m.to_string(),
            };
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let rest = rest.trim();
                let (key, val) = rest.split_once(' ').unwrap_or((rest, ""));
                let val = val.trim();
                match key {
                    "dim" => dim = Some(val.parse::<usize>().map_err(|_| bad("bad dim"))?),
                    "h" => h = Some(val.parse::<f64>().map_err(|_| bad("bad h"))?),
                    "tail_mass" => tail = val.parse::<f64>().map_err(|_| bad("bad tail_mass"))?,
                    "provenance" => provenance.notes.push(val.to_string()),
                    _ => {}
                }
                continue;
            }
            let d = dim.ok_or_else(|| bad("entry before dim header"))?;
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != d + 1 {
                return Err(bad("wrong number of columns"));
            }
            let beta: std::result::Result<Vec<i64>, _> = parts[..d].iter().map(|p| p.parse::<i64>()).collect();
            let beta = beta.map_err(|_| bad("bad offset"))?;
            let w: f64 = parts[d].parse().map_err(|_| bad("bad weight"))?;
            entries.push((beta, w));
        }
        DiscreteOperator::from_entries(
            dim.ok_or_else(|| param("dump lacks dim"))?,
            h.ok_or_else(|| param("dump lacks h"))?,
            entries,
            tail,
            provenance,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(h: f64, n: usize) -> UniformGrid {
        UniformGrid::new(1, h, n).unwrap()
    }

    fn sample_op() -> DiscreteOperator {
        DiscreteOperator::from_entries(
            1,
            0.25,
            vec![(vec![1], 2.0), (vec![-1], 2.0), (vec![3], 0.5), (vec![-3], 0.5)],
            0.1,
            Provenance::new("test"),
        )
        .unwrap()
    }

    #[test]
    fn rejects_asymmetric_or_negative_stencils() {
        let asym = DiscreteOperator::from_entries(1, 0.1, vec![(vec![1], 1.0)], 0.0, Provenance::new("x"));
        assert!(asym.is_err());
        let neg = DiscreteOperator::from_entries(
            1,
            0.1,
            vec![(vec![1], -1.0), (vec![-1], -1.0)],
            0.0,
            Provenance::new("x"),
        );
        assert!(neg.is_err());
        let origin = DiscreteOperator::from_entries(1, 0.1, vec![(vec![0], 1.0)], 0.0, Provenance::new("x"));
        assert!(origin.is_err());
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let op = sample_op();
        let g = grid1(0.25, 7); // 15 cells
        let g16 = UniformGrid::new(1, 0.25, 8).unwrap();
        for grid in [g, g16] {
            let f = Field::from_fn(grid, |x| (3.0 * x[0]).sin() + x[0] * x[0]);
            let a = op.apply(&f).unwrap();
            let m = op.dense_matrix(&grid).unwrap();
            let v = nalgebra::DVector::from_column_slice(f.values());
            let mv = m * v;
            for (x, y) in a.values().iter().zip(mv.iter()) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn two_dimensional_apply_matches_dense_matrix() {
        let op = DiscreteOperator::from_entries(
            2,
            0.5,
            vec![
                (vec![1, 0], 1.0),
                (vec![-1, 0], 1.0),
                (vec![1, 2], 0.25),
                (vec![-1, -2], 0.25),
                (vec![0, -3], 0.5),
                (vec![0, 3], 0.5),
            ],
            0.0,
            Provenance::new("test"),
        )
        .unwrap();
        let grid = UniformGrid::new(2, 0.5, 3).unwrap();
        let f = Field::from_fn(grid, |x| (x[0] - 0.3 * x[1]).cos() + x[1]);
        let a = op.apply(&f).unwrap();
        let m = op.dense_matrix(&grid).unwrap();
        let mv = m * nalgebra::DVector::from_column_slice(f.values());
        for (x, y) in a.values().iter().zip(mv.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_interior_is_annihilated_exactly() {
        let op = sample_op();
        let g = grid1(0.25, 10);
        let f = Field::constant(g, 1.7);
        let a = op.apply(&f).unwrap();
        for k in 0..g.len() {
            let i = g.index(k)[0];
            if i.abs() <= 10 - 3 {
                assert_eq!(a.values()[k], 0.0);
            }
        }
    }

    #[test]
    fn add_and_scale() {
        let a = sample_op();
        let z = DiscreteOperator::from_entries(1, 0.25, vec![], 0.0, Provenance::new("zero")).unwrap();
        let s = z.add(&a).unwrap();
        assert_eq!(s.entries().collect::<Vec<_>>(), a.entries().collect::<Vec<_>>());
        let b = a.scaled(0.5).unwrap();
        assert_eq!(b.total_mass(), 2.5);
        let c = a.add(&b).unwrap();
        assert!((c.total_mass() - a.total_mass() - b.total_mass()).abs() < 1e-15);
        let g = grid1(0.25, 6);
        let f = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let lhs = c.apply(&f).unwrap();
        let ra = a.apply(&f).unwrap();
        let rb = b.apply(&f).unwrap();
        for k in 0..g.len() {
            assert!((lhs.values()[k] - ra.values()[k] - rb.values()[k]).abs() < 1e-14);
        }
        let other = DiscreteOperator::from_entries(1, 0.5, vec![], 0.0, Provenance::new("z")).unwrap();
        assert!(a.add(&other).is_err());
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let op = sample_op();
        let f = Field::zeros(grid1(0.5, 3));
        assert!(matches!(op.apply(&f), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn dump_roundtrip() {
        let op = sample_op();
        let mut buf = Vec::new();
        op.write_dump(&mut buf).unwrap();
        let back = DiscreteOperator::read_dump(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.entries().collect::<Vec<_>>(), op.entries().collect::<Vec<_>>());
        assert_eq!(back.tail_mass(), op.tail_mass());
        assert_eq!(back.h(), op.h());
    }

    #[test]
    fn refined_operator_moves_offsets() {
        let op = sample_op().refined(3).unwrap();
        assert_eq!(op.weight(&[9]), 0.5);
        assert!((op.h() - 0.25 / 3.0).abs() < 1e-16);
    }
}
