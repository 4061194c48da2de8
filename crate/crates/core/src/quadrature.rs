//! Adaptive Gauss–Legendre quadrature and nested box integration with a
//! ball cut-out, used wherever a closed form is not available.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::Error;
use crate::special::gauss_legendre;

const PANEL_NODES: usize = 15;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_NODES))
}

/// Accuracy targets for adaptive integration. The run stops once the
/// estimated error is below `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    fn scaled(self, width: f64) -> Self {
        let w = width.abs().max(1e-300);
        Self {
            abs: 0.1 * self.abs / w.max(1.0),
            rel: 0.1 * self.rel,
            max_intervals: self.max_intervals,
        }
    }
}

/// Failed adaptive integration: the best estimate and its error bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadFailure {
    pub estimate: f64,
    pub error: f64,
    pub intervals: usize,
}

impl QuadFailure {
    pub fn context(self, what: impl Into<String>) -> Error {
        Error::Integration {
            what: what.into(),
            estimate: self.estimate,
            error: self.error,
            intervals: self.intervals,
        }
    }
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = panel_rule();
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(c + r * xi);
    }
    s * r
}

struct Segment {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn make_segment<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Segment {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    let err = (whole - (left + right)).abs();
    Segment { a, b, left, right, err }
}

/// Integrate `f` over `[a, b]`, splitting first at the given interior
/// break points.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64, QuadFailure> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|p| *p > lo && *p < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    points.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let whole = gl_panel(f, w[0], w[1]);
        let seg = make_segment(f, w[0], w[1], whole);
        total += seg.left + seg.right;
        total_err += seg.err;
        heap.push(seg);
    }
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if total.is_finite() && total_err <= target {
            return Ok(sign * total);
        }
        if heap.len() >= tol.max_intervals || !total.is_finite() {
            return Err(QuadFailure {
                estimate: sign * total,
                error: total_err,
                intervals: heap.len(),
            });
        }
        let seg = heap.pop().expect("nonempty heap");
        let m = 0.5 * (seg.a + seg.b);
        if m <= seg.a || m >= seg.b {
            // interval exhausted in floating point
            return Err(QuadFailure {
                estimate: sign * total,
                error: total_err,
                intervals: heap.len() + 1,
            });
        }
        total -= seg.left + seg.right;
        total_err -= seg.err;
        let l = make_segment(f, seg.a, m, seg.left);
        let r = make_segment(f, m, seg.b, seg.right);
        total += l.left + l.right + r.left + r.right;
        total_err += l.err + r.err;
        heap.push(l);
        heap.push(r);
        // guard against drift in the running error sum
        if total_err < 0.0 {
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadFailure> {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Integrate over `[a, ∞)` with the map `z = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: Tolerance) -> Result<f64, QuadFailure> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s);
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    integrate_with_breaks(&g, 0.0, 1.0, &[0.5, 0.9, 0.99], tol)
}

/// Which part of a box the nested integrator covers relative to the
/// centered ball of radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallRegion {
    Outside(f64),
    Inside(f64),
}

/// Nested adaptive integration of `f` over the box `[lo, hi]` restricted to
/// a region relative to the origin-centered ball.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    region: BallRegion,
    tol: Tolerance,
) -> Result<f64, QuadFailure> {
    assert_eq!(lo.len(), hi.len());
    let r2 = match region {
        BallRegion::Outside(r) | BallRegion::Inside(r) => r * r,
    };
    let outside = matches!(region, BallRegion::Outside(_));
    nested(f, lo, hi, r2, outside, &[], tol)
}

fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    r2: f64,
    outside: bool,
    prefix: &[f64],
    tol: Tolerance,
) -> Result<f64, QuadFailure> {
    let d = prefix.len();
    let (a, b) = (lo[d], hi[d]);
    let last = d + 1 == lo.len();
    let s = if r2 > 0.0 { r2.sqrt() } else { 0.0 };
    if last {
        let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(2);
        if outside {
            if s == 0.0 {
                pieces.push((a, b));
            } else {
                if a < -s {
                    pieces.push((a, b.min(-s)));
                }
                if b > s {
                    pieces.push((a.max(s), b));
                }
            }
        } else if s > 0.0 {
            let (p, q) = (a.max(-s), b.min(s));
            if p < q {
                pieces.push((p, q));
            }
        }
        let mut total = 0.0;
        for (p, q) in pieces {
            let g = |z: f64| {
                let mut pt = prefix.to_vec();
                pt.push(z);
                f(&pt)
            };
            total += integrate_with_breaks(&g, p, q, &[0.0], tol)?;
        }
        return Ok(total);
    }
    if !outside && s == 0.0 {
        return Ok(0.0);
    }
    let inner_tol = tol.scaled(b - a);
    let failure = std::cell::Cell::new(None::<QuadFailure>);
    let g = |z: f64| {
        let mut p = prefix.to_vec();
        p.push(z);
        match nested(f, lo, hi, r2 - z * z, outside, &p, inner_tol) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                e.estimate
            }
        }
    };
    let breaks = if s > 0.0 { vec![-s, 0.0, s] } else { vec![0.0] };
    let v = integrate_with_breaks(&g, a, b, &breaks, tol)?;
    if let Some(e) = failure.get() {
        return Err(e);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrals() {
        let v = integrate(&|x: f64| x.exp(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
        let v = integrate(&|x: f64| x.sin(), std::f64::consts::PI, 0.0, Tolerance::default()).unwrap();
        assert!((v + 2.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(&|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-11, 1e-11)).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn divergent_integral_fails() {
        let r = integrate(&|x: f64| x.powf(-1.5), 0.0, 1.0, Tolerance::default());
        assert!(r.is_err());
    }

    #[test]
    fn infinite_interval() {
        let v = integrate_to_infinity(&|x: f64| (-x).exp(), 1.0, Tolerance::default()).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-12);
        let v = integrate_to_infinity(&|x: f64| x.powf(-2.5), 2.0, Tolerance::default()).unwrap();
        assert!((v - 2f64.powf(-1.5) / 1.5).abs() < 1e-11);
    }

    #[test]
    fn box_minus_disc_area() {
        // unit square [-1,1]^2 minus disc of radius 1/2
        let one = |_: &[f64]| 1.0;
        let tol = Tolerance::new(1e-11, 1e-11);
        let v = integrate_box(&one, &[-1.0, -1.0], &[1.0, 1.0], BallRegion::Outside(0.5), tol).unwrap();
        assert!((v - (4.0 - std::f64::consts::PI / 4.0)).abs() < 1e-8, "{v}");
        let v = integrate_box(&one, &[-1.0, -1.0], &[1.0, 1.0], BallRegion::Inside(0.5), tol).unwrap();
        assert!((v - std::f64::consts::PI / 4.0).abs() < 1e-8, "{v}");
    }
}
