//! Monotone nonlinearities `φ` with `φ(0) = 0`, their Lipschitz bounds, a
//! mollified strictly increasing regularization, and the inverse of
//! `w ↦ w + m φ(w)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{param, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::gauss_legendre;

/// Upper bound for the slope of `φ` on `[-M, M]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzBound {
    Finite(f64),
    Unbounded,
}

impl LipschitzBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            LipschitzBound::Finite(v) => Some(v),
            LipschitzBound::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LipschitzBound::Finite(_))
    }
}

impl fmt::Display for LipschitzBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LipschitzBound::Finite(v) => write!(f, "{v}"),
            LipschitzBound::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// A continuous nondecreasing function with `φ(0) = 0`.
pub trait Monotone: Send + Sync + fmt::Debug {
    fn eval(&self, z: f64) -> f64;

    /// A (one-sided where needed) derivative, used only to accelerate
    /// root finding.
    fn derivative(&self, z: f64) -> f64;

    fn lipschitz_bound(&self, range: f64) -> LipschitzBound;

    /// The unique `w` with `w + mass·φ(w) = y`.
    fn shifted_inverse(&self, mass: f64, y: f64) -> f64 {
        monotone_root(self, mass, y)
    }
}

/// Safeguarded Newton on the bracket `[min(0,y), max(0,y)]`, valid because
/// `w φ(w) >= 0` places the root between 0 and `y`.
pub(crate) fn monotone_root<F: Monotone + ?Sized>(phi: &F, mass: f64, y: f64) -> f64 {
    if mass == 0.0 || y == 0.0 {
        return y;
    }
    let big_phi = |w: f64| w + mass * phi.eval(w);
    let (mut lo, mut hi) = if y > 0.0 { (0.0, y) } else { (y, 0.0) };
    let mut w = y / (1.0 + mass * phi.derivative(0.0).min(1e12));
    if !(w > lo && w < hi) {
        w = 0.5 * (lo + hi);
    }
    for _ in 0..400 {
        let r = big_phi(w) - y;
        if r == 0.0 {
            return w;
        }
        if r > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let d = 1.0 + mass * phi.derivative(w);
        let mut next = w - r / d;
        if !(next > lo && next < hi) || !d.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-16 * w.abs().max(1e-300)
            || hi - lo <= 2.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE)
        {
            return next;
        }
        w = next;
    }
    assert!(
        hi - lo < 1e-10 * (1.0 + y.abs()),
        "bracket failed to shrink for strictly increasing Φ"
    );
    0.5 * (lo + hi)
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type BoundFn = Arc<dyn Fn(f64) -> LipschitzBound + Send + Sync>;

/// User-supplied monotone function. Optional derivative, Lipschitz bound
/// and antiderivative improve root finding, CFL checks and regularization.
#[derive(Clone)]
pub struct CustomFunction {
    name: String,
    f: ScalarFn,
    offset: f64,
    derivative: Option<ScalarFn>,
    lipschitz: Option<BoundFn>,
    antiderivative: Option<ScalarFn>,
}

impl fmt::Debug for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Nonlinearity {
    Identity,
    /// `ζ|ζ|^{m-1}`
    Power(f64),
    /// `max(0, aζ − b) − max(0, −b)`
    Stefan {
        a: f64,
        b: f64,
    },
    Custom(CustomFunction),
}

impl Nonlinearity {
    pub fn identity() -> Self {
        Nonlinearity::Identity
    }

    pub fn power(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(param(format!("power exponent must be positive, got {m}")));
        }
        Ok(Nonlinearity::Power(m))
    }

    pub fn stefan(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(param(format!(
                "Stefan nonlinearity needs a >= 0 and finite b, got a={a}, b={b}"
            )));
        }
        Ok(Nonlinearity::Stefan { a, b })
    }

    /// Custom nondecreasing function; shifted so that `φ(0) = 0`.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let f: ScalarFn = Arc::new(f);
        let offset = f(0.0);
        if !offset.is_finite() {
            return Err(param("custom nonlinearity is not finite at 0"));
        }
        // cheap sanity check on monotonicity
        let mut prev = f(-10.0);
        for k in -999..=1000 {
            let v = f(k as f64 * 0.01);
            if v < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(param("custom nonlinearity is not nondecreasing"));
            }
            prev = v;
        }
        Ok(Nonlinearity::Custom(CustomFunction {
            name: name.into(),
            f,
            offset,
            derivative: None,
            lipschitz: None,
            antiderivative: None,
        }))
    }

    pub fn with_derivative(self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        match self {
            Nonlinearity::Custom(mut c) => {
                c.derivative = Some(Arc::new(d));
                Nonlinearity::Custom(c)
            }
            other => other,
        }
    }

    pub fn with_lipschitz(self, l: impl Fn(f64) -> LipschitzBound + Send + Sync + 'static) -> Self {
        match self {
            Nonlinearity::Custom(mut c) => {
                c.lipschitz = Some(Arc::new(l));
                Nonlinearity::Custom(c)
            }
            other => other,
        }
    }

    /// Antiderivative vanishing at 0 (any additive constant is fine).
    pub fn with_antiderivative(self, p: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        match self {
            Nonlinearity::Custom(mut c) => {
                c.antiderivative = Some(Arc::new(p));
                Nonlinearity::Custom(c)
            }
            other => other,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Nonlinearity::Identity => "identity".into(),
            Nonlinearity::Power(m) => format!("power({m})"),
            Nonlinearity::Stefan { a, b } => format!("stefan({a},{b})"),
            Nonlinearity::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// `∫_0^ζ φ`.
    pub fn antiderivative(&self, z: f64) -> f64 {
        match self {
            Nonlinearity::Identity => 0.5 * z * z,
            Nonlinearity::Power(m) => z.abs().powf(m + 1.0) / (m + 1.0),
            Nonlinearity::Stefan { a, b } => {
                if *a == 0.0 {
                    return 0.0;
                }
                let g = |x: f64| {
                    if a * x > *b {
                        (a * x - b).powi(2) / (2.0 * a)
                    } else {
                        0.0
                    }
                };
                g(z) - g(0.0) - (-b).max(0.0) * z
            }
            Nonlinearity::Custom(c) => match &c.antiderivative {
                Some(p) => p(z) - p(0.0),
                None => {
                    let f = |x: f64| self.eval(x);
                    integrate(&f, 0.0, z, Tolerance::new(1e-15, 1e-14)).unwrap_or_else(|e| e.estimate)
                }
            },
        }
    }

    pub fn regularize(&self, delta: f64) -> Result<RegularizedNonlinearity> {
        RegularizedNonlinearity::new(self.clone(), delta)
    }
}

impl Monotone for Nonlinearity {
    fn eval(&self, z: f64) -> f64 {
        match self {
            Nonlinearity::Identity => z,
            Nonlinearity::Power(m) => z.signum() * z.abs().powf(*m),
            Nonlinearity::Stefan { a, b } => (a * z - b).max(0.0) - (-b).max(0.0),
            Nonlinearity::Custom(c) => (c.f)(z) - c.offset,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Power(m) => {
                if z == 0.0 {
                    if *m < 1.0 {
                        f64::INFINITY
                    } else if *m == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    m * z.abs().powf(m - 1.0)
                }
            }
            Nonlinearity::Stefan { a, b } => {
                if a * z >= *b {
                    *a
                } else {
                    0.0
                }
            }
            Nonlinearity::Custom(c) => match &c.derivative {
                Some(d) => d(z),
                None => {
                    let e = 1e-7 * z.abs().max(1.0);
                    ((c.f)(z + e) - (c.f)(z - e)) / (2.0 * e)
                }
            },
        }
    }

    fn lipschitz_bound(&self, range: f64) -> LipschitzBound {
        let m_range = range.abs();
        match self {
            Nonlinearity::Identity => LipschitzBound::Finite(1.0),
            Nonlinearity::Power(m) => {
                if *m >= 1.0 {
                    if *m == 1.0 {
                        LipschitzBound::Finite(1.0)
                    } else {
                        LipschitzBound::Finite(m * m_range.powf(m - 1.0))
                    }
                } else if m_range == 0.0 {
                    LipschitzBound::Finite(0.0)
                } else {
                    LipschitzBound::Unbounded
                }
            }
            Nonlinearity::Stefan { a, .. } => LipschitzBound::Finite(*a),
            Nonlinearity::Custom(c) => match &c.lipschitz {
                Some(l) => l(m_range),
                None => LipschitzBound::Unbounded,
            },
        }
    }

    fn shifted_inverse(&self, mass: f64, y: f64) -> f64 {
        if mass == 0.0 {
            return y;
        }
        match self {
            Nonlinearity::Identity => y / (1.0 + mass),
            Nonlinearity::Stefan { a, b } => {
                let (a, b) = (*a, *b);
                if a == 0.0 {
                    return y;
                }
                if b >= 0.0 {
                    // φ = 0 up to b/a, then a(w − b/a)
                    let kink = b / a;
                    if y <= kink {
                        y
                    } else {
                        (y + mass * b) / (1.0 + mass * a)
                    }
                } else {
                    // φ = a w for w >= b/a, constant −(−b) = b below
                    let kink = b / a;
                    let threshold = kink * (1.0 + mass * a);
                    if y >= threshold {
                        y / (1.0 + mass * a)
                    } else {
                        y - mass * b
                    }
                }
            }
            _ => monotone_root(self, mass, y),
        }
    }
}

const MOLLIFIER_NODES: usize = 64;

/// Unnormalized bump `exp(-1/(1-u²))` and its derivative on `(-1, 1)`.
fn bump_derivative(u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 {
        return 0.0;
    }
    (-1.0 / s).exp() * (-2.0 * u / (s * s))
}

fn mollifier_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(MOLLIFIER_NODES))
}

/// `φ_δ(ζ) = (φ∗ω_δ)(ζ) − (φ∗ω_δ)(0) + δζ`.
///
/// The convolution is evaluated after integrating by parts,
/// `(φ∗ω_δ)(ζ) = ∫ Φ(ζ−y) ω_δ'(y) dy` with `Φ' = φ`, on a fixed
/// Gauss–Legendre rule; the discrete weights are normalized so that linear
/// functions are reproduced exactly. The result has slope
/// `Σ c_i φ(ζ − y_i) + δ >= δ`, finite even when `φ` is not Lipschitz.
#[derive(Debug, Clone)]
pub struct RegularizedNonlinearity {
    base: Nonlinearity,
    delta: f64,
    nodes: Vec<(f64, f64)>,
    at_zero: f64,
    abs_weight: f64,
}

impl RegularizedNonlinearity {
    pub fn new(base: Nonlinearity, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(param(format!("regularization δ must be positive, got {delta}")));
        }
        let (x, w) = mollifier_rule();
        let raw: Vec<(f64, f64)> = x
            .iter()
            .zip(w)
            .map(|(u, q)| (delta * u, q * bump_derivative(*u) / delta))
            .collect();
        // −Σ c y = ∫ ω_δ, so dividing by it reproduces ζ ↦ ζ exactly
        let norm: f64 = -raw.iter().map(|(y, c)| y * c).sum::<f64>();
        let nodes: Vec<(f64, f64)> = raw.into_iter().map(|(y, c)| (y, c / norm)).collect();
        let abs_weight = nodes.iter().map(|(_, c)| c.abs()).sum();
        let mut out = Self {
            base,
            delta,
            nodes,
            at_zero: 0.0,
            abs_weight,
        };
        out.at_zero = out.convolved(0.0);
        Ok(out)
    }

    fn convolved(&self, z: f64) -> f64 {
        self.nodes
            .iter()
            .map(|(y, c)| c * self.base.antiderivative(z - y))
            .sum()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn base(&self) -> &Nonlinearity {
        &self.base
    }
}

impl Monotone for RegularizedNonlinearity {
    fn eval(&self, z: f64) -> f64 {
        if let Nonlinearity::Identity = self.base {
            return (1.0 + self.delta) * z;
        }
        self.convolved(z) - self.at_zero + self.delta * z
    }

    fn derivative(&self, z: f64) -> f64 {
        let s: f64 = self.nodes.iter().map(|(y, c)| c * self.base.eval(z - y)).sum();
        s.max(0.0) + self.delta
    }

    fn lipschitz_bound(&self, range: f64) -> LipschitzBound {
        let r = range.abs() + self.delta;
        let via_base = self.base.lipschitz_bound(r).finite();
        let osc = self.base.eval(r) - self.base.eval(-r);
        let via_mollifier = 0.5 * self.abs_weight * osc;
        let l = match via_base {
            Some(l) => l.min(via_mollifier),
            None => via_mollifier,
        };
        LipschitzBound::Finite(l + self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_examples() {
        assert!((Nonlinearity::stefan(1.0, 0.5).unwrap().eval(0.7) - 0.2).abs() < 1e-15);
        assert_eq!(Nonlinearity::power(2.0).unwrap().eval(-2.0), -4.0);
        assert_eq!(Nonlinearity::identity().eval(3.0), 3.0);
        assert_eq!(Nonlinearity::stefan(2.0, -1.0).unwrap().eval(0.0), 0.0);
        assert!(Nonlinearity::power(0.0).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(
            Nonlinearity::stefan(1.0, 0.5).unwrap().lipschitz_bound(7.0),
            LipschitzBound::Finite(1.0)
        );
        assert_eq!(
            Nonlinearity::power(2.0).unwrap().lipschitz_bound(3.0),
            LipschitzBound::Finite(6.0)
        );
        assert_eq!(
            Nonlinearity::power(0.5).unwrap().lipschitz_bound(1.0),
            LipschitzBound::Unbounded
        );
    }

    #[test]
    fn regularization_examples() {
        let id = Nonlinearity::identity().regularize(0.1).unwrap();
        for &z in &[-2.0, 0.0, 0.3, 5.0] {
            assert!((id.eval(z) - 1.1 * z).abs() < 1e-14);
        }
        let st = Nonlinearity::stefan(1.0, 0.5).unwrap().regularize(1e-3).unwrap();
        assert_eq!(st.eval(0.0), 0.0);
        let mut prev = st.eval(-2.0);
        for k in 1..=10_000 {
            let z = -2.0 + 4.0 * k as f64 / 10_000.0;
            let v = st.eval(z);
            assert!(v > prev, "not strictly increasing at {z}");
            prev = v;
        }
        assert!(Nonlinearity::identity().regularize(0.0).is_err());
    }

    #[test]
    fn regularized_power_is_close_and_lipschitz() {
        let p = Nonlinearity::power(0.5).unwrap();
        let mut prev_err = f64::INFINITY;
        for &d in &[0.1, 0.05, 0.025, 0.0125] {
            let r = p.regularize(d).unwrap();
            let err = (0..=200)
                .map(|k| -1.0 + k as f64 / 100.0)
                .map(|z| (r.eval(z) - p.eval(z)).abs())
                .fold(0.0, f64::max);
            assert!(err < prev_err);
            prev_err = err;
            assert!(r.lipschitz_bound(1.0).is_finite());
        }
    }

    #[test]
    fn stefan_closed_form_inverse_matches_bisection() {
        for &(a, b) in &[(1.0, 0.5), (2.0, -0.3), (0.5, 0.0)] {
            let phi = Nonlinearity::stefan(a, b).unwrap();
            for &m in &[0.3, 3.0] {
                for &y in &[-2.0, -0.1, 0.2, 0.6, 1.7] {
                    let w = phi.shifted_inverse(m, y);
                    assert!((w + m * phi.eval(w) - y).abs() < 1e-13, "a={a} b={b} m={m} y={y}");
                }
            }
        }
    }

    fn bisection(phi: &dyn Monotone, m: f64, y: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0 - y.abs(), 10.0 + y.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + m * phi.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(Nonlinearity::identity().shifted_inverse(1.0, 4.0), 2.0);
        assert_eq!(Nonlinearity::power(3.0).unwrap().shifted_inverse(0.0, 1.25), 1.25);
        let st = Nonlinearity::stefan(1.0, 0.5).unwrap().regularize(1e-3).unwrap();
        let w = st.shifted_inverse(3.0, 1.7);
        assert!((w - bisection(&st, 3.0, 1.7)).abs() < 1e-12);
        let p = Nonlinearity::power(0.3).unwrap();
        let w = p.shifted_inverse(2.0, -0.9);
        assert!((w - bisection(&p, 2.0, -0.9)).abs() < 1e-12);
    }

    #[test]
    fn custom_function_is_shifted_to_vanish_at_zero() {
        let c = Nonlinearity::custom("atan+1", |x: f64| x.atan() + 1.0).unwrap();
        assert_eq!(c.eval(0.0), 0.0);
        assert!((c.antiderivative(1.0) - (std::f64::consts::FRAC_PI_4 - 0.5 * 2f64.ln())).abs() < 1e-12);
        assert!(Nonlinearity::custom("dec", |x: f64| -x).is_err());
    }
}
