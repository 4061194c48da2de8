#![allow(dead_code)]

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, x);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let d = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                weights[i] = 2.0 / ((1.0 - x * x) * d * d);
                break;
            }
        }
        nodes[i] = x;
    }
    (nodes, weights)
}

/// Composite 16-point Gauss-Legendre on `panels` panels whose breakpoints
/// are graded towards `a` as `(i/panels)^grading`.
pub fn composite(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, grading: f64) -> f64 {
    let (x, w) = gauss_legendre(16);
    let brk = |i: usize| a + (b - a) * (i as f64 / panels as f64).powf(grading);
    let mut total = 0.0;
    for p in 0..panels {
        let (lo, hi) = (brk(p), brk(p + 1));
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        total += half * x.iter().zip(&w).map(|(t, wt)| wt * f(mid + half * t)).sum::<f64>();
    }
    total
}

#[derive(Debug, Clone, Copy)]
pub struct Refined {
    pub value: f64,
    /// Difference between the last two resolutions.
    pub difference: f64,
}

/// Double the panel count until two consecutive resolutions agree to `rel`
/// relative (or `1e-300` absolute).
pub fn refine(f: &dyn Fn(f64) -> f64, a: f64, b: f64, grading: f64, rel: f64) -> Refined {
    if b <= a {
        return Refined {
            value: 0.0,
            difference: 0.0,
        };
    }
    let mut panels = 4;
    let mut prev = composite(f, a, b, panels, grading);
    loop {
        panels *= 2;
        let next = composite(f, a, b, panels, grading);
        let diff = (next - prev).abs();
        if diff <= rel * next.abs().max(1e-300) || panels >= 1 << 15 {
            return Refined {
                value: next,
                difference: diff,
            };
        }
        prev = next;
    }
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}
