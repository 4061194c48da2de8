//! Special functions needed by the measure normalizations and the discrete
//! fractional Laplacian weights.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Gamma function on the real line (poles return `NaN`).
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x.fract() == 0.0 {
        return f64::NAN;
    }
    if x < 0.5 {
        // reflection
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    if x.fract() == 0.0 && x <= 23.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x)
}

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

/// Surface area of the unit sphere S^{N-1} in R^N (2 for N = 1).
pub fn unit_sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Normalization making `c ∫ (ψ(x+z) - ψ(x)) |z|^{-N-α} dz` equal to
/// `-(-Δ)^{α/2} ψ` in the Fourier sense.
pub fn fractional_normalization(alpha: f64, dim: usize) -> f64 {
    let n = dim as f64;
    2f64.powf(alpha) * gamma((n + alpha) / 2.0) / (PI.powf(n / 2.0) * gamma(-alpha / 2.0).abs())
}

/// Exponentially scaled modified Bessel functions `e^{-x} I_m(x)` for
/// `m = 0..=max_order`, by Miller's backward recurrence normalized with
/// `I_0 + 2 Σ I_m = e^x`.
pub fn scaled_bessel_i_sequence(x: f64, max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = max_order + (15.0 * x.sqrt()) as usize + 50;
    let start = start + (start & 1);
    let two_over_x = 2.0 / x;
    let mut next = 0.0f64; // I_{k+1}
    let mut cur = 1e-280f64; // I_k
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        let prev = next + (k as f64) * two_over_x * cur; // I_{k-1}
        next = cur;
        cur = prev;
        if k - 1 <= max_order {
            out[k - 1] = cur;
        }
        // accumulate 2 Σ_{m>=1} I_m using the value just left behind
        norm += 2.0 * next;
        if cur > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Coefficients `a_k(m)` of the large-argument expansion
/// `e^{-x} I_m(x) ~ (2πx)^{-1/2} Σ_k (-1)^k a_k(m) / x^k`.
pub fn bessel_asymptotic_coefficients(order: usize, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (order as f64).powi(2);
    let mut coeffs = Vec::with_capacity(terms);
    let mut a = 1.0;
    coeffs.push(a);
    for k in 1..terms {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0);
        coeffs.push(a);
    }
    coeffs
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert_eq!(gamma(5.0), 24.0);
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-14);
        assert!((gamma(0.1) - 9.513_507_698_668_732).abs() < 1e-12);
        assert!(gamma(0.0).is_nan());
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.3, 1.7, 4.2, 10.5, 20.0] {
            assert!((ln_gamma(x) - gamma(x).ln()).abs() < 1e-12, "{x}");
        }
        // ln Γ(101) = ln(100!)
        let ln_fact: f64 = (1..=100).map(|k| (k as f64).ln()).sum();
        assert!((ln_gamma(101.0) - ln_fact).abs() < 1e-10);
    }

    #[test]
    fn fractional_constant_one_dimensional_cauchy() {
        assert!((fractional_normalization(1.0, 1) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    fn scaled_bessel_series(m: usize, x: f64) -> f64 {
        // direct power series, fine for moderate x
        let mut term = (x / 2.0).powi(m as i32) / gamma(m as f64 + 1.0);
        let mut sum = term;
        for k in 1..200 {
            term *= (x / 2.0).powi(2) / (k as f64 * (k + m) as f64);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        sum * (-x).exp()
    }

    #[test]
    fn miller_recurrence_matches_series() {
        for &x in &[0.01, 0.5, 2.0, 10.0, 30.0] {
            let seq = scaled_bessel_i_sequence(x, 12);
            for (m, v) in seq.iter().enumerate() {
                let exact = scaled_bessel_series(m, x);
                assert!(
                    (v - exact).abs() <= 1e-14 + 1e-12 * exact,
                    "x={x} m={m}: {v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn miller_recurrence_large_argument_matches_asymptotics() {
        let x = 4.0e4;
        let seq = scaled_bessel_i_sequence(x, 5);
        for (m, v) in seq.iter().enumerate() {
            let a = bessel_asymptotic_coefficients(m, 8);
            let s: f64 = a
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * c / x.powi(k as i32)
                })
                .sum();
            let asym = s / (2.0 * PI * x).sqrt();
            assert!((v - asym).abs() < 1e-13 * asym, "m={m}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(7);
        assert_eq!(x[3], 0.0);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
