//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process exits nonzero when a criterion fails and no documented
//! deviation accounts for the measurement.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nlpme::elliptic::{dense_oracle_solve, fixed_point_solve};
use nlpme::harness::{
    heat_kernel_check, property_suite, random_pairs, recipe_lte_study, self_convergence_study, stefan_experiment,
    Gaussian, LteReport, PairOptions, PairedData, Recipe, StefanParams, StepRule,
};
use nlpme::operator::{
    discrete_fractional_laplacian, lagrange_operator, local_laplacian_operator, midpoint_operator,
    multilinear_operator, sigma_operator, vanishing_viscosity_operator,
};
use nlpme::stepper::cfl_bound;
use nlpme::{
    run, CflPolicy, DiscreteOperator, Error, Field, LevyMeasureSpec, Monotone, Nonlinearity, SchemeConfig, TimeGrid,
    UniformGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{refine, relative_error};

const ALPHAS: [f64; 3] = [0.5, 1.0, 1.5];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
    /// For a failing criterion: the documented explanation and whether the
    /// measurement is consistent with it.
    deviation: Option<(bool, String)>,
}

fn lte_hs() -> Vec<f64> {
    (3..=8).map(|k| 2f64.powi(-k)).collect()
}

fn lte_report(recipe: Recipe, alpha: f64, gamma: f64) -> nlpme::Result<LteReport> {
    let spec = LevyMeasureSpec::fractional(alpha, 1)?;
    recipe_lte_study(recipe, &spec, &Gaussian { dim: 1 }, &lte_hs(), gamma)
}

fn errors(rep: &LteReport) -> String {
    rep.levels
        .iter()
        .map(|l| format!("{:.2e}", l.error))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_1() -> nlpme::Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut consistent = true;
    let mut parts = Vec::new();
    for alpha in ALPHAS {
        let rep = lte_report(Recipe::Midpoint, alpha, 1.0)?;
        let order = rep.observed_order.unwrap_or(f64::NAN);
        let target = (2.0 - alpha).min(1.0);
        let ok = (order - target).abs() <= 0.25;
        pass &= ok;
        consistent &= ok || (order - (2.0 - alpha)).abs() <= 0.25;
        parts.push(format!(
            "α={alpha}: order {order:.3} (target {target}) [{}]",
            errors(&rep)
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    let deviation = (!pass).then(|| {
        (
            consistent && secs < 60.0,
            "the O(h) term cancels for the symmetric midpoint stencil; the sharp rate is h^(2-α), \
             so α=0.5 converges at 1.5 rather than the bound's 1"
                .to_string(),
        )
    });
    Ok(Outcome {
        id: 1,
        title: "midpoint LTE order within ±0.25 of min(2-α,1)",
        pass,
        detail: format!("{}; {secs:.1}s", parts.join("; ")),
        deviation,
    })
}

fn criterion_2() -> nlpme::Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in ALPHAS {
        let rep = lte_report(Recipe::FractionalLaplacian, alpha, 1.0)?;
        let order = rep.observed_order.unwrap_or(f64::NAN);
        pass &= order >= 1.75;
        parts.push(format!("α={alpha}: order {order:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    Ok(Outcome {
        id: 2,
        title: "discrete fractional Laplacian LTE order >= 1.75",
        pass,
        detail: format!("{}; {secs:.1}s", parts.join("; ")),
        deviation: None,
    })
}

fn criterion_3() -> nlpme::Result<Outcome> {
    let (alpha, gamma) = (1.0, 0.5);
    let rep = lte_report(Recipe::ViscousMidpoint, alpha, gamma)?;
    let predicted = Recipe::ViscousMidpoint
        .predicted_order(alpha, gamma)
        .expect("composite has a prediction");
    let order = rep.observed_order.unwrap_or(f64::NAN);
    let monotone = rep.decreases(0);
    let pass = monotone && (order - predicted).abs() <= 0.3;
    // midpoint part: symmetric cancellation leaves h² r^(-α) instead of h
    let sharp = (gamma * (4.0 - alpha))
        .min(2.0 + gamma * (2.0 - alpha))
        .min(2.0 - gamma * alpha);
    let deviation = (!pass).then(|| {
        (
            monotone && (order - sharp).abs() <= 0.3,
            format!(
                "the midpoint outer part is O(h² r^(-α)) by symmetry, not O(h); \
                 sharp composite rate min(γ(4-α), 2+γ(2-α), 2-γα) = {sharp}"
            ),
        )
    });
    Ok(Outcome {
        id: 3,
        title: "viscosity + midpoint LTE order within ±0.3 of prediction, monotone",
        pass,
        detail: format!(
            "α=1, γ=0.5: order {order:.3} (predicted {predicted}), monotone {monotone} [{}]",
            errors(&rep)
        ),
        deviation,
    })
}

/// Brute-force `∫_a^b g(z) μ(z) dz` over `z > r` for the 1D fractional density.
fn measure_integral(spec: &LevyMeasureSpec, g: &dyn Fn(f64) -> f64, a: f64, b: f64, r: f64) -> f64 {
    let lo = a.max(r);
    if b <= lo {
        return 0.0;
    }
    let f = |z: f64| g(z) * spec.density(&[z]);
    refine(&f, lo, b, 1.0, 1e-14).value
}

fn lagrange_basis(k: usize, i: usize, t: f64) -> f64 {
    (0..=k)
        .filter(|&q| q != i)
        .map(|q| (t - q as f64) / (i as f64 - q as f64))
        .product()
}

struct WeightCheck {
    worst: f64,
    name: String,
}

impl WeightCheck {
    fn new() -> Self {
        Self {
            worst: 0.0,
            name: String::new(),
        }
    }

    fn compare(&mut self, label: &str, value: f64, reference: f64) {
        let err = relative_error(value, reference);
        if err > self.worst || err.is_nan() {
            self.worst = if err.is_nan() { f64::INFINITY } else { err };
            self.name = label.to_string();
        }
    }
}

fn criterion_4() -> nlpme::Result<Outcome> {
    let h = 0.25;
    let r_tail = 2.0;
    let m = 8i64;
    let mut quad = WeightCheck::new();
    let mut bessel = WeightCheck::new();
    let mut missing = Vec::new();

    for alpha in ALPHAS {
        let spec = LevyMeasureSpec::fractional(alpha, 1)?;
        let c = spec.normalization();
        for r in [0.25f64, 0.3] {
            let outside = 2.0 * c * r.powf(-alpha) / alpha;

            let mid = midpoint_operator(&spec, r, h, r_tail)?;
            for b in 1..=m {
                let z0 = b as f64 * h;
                let w = measure_integral(&spec, &|_| 1.0, z0 - 0.5 * h, z0 + 0.5 * h, r);
                quad.compare(&format!("midpoint α={alpha} r={r} β={b}"), mid.weight(&[b]), w);
                quad.compare(&format!("midpoint symmetry β={b}"), mid.weight(&[-b]), mid.weight(&[b]));
            }
            let far = 2.0 * c * ((m as f64 + 0.5) * h).powf(-alpha) / alpha;
            quad.compare(&format!("midpoint tail α={alpha}"), mid.tail_mass(), far);

            let ml = multilinear_operator(&spec, r, h, r_tail)?;
            for b in 1..=m {
                let z0 = b as f64 * h;
                let hat = |z: f64| (1.0 - ((z - z0) / h).abs()).max(0.0);
                let w = measure_integral(&spec, &hat, z0 - h, z0, r) + measure_integral(&spec, &hat, z0, z0 + h, r);
                quad.compare(&format!("multilinear α={alpha} r={r} β={b}"), ml.weight(&[b]), w);
            }
            let kept: f64 = ml.entries().map(|(_, w)| w).sum();
            quad.compare(
                &format!("multilinear mass α={alpha} r={r}"),
                kept + ml.tail_mass(),
                outside,
            );

            for k in 1..=4usize {
                let op = lagrange_operator(&spec, k, r, h, r_tail)?;
                let panels = (m as usize / k).max(1) as i64;
                let span = k as f64 * h;
                for b in 1..=(panels * k as i64) {
                    if b as f64 * h <= r {
                        if op.weight(&[b]) != 0.0 {
                            missing.push(format!("lagrange k={k} keeps node {b} inside the cutoff"));
                        }
                        continue;
                    }
                    let mut integral = 0.0;
                    for p in -panels..panels {
                        let first = p * k as i64;
                        if b < first || b > first + k as i64 {
                            continue;
                        }
                        let i = (b - first) as usize;
                        let lo = p as f64 * span;
                        let g = |z: f64| lagrange_basis(k, i, z / h - first as f64);
                        integral += refine(&g, lo.max(r), lo + span, 1.0, 1e-14).value;
                    }
                    let w = spec.density(&[b as f64 * h]) * integral.max(0.0);
                    quad.compare(&format!("lagrange k={k} α={alpha} r={r} β={b}"), op.weight(&[b]), w);
                }
            }
        }

        for r in [0.25, 0.5] {
            let vv = vanishing_viscosity_operator(&spec, r, h)?;
            let m2 = 2.0 * refine(&|z: f64| z * z * spec.density(&[z]), 0.0, r, 6.0, 1e-14).value;
            quad.compare(
                &format!("viscosity α={alpha} r={r}"),
                vv.weight(&[1]),
                m2 / (2.0 * h * h),
            );
        }

        let dfl = discrete_fractional_laplacian(alpha, h, 1, 1e-13, r_tail)?;
        let s = 0.5 * alpha;
        let symbol = |t: f64| (2.0 * (0.5 * t).sin()).powf(2.0 * s);
        let scale = h.powf(-alpha);
        for b in 1..=m {
            let k = refine(
                &|t: f64| symbol(t) * (b as f64 * t).cos(),
                0.0,
                std::f64::consts::PI,
                4.0,
                1e-15,
            );
            let reference = -k.value / std::f64::consts::PI;
            bessel.compare(
                &format!("fractional α={alpha} β={b}"),
                dfl.weight(&[b]) / scale,
                reference,
            );
        }
        let total = refine(&symbol, 0.0, std::f64::consts::PI, 4.0, 1e-15).value / std::f64::consts::PI;
        let kept: f64 = dfl.entries().map(|(_, w)| w).sum();
        bessel.compare(
            &format!("fractional total α={alpha}"),
            (kept + dfl.tail_mass()) / scale,
            total,
        );
    }

    let lap = local_laplacian_operator(h, 1)?;
    quad.compare("local laplacian", lap.weight(&[1]), 1.0 / (h * h));
    let eta = 0.6;
    let sigma = sigma_operator(1, &[vec![1.0]], h, eta)?;
    quad.compare("sigma β=2", sigma.weight(&[2]), 0.6 / (eta * eta));
    quad.compare("sigma β=3", sigma.weight(&[-3]), 0.4 / (eta * eta));

    let pass = quad.worst <= 1e-8 && bessel.worst <= 1e-9 && missing.is_empty();
    Ok(Outcome {
        id: 4,
        title: "builder weights match brute-force quadrature (1e-8) and Bessel-integral weights (1e-9)",
        pass,
        detail: format!(
            "worst quadrature rel err {:.2e} ({}); worst fractional rel err {:.2e} ({}){}",
            quad.worst,
            quad.name,
            bessel.worst,
            bessel.name,
            if missing.is_empty() {
                String::new()
            } else {
                format!("; {}", missing.join(", "))
            }
        ),
        deviation: None,
    })
}

fn criterion_5() -> nlpme::Result<Outcome> {
    let grid = UniformGrid::new(1, 1.0 / 16.0, 16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stefan = Nonlinearity::stefan(1.0, 0.5)?.regularize(0.05)?;
    let identity = Nonlinearity::identity();
    let power = Nonlinearity::power(2.0)?;
    let mut worst_diff = 0.0f64;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst_label = String::new();
    for n in 0..50 {
        let alpha = ALPHAS[n % 3];
        let spec = LevyMeasureSpec::fractional(alpha, 1)?;
        let dt: f64 = rng.random_range(0.01..0.5);
        let op = midpoint_operator(&spec, grid.h(), grid.h(), 1.0)?.scaled(dt)?;
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-0.5..1.5)).collect();
        let rho = Field::from_values(grid, values)?;
        let (phi, name): (&dyn Monotone, &str) = match n % 3 {
            0 => (&identity, "identity"),
            1 => (&power, "power(2)"),
            _ => (&stefan, "regularized stefan"),
        };
        let (w, rep) = fixed_point_solve(&op, phi, &rho, 1e-14, None)?;
        let oracle = dense_oracle_solve(&op, phi, &rho)?;
        let diff = w.linf_distance(&oracle)?;
        let c = phi
            .lipschitz_bound(rho.linf_norm())
            .finite()
            .expect("Lipschitz on the data range");
        let bound = 1.0 - 1.0 / (1.0 + op.total_mass() * c) + 0.05;
        let margin = rep.contraction_estimate - bound;
        worst_diff = worst_diff.max(diff);
        if margin > worst_margin {
            worst_margin = margin;
            worst_label = format!(
                "{name}, α={alpha}: estimate {:.4} vs bound {bound:.4}",
                rep.contraction_estimate
            );
        }
    }
    let pass = worst_diff <= 1e-8 && worst_margin <= 0.0;
    Ok(Outcome {
        id: 5,
        title: "fixed-point solve matches dense Newton oracle; contraction within bound",
        pass,
        detail: format!("50 instances on 33 cells: max diff {worst_diff:.2e}; tightest contraction {worst_label}"),
        deviation: None,
    })
}

fn property_line(rep: &nlpme::harness::PropertyReport) -> String {
    rep.checks
        .iter()
        .map(|c| format!("{} {:.1e}/{:.0e}", c.name, c.violation, c.tolerance))
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_6() -> nlpme::Result<Outcome> {
    let steps = 50;
    let tol = 1e-10;
    let grid = UniformGrid::covering(1, 0.1, 8.0)?;
    let spec = LevyMeasureSpec::fractional(1.0, 1)?;
    let op = midpoint_operator(&spec, 0.1, 0.1, 2.0)?;
    let opts = PairOptions {
        source_steps: Some(steps),
        source_amplitude: 0.2,
        ..PairOptions::default()
    };
    let pairs = random_pairs(grid, 20, 6, opts);

    let stefan_cfg = SchemeConfig::implicit(
        op.clone(),
        Nonlinearity::stefan(1.0, 0.5)?,
        TimeGrid::uniform(1.0, steps)?,
    )?
    .with_tolerance(tol);
    let stefan = property_suite(&stefan_cfg, &pairs)?;

    // Δt at 0.9 of the CFL bound on the largest data range
    let power = Nonlinearity::power(2.0)?;
    let range = |dt: f64| {
        pairs
            .iter()
            .flat_map(|p: &PairedData| {
                let src = |fs: &[Field]| fs.iter().map(|f| dt * f.linf_norm()).sum::<f64>();
                [p.u0.linf_norm() + src(&p.f), p.v0.linf_norm() + src(&p.g)]
            })
            .fold(0.0, f64::max)
    };
    let mut dt = 0.9 * cfl_bound(&power, op.total_mass(), range(0.0))?;
    for _ in 0..20 {
        dt = 0.9 * cfl_bound(&power, op.total_mass(), range(dt))?;
    }
    let explicit_cfg =
        SchemeConfig::explicit(op, power, TimeGrid::uniform(dt * steps as f64, steps)?)?.with_tolerance(tol);
    let explicit = property_suite(&explicit_cfg, &pairs)?;

    let has_all = |rep: &nlpme::harness::PropertyReport| {
        [
            "monotonicity",
            "l1_contraction",
            "l1_stability",
            "linf_stability",
            "conservation",
        ]
        .iter()
        .all(|n| rep.get(n).is_some())
    };
    let pass = stefan.all_passed() && explicit.all_passed() && has_all(&stefan) && has_all(&explicit);
    Ok(Outcome {
        id: 6,
        title: "a priori properties on 20 paired runs, J=50",
        pass,
        detail: format!(
            "implicit stefan: {}; explicit power(2) dt={dt:.4}: {}",
            property_line(&stefan),
            property_line(&explicit)
        ),
        deviation: None,
    })
}

fn criterion_7() -> nlpme::Result<Outcome> {
    let start = Instant::now();
    let hs = [0.125, 0.0625, 0.03125, 0.015625];
    let quad = heat_kernel_check(&hs, StepRule::quadratic(), 0.25, 8.0, 1e-12)?;
    let lin = heat_kernel_check(&hs, StepRule::linear(), 0.25, 8.0, 1e-12)?;
    let q = quad.l1_rate.unwrap_or(f64::NAN);
    let l = lin.l1_rate.unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    let pass = (q - 2.0).abs() <= 0.3 && (l - 1.0).abs() <= 0.3 && secs < 60.0;
    Ok(Outcome {
        id: 7,
        title: "heat benchmark orders 2 (dt=h²) and 1 (dt=h), ±0.3",
        pass,
        detail: format!("dt=h²: {q:.3}; dt=h: {l:.3}; {secs:.1}s"),
        deviation: None,
    })
}

fn criterion_8() -> nlpme::Result<Outcome> {
    let start = Instant::now();
    let hs = [0.1, 0.05, 0.025];
    let runs: Vec<_> = hs
        .iter()
        .map(|&h| stefan_experiment(StefanParams::standard(h)))
        .collect::<nlpme::Result<_>>()?;
    let bounded = runs.iter().all(|r| r.max_linf <= r.initial_max + 1e-10);
    let overshoot = runs
        .iter()
        .map(|r| r.max_linf - r.initial_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let drift = runs.iter().map(|r| r.mass_drift).fold(0.0, f64::max);
    let by_h = |h: f64| {
        let i = hs.iter().position(|&x| x == h).expect("spacing was run");
        Ok(runs[i].trajectory.clone())
    };
    let rep = self_convergence_study("stefan", &hs, &by_h)?;
    let decreasing = rep.l1_strictly_decreasing();
    let (l1, linf) = (rep.l1_rate.unwrap_or(f64::NAN), rep.linf_rate.unwrap_or(f64::NAN));
    let secs = start.elapsed().as_secs_f64();
    let pass = bounded && drift <= 1e-7 && decreasing && l1 >= linf && secs < 300.0;
    let diffs: Vec<String> = rep
        .levels
        .iter()
        .map(|l| format!("{:.3e}/{:.3e}", l.l1, l.linf))
        .collect();
    Ok(Outcome {
        id: 8,
        title: "Stefan: max principle, mass, self-convergence, L1 rate >= Linf rate",
        pass,
        detail: format!(
            "max overshoot {overshoot:.1e}; mass drift {drift:.1e}; L1/Linf diffs [{}]; rates L1 {l1:.3} Linf {linf:.3}; {secs:.1}s",
            diffs.join(" ")
        ),
        deviation: None,
    })
}

fn criterion_9() -> nlpme::Result<Outcome> {
    let h = 0.1;
    let grid = UniformGrid::covering(1, h, 3.0)?;
    let spec = LevyMeasureSpec::fractional(1.0, 1)?;
    let op = midpoint_operator(&spec, h, h, 1.0)?;
    let power = Nonlinearity::power(2.0)?;
    let bound = cfl_bound(&power, op.total_mass(), 1.0)?;
    let dt = 1.5 * bound;
    let centre = grid.flat(&[0]).expect("origin cell");
    let mut u = vec![0.0; grid.len()];
    u[centre] = 0.99;
    let mut v = u.clone();
    v[centre] = 1.0;
    let pair = PairedData::without_sources(Field::from_values(grid, u)?, Field::from_values(grid, v)?);
    let cfg = SchemeConfig::explicit(op, power, TimeGrid::uniform(dt, 1)?)?.with_tolerance(1e-10);

    let refused = match run(&cfg, &pair.v0) {
        Err(f) => matches!(f.error, Error::CflViolation { .. }) && f.step == 0 && f.partial.fields.len() == 1,
        Ok(_) => false,
    };
    let off = cfg.with_cfl_policy(CflPolicy::Off);
    let rep = property_suite(&off, std::slice::from_ref(&pair))?;
    let mono = rep.get("monotonicity").expect("ordered pair is checked");
    let pass = refused && pair.is_ordered() && !mono.passed();
    Ok(Outcome {
        id: 9,
        title: "CFL guard refuses dt = 1.5x bound; monotonicity breaks with the guard off",
        pass,
        detail: format!(
            "bound {bound:.4}, dt {dt:.4}: refused {refused}; monotonicity violation {:.2e} (tolerance {:.0e})",
            mono.violation, mono.tolerance
        ),
        deviation: None,
    })
}

/// Coarse field copied onto the grid `factor` times finer.
fn upsample(coarse: &Field, fine: UniformGrid, factor: i64) -> nlpme::Result<Field> {
    let values = (0..fine.len())
        .map(|k| {
            let idx: Vec<i64> = fine
                .index(k)
                .iter()
                .map(|i| (i + factor / 2).div_euclid(factor))
                .collect();
            coarse.at(&idx)
        })
        .collect();
    Field::from_values(fine, values)
}

fn criterion_10() -> nlpme::Result<Outcome> {
    let factor = 3usize;
    let tol = 1e-10;
    let coarse_grid = UniformGrid::new(1, 0.3, 14)?;
    let fine_grid = UniformGrid::new(1, 0.1, 3 * 14 + 1)?;
    let spec = LevyMeasureSpec::fractional(1.0, 1)?;
    let coarse_op = midpoint_operator(&spec, 0.3, 0.3, 2.4)?;
    let fine_op = coarse_op.refined(factor)?;
    let u0 = Field::cell_average(coarse_grid, |x| (1.5 - x[0].abs()).max(0.0))?;
    let u0_fine = upsample(&u0, fine_grid, factor as i64)?;
    let time = TimeGrid::uniform(1.0, 20)?;

    let mut mismatch = 0.0f64;
    let mut blockwise = true;
    let mut check = |coarse_op: DiscreteOperator,
                     fine_op: DiscreteOperator,
                     phi: Nonlinearity,
                     implicit: bool|
     -> nlpme::Result<()> {
        let build = |op: DiscreteOperator| {
            if implicit {
                SchemeConfig::implicit(op, phi.clone(), time.clone())
            } else {
                SchemeConfig::explicit(op, phi.clone(), time.clone())
            }
            .map(|c| c.with_tolerance(tol))
        };
        let coarse = run(&build(coarse_op)?, &u0)?;
        let fine = run(&build(fine_op)?, &u0_fine)?;
        for (c, f) in coarse.fields.iter().zip(&fine.fields) {
            blockwise &= f.is_blockwise_constant(factor, 10.0 * tol);
            let up = upsample(c, fine_grid, factor as i64)?;
            mismatch = mismatch.max(f.linf_distance(&up)?);
        }
        Ok(())
    };
    check(
        coarse_op.clone(),
        fine_op.clone(),
        Nonlinearity::stefan(1.0, 0.5)?,
        true,
    )?;
    check(
        coarse_op.scaled(0.5)?,
        fine_op.scaled(0.5)?,
        Nonlinearity::power(2.0)?,
        false,
    )?;
    let pass = blockwise && mismatch <= 10.0 * tol;
    Ok(Outcome {
        id: 10,
        title: "piecewise-constant data stay cellwise constant on a 3x finer grid",
        pass,
        detail: format!(
            "implicit stefan and explicit power(2), 20 steps: blockwise {blockwise}; max deviation from the coarse run {mismatch:.1e}"
        ),
        deviation: None,
    })
}

type Criterion = fn() -> nlpme::Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(u32, Criterion); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexplained = 0;
    println!("acceptance report");
    for (id, f) in criteria {
        if filter.is_some_and(|k| k != id) {
            continue;
        }
        match f() {
            Ok(o) => {
                println!(
                    "criterion {:>2} {}: {} | {}",
                    o.id,
                    if o.pass { "PASS" } else { "FAIL" },
                    o.title,
                    o.detail
                );
                if !o.pass {
                    match o.deviation {
                        Some((true, note)) => {
                            println!("             documented deviation, measurement consistent: {note}")
                        }
                        Some((false, note)) => {
                            println!("             documented deviation, measurement INCONSISTENT: {note}");
                            unexplained += 1;
                        }
                        None => unexplained += 1,
                    }
                }
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL: error {e}");
                unexplained += 1;
            }
        }
    }
    if unexplained > 0 {
        println!("{unexplained} criteria failed without a documented explanation");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
