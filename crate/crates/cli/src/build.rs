//! Turning a validated scheme description into library objects.

use std::sync::Arc;

use nlpme::elliptic::DeltaSchedule;
use nlpme::harness::Recipe;
use nlpme::operator::{sigma_operator, vanishing_viscosity_operator, zero_operator};
use nlpme::stepper::theta_split;
use nlpme::{
    DiscreteOperator, Field, LevyMeasureSpec, Monotone, Nonlinearity, Result, SchemeConfig, Source, TimeGrid,
    UniformGrid,
};

use crate::config::{InitialKind, InitialSpec, OperatorBlock, OperatorKind, Parts, PhiSpec, SchemeSpec, SourceSpec};

pub fn nonlinearity(phi: &PhiSpec) -> Result<Nonlinearity> {
    match *phi {
        PhiSpec::Identity => Ok(Nonlinearity::identity()),
        PhiSpec::Power(m) => Nonlinearity::power(m),
        PhiSpec::Stefan { a, b } => Nonlinearity::stefan(a, b),
    }
}

/// `φ` of a block, regularized with `δ` (default `h`) when requested.
pub fn block_nonlinearity(block: &OperatorBlock, h: f64) -> Result<Nonlinearity> {
    let base = nonlinearity(&block.phi)?;
    let Some(delta) = block.regularize else {
        return Ok(base);
    };
    let reg = Arc::new(base.regularize(delta.unwrap_or(h))?);
    let (d, l) = (reg.clone(), reg.clone());
    Ok(
        Nonlinearity::custom(format!("{}+δ{}", base.name(), reg.delta()), move |z| reg.eval(z))?
            .with_derivative(move |z| d.derivative(z))
            .with_lipschitz(move |range| l.lipschitz_bound(range)),
    )
}

/// Inner radius at spacing `h`.
pub fn radius(block: &OperatorBlock, h: f64) -> f64 {
    block.r.unwrap_or_else(|| h.powf(block.gamma).max(h))
}

pub fn operator(block: &OperatorBlock, dim: usize, h: f64) -> Result<DiscreteOperator> {
    let r = radius(block, h);
    let spec = || match block.alpha {
        Some(a) => LevyMeasureSpec::fractional(a, dim),
        None => LevyMeasureSpec::zero(dim),
    };
    let mut op = match &block.kind {
        OperatorKind::Sigma => zero_operator(dim, h)?,
        OperatorKind::VanishingViscosity => vanishing_viscosity_operator(&spec()?, r, h)?,
        OperatorKind::Recipe(rec @ (Recipe::Zero | Recipe::LocalLaplacian)) => {
            rec.build(&LevyMeasureSpec::zero(dim)?, h, r, block.r_tail)?
        }
        OperatorKind::Recipe(rec) => rec.build(&spec()?, h, r, block.r_tail)?,
    };
    if !block.sigma.is_empty() {
        let eta = block.eta.unwrap_or_else(|| h.sqrt());
        op = op.add(&sigma_operator(dim, &block.sigma, h, eta)?)?;
    }
    Ok(op)
}

pub fn grid(spec: &SchemeSpec, h: f64) -> Result<UniformGrid> {
    UniformGrid::covering(spec.dimension, h, spec.extent)
}

fn initial_value(init: &InitialSpec, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    init.amplitude
        * match init.kind {
            InitialKind::Zero => 0.0,
            InitialKind::Gaussian => (-r2).exp(),
            InitialKind::Bump => {
                let s = init.radius * init.radius - r2;
                if s > 0.0 {
                    (-1.0 / s).exp()
                } else {
                    0.0
                }
            }
            InitialKind::Indicator => {
                if x.iter().all(|v| v.abs() <= init.radius) {
                    1.0
                } else {
                    0.0
                }
            }
        }
}

pub fn initial_field(spec: &SchemeSpec, grid: UniformGrid) -> Result<Field> {
    let init = spec.initial;
    Field::cell_average(grid, move |x| initial_value(&init, x))
}

/// Scheme at spacing `h` with the time step from the configured rule.
pub fn scheme(spec: &SchemeSpec, h: f64) -> Result<SchemeConfig> {
    let dim = spec.dimension;
    let time = TimeGrid::with_max_step(spec.t_end, spec.dt.dt(h))?;
    let (imp_op, imp_phi, exp_op, exp_phi) = match &spec.parts {
        Parts::Split { block, theta } => {
            let full = operator(block, dim, h)?;
            let (a, b) = theta_split(&full, *theta)?;
            let phi = block_nonlinearity(block, h)?;
            (a, phi.clone(), b, phi)
        }
        Parts::Separate { implicit, explicit } => {
            let part = |b: &Option<OperatorBlock>| -> Result<(DiscreteOperator, Nonlinearity)> {
                match b {
                    Some(b) => Ok((operator(b, dim, h)?, block_nonlinearity(b, h)?)),
                    None => Ok((zero_operator(dim, h)?, Nonlinearity::identity())),
                }
            };
            let (a, pa) = part(implicit)?;
            let (b, pb) = part(explicit)?;
            (a, pa, b, pb)
        }
    };
    let mut cfg = SchemeConfig::implicit(imp_op, imp_phi, time)?
        .with_explicit(exp_op, exp_phi)
        .with_tolerance(spec.tol)
        .with_cfl_policy(spec.cfl);
    if let SourceSpec::Gaussian { amplitude } = spec.source {
        cfg = cfg.with_source(Source::Function(Arc::new(move |x: &[f64], _t: f64| {
            amplitude * (-x.iter().map(|v| v * v).sum::<f64>()).exp()
        })));
    }
    if let Some((delta0, levels)) = spec.delta {
        cfg = cfg.with_delta_schedule(DeltaSchedule { delta0, levels });
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn theta_half_gives_two_half_weight_operators() {
        let text = r#"
command = "run"
[domain]
extent = 2.0
[initial]
kind = "gaussian"
[operator]
recipe = "midpoint"
alpha = 1.0
r_tail = 1.0
nonlinearity = "power"
m = 2.0
[discretization]
h = 0.25
dt = 0.01
t_end = 0.1
theta = 0.5
"#;
        let spec = parse_config_str(text).unwrap().scheme.unwrap();
        let cfg = scheme(&spec, spec.h).unwrap();
        let Parts::Split { block, .. } = &spec.parts else {
            panic!("split expected")
        };
        let full = operator(block, 1, 0.25).unwrap();
        for (b, w) in full.entries() {
            assert_eq!(cfg.implicit_op.weight(b), 0.5 * w);
            assert_eq!(cfg.explicit_op.weight(b), 0.5 * w);
        }
        assert!(!full.is_empty());
    }

    #[test]
    fn regularized_explicit_power_has_finite_slope() {
        let block = OperatorBlock {
            kind: OperatorKind::Recipe(Recipe::Midpoint),
            alpha: Some(1.0),
            gamma: 1.0,
            r: None,
            r_tail: 1.0,
            sigma: Vec::new(),
            eta: None,
            phi: PhiSpec::Power(0.5),
            regularize: Some(None),
        };
        let phi = block_nonlinearity(&block, 0.1).unwrap();
        assert!(phi.lipschitz_bound(1.0).is_finite());
        assert!((phi.eval(0.0)).abs() < 1e-12);
    }
}
