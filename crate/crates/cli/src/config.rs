//! Run descriptions in TOML.
//!
//! Parsing is strict: every unknown section or key, every missing
//! required key and every out-of-range value is collected, and all of them
//! are reported together.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use nlpme::harness::Recipe;
use nlpme::CflPolicy;
use toml::{Table, Value};

pub const COMMANDS: [&str; 6] = ["run", "lte", "converge", "properties", "stefan", "heat"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Lte,
    Converge,
    Properties,
    Stefan,
    Heat,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Lte => "lte",
            Command::Converge => "converge",
            Command::Properties => "properties",
            Command::Stefan => "stefan",
            Command::Heat => "heat",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "run" => Command::Run,
            "lte" => Command::Lte,
            "converge" => Command::Converge,
            "properties" => Command::Properties,
            "stefan" => Command::Stefan,
            "heat" => Command::Heat,
            _ => return None,
        })
    }

    fn needs_scheme(self) -> bool {
        matches!(self, Command::Run | Command::Converge | Command::Properties)
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Run => &[
                "domain",
                "initial",
                "source",
                "operator",
                "implicit",
                "explicit",
                "discretization",
                "output",
            ],
            Command::Converge => &[
                "domain",
                "initial",
                "source",
                "operator",
                "implicit",
                "explicit",
                "discretization",
                "output",
                "converge",
            ],
            Command::Properties => &[
                "domain",
                "initial",
                "source",
                "operator",
                "implicit",
                "explicit",
                "discretization",
                "output",
                "properties",
            ],
            Command::Lte => &["lte", "output"],
            Command::Stefan => &["stefan", "output"],
            Command::Heat => &["heat", "output"],
        }
    }
}

/// Every field problem found in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "invalid configuration ({} problem{}):",
            self.problems.len(),
            if self.problems.len() == 1 { "" } else { "s" }
        )?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    Identity,
    Power(f64),
    Stefan { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// One of the named Lévy or local recipes.
    Recipe(Recipe),
    VanishingViscosity,
    /// Second differences along the `sigma` columns only.
    Sigma,
}

/// An operator together with the nonlinearity it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBlock {
    pub kind: OperatorKind,
    pub alpha: Option<f64>,
    /// `r = max(h^gamma, h)` unless `r` is fixed.
    pub gamma: f64,
    pub r: Option<f64>,
    pub r_tail: f64,
    /// Extra local part `Σ σ_i σ_iᵀ : D²`, columns of `σ`.
    pub sigma: Vec<Vec<f64>>,
    /// Interpolation distance for `σ`; defaults to `h^{1/2}`.
    pub eta: Option<f64>,
    pub phi: PhiSpec,
    /// Replace `φ` by its regularization with this `δ` (`None`: `δ = h`).
    pub regularize: Option<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parts {
    /// One operator split as `θL` implicit and `(1−θ)L` explicit.
    Split { block: OperatorBlock, theta: f64 },
    Separate {
        implicit: Option<OperatorBlock>,
        explicit: Option<OperatorBlock>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    Fixed(f64),
    /// `Δt = factor · h^power`.
    Power {
        factor: f64,
        power: f64,
    },
}

impl DtRule {
    pub fn dt(&self, h: f64) -> f64 {
        match *self {
            DtRule::Fixed(dt) => dt,
            DtRule::Power { factor, power } => factor * h.powf(power),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    Zero,
    /// `amplitude · e^{-|x|²}`
    Gaussian,
    /// `amplitude · e^{-1/(R² − |x|²)}` inside the ball of radius `R`.
    Bump,
    /// `amplitude` on the cube `|x|_∞ <= R`.
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Zero,
    /// `amplitude · e^{-|x|²}` for all times.
    Gaussian {
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub dimension: usize,
    pub extent: f64,
    pub initial: InitialSpec,
    pub source: SourceSpec,
    pub parts: Parts,
    pub h: f64,
    pub dt: DtRule,
    pub t_end: f64,
    pub cfl: CflPolicy,
    pub tol: f64,
    /// First regularization level and number of levels for a
    /// non-Lipschitz implicit nonlinearity.
    pub delta: Option<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LteSpec {
    pub recipes: Vec<Recipe>,
    pub alphas: Vec<f64>,
    pub hs: Vec<f64>,
    pub gamma: f64,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertiesSpec {
    pub pairs: usize,
    pub support: f64,
    pub amplitude: f64,
    pub source_steps: usize,
    pub source_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StefanSpec {
    pub alpha: f64,
    pub hs: Vec<f64>,
    pub extent: f64,
    pub t_end: f64,
    pub dt: DtRule,
    pub r_tail: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatSpec {
    pub hs: Vec<f64>,
    pub t_end: f64,
    pub extent: f64,
    pub dt_factor: f64,
    pub dt_power: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub snapshot_every: usize,
    pub scheme: Option<SchemeSpec>,
    pub converge_hs: Vec<f64>,
    pub properties: Option<PropertiesSpec>,
    pub lte: Option<LteSpec>,
    pub stefan: Option<StefanSpec>,
    pub heat: Option<HeatSpec>,
}

impl RunConfig {
    /// Override every elliptic/solver tolerance.
    pub fn set_tolerance(&mut self, tol: f64) {
        if let Some(s) = &mut self.scheme {
            s.tol = tol;
        }
        if let Some(s) = &mut self.stefan {
            s.tol = tol;
        }
        if let Some(s) = &mut self.heat {
            s.tol = tol;
        }
    }
}

struct Reader<'a> {
    root: &'a Table,
    used: BTreeSet<String>,
    problems: Vec<String>,
}

fn path(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Reader<'a> {
    fn table(&self, section: &str) -> Option<&'a Table> {
        if section.is_empty() {
            return Some(self.root);
        }
        self.root.get(section).and_then(Value::as_table)
    }

    fn has(&self, section: &str) -> bool {
        self.table(section).is_some()
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<&'a Value> {
        let v = self.table(section)?.get(key)?;
        self.used.insert(path(section, key));
        Some(v)
    }

    fn problem(&mut self, msg: String) {
        self.problems.push(msg);
    }

    fn missing(&mut self, section: &str, key: &str, what: &str) {
        self.problem(format!("{}: missing required key ({what})", path(section, key)));
    }

    fn f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let v = self.raw(section, key)?;
        match as_f64(v) {
            Some(x) if x.is_finite() => Some(x),
            Some(x) => {
                self.problem(format!("{}: must be finite, got {x}", path(section, key)));
                None
            }
            None => {
                self.problem(format!(
                    "{}: expected a number, got {}",
                    path(section, key),
                    type_name(v)
                ));
                None
            }
        }
    }

    /// Optional number satisfying `ok`, else `default`.
    fn f64_or(&mut self, section: &str, key: &str, default: f64, ok: fn(f64) -> bool, rule: &str) -> f64 {
        match self.f64(section, key) {
            Some(x) if ok(x) => x,
            Some(x) => {
                self.problem(format!("{}: must be {rule}, got {x}", path(section, key)));
                default
            }
            None => default,
        }
    }

    fn positive(&mut self, section: &str, key: &str) -> Option<f64> {
        let x = self.f64(section, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.problem(format!("{}: must be positive, got {x}", path(section, key)));
            None
        }
    }

    fn required_positive(&mut self, section: &str, key: &str) -> Option<f64> {
        if self.table(section).and_then(|t| t.get(key)).is_none() {
            self.missing(section, key, "positive number");
            return None;
        }
        self.positive(section, key)
    }

    fn uint(&mut self, section: &str, key: &str) -> Option<u64> {
        let v = self.raw(section, key)?;
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.problem(format!(
                    "{}: expected a nonnegative integer, got {v}",
                    path(section, key)
                ));
                None
            }
        }
    }

    fn string(&mut self, section: &str, key: &str) -> Option<&'a str> {
        let v = self.raw(section, key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.problem(format!(
                    "{}: expected a string, got {}",
                    path(section, key),
                    type_name(v)
                ));
                None
            }
        }
    }

    fn boolean(&mut self, section: &str, key: &str) -> Option<bool> {
        let v = self.raw(section, key)?;
        match v.as_bool() {
            Some(b) => Some(b),
            None => {
                self.problem(format!(
                    "{}: expected true or false, got {}",
                    path(section, key),
                    type_name(v)
                ));
                None
            }
        }
    }

    fn f64_list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(section, key)?;
        let out: Option<Vec<f64>> = v.as_array().and_then(|a| a.iter().map(as_f64).collect());
        if out.is_none() {
            self.problem(format!("{}: expected an array of numbers", path(section, key)));
        }
        out
    }

    /// A strictly decreasing list of positive spacings with at least `min` entries.
    fn spacings(&mut self, section: &str, key: &str, min: usize) -> Option<Vec<f64>> {
        let hs = self.f64_list(section, key)?;
        let ok = hs.len() >= min && hs.iter().all(|&h| h > 0.0) && hs.windows(2).all(|w| w[1] < w[0]);
        if ok {
            Some(hs)
        } else {
            self.problem(format!(
                "{}: need at least {min} positive, strictly decreasing spacings, got {hs:?}",
                path(section, key)
            ));
            None
        }
    }

    fn matrix(&mut self, section: &str, key: &str) -> Option<Vec<Vec<f64>>> {
        let v = self.raw(section, key)?;
        let rows: Option<Vec<Vec<f64>>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|r| r.as_array().and_then(|r| r.iter().map(as_f64).collect()))
                .collect()
        });
        if rows.is_none() {
            self.problem(format!("{}: expected an array of number arrays", path(section, key)));
        }
        rows
    }

    fn finish(mut self, allowed: &[&str]) -> Vec<String> {
        let mut unknown = Vec::new();
        for (k, v) in self.root {
            match v {
                Value::Table(t) => {
                    if !allowed.contains(&k.as_str()) {
                        unknown.push(format!(
                            "[{k}]: section not used by this command (allowed: {})",
                            allowed.join(", ")
                        ));
                        continue;
                    }
                    for sub in t.keys() {
                        let p = path(k, sub);
                        if !self.used.contains(&p) {
                            unknown.push(format!("{p}: unknown key"));
                        }
                    }
                }
                _ => {
                    if !self.used.contains(k) {
                        unknown.push(format!("{k}: unknown key"));
                    }
                }
            }
        }
        self.problems.extend(unknown);
        self.problems
    }
}

fn gt0(x: f64) -> bool {
    x > 0.0
}

fn ge0(x: f64) -> bool {
    x >= 0.0
}

fn unit_gamma(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

fn alpha_ok(x: f64) -> bool {
    x > 0.0 && x < 2.0
}

fn phi_is_lipschitz(phi: &PhiSpec) -> bool {
    !matches!(phi, PhiSpec::Power(m) if *m < 1.0)
}

fn read_phi(r: &mut Reader, sec: &str) -> PhiSpec {
    let name = r.string(sec, "nonlinearity").unwrap_or("identity");
    match name {
        "identity" => PhiSpec::Identity,
        "power" => {
            let m = r.f64_or(sec, "m", 2.0, gt0, "positive");
            PhiSpec::Power(m)
        }
        "stefan" => {
            let a = r.f64_or(sec, "a", 1.0, ge0, "nonnegative");
            let b = r.f64(sec, "b").unwrap_or(0.5);
            PhiSpec::Stefan { a, b }
        }
        other => {
            r.problem(format!(
                "{sec}.nonlinearity: unknown '{other}' (identity, power, stefan)"
            ));
            PhiSpec::Identity
        }
    }
}

fn read_block(r: &mut Reader, sec: &str, dimension: usize) -> OperatorBlock {
    let recipe = r.string(sec, "recipe");
    if recipe.is_none() && !r.problems.iter().any(|p| p.starts_with(&format!("{sec}.recipe"))) {
        r.missing(sec, "recipe", "zero, local_laplacian, sigma, midpoint, multilinear, lagrange, vanishing_viscosity, viscous_midpoint, fractional_laplacian");
    }
    let recipe = recipe.unwrap_or("zero");
    let order = r.uint(sec, "order");
    let kind = match recipe {
        "sigma" => OperatorKind::Sigma,
        "vanishing_viscosity" => OperatorKind::VanishingViscosity,
        "lagrange" => {
            let k = order.unwrap_or(2) as usize;
            if !(1..=7).contains(&k) {
                r.problem(format!("{sec}.order: Lagrange order must be 1..=7, got {k}"));
            }
            OperatorKind::Recipe(Recipe::Lagrange(k.clamp(1, 7)))
        }
        other => match Recipe::parse(other) {
            Ok(Recipe::Lagrange(_)) | Err(_) => {
                r.problem(format!("{sec}.recipe: unknown recipe '{other}'"));
                OperatorKind::Recipe(Recipe::Zero)
            }
            Ok(rec) => OperatorKind::Recipe(rec),
        },
    };
    if order.is_some() && !matches!(kind, OperatorKind::Recipe(Recipe::Lagrange(_))) {
        r.problem(format!("{sec}.order: only used by the lagrange recipe"));
    }
    let levy = matches!(
        kind,
        OperatorKind::VanishingViscosity
            | OperatorKind::Recipe(
                Recipe::Midpoint
                    | Recipe::Multilinear
                    | Recipe::Lagrange(_)
                    | Recipe::ViscousMidpoint
                    | Recipe::FractionalLaplacian
            )
    );
    let alpha = r.f64(sec, "alpha");
    match alpha {
        Some(a) if !alpha_ok(a) => r.problem(format!("{sec}.alpha: must lie in (0, 2), got {a}")),
        Some(_) if !levy => r.problem(format!("{sec}.alpha: recipe '{recipe}' has no Lévy measure")),
        None if levy => r.missing(sec, "alpha", "α in (0, 2)"),
        _ => {}
    }
    let gamma = r.f64_or(sec, "gamma", 1.0, unit_gamma, "in (0, 1]");
    let fixed_r = r.positive(sec, "r");
    let r_tail = r.f64_or(sec, "r_tail", 4.0, gt0, "positive");
    let sigma = r.matrix(sec, "sigma").unwrap_or_default();
    if sigma.iter().any(|c| c.len() != dimension) {
        r.problem(format!("{sec}.sigma: every column needs {dimension} components"));
    }
    if matches!(kind, OperatorKind::Sigma) && sigma.is_empty() {
        r.missing(sec, "sigma", "columns of σ for the sigma recipe");
    }
    let eta = r.positive(sec, "eta");
    let phi = read_phi(r, sec);
    let regularize = match (r.boolean(sec, "regularize"), r.positive(sec, "delta")) {
        (Some(true), d) => Some(d),
        (Some(false) | None, Some(_)) => {
            r.problem(format!("{sec}.delta: only used with regularize = true"));
            None
        }
        _ => None,
    };
    OperatorBlock {
        kind,
        alpha,
        gamma,
        r: fixed_r,
        r_tail,
        sigma,
        eta,
        phi,
        regularize,
    }
}

fn read_dt(r: &mut Reader, sec: &str) -> DtRule {
    let fixed = r.positive(sec, "dt");
    let factor = r.positive(sec, "dt_factor");
    let power = r.positive(sec, "dt_power");
    match (fixed, factor, power) {
        (Some(dt), None, None) => DtRule::Fixed(dt),
        (Some(dt), _, _) => {
            r.problem(format!("{sec}.dt: give either dt or dt_factor/dt_power, not both"));
            DtRule::Fixed(dt)
        }
        (None, f, p) => DtRule::Power {
            factor: f.unwrap_or(1.0),
            power: p.unwrap_or(1.0),
        },
    }
}

fn read_scheme(r: &mut Reader) -> Option<SchemeSpec> {
    let dimension = match r.uint("domain", "dimension") {
        Some(0) => {
            r.problem("domain.dimension: must be at least 1".into());
            1
        }
        Some(d) => d as usize,
        None => 1,
    };
    let extent = r.required_positive("domain", "extent");

    let initial = {
        let kind = match r.string("initial", "kind") {
            Some("zero") => InitialKind::Zero,
            Some("gaussian") => InitialKind::Gaussian,
            Some("bump") => InitialKind::Bump,
            Some("indicator") => InitialKind::Indicator,
            Some(other) => {
                r.problem(format!(
                    "initial.kind: unknown '{other}' (zero, gaussian, bump, indicator)"
                ));
                InitialKind::Zero
            }
            None => {
                r.missing("initial", "kind", "zero, gaussian, bump or indicator");
                InitialKind::Zero
            }
        };
        InitialSpec {
            kind,
            amplitude: r.f64("initial", "amplitude").unwrap_or(1.0),
            radius: r.f64_or("initial", "radius", 2.0, gt0, "positive"),
        }
    };

    let source = match r.string("source", "kind") {
        None | Some("zero") => SourceSpec::Zero,
        Some("gaussian") => SourceSpec::Gaussian {
            amplitude: r.f64("source", "amplitude").unwrap_or(1.0),
        },
        Some(other) => {
            r.problem(format!("source.kind: unknown '{other}' (zero, gaussian)"));
            SourceSpec::Zero
        }
    };

    let theta = r.f64("discretization", "theta");
    let parts = if r.has("operator") {
        if r.has("implicit") || r.has("explicit") {
            r.problem("[operator]: cannot be combined with [implicit] or [explicit]".into());
        }
        let theta = match theta {
            Some(t) if (0.0..=1.0).contains(&t) => t,
            Some(t) => {
                r.problem(format!("discretization.theta: must lie in [0, 1], got {t}"));
                1.0
            }
            None => 1.0,
        };
        Parts::Split {
            block: read_block(r, "operator", dimension),
            theta,
        }
    } else {
        if theta.is_some() {
            r.problem("discretization.theta: only used with a single [operator] section".into());
        }
        let implicit = r.has("implicit").then(|| read_block(r, "implicit", dimension));
        let explicit = r.has("explicit").then(|| read_block(r, "explicit", dimension));
        if implicit.is_none() && explicit.is_none() {
            r.problem("scheme: needs an [operator] section or at least one of [implicit], [explicit]".into());
        }
        Parts::Separate { implicit, explicit }
    };

    // an explicit part with unbounded slope admits no time step
    let explicit_phi = match &parts {
        Parts::Split { block, theta } if *theta < 1.0 => Some(("operator", block)),
        Parts::Separate { explicit: Some(b), .. } => Some(("explicit", b)),
        _ => None,
    };
    if let Some((sec, b)) = explicit_phi {
        let nonzero = !matches!(b.kind, OperatorKind::Recipe(Recipe::Zero)) || !b.sigma.is_empty();
        if nonzero && !phi_is_lipschitz(&b.phi) && b.regularize.is_none() {
            r.problem(format!(
                "{sec}.nonlinearity: CFL condition cannot hold, the explicit nonlinearity {:?} has unbounded slope at 0; \
                 set regularize = true",
                b.phi
            ));
        }
    }

    let h = r.required_positive("discretization", "h");
    let dt = read_dt(r, "discretization");
    let t_end = r.required_positive("discretization", "t_end");
    let cfl = match r.string("discretization", "cfl") {
        None | Some("enforce") => CflPolicy::Enforce,
        Some("warn") => CflPolicy::Warn,
        Some("off") => CflPolicy::Off,
        Some(other) => {
            r.problem(format!(
                "discretization.cfl: unknown policy '{other}' (enforce, warn, off)"
            ));
            CflPolicy::Enforce
        }
    };
    let tol = r.f64_or("discretization", "tol", 1e-10, gt0, "positive");
    let delta0 = r.positive("discretization", "delta0");
    let levels = r.uint("discretization", "delta_levels");
    let delta = match (delta0, levels) {
        (None, None) => None,
        (d, l) => Some((
            d.unwrap_or_else(|| h.unwrap_or(1.0).max(1e-3)),
            l.unwrap_or(20).max(1) as usize,
        )),
    };
    if let (Some(h), Some(extent)) = (h, extent) {
        if h > extent {
            r.problem(format!(
                "discretization.h: spacing {h} exceeds the box half-width {extent}"
            ));
        }
    }
    Some(SchemeSpec {
        dimension,
        extent: extent?,
        initial,
        source,
        parts,
        h: h?,
        dt,
        t_end: t_end?,
        cfl,
        tol,
        delta,
    })
}

fn read_lte(r: &mut Reader) -> Option<LteSpec> {
    let names: Vec<String> = match r.raw("lte", "recipes") {
        Some(Value::Array(a)) if a.iter().all(Value::is_str) => {
            a.iter().filter_map(|v| v.as_str().map(String::from)).collect()
        }
        Some(_) => {
            r.problem("lte.recipes: expected an array of recipe names".into());
            Vec::new()
        }
        None => {
            r.missing("lte", "recipes", "e.g. [\"midpoint\", \"fractional_laplacian\"]");
            Vec::new()
        }
    };
    let mut recipes = Vec::new();
    for n in &names {
        match Recipe::parse(n) {
            Ok(Recipe::Zero | Recipe::LocalLaplacian) => {
                r.problem(format!("lte.recipes: '{n}' does not discretize a Lévy measure"))
            }
            Ok(Recipe::Lagrange(k)) if !(1..=7).contains(&k) => {
                r.problem(format!("lte.recipes: Lagrange order in '{n}' must be 1..=7"))
            }
            Ok(rec) => recipes.push(rec),
            Err(_) => r.problem(format!("lte.recipes: unknown recipe '{n}'")),
        }
    }
    let alphas = r.f64_list("lte", "alphas").unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
    if alphas.is_empty() || alphas.iter().any(|&a| !alpha_ok(a)) {
        r.problem(format!("lte.alphas: need values in (0, 2), got {alphas:?}"));
    }
    let hs = match r.table("lte").and_then(|t| t.get("hs")) {
        Some(_) => r.spacings("lte", "hs", 4),
        None => Some((3..=8).map(|k| 2f64.powi(-k)).collect()),
    };
    let gamma = r.f64_or("lte", "gamma", 1.0, unit_gamma, "in (0, 1]");
    let dimension = r.uint("lte", "dimension").unwrap_or(1) as usize;
    if !(1..=3).contains(&dimension) {
        r.problem(format!("lte.dimension: must be 1, 2 or 3, got {dimension}"));
    }
    Some(LteSpec {
        recipes,
        alphas,
        hs: hs?,
        gamma,
        dimension,
    })
}

fn read_stefan(r: &mut Reader) -> Option<StefanSpec> {
    let alpha = r.f64_or("stefan", "alpha", 1.0, alpha_ok, "in (0, 2)");
    let hs = match r.table("stefan").and_then(|t| t.get("hs")) {
        Some(_) => r.spacings("stefan", "hs", 2)?,
        None => vec![0.1, 0.05, 0.025],
    };
    Some(StefanSpec {
        alpha,
        hs,
        extent: r.f64_or("stefan", "extent", 8.0, gt0, "positive"),
        t_end: r.f64_or("stefan", "t_end", 1.0, gt0, "positive"),
        dt: read_dt(r, "stefan"),
        r_tail: r.f64_or("stefan", "r_tail", 4.0, gt0, "positive"),
        tol: r.f64_or("stefan", "tol", 1e-10, gt0, "positive"),
    })
}

fn read_heat(r: &mut Reader) -> Option<HeatSpec> {
    let hs = match r.table("heat").and_then(|t| t.get("hs")) {
        Some(_) => r.spacings("heat", "hs", 2)?,
        None => vec![0.125, 0.0625, 0.03125, 0.015625],
    };
    Some(HeatSpec {
        hs,
        t_end: r.f64_or("heat", "t_end", 0.25, gt0, "positive"),
        extent: r.f64_or("heat", "extent", 8.0, gt0, "positive"),
        dt_factor: r.f64_or("heat", "dt_factor", 1.0, gt0, "positive"),
        dt_power: r.f64_or("heat", "dt_power", 2.0, gt0, "positive"),
        tol: r.f64_or("heat", "tol", 1e-12, gt0, "positive"),
    })
}

/// Parse and validate TOML text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        problems: vec![format!("syntax error: {}", e.to_string().trim_end())],
    })?;
    let mut r = Reader {
        root: &root,
        used: BTreeSet::new(),
        problems: Vec::new(),
    };
    let command = match r.string("", "command") {
        Some(c) => match Command::parse(c) {
            Some(c) => c,
            None => {
                return Err(ConfigError {
                    problems: vec![format!("command: unknown '{c}' (one of {})", COMMANDS.join(", "))],
                })
            }
        },
        None => {
            let mut problems = r.problems;
            problems.push(format!(
                "command: missing required key (one of {})",
                COMMANDS.join(", ")
            ));
            if root.is_empty() {
                problems.push(
                    "run, converge and properties also require domain.extent, initial.kind, discretization.h, \
                     discretization.t_end and an [operator], [implicit] or [explicit] section with a recipe"
                        .into(),
                );
            }
            return Err(ConfigError { problems });
        }
    };
    let seed = r.uint("", "seed");
    let output_dir = r.string("output", "directory").map(PathBuf::from);
    let snapshot_every = r.uint("output", "snapshot_every").unwrap_or(0) as usize;

    let scheme = if command.needs_scheme() {
        read_scheme(&mut r)
    } else {
        None
    };
    let converge_hs = if command == Command::Converge {
        if r.table("converge").and_then(|t| t.get("hs")).is_none() {
            r.missing("converge", "hs", "at least two decreasing spacings");
        }
        r.spacings("converge", "hs", 2).unwrap_or_default()
    } else {
        Vec::new()
    };
    let properties = (command == Command::Properties).then(|| PropertiesSpec {
        pairs: r.uint("properties", "pairs").unwrap_or(20).max(1) as usize,
        support: r.f64_or("properties", "support", 2.0, gt0, "positive"),
        amplitude: r.f64_or("properties", "amplitude", 1.0, gt0, "positive"),
        source_steps: r.uint("properties", "source_steps").unwrap_or(0) as usize,
        source_amplitude: r.f64_or("properties", "source_amplitude", 0.5, ge0, "nonnegative"),
    });
    let lte = if command == Command::Lte {
        read_lte(&mut r)
    } else {
        None
    };
    let stefan = if command == Command::Stefan {
        read_stefan(&mut r)
    } else {
        None
    };
    let heat = if command == Command::Heat {
        read_heat(&mut r)
    } else {
        None
    };

    let mut allowed: Vec<&str> = command.sections().to_vec();
    allowed.push("");
    let problems = r.finish(&allowed);
    if !problems.is_empty() {
        return Err(ConfigError { problems });
    }
    Ok(RunConfig {
        command,
        seed,
        output_dir,
        snapshot_every,
        scheme,
        converge_hs,
        properties,
        lte,
        stefan,
        heat,
    })
}

/// Read and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        problems: vec![format!("{}: {e}", path.display())],
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEFAN_RUN: &str = r#"
command = "run"
[domain]
extent = 8.0
[initial]
kind = "bump"
[implicit]
recipe = "midpoint"
alpha = 1.0
nonlinearity = "stefan"
a = 1.0
b = 0.5
[discretization]
h = 0.1
t_end = 1.0
"#;

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config_str("").unwrap_err();
        assert!(err.problems[0].contains("command"));
        assert!(err.problems[1].contains("domain.extent") && err.problems[1].contains("discretization.h"));
    }

    #[test]
    fn valid_run_config_parses() {
        let cfg = parse_config_str(STEFAN_RUN).unwrap();
        let s = cfg.scheme.unwrap();
        assert_eq!(
            s.dt,
            DtRule::Power {
                factor: 1.0,
                power: 1.0
            }
        );
        match s.parts {
            Parts::Separate {
                implicit: Some(b),
                explicit: None,
            } => {
                assert_eq!(b.phi, PhiSpec::Stefan { a: 1.0, b: 0.5 });
                assert_eq!(b.kind, OperatorKind::Recipe(Recipe::Midpoint));
            }
            other => panic!("unexpected parts {other:?}"),
        }
    }

    #[test]
    fn every_invalid_field_is_reported() {
        let text = STEFAN_RUN
            .replace("alpha = 1.0", "alpha = 2.5\nbogus = 1")
            .replace("h = 0.1", "h = -0.1")
            + "\n[lte]\n";
        let err = parse_config_str(&text).unwrap_err();
        let all = err.problems.join("\n");
        assert!(all.contains("implicit.alpha"), "{all}");
        assert!(all.contains("implicit.bogus: unknown key"), "{all}");
        assert!(all.contains("discretization.h"), "{all}");
        assert!(all.contains("[lte]"), "{all}");
        assert_eq!(err.problems.len(), 4, "{all}");
    }

    #[test]
    fn explicit_fast_diffusion_is_rejected_unless_regularized() {
        let text = STEFAN_RUN.replace("[implicit]", "[explicit]").replace(
            "nonlinearity = \"stefan\"\na = 1.0\nb = 0.5",
            "nonlinearity = \"power\"\nm = 0.5",
        );
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.problems.iter().any(|p| p.contains("CFL")), "{err}");
        let fixed = text.replace("m = 0.5", "m = 0.5\nregularize = true");
        assert!(parse_config_str(&fixed).is_ok());
    }

    #[test]
    fn theta_needs_a_single_operator() {
        let text = STEFAN_RUN.replace("t_end = 1.0", "t_end = 1.0\ntheta = 0.5");
        assert!(parse_config_str(&text)
            .unwrap_err()
            .problems
            .iter()
            .any(|p| p.contains("theta")));
        let split = text.replace("[implicit]", "[operator]");
        match parse_config_str(&split).unwrap().scheme.unwrap().parts {
            Parts::Split { theta, .. } => assert_eq!(theta, 0.5),
            other => panic!("unexpected parts {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_config_str("command = \"run\"\n[domain\n").unwrap_err();
        assert!(err.problems[0].contains("line 2"), "{err}");
    }
}
