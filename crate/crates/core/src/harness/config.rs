//! Line-oriented experiment configuration: `key = value`, `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::mgrit::{CoarseOperator, CycleType, MgritConfig, Relaxation};
use crate::model::ModelConfig;
use crate::optimize::OptimizerConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("override `{arg}`: {message}")]
    Override { arg: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Piggyback state/adjoint iteration at a fixed design.
    Piggyback,
    Oneshot,
    ReducedSerial,
    ReducedParallel,
    /// All three optimizers on the same configuration.
    Compare,
    /// `scaling_kind` repeated over the worker-count list.
    Scaling,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Piggyback => "piggyback",
            ExperimentKind::Oneshot => "oneshot",
            ExperimentKind::ReducedSerial => "reduced_serial",
            ExperimentKind::ReducedParallel => "reduced_parallel",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Scaling => "scaling",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "piggyback" => ExperimentKind::Piggyback,
            "oneshot" => ExperimentKind::Oneshot,
            "reduced_serial" => ExperimentKind::ReducedSerial,
            "reduced_parallel" => ExperimentKind::ReducedParallel,
            "compare" => ExperimentKind::Compare,
            "scaling" => ExperimentKind::Scaling,
            _ => return Err(format!("unknown experiment kind `{s}`")),
        })
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `a_target` is zero here unless given explicitly; see
    /// [`ExperimentConfig::a_target`].
    pub model: ModelConfig<f64>,
    /// Design at which the tracking target is computed.
    pub rho_target: f64,
    /// Explicit tracking target; otherwise it is computed from `rho_target`.
    pub a_target: Option<f64>,
    pub mgrit: MgritConfig,
    pub optimizer: OptimizerConfig,
    pub kind: ExperimentKind,
    /// Experiment repeated by `kind = scaling`.
    pub scaling_kind: ExperimentKind,
    pub workers: Vec<usize>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Fixed design of the piggyback experiment and starting design of the
    /// optimizers.
    pub rho: f64,
    /// Amplitude of the seeded uniform perturbation added to the initial
    /// space-time guess.
    pub perturbation: f64,
}

/// Keys in the order they are echoed.
pub const KEYS: &[&str] = &[
    "kind",
    "scaling_kind",
    "workers",
    "out",
    "seed",
    "rho",
    "perturbation",
    "a",
    "mu",
    "dx",
    "L",
    "dt",
    "N",
    "T",
    "picard_tol",
    "picard_max",
    "gamma",
    "rho_target",
    "a_target",
    "vdp_nonlinear",
    "m",
    "max_levels",
    "cycle",
    "relaxation",
    "coarse_operator",
    "halting_tol",
    "max_iters",
    "theta",
    "grad_tol",
    "max_outer",
    "inner_tol",
    "inner_max_iters",
    "alpha",
    "divergence_factor",
];

/// Fine steps used by `kind = compare` when neither `N` nor `T` is given.
pub const COMPARE_DEFAULT_STEPS: usize = 6000;

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    origin: Origin,
}

#[derive(Debug, Clone)]
enum Origin {
    Line(usize),
    Override(String),
}

impl Origin {
    fn error(&self, message: String) -> ConfigError {
        match self {
            Origin::Line(line) => ConfigError::Parse { line: *line, message },
            Origin::Override(arg) => ConfigError::Override { arg: arg.clone(), message },
        }
    }
}

/// Parses a configuration file; missing keys take the reference values.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// [`parse_config`] followed by `key=value` overrides, which replace any value
/// given in `text`.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = split_pair(content).map_err(|m| ConfigError::Parse { line, message: m })?;
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Parse { line, message: format!("unknown key `{key}`") });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            let first = match prev.origin {
                Origin::Line(l) => l,
                Origin::Override(_) => 0,
            };
            return Err(ConfigError::Parse { line, message: format!("duplicate key `{key}` (first set on line {first})") });
        }
        entries.push(Entry { key, value, origin: Origin::Line(line) });
    }
    for arg in overrides {
        let origin = Origin::Override(arg.clone());
        let (key, value) = split_pair(arg).map_err(|m| origin.error(m))?;
        if !KEYS.contains(&key.as_str()) {
            return Err(origin.error(format!("unknown key `{key}`")));
        }
        entries.retain(|e| e.key != key);
        entries.push(Entry { key, value, origin });
    }
    build(&entries)
}

fn split_pair(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected `key = value`, got `{s}`"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err("missing key before `=`".into());
    }
    if v.is_empty() {
        return Err(format!("missing value for `{k}`"));
    }
    Ok((k.to_string(), v.to_string()))
}

fn parse_value<V: FromStr>(e: &Entry) -> Result<V, ConfigError>
where
    V::Err: std::fmt::Display,
{
    e.value.parse::<V>().map_err(|err| e.origin.error(format!("cannot parse `{}` for `{}`: {err}", e.value, e.key)))
}

fn parse_list(e: &Entry) -> Result<Vec<usize>, ConfigError> {
    e.value
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|err| e.origin.error(format!("bad worker count `{s}`: {err}"))))
        .collect()
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(e.origin.error(format!("expected a boolean for `{}`, got `{}`", e.key, e.value))),
    }
}

fn build(entries: &[Entry]) -> Result<ExperimentConfig, ConfigError> {
    let mut model = ModelConfig::<f64>::reference();
    let mut mgrit = MgritConfig::default();
    let mut opt = OptimizerConfig::default();
    let mut cfg_kind = ExperimentKind::Piggyback;
    let mut scaling_kind = ExperimentKind::Piggyback;
    let mut workers = vec![1];
    let mut out_dir = PathBuf::from("results");
    let mut seed = 0u64;
    let mut rho = 2.0;
    let mut perturbation = 0.0;
    let mut rho_target = 3.0;
    let mut a_target = None;
    let (mut n, mut dt, mut t) = (None, None, None);
    let (mut l, mut dx) = (None, None);

    for e in entries {
        match e.key.as_str() {
            "kind" => cfg_kind = e.value.parse().map_err(|m| e.origin.error(m))?,
            "scaling_kind" => scaling_kind = e.value.parse().map_err(|m| e.origin.error(m))?,
            "workers" => workers = parse_list(e)?,
            "out" => out_dir = PathBuf::from(&e.value),
            "seed" => seed = parse_value(e)?,
            "rho" => rho = parse_value(e)?,
            "perturbation" => perturbation = parse_value(e)?,
            "a" => model.a = parse_value(e)?,
            "mu" => model.mu = parse_value(e)?,
            "dx" => dx = Some(parse_value::<f64>(e)?),
            "L" => l = Some(parse_value::<usize>(e)?),
            "dt" => dt = Some(parse_value::<f64>(e)?),
            "N" => n = Some(parse_value::<usize>(e)?),
            "T" => t = Some(parse_value::<f64>(e)?),
            "picard_tol" => model.picard_tol = parse_value(e)?,
            "picard_max" => model.picard_max = parse_value(e)?,
            "gamma" => model.gamma = parse_value(e)?,
            "rho_target" => rho_target = parse_value(e)?,
            "a_target" => a_target = Some(parse_value::<f64>(e)?),
            "vdp_nonlinear" => model.vdp_nonlinear = parse_bool(e)?,
            "m" => mgrit.m = parse_value(e)?,
            "max_levels" => mgrit.max_levels = parse_value(e)?,
            "cycle" => {
                mgrit.cycle = match e.value.as_str() {
                    "V" | "v" => CycleType::V,
                    "F" | "f" => CycleType::F,
                    _ => return Err(e.origin.error(format!("cycle must be V or F, got `{}`", e.value))),
                }
            }
            "relaxation" => {
                mgrit.relaxation = match e.value.to_ascii_uppercase().as_str() {
                    "F" => Relaxation::F,
                    "FC" => Relaxation::FC,
                    "FCF" => Relaxation::FCF,
                    _ => return Err(e.origin.error(format!("relaxation must be F, FC or FCF, got `{}`", e.value))),
                }
            }
            "coarse_operator" => {
                mgrit.coarse_operator = match e.value.as_str() {
                    "rediscretized" => CoarseOperator::Rediscretized,
                    "composed" => CoarseOperator::Composed,
                    _ => {
                        return Err(e.origin.error(format!(
                            "coarse_operator must be rediscretized or composed, got `{}`",
                            e.value
                        )))
                    }
                }
            }
            "halting_tol" => mgrit.halting_tol = parse_value(e)?,
            "max_iters" => mgrit.max_iters = parse_value(e)?,
            "theta" => opt.theta = parse_value(e)?,
            "grad_tol" => opt.grad_tol = parse_value(e)?,
            "max_outer" => opt.max_outer = parse_value(e)?,
            "inner_tol" => opt.inner_tol = parse_value(e)?,
            "inner_max_iters" => opt.inner_max_iters = parse_value(e)?,
            "alpha" => opt.alpha = parse_value(e)?,
            "divergence_factor" => opt.divergence_factor = parse_value(e)?,
            other => unreachable!("key `{other}` is in KEYS but not handled"),
        }
    }

    if cfg_kind == ExperimentKind::Compare && n.is_none() && t.is_none() {
        n = Some(COMPARE_DEFAULT_STEPS);
    }
    resolve_time(&mut model, n, dt, t)?;
    resolve_space(&mut model, l, dx)?;
    if let Some(a) = a_target {
        model.a_target = a;
    }
    mgrit.workers = workers.first().copied().unwrap_or(1);

    let cfg = ExperimentConfig {
        model,
        rho_target,
        a_target,
        mgrit,
        optimizer: opt,
        kind: cfg_kind,
        scaling_kind,
        workers,
        out_dir,
        seed,
        rho,
        perturbation,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn is_integral(x: f64) -> Option<usize> {
    let r = x.round();
    (r >= 1.0 && (x - r).abs() <= 1e-9 * r).then_some(r as usize)
}

/// Fills in whichever of `N`, `dt`, `T` is missing so that `N dt = T`.
fn resolve_time(model: &mut ModelConfig<f64>, n: Option<usize>, dt: Option<f64>, t: Option<f64>) -> Result<(), ConfigError> {
    let (n, dt, t) = match (n, dt, t) {
        (Some(n), Some(dt), Some(t)) => (n, dt, t),
        (Some(n), Some(dt), None) => (n, dt, n as f64 * dt),
        (Some(n), None, Some(t)) => (n, t / n as f64, t),
        (None, Some(dt), Some(t)) => {
            let n = is_integral(t / dt).ok_or_else(|| ConfigError::invalid("N", format!("T / dt = {} is not an integer", t / dt)))?;
            (n, dt, t)
        }
        (Some(n), None, None) => (n, model.dt, n as f64 * model.dt),
        (None, Some(dt), None) => {
            let n = is_integral(model.t_final / dt)
                .ok_or_else(|| ConfigError::invalid("dt", format!("T / dt = {} is not an integer", model.t_final / dt)))?;
            (n, dt, model.t_final)
        }
        (None, None, Some(t)) => {
            let n = is_integral(t / model.dt)
                .ok_or_else(|| ConfigError::invalid("T", format!("T / dt = {} is not an integer", t / model.dt)))?;
            (n, model.dt, t)
        }
        (None, None, None) => (model.n_steps, model.dt, model.t_final),
    };
    if n == 0 {
        return Err(ConfigError::invalid("N", "must be at least 1"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ConfigError::invalid("dt", format!("must be positive, got {dt}")));
    }
    if ((n as f64 * dt) - t).abs() > 1e-12 * t.abs() {
        return Err(ConfigError::invalid("T", format!("N * dt = {} does not match T = {t}", n as f64 * dt)));
    }
    model.n_steps = n;
    model.dt = dt;
    model.t_final = t;
    Ok(())
}

/// Fills in `L` or `dx` so that `L dx = 1`.
fn resolve_space(model: &mut ModelConfig<f64>, l: Option<usize>, dx: Option<f64>) -> Result<(), ConfigError> {
    let (l, dx) = match (l, dx) {
        (Some(l), Some(dx)) => (l, dx),
        (Some(l), None) => (l, 1.0 / l as f64),
        (None, Some(dx)) => {
            let l = is_integral(1.0 / dx).ok_or_else(|| ConfigError::invalid("dx", format!("1 / dx = {} is not an integer", 1.0 / dx)))?;
            (l, dx)
        }
        (None, None) => (model.n_space, model.dx),
    };
    if l < 3 {
        return Err(ConfigError::invalid("L", format!("need at least 3 spatial points, got {l}")));
    }
    if ((l as f64 * dx) - 1.0).abs() > 1e-12 {
        return Err(ConfigError::invalid("dx", format!("L * dx = {} must equal 1", l as f64 * dx)));
    }
    model.n_space = l;
    model.dx = dx;
    Ok(())
}

fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let m = &cfg.model;
    let check = |ok: bool, field: &str, msg: String| if ok { Ok(()) } else { Err(ConfigError::invalid(field, msg)) };
    check(m.a >= 0.0, "a", format!("advection speed must be non-negative, got {}", m.a))?;
    check(m.mu >= 0.0, "mu", format!("must be non-negative, got {}", m.mu))?;
    check(m.picard_tol > 0.0, "picard_tol", format!("must be positive, got {}", m.picard_tol))?;
    check(m.picard_max >= 1, "picard_max", "must be at least 1".into())?;
    check(m.gamma >= 0.0, "gamma", format!("must be non-negative, got {}", m.gamma))?;
    check(cfg.rho_target.is_finite(), "rho_target", "must be finite".into())?;
    check(m.a_target.is_finite(), "a_target", "must be finite".into())?;
    check(cfg.rho.is_finite(), "rho", "must be finite".into())?;
    check(cfg.perturbation >= 0.0, "perturbation", format!("must be non-negative, got {}", cfg.perturbation))?;
    let g = &cfg.mgrit;
    check(g.m >= 2, "m", format!("coarsening factor must be at least 2, got {}", g.m))?;
    check(g.max_levels >= 1, "max_levels", "must be at least 1".into())?;
    check(g.halting_tol > 0.0, "halting_tol", format!("must be positive, got {}", g.halting_tol))?;
    check(g.max_iters >= 1, "max_iters", "must be at least 1".into())?;
    check(!cfg.workers.is_empty(), "workers", "list is empty".into())?;
    check(cfg.workers.iter().all(|&w| w >= 1), "workers", "worker counts must be at least 1".into())?;
    let o = &cfg.optimizer;
    check(o.theta > 0.0, "theta", format!("must be positive, got {}", o.theta))?;
    check(o.grad_tol > 0.0, "grad_tol", format!("must be positive, got {}", o.grad_tol))?;
    check(o.max_outer >= 1, "max_outer", "must be at least 1".into())?;
    check(o.inner_tol > 0.0, "inner_tol", format!("must be positive, got {}", o.inner_tol))?;
    check(o.inner_max_iters >= 1, "inner_max_iters", "must be at least 1".into())?;
    check(o.alpha >= 0.0, "alpha", format!("must be non-negative, got {}", o.alpha))?;
    check(o.divergence_factor > 1.0, "divergence_factor", format!("must exceed 1, got {}", o.divergence_factor))?;
    check(cfg.scaling_kind != ExperimentKind::Scaling && cfg.scaling_kind != ExperimentKind::Compare, "scaling_kind", "must name a single experiment".into())?;
    m.validate().map_err(|e| ConfigError::invalid("model", e.to_string()))?;
    g.validate().map_err(|e| ConfigError::invalid("mgrit", e.to_string()))?;
    o.validate().map_err(|e| ConfigError::invalid("optimizer", e.to_string()))?;
    Ok(())
}

impl ExperimentConfig {
    /// The reference configuration (an empty file).
    pub fn reference() -> Self {
        parse_config("").expect("reference configuration is valid")
    }

    /// Model configuration with the tracking target filled in, computing it
    /// by a serial sweep at `rho_target` unless it was given explicitly.
    pub fn resolved_model(&self) -> crate::Result<ModelConfig<f64>> {
        match self.a_target {
            Some(a) => Ok(ModelConfig { a_target: a, ..self.model.clone() }),
            None => self.model.clone().calibrate_target(self.rho_target),
        }
    }

    /// Configuration text that parses back to `self`.
    pub fn to_config_text(&self) -> String {
        let m = &self.model;
        let g = &self.mgrit;
        let o = &self.optimizer;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("kind", self.kind.name().into());
        put("scaling_kind", self.scaling_kind.name().into());
        put("workers", self.workers.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
        put("out", self.out_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("rho", self.rho.to_string());
        put("perturbation", self.perturbation.to_string());
        put("a", m.a.to_string());
        put("mu", m.mu.to_string());
        put("dx", m.dx.to_string());
        put("L", m.n_space.to_string());
        put("dt", m.dt.to_string());
        put("N", m.n_steps.to_string());
        put("T", m.t_final.to_string());
        put("picard_tol", m.picard_tol.to_string());
        put("picard_max", m.picard_max.to_string());
        put("gamma", m.gamma.to_string());
        put("rho_target", self.rho_target.to_string());
        if let Some(a) = self.a_target {
            put("a_target", a.to_string());
        }
        put("vdp_nonlinear", m.vdp_nonlinear.to_string());
        put("m", g.m.to_string());
        put("max_levels", g.max_levels.to_string());
        put("cycle", match g.cycle { CycleType::V => "V", CycleType::F => "F" }.into());
        put(
            "relaxation",
            match g.relaxation {
                Relaxation::F => "F",
                Relaxation::FC => "FC",
                Relaxation::FCF => "FCF",
            }
            .into(),
        );
        put(
            "coarse_operator",
            match g.coarse_operator {
                CoarseOperator::Rediscretized => "rediscretized",
                CoarseOperator::Composed => "composed",
            }
            .into(),
        );
        put("halting_tol", g.halting_tol.to_string());
        put("max_iters", g.max_iters.to_string());
        put("theta", o.theta.to_string());
        put("grad_tol", o.grad_tol.to_string());
        put("max_outer", o.max_outer.to_string());
        put("inner_tol", o.inner_tol.to_string());
        put("inner_max_iters", o.inner_max_iters.to_string());
        put("alpha", o.alpha.to_string());
        put("divergence_factor", o.divergence_factor.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_values() {
        let cfg = parse_config("# nothing\n\n").unwrap();
        let m = &cfg.model;
        assert_eq!((m.a, m.mu, m.dx, m.n_space, m.dt, m.n_steps), (1.0, 1e-5, 0.01, 100, 5e-4, 60_000));
        assert_eq!(m.t_final, 30.0);
        assert_eq!(m.gamma, 1e-6);
        assert_eq!((cfg.mgrit.m, cfg.mgrit.max_levels), (4, 3));
        assert_eq!((cfg.optimizer.theta, cfg.optimizer.grad_tol), (0.9, 1e-7));
        assert_eq!(cfg.rho_target, 3.0);
        assert_eq!(cfg.kind, ExperimentKind::Piggyback);
    }

    #[test]
    fn coarsening_factor_one_is_rejected() {
        match parse_config("m = 1") {
            Err(ConfigError::Validation { field, .. }) => assert_eq!(field, "m"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn time_grid_consistency() {
        let cfg = parse_config("N = 6000\ndt = 5e-3\nT = 30").unwrap();
        assert_eq!((cfg.model.n_steps, cfg.model.dt, cfg.model.t_final), (6000, 5e-3, 30.0));
        let cfg = parse_config("N = 6000\ndt = 5e-3").unwrap();
        assert_eq!(cfg.model.t_final, 30.0);
        let cfg = parse_config("N = 6000").unwrap();
        assert_eq!(cfg.model.t_final, 3.0);
        let cfg = parse_config("T = 3").unwrap();
        assert_eq!(cfg.model.n_steps, 6000);
        assert!(matches!(parse_config("N = 6000\ndt = 5e-3\nT = 31"), Err(ConfigError::Validation { .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_config("a = 1\n\nbogus = 3\n") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("theta = fast") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_config("theta 0.9"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("m = 4\nm = 5"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn compare_defaults_to_desk_scale() {
        let cfg = parse_config("kind = compare").unwrap();
        assert_eq!((cfg.model.n_steps, cfg.model.t_final), (6000, 3.0));
        let cfg = parse_config("kind = compare\nN = 1000").unwrap();
        assert_eq!(cfg.model.n_steps, 1000);
    }

    #[test]
    fn overrides_replace_file_values() {
        let cfg = parse_config_with_overrides("theta = 0.5\n", &["theta=0.7".into(), "workers=1,2,4".into()]).unwrap();
        assert_eq!(cfg.optimizer.theta, 0.7);
        assert_eq!(cfg.workers, vec![1, 2, 4]);
        assert!(matches!(parse_config_with_overrides("", &["nope=1".into()]), Err(ConfigError::Override { .. })));
    }

    #[test]
    fn echo_round_trips() {
        let text = "kind = oneshot\nN = 800\ncycle = F\nrelaxation = FC\nworkers = 2,1\nseed = 9\na_target = 5.25\nperturbation = 0.125\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&cfg.to_config_text()).unwrap(), cfg);
        let reference = ExperimentConfig::reference();
        assert_eq!(parse_config(&reference.to_config_text()).unwrap(), reference);
    }

    #[test]
    fn spatial_grid_consistency() {
        let cfg = parse_config("L = 50").unwrap();
        assert_eq!(cfg.model.dx, 0.02);
        let cfg = parse_config("dx = 0.05").unwrap();
        assert_eq!(cfg.model.n_space, 20);
        assert!(matches!(parse_config("L = 50\ndx = 0.01"), Err(ConfigError::Validation { .. })));
    }
}
