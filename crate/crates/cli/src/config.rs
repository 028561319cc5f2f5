//! Scenario files: serde schema, validation with field paths, and
//! resolution into core types.

use std::fmt;
use std::path::Path;

use cubicavoid::{
    Boundary, BvpOptions, CubicState, DetectOptions, FdConfig, GroupElement, GroupModel, LieAlgebraElement,
    PotentialSpec, Shape,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A validation failure tied to the offending config field.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config at {}: {}", self.path, self.message)
    }
}

fn invalid<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { path: path.into(), message: message.into() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ivp,
    Bvp,
    Check,
    Sweep,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| format!("unknown mode {s:?}, expected ivp, bvp, check or sweep"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKindConfig {
    So3,
    Abelian,
}

/// Diagonal entries or a full symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inertia {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: GroupKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<Inertia>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeConfig {
    InverseShift,
    GaussianBump,
    Quadratic,
    #[default]
    Zero,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub shape: ShapeConfig,
    #[serde(default)]
    pub params: PotentialParams,
    /// Axis-angle triple on SO(3), a point on `ℝⁿ`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub a: f64,
    pub b: f64,
    /// Number of grid steps; the grid holds `nodes + 1` samples.
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub g_a: Vec<f64>,
    pub xi0: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub g_a: Vec<f64>,
    pub xi0_a: Vec<f64>,
    pub g_b: Vec<f64>,
    pub xi0_b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub fd_step_scale: f64,
    pub fd_richardson: bool,
    pub detect_rel_tol: f64,
    pub detect_burn_in: usize,
    pub bvp_tol: f64,
    pub bvp_max_iters: usize,
    pub bvp_lambda0: f64,
    pub bvp_fd_step: f64,
    pub bvp_random_restarts: usize,
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let fd = FdConfig::default();
        let detect = DetectOptions::default();
        let bvp = BvpOptions::default();
        Self {
            fd_step_scale: fd.step_scale,
            fd_richardson: fd.richardson,
            detect_rel_tol: detect.rel_tol,
            detect_burn_in: detect.burn_in,
            bvp_tol: bvp.tol,
            bvp_max_iters: bvp.max_iters,
            bvp_lambda0: bvp.lambda0,
            bvp_fd_step: bvp.fd_step,
            bvp_random_restarts: bvp.random_restarts,
            seed: bvp.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub group: GroupConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub interval: IntervalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryConfig>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// How the trajectory is pinned down.
#[derive(Clone, Debug)]
pub enum Start {
    Initial(CubicState),
    Boundary(Boundary),
}

/// A validated scenario in core types.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: GroupModel,
    pub spec: PotentialSpec,
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
    pub start: Start,
    pub mode: Mode,
    pub detect: DetectOptions,
    pub bvp: BvpOptions,
}

impl ScenarioConfig {
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        serde_path_to_error::deserialize(value)
            .map_err(|e| ConfigError { path: e.path().to_string(), message: e.into_inner().to_string() })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError { path: e.path().to_string(), message: e.into_inner().to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Multiplies every tolerance (not the step sizes) by `factor`.
    pub fn scale_tolerances(&mut self, factor: f64) {
        self.tolerances.detect_rel_tol *= factor;
        self.tolerances.bvp_tol *= factor;
    }

    /// Returns a copy with the scalar at the dotted `path` replaced.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Self, ConfigError> {
        let mut root = self.to_value();
        let mut slot = &mut root;
        for key in path.split('.') {
            slot = match slot.get_mut(key) {
                Some(next) => next,
                None => return invalid(path, "parameter path does not resolve to a config field"),
            };
        }
        if !slot.is_number() {
            return invalid(path, "parameter path does not resolve to a scalar field");
        }
        *slot = serde_json::json!(value);
        Self::from_value(root)
    }

    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        let model = self.model()?;
        let n = model.dim();
        let spec = self.potential(&model)?;

        let IntervalConfig { a, b, nodes } = self.interval;
        if !a.is_finite() {
            return invalid("interval.a", "must be finite");
        }
        if !(b.is_finite() && b > a) {
            return invalid("interval.b", format!("must be finite and greater than a = {a}"));
        }
        if nodes < cubicavoid::dynamics::MIN_INTERVALS {
            return invalid(
                "interval.nodes",
                format!("{nodes} is too coarse, at least {} are required", cubicavoid::dynamics::MIN_INTERVALS),
            );
        }

        let start = match (&self.initial, &self.boundary) {
            (Some(_), Some(_)) => return invalid("boundary", "give either initial or boundary, not both"),
            (None, None) => return invalid("initial", "either initial or boundary is required"),
            (Some(init), None) => {
                if self.mode == Mode::Bvp {
                    return invalid("mode", "bvp mode needs boundary data, not initial data");
                }
                Start::Initial(CubicState::new(
                    point(&model, &init.g_a, "initial.g_a")?,
                    vector(n, &init.xi0, "initial.xi0")?,
                    vector(n, &init.xi1, "initial.xi1")?,
                    vector(n, &init.xi2, "initial.xi2")?,
                ))
            }
            (None, Some(bd)) => {
                if self.mode == Mode::Ivp {
                    return invalid("mode", "ivp mode needs initial data, not boundary data");
                }
                Start::Boundary(Boundary {
                    a,
                    b,
                    g_a: point(&model, &bd.g_a, "boundary.g_a")?,
                    xi0_a: vector(n, &bd.xi0_a, "boundary.xi0_a")?,
                    g_b: point(&model, &bd.g_b, "boundary.g_b")?,
                    xi0_b: vector(n, &bd.xi0_b, "boundary.xi0_b")?,
                })
            }
        };

        if self.mode == Mode::Sweep {
            match &self.sweep {
                None => return invalid("sweep", "sweep mode needs a sweep section"),
                Some(s) if s.values.is_empty() => return invalid("sweep.values", "must not be empty"),
                Some(s) => {
                    self.with_parameter(&s.parameter, s.values[0])
                        .map_err(|e| ConfigError { path: "sweep.parameter".into(), message: e.message })?;
                }
            }
        }

        let t = &self.tolerances;
        for (name, value) in [
            ("tolerances.fd_step_scale", t.fd_step_scale),
            ("tolerances.detect_rel_tol", t.detect_rel_tol),
            ("tolerances.bvp_tol", t.bvp_tol),
            ("tolerances.bvp_lambda0", t.bvp_lambda0),
            ("tolerances.bvp_fd_step", t.bvp_fd_step),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return invalid(name, "must be positive and finite");
            }
        }
        if t.bvp_max_iters == 0 {
            return invalid("tolerances.bvp_max_iters", "must be at least 1");
        }

        let spec = spec.with_fd(FdConfig { step_scale: t.fd_step_scale, richardson: t.fd_richardson });
        let detect = DetectOptions { rel_tol: t.detect_rel_tol, burn_in: t.detect_burn_in };
        let bvp = BvpOptions {
            intervals: nodes,
            tol: t.bvp_tol,
            max_iters: t.bvp_max_iters,
            lambda0: t.bvp_lambda0,
            fd_step: t.bvp_fd_step,
            random_restarts: t.bvp_random_restarts,
            seed: t.seed,
        };
        Ok(Scenario { model, spec, a, b, nodes, start, mode: self.mode, detect, bvp })
    }

    fn model(&self) -> Result<GroupModel, ConfigError> {
        let g = &self.group;
        let n = match g.kind {
            GroupKindConfig::So3 => {
                if g.n.is_some_and(|n| n != 3) {
                    return invalid("group.n", "SO(3) has dimension 3");
                }
                3
            }
            GroupKindConfig::Abelian => match g.n {
                Some(n) if n >= 1 => n,
                Some(_) => return invalid("group.n", "must be at least 1"),
                None => return invalid("group.n", "required for the abelian group"),
            },
        };
        let metric = match &g.inertia {
            None => DMatrix::identity(n, n),
            Some(Inertia::Diagonal(d)) => {
                if d.len() != n {
                    return invalid("group.inertia", format!("expected {n} diagonal entries, got {}", d.len()));
                }
                DMatrix::from_diagonal(&DVector::from_column_slice(d))
            }
            Some(Inertia::Full(rows)) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return invalid("group.inertia", format!("expected a {n}x{n} matrix"));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let built = match g.kind {
            GroupKindConfig::So3 => GroupModel::so3(metric),
            GroupKindConfig::Abelian => GroupModel::abelian_with_metric(metric),
        };
        built.or_else(|e| invalid("group.inertia", e.to_string()))
    }

    fn potential(&self, model: &GroupModel) -> Result<PotentialSpec, ConfigError> {
        let p = &self.potential;
        let need = |value: Option<f64>, name: &str| -> Result<f64, ConfigError> {
            value.ok_or_else(|| ConfigError {
                path: format!("potential.params.{name}"),
                message: "required for this shape".into(),
            })
        };
        let shape = match p.shape {
            ShapeConfig::InverseShift => {
                Shape::InverseShift { tau: need(p.params.tau, "tau")?, rho: need(p.params.rho, "rho")? }
            }
            ShapeConfig::GaussianBump => {
                Shape::GaussianBump { tau: need(p.params.tau, "tau")?, sigma2: need(p.params.sigma2, "sigma2")? }
            }
            ShapeConfig::Quadratic => Shape::Quadratic { tau: need(p.params.tau, "tau")? },
            ShapeConfig::Zero => Shape::Zero,
        };
        let obstacle = match &p.obstacle {
            Some(c) => point(model, c, "potential.obstacle")?,
            None => model.identity(),
        };
        PotentialSpec::new(model, obstacle, shape).or_else(|e| invalid("potential.params", e.to_string()))
    }
}

fn vector(n: usize, c: &[f64], path: &str) -> Result<LieAlgebraElement, ConfigError> {
    if c.len() != n {
        return invalid(path, format!("expected {n} components, got {}", c.len()));
    }
    if c.iter().any(|x| !x.is_finite()) {
        return invalid(path, "components must be finite");
    }
    Ok(LieAlgebraElement::from_slice(c))
}

/// Axis-angle triple on SO(3) (angle below π), a point on `ℝⁿ`.
fn point(model: &GroupModel, c: &[f64], path: &str) -> Result<GroupElement, ConfigError> {
    let v = vector(model.dim(), c, path)?;
    if model.kind() == cubicavoid::GroupKind::So3 && v.norm() >= std::f64::consts::PI {
        return invalid(path, "rotation angle must be below pi");
    }
    model.exp(&v).or_else(|e| invalid(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermite() -> &'static str {
        r#"{
            "group": {"kind": "abelian", "n": 1},
            "interval": {"a": 0, "b": 1, "nodes": 64},
            "boundary": {"g_a": [0], "xi0_a": [0], "g_b": [1], "xi0_b": [0]},
            "mode": "bvp"
        }"#
    }

    #[test]
    fn defaults_are_resolved() {
        let cfg = ScenarioConfig::from_json(hermite()).unwrap();
        assert_eq!(cfg.potential.shape, ShapeConfig::Zero);
        assert_eq!(cfg.tolerances, Tolerances::default());
        let s = cfg.validate().unwrap();
        assert_eq!(s.bvp.intervals, 64);
        assert!(matches!(s.start, Start::Boundary(_)));
    }

    #[test]
    fn parse_errors_carry_the_field_path() {
        let text = hermite().replace("\"nodes\": 64", "\"nodes\": \"many\"");
        let err = ScenarioConfig::from_json(&text).unwrap_err();
        assert_eq!(err.path, "interval.nodes");
    }

    #[test]
    fn validation_errors_carry_the_field_path() {
        let cases = [
            (hermite().replace("\"nodes\": 64", "\"nodes\": 4"), "interval.nodes"),
            (hermite().replace("\"b\": 1", "\"b\": -1"), "interval.b"),
            (hermite().replace("\"g_b\": [1]", "\"g_b\": [1, 2]"), "boundary.g_b"),
            (hermite().replace("\"mode\": \"bvp\"", "\"mode\": \"ivp\""), "mode"),
            (hermite().replace("\"n\": 1", "\"n\": 0"), "group.n"),
        ];
        for (text, path) in cases {
            let err = ScenarioConfig::from_json(&text).unwrap().validate().unwrap_err();
            assert_eq!(err.path, path, "{err}");
        }
    }

    #[test]
    fn missing_shape_parameter_is_reported() {
        let text = hermite()
            .replace("\"mode\"", "\"potential\": {\"shape\": \"gaussian_bump\", \"params\": {\"tau\": 1}}, \"mode\"");
        let err = ScenarioConfig::from_json(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.path, "potential.params.sigma2");
    }

    #[test]
    fn parameter_paths_resolve_to_scalars() {
        let text = hermite()
            .replace("\"mode\"", "\"potential\": {\"shape\": \"quadratic\", \"params\": {\"tau\": 1}}, \"mode\"");
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        let swept = cfg.with_parameter("potential.params.tau", 2.5).unwrap();
        assert_eq!(swept.potential.params.tau, Some(2.5));
        assert!(cfg.with_parameter("potential.params.rho", 1.0).is_err());
        assert!(cfg.with_parameter("potential.params", 1.0).is_err());
    }

    #[test]
    fn so3_axis_angle_is_bounded() {
        let text = r#"{
            "group": {"kind": "so3", "inertia": [1, 2, 3]},
            "interval": {"a": 0, "b": 1, "nodes": 32},
            "initial": {"g_a": [0, 0, 3.2], "xi0": [0, 0, 1], "xi1": [0, 0, 0], "xi2": [0, 0, 0]},
            "mode": "ivp"
        }"#;
        let err = ScenarioConfig::from_json(text).unwrap().validate().unwrap_err();
        assert_eq!(err.path, "initial.g_a");
    }

    #[test]
    fn tolerance_scaling_skips_step_sizes() {
        let mut cfg = ScenarioConfig::from_json(hermite()).unwrap();
        cfg.scale_tolerances(10.0);
        assert_eq!(cfg.tolerances.bvp_tol, 1e-7);
        assert_eq!(cfg.tolerances.fd_step_scale, Tolerances::default().fd_step_scale);
    }
}
