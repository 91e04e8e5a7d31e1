//! Strict configuration schema: unknown keys are rejected, and the physics
//! fields (grid, ds, s_target) carry no implicit defaults.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use isoflow_core::grid::{BoundaryKind, Field, Grid};
use isoflow_core::kdv::{self, KdvParams, Scheme, SolitonParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    Soliton,
    Evolve,
    Spectrum,
    Scatter,
    LaxCheck,
    TensorDemo,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Soliton => "soliton",
            Experiment::Evolve => "evolve",
            Experiment::Spectrum => "spectrum",
            Experiment::Scatter => "scatter",
            Experiment::LaxCheck => "lax-check",
            Experiment::TensorDemo => "tensor-demo",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: GridConfig,
    pub flow: FlowConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    pub scattering: Option<ScatteringConfig>,
    #[serde(default)]
    pub lax: LaxConfig,
    #[serde(default)]
    pub tensor: TensorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
    pub kind: GridKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Periodic,
    BoxDirichlet,
}

impl From<GridKind> for BoundaryKind {
    fn from(kind: GridKind) -> BoundaryKind {
        match kind {
            GridKind::Periodic => BoundaryKind::Periodic,
            GridKind::BoxDirichlet => BoundaryKind::BoxDirichlet,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub ds: f64,
    pub s_target: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_snapshots() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeConfig {
    #[default]
    Ifrk4,
    Etdrk4,
}

impl From<SchemeConfig> for Scheme {
    fn from(s: SchemeConfig) -> Scheme {
        match s {
            SchemeConfig::Ifrk4 => Scheme::IntegratingFactorRk4,
            SchemeConfig::Etdrk4 => Scheme::Etdrk4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: String,
    pub lambda: Option<f64>,
    pub center: Option<f64>,
    pub lambda2: Option<f64>,
    pub center2: Option<f64>,
    pub amplitude: Option<f64>,
    pub width: Option<f64>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_bound_states")]
    pub bound_states: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            bound_states: default_bound_states(),
        }
    }
}

fn default_bound_states() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub k_count: usize,
}

impl ScatteringConfig {
    /// Log-spaced wavenumbers from k_min to k_max inclusive.
    pub fn k_values(&self) -> Vec<f64> {
        let m = self.k_count.max(2);
        let (lo, hi) = (self.k_min.ln(), self.k_max.ln());
        (0..m)
            .map(|i| (lo + (hi - lo) * i as f64 / (m - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaxConfig {
    #[serde(default = "default_lax_delta")]
    pub delta: f64,
    #[serde(default = "default_lax_substeps")]
    pub substeps: usize,
}

impl Default for LaxConfig {
    fn default() -> Self {
        LaxConfig {
            delta: default_lax_delta(),
            substeps: default_lax_substeps(),
        }
    }
}

fn default_lax_delta() -> f64 {
    1e-4
}

fn default_lax_substeps() -> usize {
    50
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorConfig {
    #[serde(default = "default_probe_extent")]
    pub probe_extent: f64,
    #[serde(default = "default_probe_points")]
    pub probe_points: usize,
    #[serde(default = "default_probe_step")]
    pub probe_step: f64,
    #[serde(default = "default_u_substeps")]
    pub u_substeps: usize,
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            probe_extent: default_probe_extent(),
            probe_points: default_probe_points(),
            probe_step: default_probe_step(),
            u_substeps: default_u_substeps(),
        }
    }
}

fn default_probe_extent() -> f64 {
    2.0
}

fn default_probe_points() -> usize {
    41
}

fn default_probe_step() -> f64 {
    0.05
}

fn default_u_substeps() -> usize {
    25
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_directory() -> String {
    "out".to_string()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

/// Named tolerance overrides; every default matches the checks the reports
/// run.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_isospectral_drift")]
    pub isospectral_drift: f64,
    #[serde(default = "d_invariant_drift")]
    pub invariant_drift: f64,
    #[serde(default = "d_scattering_drift")]
    pub scattering_drift: f64,
    #[serde(default = "d_wronskian")]
    pub wronskian: f64,
    #[serde(default = "d_unitarity")]
    pub unitarity: f64,
    #[serde(default = "d_conjugation")]
    pub conjugation: f64,
    #[serde(default = "d_lax_residual")]
    pub lax_residual: f64,
    #[serde(default = "d_kronecker_identity")]
    pub kronecker_identity: f64,
    #[serde(default = "d_bound_sum_drift")]
    pub bound_sum_drift: f64,
    #[serde(default = "d_coupling_floor")]
    pub coupling_floor: f64,
    #[serde(default = "d_witness_floor")]
    pub witness_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        toml::from_str("").expect("empty table deserializes to defaults")
    }
}

fn d_isospectral_drift() -> f64 {
    1e-4
}
fn d_invariant_drift() -> f64 {
    1e-7
}
fn d_scattering_drift() -> f64 {
    1e-4
}
fn d_wronskian() -> f64 {
    1e-6
}
fn d_unitarity() -> f64 {
    1e-8
}
fn d_conjugation() -> f64 {
    1e-3
}
fn d_lax_residual() -> f64 {
    1e-3
}
fn d_kronecker_identity() -> f64 {
    1e-10
}
fn d_bound_sum_drift() -> f64 {
    2e-3
}
fn d_coupling_floor() -> f64 {
    0.1
}
fn d_witness_floor() -> f64 {
    1e-3
}

/// Parsed initial-condition kinds after validation.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    Zero,
    Soliton(SolitonParams),
    TwoSoliton(SolitonParams, SolitonParams),
    Gaussian { amplitude: f64, width: f64, center: f64 },
    File(String),
}

pub fn parse_config(text: &str) -> Result<ConfigFile, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn require(field: Option<f64>, name: &str, kind: &str, issues: &mut Vec<String>) -> f64 {
    match field {
        Some(v) => v,
        None => {
            issues.push(format!("initial: kind `{kind}` requires field `{name}`"));
            f64::NAN
        }
    }
}

fn forbid(fields: &[(&str, bool)], kind: &str, issues: &mut Vec<String>) {
    for (name, present) in fields {
        if *present {
            issues.push(format!(
                "initial: field `{name}` does not apply to kind `{kind}`"
            ));
        }
    }
}

/// Full precondition check with field-level messages. Returns the issue
/// list; an empty list means the configuration is runnable. With no
/// experiment given, only the experiment-independent preconditions are
/// checked.
pub fn validate(config: &ConfigFile, experiment: Option<Experiment>) -> Vec<String> {
    let mut issues = Vec::new();

    let grid = match Grid::new(config.grid.n, config.grid.length, config.grid.kind.into()) {
        Ok(g) => Some(g),
        Err(e) => {
            issues.push(format!("grid: {e}"));
            None
        }
    };

    if config.flow.ds <= 0.0 || !config.flow.ds.is_finite() {
        issues.push(format!("flow: ds must be positive, got {}", config.flow.ds));
    }
    if config.flow.s_target <= 0.0 || !config.flow.s_target.is_finite() {
        issues.push(format!(
            "flow: s_target must be positive, got {}",
            config.flow.s_target
        ));
    }
    if config.flow.snapshots == 0 {
        issues.push("flow: snapshots must be at least 1".into());
    }
    if config.flow.ds > 0.0 && config.flow.s_target / config.flow.ds < 1.0 {
        issues.push("flow: s_target/ds must be at least 1".into());
    }
    // The analytic soliton experiment never steps the PDE, so the flow
    // stability guard and the periodic-grid requirement do not apply.
    let evolves = experiment.map(|e| e != Experiment::Soliton).unwrap_or(false);
    if let Some(g) = &grid {
        if config.flow.ds > 0.0 && evolves {
            let params = KdvParams::new(config.flow.ds)
                .expect("positive ds accepted")
                .with_dealias(config.flow.dealias);
            let k = params.max_resolved_wavenumber(g);
            let guard = config.flow.ds * k * k * k;
            if guard > 10.0 {
                issues.push(format!(
                    "flow: ds·k_max³ = {guard:.3} exceeds the stability guard of 10"
                ));
            }
        }
        if evolves && g.kind() != BoundaryKind::Periodic {
            issues.push(format!(
                "grid: experiment `{}` evolves the flow and requires kind = \"periodic\"",
                experiment.expect("evolves implies experiment").name()
            ));
        }
    }

    if initial_condition(&config.initial, &mut issues).is_none() && issues.is_empty() {
        issues.push("initial: unrecognized configuration".into());
    }
    if matches!(experiment, Some(Experiment::Soliton)) {
        match config.initial.kind.as_str() {
            "soliton" | "two-soliton" => {}
            other => issues.push(format!(
                "initial: experiment `soliton` needs kind `soliton` or `two-soliton`, got `{other}`"
            )),
        }
    }

    if experiment == Some(Experiment::Scatter) {
        match &config.scattering {
            None => issues.push("scattering: section required for experiment `scatter`".into()),
            Some(s) => {
                if s.k_min <= 0.0 || !s.k_min.is_finite() {
                    issues.push(format!("scattering: k_min must be positive, got {}", s.k_min));
                }
                if s.k_max <= s.k_min {
                    issues.push(format!(
                        "scattering: k_max ({}) must exceed k_min ({})",
                        s.k_max, s.k_min
                    ));
                }
                if s.k_count < 2 {
                    issues.push("scattering: k_count must be at least 2".into());
                }
            }
        }
    }

    if experiment == Some(Experiment::Spectrum) && config.spectrum.bound_states == 0 {
        issues.push("spectrum: bound_states must be at least 1".into());
    }

    if experiment == Some(Experiment::LaxCheck) {
        if config.lax.delta <= 0.0 || !config.lax.delta.is_finite() {
            issues.push(format!("lax: delta must be positive, got {}", config.lax.delta));
        }
        if config.lax.substeps == 0 {
            issues.push("lax: substeps must be at least 1".into());
        }
    }

    if experiment == Some(Experiment::TensorDemo) {
        if config.grid.n > 64 {
            issues.push(format!(
                "grid: tensor-demo needs n ≤ 64 for dense 2D work, got {}",
                config.grid.n
            ));
        }
        let t = &config.tensor;
        if t.probe_points < 3 {
            issues.push("tensor: probe_points must be at least 3".into());
        }
        if t.probe_step <= 0.0 || t.probe_extent <= 0.0 {
            issues.push("tensor: probe_extent and probe_step must be positive".into());
        }
        if t.u_substeps == 0 {
            issues.push("tensor: u_substeps must be at least 1".into());
        }
    }

    for (name, value) in [
        ("isospectral_drift", config.tolerances.isospectral_drift),
        ("invariant_drift", config.tolerances.invariant_drift),
        ("scattering_drift", config.tolerances.scattering_drift),
        ("wronskian", config.tolerances.wronskian),
        ("unitarity", config.tolerances.unitarity),
        ("conjugation", config.tolerances.conjugation),
        ("lax_residual", config.tolerances.lax_residual),
        ("kronecker_identity", config.tolerances.kronecker_identity),
        ("bound_sum_drift", config.tolerances.bound_sum_drift),
        ("coupling_floor", config.tolerances.coupling_floor),
        ("witness_floor", config.tolerances.witness_floor),
    ] {
        if value <= 0.0 || !value.is_finite() {
            issues.push(format!("tolerances: {name} must be positive, got {value}"));
        }
    }

    issues
}

/// Interpret the initial section, pushing field-level problems.
pub fn initial_condition(
    initial: &InitialConfig,
    issues: &mut Vec<String>,
) -> Option<InitialCondition> {
    let has = |f: &Option<f64>| f.is_some();
    match initial.kind.as_str() {
        "zero" => {
            forbid(
                &[
                    ("lambda", has(&initial.lambda)),
                    ("center", has(&initial.center)),
                    ("lambda2", has(&initial.lambda2)),
                    ("center2", has(&initial.center2)),
                    ("amplitude", has(&initial.amplitude)),
                    ("width", has(&initial.width)),
                    ("path", initial.path.is_some()),
                ],
                "zero",
                issues,
            );
            Some(InitialCondition::Zero)
        }
        "soliton" => {
            let lambda = require(initial.lambda, "lambda", "soliton", issues);
            let center = require(initial.center, "center", "soliton", issues);
            forbid(
                &[
                    ("lambda2", has(&initial.lambda2)),
                    ("center2", has(&initial.center2)),
                    ("amplitude", has(&initial.amplitude)),
                    ("width", has(&initial.width)),
                    ("path", initial.path.is_some()),
                ],
                "soliton",
                issues,
            );
            match SolitonParams::new(lambda, center) {
                Ok(p) => Some(InitialCondition::Soliton(p)),
                Err(e) => {
                    if lambda.is_finite() {
                        issues.push(format!("initial: {e}"));
                    }
                    None
                }
            }
        }
        "two-soliton" => {
            let lambda = require(initial.lambda, "lambda", "two-soliton", issues);
            let center = require(initial.center, "center", "two-soliton", issues);
            let lambda2 = require(initial.lambda2, "lambda2", "two-soliton", issues);
            let center2 = require(initial.center2, "center2", "two-soliton", issues);
            forbid(
                &[
                    ("amplitude", has(&initial.amplitude)),
                    ("width", has(&initial.width)),
                    ("path", initial.path.is_some()),
                ],
                "two-soliton",
                issues,
            );
            match (
                SolitonParams::new(lambda, center),
                SolitonParams::new(lambda2, center2),
            ) {
                (Ok(a), Ok(b)) => Some(InitialCondition::TwoSoliton(a, b)),
                (ra, rb) => {
                    for r in [ra.err(), rb.err()].into_iter().flatten() {
                        if lambda.is_finite() && lambda2.is_finite() {
                            issues.push(format!("initial: {r}"));
                        }
                    }
                    None
                }
            }
        }
        "gaussian" => {
            let amplitude = require(initial.amplitude, "amplitude", "gaussian", issues);
            let width = require(initial.width, "width", "gaussian", issues);
            let center = initial.center.unwrap_or(0.0);
            forbid(
                &[
                    ("lambda", has(&initial.lambda)),
                    ("lambda2", has(&initial.lambda2)),
                    ("center2", has(&initial.center2)),
                    ("path", initial.path.is_some()),
                ],
                "gaussian",
                issues,
            );
            if width.is_finite() && width <= 0.0 {
                issues.push(format!("initial: gaussian width must be positive, got {width}"));
                return None;
            }
            Some(InitialCondition::Gaussian {
                amplitude,
                width,
                center,
            })
        }
        "file" => {
            forbid(
                &[
                    ("lambda", has(&initial.lambda)),
                    ("center", has(&initial.center)),
                    ("lambda2", has(&initial.lambda2)),
                    ("center2", has(&initial.center2)),
                    ("amplitude", has(&initial.amplitude)),
                    ("width", has(&initial.width)),
                ],
                "file",
                issues,
            );
            match &initial.path {
                Some(p) => Some(InitialCondition::File(p.clone())),
                None => {
                    issues.push("initial: kind `file` requires field `path`".into());
                    None
                }
            }
        }
        other => {
            issues.push(format!(
                "initial: unknown kind `{other}`; expected zero, soliton, two-soliton, gaussian, or file"
            ));
            None
        }
    }
}

/// Sample the configured initial potential onto the grid.
pub fn build_initial(grid: &Arc<Grid>, condition: &InitialCondition) -> Result<Field, String> {
    match condition {
        InitialCondition::Zero => Ok(Field::zero(grid)),
        InitialCondition::Soliton(p) => {
            kdv::soliton_potential(grid, p, 0.0).map_err(|e| e.to_string())
        }
        InitialCondition::TwoSoliton(a, b) => Field::sample(grid, |q| {
            kdv::soliton_value(a, 0.0, q) + kdv::soliton_value(b, 0.0, q)
        })
        .map_err(|e| e.to_string()),
        InitialCondition::Gaussian {
            amplitude,
            width,
            center,
        } => Field::sample(grid, |q| {
            let u = (q - center) / width;
            amplitude * (-u * u).exp()
        })
        .map_err(|e| e.to_string()),
        InitialCondition::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("initial: cannot read `{path}`: {e}"))?;
            let values: Result<Vec<f64>, String> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("initial: bad sample `{l}`: {e}"))
                })
                .collect();
            Field::from_values(grid, values?).map_err(|e| e.to_string())
        }
    }
}

pub fn kdv_params(flow: &FlowConfig) -> Result<KdvParams, String> {
    Ok(KdvParams::new(flow.ds)
        .map_err(|e| e.to_string())?
        .with_scheme(flow.scheme.into())
        .with_dealias(flow.dealias))
}
