//! Scenario files: one TOML document drives every subcommand.

use std::collections::BTreeMap;

use serde::Deserialize;

use ftl_homog::convergence::{FluxParams, Thresholds};
use ftl_homog::{Boundary, InitialProfile, LeaderClosure, Scenario, TypeDistribution, VehicleTypeSpec};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub types: BTreeMap<String, TypeConfig>,
    pub distribution: BTreeMap<String, f64>,
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub micro: MicroConfig,
    #[serde(default)]
    pub flux: FluxConfig,
    #[serde(rename = "macro")]
    pub macro_grid: Option<MacroConfig>,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// One driver type. Headways in meters, speeds in m/s.
#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TypeConfig {
    Newell { h0: f64, v_max: f64, rate: f64 },
    TruncatedLinear { h0: f64, v_max: f64, slope: f64 },
    Table { breakpoints: Vec<[f64; 2]> },
}

/// Macroscopic `u0(x)`: vehicles counted in labels, positions in meters.
#[derive(Debug, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Affine {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    SmoothRamp {
        p_left: f64,
        p_right: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        offset: f64,
    },
    PiecewiseLinear {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum MicroStart {
    /// `U_i = u0(eps i) / eps`.
    #[default]
    Profile,
    /// Exact travelling profile at speed `theta`.
    Corrector,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeaderKind {
    #[default]
    FreeFlow,
    GhostHeadway,
    Prescribed,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MicroConfig {
    pub start: MicroStart,
    pub vehicles: usize,
    pub epsilon: f64,
    pub theta: Option<f64>,
    /// Seconds.
    pub horizon: f64,
    /// Seconds; defaults to `dt_factor / alpha`.
    pub dt: Option<f64>,
    pub dt_factor: f64,
    pub sample_every: usize,
    pub leader: LeaderKind,
    pub leader_headway: Option<f64>,
    /// `[t, x]` samples for a prescribed leader.
    pub leader_trajectory: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self {
            start: MicroStart::Profile,
            vehicles: 1000,
            epsilon: 1.0,
            theta: None,
            horizon: 100.0,
            dt: None,
            dt_factor: 0.5,
            sample_every: 10,
            leader: LeaderKind::FreeFlow,
            leader_headway: None,
            leader_trajectory: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxConfig {
    pub p_max: f64,
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for FluxConfig {
    fn default() -> Self {
        let d = FluxParams::default();
        Self {
            p_max: d.p_max,
            grid_points: d.grid_points,
            tol: d.tol,
        }
    }
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    #[default]
    LinearExtension,
    Periodic,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_final: f64,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
    /// Also run the density solver and the push-forward comparison.
    #[serde(default)]
    pub lwr: bool,
}

fn default_cfl() -> f64 {
    0.9
}

fn default_outputs() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub window: [f64; 2],
    pub t_macro: f64,
    pub lattice: [usize; 2],
    pub refinement: u32,
    pub dt_factor: f64,
    pub cfl_safety: f64,
    pub slack: f64,
    pub max_final_ratio: Option<f64>,
    pub max_final_error: Option<f64>,
    pub max_vehicles: usize,
    pub lwr_bridge: bool,
    /// Headways for `fundamental-diagram`.
    pub fd_headways: Vec<f64>,
    pub fd_vehicles: usize,
    pub fd_horizon: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.1, 0.05, 0.025, 0.0125],
            seeds: (1..=8).collect(),
            window: [0.0, 10.0],
            t_macro: 5.0,
            lattice: [20, 10],
            refinement: 2,
            dt_factor: 0.5,
            cfl_safety: 0.9,
            slack: 0.1,
            max_final_ratio: Some(0.5),
            max_final_error: None,
            max_vehicles: 20_000_000,
            lwr_bridge: false,
            fd_headways: Vec::new(),
            fd_vehicles: 4000,
            fd_horizon: 400.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            formats: vec!["csv".into(), "json".into()],
            plots: true,
        }
    }
}

impl OutputConfig {
    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

/// Parses `text`, reporting TOML and schema errors with line and column.
pub fn parse(text: &str, path: &str) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let (line, col) = line_col(text, s.start);
                format!("{path}:{line}:{col}: ")
            })
            .unwrap_or_else(|| format!("{path}: "));
        CliError::Usage(format!("{at}{}", e.message()))
    })?;
    for f in &cfg.output.formats {
        if f != "csv" && f != "json" {
            return Err(CliError::Usage(format!(
                "{path}: unknown output format {f:?} (expected \"csv\" or \"json\")"
            )));
        }
    }
    Ok(cfg)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ScenarioConfig {
    /// Type law, in the sorted order of type names.
    pub fn distribution(&self) -> Result<TypeDistribution, CliError> {
        for name in self.distribution.keys() {
            if !self.types.contains_key(name) {
                return Err(CliError::Failure(format!("[distribution] names unknown type {name:?}")));
            }
        }
        let mut entries = Vec::with_capacity(self.types.len());
        for (name, t) in &self.types {
            let prob = *self
                .distribution
                .get(name)
                .ok_or_else(|| CliError::Failure(format!("type {name:?} has no probability in [distribution]")))?;
            let spec = match t {
                TypeConfig::Newell { h0, v_max, rate } => VehicleTypeSpec::newell(name, *h0, *v_max, *rate),
                TypeConfig::TruncatedLinear { h0, v_max, slope } => {
                    VehicleTypeSpec::truncated_linear(name, *h0, *v_max, *slope)
                }
                TypeConfig::Table { breakpoints } => {
                    let pts: Vec<(f64, f64)> = breakpoints.iter().map(|b| (b[0], b[1])).collect();
                    VehicleTypeSpec::table(name, &pts)
                }
            }?;
            entries.push((spec, prob));
        }
        Ok(TypeDistribution::new(entries)?)
    }

    pub fn initial_profile(&self) -> Result<InitialProfile, CliError> {
        let Some(init) = &self.initial else {
            return Err(CliError::Failure("this command needs an [initial] section".into()));
        };
        Ok(match init {
            InitialConfig::Affine { slope, offset } => InitialProfile::Affine {
                slope: *slope,
                offset: *offset,
            },
            InitialConfig::SmoothRamp {
                p_left,
                p_right,
                center,
                width,
                offset,
            } => {
                if !(*width > 0.0) {
                    return Err(CliError::Failure(format!(
                        "[initial] width must be positive, got {width}"
                    )));
                }
                InitialProfile::SmoothRamp {
                    p_left: *p_left,
                    p_right: *p_right,
                    center: *center,
                    width: *width,
                    offset: *offset,
                }
            }
            InitialConfig::PiecewiseLinear { points } => {
                InitialProfile::piecewise_linear(points.iter().map(|p| (p[0], p[1])).collect())?
            }
        })
    }

    pub fn leader(&self) -> Result<LeaderClosure, CliError> {
        let m = &self.micro;
        Ok(match m.leader {
            LeaderKind::FreeFlow => LeaderClosure::FreeFlow,
            LeaderKind::GhostHeadway => LeaderClosure::GhostHeadway(
                m.leader_headway
                    .ok_or_else(|| CliError::Failure("leader = \"ghost_headway\" needs leader_headway".into()))?,
            ),
            LeaderKind::Prescribed => {
                let pts: Vec<(f64, f64)> = m.leader_trajectory.iter().map(|p| (p[0], p[1])).collect();
                LeaderClosure::prescribed(&pts)?
            }
        })
    }

    pub fn flux_params(&self) -> FluxParams {
        FluxParams {
            p_max: self.flux.p_max,
            grid_points: self.flux.grid_points,
            tol: self.flux.tol,
        }
    }

    pub fn boundary(&self) -> Boundary {
        match self.macro_grid.as_ref().map(|m| m.boundary).unwrap_or_default() {
            BoundaryConfig::LinearExtension => Boundary::LinearExtension,
            BoundaryConfig::Periodic => Boundary::Periodic,
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let s = &self.study;
        let mut sc = Scenario::new(
            self.distribution()?,
            self.initial_profile()?,
            (s.window[0], s.window[1]),
            s.t_macro,
            s.epsilons.clone(),
            s.seeds.clone(),
        );
        sc.dt_factor = s.dt_factor;
        sc.lattice = (s.lattice[0], s.lattice[1]);
        sc.refinement = s.refinement;
        sc.cfl_safety = s.cfl_safety;
        sc.flux = self.flux_params();
        sc.thresholds = Thresholds {
            slack: s.slack,
            max_final_error: s.max_final_error,
            max_final_ratio: s.max_final_ratio,
        };
        sc.max_vehicles = s.max_vehicles;
        sc.lwr_bridge = s.lwr_bridge;
        Ok(sc)
    }

    /// Replaces the configured seeds: the micro seed becomes `seed`, and the
    /// study seeds become `seed, seed + 1, ...` with the same count.
    pub fn override_seed(&mut self, seed: u64) {
        self.micro.seed = seed;
        let n = self.study.seeds.len() as u64;
        self.study.seeds = (0..n).map(|k| seed.wrapping_add(k)).collect();
    }

    /// Checks every section that is present, whatever the command.
    pub fn check(&self) -> Result<(), CliError> {
        self.distribution()?;
        if self.initial.is_some() {
            self.initial_profile()?;
        }
        self.leader()?;
        if self.micro.start == MicroStart::Corrector && self.micro.theta.is_none() {
            return Err(CliError::Failure("start = \"corrector\" needs theta".into()));
        }
        if let Some(m) = &self.macro_grid {
            if m.outputs == 0 {
                return Err(CliError::Failure("[macro] outputs must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
[types.A]
family = "newell"
h0 = 1.0
v_max = 1.0
rate = 1.0

[distribution]
A = 1.0
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse(MIN, "x.toml").unwrap();
        assert_eq!(cfg.flux.grid_points, 2001);
        assert_eq!(cfg.study.seeds.len(), 8);
        assert_eq!(cfg.distribution().unwrap().len(), 1);
        assert!(cfg.initial_profile().is_err());
    }

    #[test]
    fn unknown_key_has_position() {
        let text = format!("{MIN}\n[flux]\np_max = 8.0\ngird_points = 10\n");
        let CliError::Usage(msg) = parse(&text, "x.toml").unwrap_err() else {
            panic!()
        };
        assert!(msg.starts_with("x.toml:13:1:"), "{msg}");
        assert!(msg.contains("gird_points"));
    }

    #[test]
    fn unknown_type_key_rejected() {
        let text = MIN.replace("rate = 1.0", "rate = 1.0\nslope = 2.0");
        assert!(matches!(parse(&text, "x.toml"), Err(CliError::Usage(_))));
    }

    #[test]
    fn distribution_must_match_types() {
        let text = MIN.replace("A = 1.0", "A = 0.5\nB = 0.5");
        let cfg = parse(&text, "x.toml").unwrap();
        assert!(matches!(cfg.distribution(), Err(CliError::Failure(_))));
    }

    #[test]
    fn seed_override_shifts_study_seeds() {
        let mut cfg = parse(MIN, "x.toml").unwrap();
        cfg.override_seed(100);
        assert_eq!(cfg.micro.seed, 100);
        assert_eq!(cfg.study.seeds, (100..108).collect::<Vec<_>>());
    }
}
