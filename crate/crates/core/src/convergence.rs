//! Rescaling experiments: micro runs at decreasing `eps` against a reference
//! solution of `u_t = F(u_x)`, and long-time speed studies against `F`.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::effective_flux::{build_flux, EffectiveFlux};
use crate::error::{config, domain, Result};
use crate::macro_solvers::{
    l1_distance, pushforward_density, solve_hj, solve_lwr_godunov, Boundary, DensityFlux, Grid1D, GridField,
};
use crate::micro_sim::{
    asymptotic_speed, integrate, LeaderClosure, MicroState, MicroTrajectory, SpeedProbe, StepConfig,
};
use crate::velocity_models::{sample_types, validate_assumptions, TypeDistribution};

/// Macroscopic initial profile `u0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialProfile {
    /// `u0(x) = slope x + offset`.
    Affine { slope: f64, offset: f64 },
    /// Gradient moving smoothly from `p_left` to `p_right` around `center`:
    /// `u0'(x) = p_left + (p_right - p_left) (1 + tanh((x - center) / width)) / 2`,
    /// with `u0(x) -> offset + p_left x` as `x -> -inf`.
    SmoothRamp {
        p_left: f64,
        p_right: f64,
        center: f64,
        width: f64,
        offset: f64,
    },
    /// Linear interpolation through `(x, u)` points, extended with the end
    /// slopes.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl InitialProfile {
    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(domain("piecewise-linear profile needs >= 2 points with increasing x"));
        }
        Ok(InitialProfile::PiecewiseLinear { points })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialProfile::Affine { slope, offset } => slope * x + offset,
            InitialProfile::SmoothRamp {
                p_left,
                p_right,
                center,
                width,
                offset,
            } => {
                let z = x - center;
                // max(z, 0) + (w/2) ln(1 + e^{-2|z|/w}) = (z + w ln(2 cosh(z/w))) / 2
                let soft = z.max(0.0) + 0.5 * width * (-2.0 * z.abs() / width).exp().ln_1p();
                offset + p_left * x + (p_right - p_left) * soft
            }
            InitialProfile::PiecewiseLinear { points } => {
                let n = points.len();
                let k = points.partition_point(|q| q.0 <= x).clamp(1, n - 1);
                let ((x0, u0), (x1, u1)) = (points[k - 1], points[k]);
                u0 + (u1 - u0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Bounds of `u0'` over `[a, b]`.
    pub fn gradient_bounds(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            InitialProfile::Affine { slope, .. } => (*slope, *slope),
            InitialProfile::SmoothRamp {
                p_left,
                p_right,
                center,
                width,
                ..
            } => {
                let g = |x: f64| p_left + (p_right - p_left) * 0.5 * (1.0 + ((x - center) / width).tanh());
                let (ga, gb) = (g(a), g(b));
                (ga.min(gb), ga.max(gb))
            }
            InitialProfile::PiecewiseLinear { points } => {
                let n = points.len();
                let slope = |k: usize| (points[k].1 - points[k - 1].1) / (points[k].0 - points[k - 1].0);
                let first = points.partition_point(|q| q.0 <= a).clamp(1, n - 1);
                let last = points.partition_point(|q| q.0 < b).clamp(1, n - 1);
                (first..=last)
                    .map(slope)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
            }
        }
    }
}

/// Micro initial positions `U_i = u0(eps i) / eps` for `i` in `first..=last`.
pub fn discretize_initial(u0: &InitialProfile, eps: f64, first: i64, last: i64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(domain(format!("eps must be positive, got {eps}")));
    }
    if last < first {
        return Err(domain(format!("empty index range {first}..={last}")));
    }
    let xs: Vec<f64> = (first..=last).map(|i| u0.eval(eps * i as f64) / eps).collect();
    if let Some(k) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(domain(format!(
            "initial profile is not strictly increasing near x = {}",
            eps * (first + k as i64) as f64
        )));
    }
    Ok(xs)
}

/// `floor(x / eps)` absorbing the representation error of `x / eps` when
/// `x` is meant to be a multiple of `eps`.
pub fn label_index(x: f64, eps: f64) -> i64 {
    let r = x / eps;
    (r + 1e-9 * r.abs().max(1.0)).floor() as i64
}

/// A micro run over the labels `first_index..first_index + len`.
#[derive(Debug, Clone)]
pub struct MicroWindow {
    pub first_index: i64,
    pub trajectory: MicroTrajectory,
}

/// `eps U_{floor(x/eps)}(t/eps)` at each `(x, t)`, interpolating linearly in
/// time between stored snapshots.
pub fn rescale_micro(window: &MicroWindow, eps: f64, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    let n = window.trajectory.type_indices.len() as i64;
    points
        .iter()
        .map(|&(x, t)| {
            let i = label_index(x, eps) - window.first_index;
            if i < 0 || i >= n {
                return Err(domain(format!(
                    "x = {x} (label {}) outside simulated window",
                    i + window.first_index
                )));
            }
            Ok(eps * window.trajectory.position_at(i as usize, t / eps)?)
        })
        .collect()
}

/// Pass criteria for a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    /// Allowed relative increase between consecutive `eps` (0.1 = 10%).
    pub slack: f64,
    /// Upper bound on the max-over-seeds error at the smallest `eps`.
    pub max_final_error: Option<f64>,
    /// Upper bound on `error(smallest eps) / error(largest eps)`.
    pub max_final_ratio: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            slack: 0.1,
            max_final_error: None,
            max_final_ratio: Some(0.5),
        }
    }
}

/// Table parameters for the effective flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxParams {
    pub p_max: f64,
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for FluxParams {
    fn default() -> Self {
        Self {
            p_max: 10.0,
            grid_points: 2001,
            tol: 1e-10,
        }
    }
}

/// A full rescaling experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dist: TypeDistribution,
    pub u0: InitialProfile,
    /// Label window `[a, b]` on which errors are measured.
    pub window: (f64, f64),
    pub t_macro: f64,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Micro step `dt <= dt_factor / alpha`.
    pub dt_factor: f64,
    /// Evaluation lattice: `nx + 1` labels by `nt + 1` times.
    pub lattice: (usize, usize),
    /// Reference grid spacing is `min eps / 2^refinement`.
    pub refinement: u32,
    pub cfl_safety: f64,
    pub flux: FluxParams,
    pub thresholds: Thresholds,
    /// Upper bound on vehicles in one micro window.
    pub max_vehicles: usize,
    /// Also run the HJ/LWR push-forward comparison at `t_macro`.
    pub lwr_bridge: bool,
}

impl Scenario {
    pub fn new(
        dist: TypeDistribution,
        u0: InitialProfile,
        window: (f64, f64),
        t_macro: f64,
        epsilons: Vec<f64>,
        seeds: Vec<u64>,
    ) -> Self {
        Self {
            dist,
            u0,
            window,
            t_macro,
            epsilons,
            seeds,
            dt_factor: 0.5,
            lattice: (20, 10),
            refinement: 2,
            cfl_safety: 0.9,
            flux: FluxParams::default(),
            thresholds: Thresholds::default(),
            max_vehicles: 20_000_000,
            lwr_bridge: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.window;
        if !(b > a) {
            return Err(config(format!("empty window [{a}, {b}]")));
        }
        if !(self.t_macro > 0.0) {
            return Err(config("macroscopic horizon must be positive"));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(config("epsilon ladder must be non-empty and positive"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config("epsilon ladder must be strictly decreasing"));
        }
        if self.seeds.is_empty() {
            return Err(config("at least one seed is required"));
        }
        if !(self.dt_factor > 0.0 && self.dt_factor <= 1.0) {
            return Err(config(format!("dt_factor must lie in (0, 1], got {}", self.dt_factor)));
        }
        if self.lattice.0 == 0 || self.lattice.1 == 0 {
            return Err(config("lattice needs at least one interval in x and t"));
        }
        let (g_lo, _) = self.u0.gradient_bounds(a, b + self.dist.v_max_global() * self.t_macro);
        if !(g_lo > 0.0) {
            return Err(config(format!("u0 must be strictly increasing (min gradient {g_lo})")));
        }
        validate_assumptions(&self.dist).into_result()
    }

    pub fn lattice_points(&self) -> Vec<(f64, f64)> {
        let (a, b) = self.window;
        let (nx, nt) = self.lattice;
        let mut pts = Vec::with_capacity((nx + 1) * (nt + 1));
        for k in 0..=nt {
            let t = self.t_macro * k as f64 / nt as f64;
            for j in 0..=nx {
                pts.push((a + (b - a) * j as f64 / nx as f64, t));
            }
        }
        pts
    }

    fn lattice_times(&self) -> Vec<f64> {
        let nt = self.lattice.1;
        (0..=nt).map(|k| self.t_macro * k as f64 / nt as f64).collect()
    }

    /// Micro step, sampling stride, and label range for one `eps`.
    fn micro_plan(&self, eps: f64) -> Result<MicroPlan> {
        let dt_max = self.dt_factor / self.dist.alpha();
        let lattice_dt = self.t_macro / self.lattice.1 as f64 / eps;
        let per_sample = (lattice_dt / dt_max - 1e-9).ceil().max(1.0) as usize;
        let dt = lattice_dt / per_sample as f64;
        let horizon = self.t_macro / eps;
        let steps = (horizon / dt - 1e-9).ceil() as i64;
        let (a, b) = self.window;
        let first = label_index(a, eps);
        // Each Euler step moves information one car down the platoon.
        let last = label_index(b, eps) + steps + 2;
        let vehicles = (last - first + 1) as usize;
        if vehicles > self.max_vehicles {
            return Err(config(format!(
                "eps = {eps} needs a window of {vehicles} vehicles, above the budget of {}",
                self.max_vehicles
            )));
        }
        Ok(MicroPlan {
            dt,
            per_sample,
            horizon,
            first,
            last,
        })
    }
}

struct MicroPlan {
    dt: f64,
    per_sample: usize,
    horizon: f64,
    first: i64,
    last: i64,
}

/// Runs the micro model for one `(eps, seed)` cell.
pub fn simulate_window(scenario: &Scenario, eps: f64, seed: u64) -> Result<MicroWindow> {
    let plan = scenario.micro_plan(eps)?;
    let positions = discretize_initial(&scenario.u0, eps, plan.first, plan.last)?;
    let types = sample_types(&scenario.dist, positions.len(), seed)?;
    let state = MicroState::new(positions, types, LeaderClosure::FreeFlow)?;
    let mut trajectory = integrate(
        &state,
        &scenario.dist,
        StepConfig {
            horizon: plan.horizon,
            dt: plan.dt,
            sample_every: plan.per_sample,
        },
    )?;
    trajectory.seed = Some(seed);
    Ok(MicroWindow {
        first_index: plan.first,
        trajectory,
    })
}

/// Reference solution of `u_t = F(u_x)` on the scenario window.
#[derive(Debug, Clone)]
pub struct Reference {
    pub field: GridField,
}

impl Reference {
    pub fn values(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        points.iter().map(|&(x, t)| self.field.interpolate(t, x)).collect()
    }
}

/// Solves the HJ equation on `[a, b + margin]` with spacing
/// `min eps / 2^refinement`; the margin keeps the right boundary out of
/// reach of the window during `t_macro`.
pub fn reference_solution(scenario: &Scenario, flux: &EffectiveFlux) -> Result<Reference> {
    let eps_min = scenario.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let dx = eps_min / f64::from(1u32 << scenario.refinement);
    let (a, b) = scenario.window;
    let lip = flux.lipschitz().max(1e-12);
    let margin = lip * scenario.t_macro + 4.0 * dx;
    let nx = ((b + margin - a) / dx).ceil() as usize;
    let grid = Grid1D::new(
        a,
        a + nx as f64 * dx,
        nx,
        scenario.t_macro,
        scenario.cfl_safety * dx / lip,
        Boundary::LinearExtension,
    )?
    .with_output_times(&scenario.lattice_times())?;
    let u0: Vec<f64> = grid.nodes().iter().map(|&x| scenario.u0.eval(x)).collect();
    Ok(Reference {
        field: solve_hj(&u0, flux, &grid)?,
    })
}

/// Result of one `(eps, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub epsilon: f64,
    pub seed: u64,
    pub sup_error: f64,
    /// Lattice quadrature of `|error|` over the window and horizon.
    pub l1_error: f64,
    /// Sup error restricted to `t = 0`.
    pub initial_error: f64,
    pub wall_time_s: f64,
    pub failure: Option<String>,
}

/// Per-`eps` aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSummary {
    pub epsilon: f64,
    pub mean_sup_error: f64,
    pub max_sup_error: f64,
    pub completed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub cells: Vec<CellResult>,
    pub summaries: Vec<EpsilonSummary>,
    pub trend_ok: bool,
    pub final_ok: bool,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub bridge: Option<BridgeReport>,
}

fn evaluate_cell(
    scenario: &Scenario,
    reference: &[f64],
    points: &[(f64, f64)],
    eps: f64,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let window = simulate_window(scenario, eps, seed)?;
    let micro = rescale_micro(&window, eps, points)?;
    let (nx, nt) = scenario.lattice;
    let cell = (scenario.window.1 - scenario.window.0) / nx as f64 * scenario.t_macro / nt as f64;
    let mut sup = 0.0f64;
    let mut l1 = 0.0;
    let mut initial = 0.0f64;
    for ((m, r), &(_, t)) in micro.iter().zip(reference).zip(points) {
        let e = (m - r).abs();
        sup = sup.max(e);
        l1 += e * cell;
        if t == 0.0 {
            initial = initial.max(e);
        }
    }
    Ok((sup, l1, initial))
}

/// Runs every `(eps, seed)` cell (in parallel) and grades the trend.
///
/// `on_cell` sees each cell as soon as it completes, in completion order.
pub fn convergence_study_with<F>(scenario: &Scenario, on_cell: F) -> Result<ConvergenceReport>
where
    F: Fn(&CellResult) + Sync,
{
    scenario.validate()?;
    let flux = build_flux(
        &scenario.dist,
        scenario.flux.p_max,
        scenario.flux.grid_points,
        scenario.flux.tol,
    )?;
    let reference = reference_solution(scenario, &flux)?;
    let points = scenario.lattice_points();
    let ref_values = reference.values(&points)?;
    let jobs: Vec<(f64, u64)> = scenario
        .epsilons
        .iter()
        .flat_map(|&e| scenario.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(eps, seed)| {
            let start = Instant::now();
            let outcome = evaluate_cell(scenario, &ref_values, &points, eps, seed);
            let wall_time_s = start.elapsed().as_secs_f64();
            let cell = match outcome {
                Ok((sup, l1, init)) => CellResult {
                    epsilon: eps,
                    seed,
                    sup_error: sup,
                    l1_error: l1,
                    initial_error: init,
                    wall_time_s,
                    failure: None,
                },
                Err(e) => CellResult {
                    epsilon: eps,
                    seed,
                    sup_error: f64::NAN,
                    l1_error: f64::NAN,
                    initial_error: f64::NAN,
                    wall_time_s,
                    failure: Some(e.to_string()),
                },
            };
            on_cell(&cell);
            cell
        })
        .collect();

    let summaries: Vec<EpsilonSummary> = scenario
        .epsilons
        .iter()
        .map(|&eps| {
            let errs: Vec<f64> = cells
                .iter()
                .filter(|c| c.epsilon == eps && c.failure.is_none())
                .map(|c| c.sup_error)
                .collect();
            let completed = errs.len();
            EpsilonSummary {
                epsilon: eps,
                mean_sup_error: if completed > 0 {
                    errs.iter().sum::<f64>() / completed as f64
                } else {
                    f64::NAN
                },
                max_sup_error: errs.iter().copied().fold(f64::NAN, f64::max),
                completed,
            }
        })
        .collect();
    let mut notes = Vec::new();
    let failed = cells.iter().filter(|c| c.failure.is_some()).count();
    if failed > 0 {
        notes.push(format!("{failed} of {} cells failed", cells.len()));
    }
    let maxes: Vec<f64> = summaries.iter().map(|s| s.max_sup_error).collect();
    let slack = 1.0 + scenario.thresholds.slack;
    let trend_ok = failed == 0 && maxes.windows(2).all(|w| w[1] <= slack * w[0]);
    if !trend_ok && failed == 0 {
        notes.push(format!(
            "max error not nonincreasing within {}% slack: {maxes:?}",
            100.0 * scenario.thresholds.slack
        ));
    }
    let first = maxes[0];
    let last = maxes[maxes.len() - 1];
    let mut final_ok = failed == 0;
    if let Some(bound) = scenario.thresholds.max_final_error {
        if !(last <= bound) {
            final_ok = false;
            notes.push(format!("final error {last} above {bound}"));
        }
    }
    if maxes.len() > 1 {
        if let Some(ratio) = scenario.thresholds.max_final_ratio {
            if !(last <= ratio * first) {
                final_ok = false;
                notes.push(format!("final/initial error ratio {} above {ratio}", last / first));
            }
        }
    }
    let verdict = if failed > 0 {
        Verdict::Fail
    } else if maxes.len() < 2 {
        notes.push("single epsilon: no trend to grade".into());
        Verdict::InsufficientData
    } else if trend_ok && final_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let bridge = if scenario.lwr_bridge {
        let dx = scenario.epsilons[scenario.epsilons.len() - 1];
        Some(lwr_bridge(
            &flux,
            &scenario.u0,
            scenario.window,
            scenario.t_macro,
            dx,
            scenario.cfl_safety,
        )?)
    } else {
        None
    };
    Ok(ConvergenceReport {
        cells,
        summaries,
        trend_ok,
        final_ok,
        verdict,
        notes,
        bridge,
    })
}

pub fn convergence_study(scenario: &Scenario) -> Result<ConvergenceReport> {
    convergence_study_with(scenario, |_| {})
}

/// Comparison of the two macroscopic routes to the density at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeReport {
    pub dx: f64,
    pub t: f64,
    /// Position interval on which the densities are compared.
    pub interval: (f64, f64),
    /// `sum |rho_hj - rho_lwr| dx` over that interval.
    pub l1: f64,
    /// `sum rho dx` change of the Godunov solution over the whole run.
    pub mass_change: f64,
}

/// Both solver runs behind a [`BridgeReport`].
#[derive(Debug, Clone)]
pub struct BridgeRun {
    pub report: BridgeReport,
    /// `u` on the label grid.
    pub hj: GridField,
    /// `rho` on the position grid.
    pub lwr: GridField,
    /// Push-forward of `u(., t)` on the comparison cells.
    pub pushed: Vec<f64>,
}

/// Pushes `u(., t)` from the HJ solver forward to a density and compares it
/// with the Godunov solution started from the push-forward of `u0`.
///
/// Labels run over `[a, b]` extended to the right by the HJ propagation
/// margin; positions over `[u0(a), u0(b)]`. The comparison interval stays a
/// distance `max|q'| t + 2 dx` inside both position ranges.
pub fn lwr_bridge(
    flux: &EffectiveFlux,
    u0: &InitialProfile,
    window: (f64, f64),
    t: f64,
    dx: f64,
    cfl_safety: f64,
) -> Result<BridgeReport> {
    Ok(lwr_bridge_run(flux, u0, window, t, dx, cfl_safety)?.report)
}

/// [`lwr_bridge`], keeping the solver output.
pub fn lwr_bridge_run(
    flux: &EffectiveFlux,
    u0: &InitialProfile,
    window: (f64, f64),
    t: f64,
    dx: f64,
    cfl_safety: f64,
) -> Result<BridgeRun> {
    let (a, b) = window;
    let (g_lo, g_hi) = u0.gradient_bounds(a, b);
    if !(g_lo > 0.0) {
        return Err(domain(format!(
            "push-forward needs 1/C <= u0' <= C on the window; min gradient is {g_lo}"
        )));
    }
    let lip = flux.lipschitz().max(1e-12);
    let label_margin = lip * t + 4.0 * dx;
    let nx = ((b + label_margin - a) / dx).ceil() as usize;
    let hj_grid = Grid1D::new(
        a,
        a + nx as f64 * dx,
        nx,
        t,
        cfl_safety * dx / lip,
        Boundary::LinearExtension,
    )?;
    let xs = hj_grid.nodes();
    let u_init: Vec<f64> = xs.iter().map(|&x| u0.eval(x)).collect();
    let hj = solve_hj(&u_init, flux, &hj_grid)?;
    let u_t = hj.last().to_vec();

    let (y0, y1) = (u0.eval(a), u0.eval(b));
    let ny = ((y1 - y0) / dx).floor() as usize;
    let q = DensityFlux::new(flux);
    let speed = q.max_speed_on(1.0 / g_hi, 1.0 / g_lo).max(1e-12);
    let lwr_grid = Grid1D::new(
        y0,
        y0 + ny as f64 * dx,
        ny,
        t,
        cfl_safety * dx / speed,
        Boundary::LinearExtension,
    )?;
    let rho0 = pushforward_density(&xs, &u_init, &lwr_grid)?;
    let lwr = solve_lwr_godunov(&rho0, flux, &lwr_grid)?;
    let mass_change = (lwr.last().iter().sum::<f64>() - rho0.iter().sum::<f64>()) * dx;

    let margin = speed * t + 2.0 * dx;
    let lo = (y0.max(u_t[0]) + margin - y0) / dx;
    let hi = (y1.min(u_t[u_t.len() - 1]) - margin - y0) / dx;
    let (j0, j1) = (lo.ceil() as usize, (hi.floor() as usize).min(ny));
    if j1 < j0 + 4 {
        return Err(config(format!("comparison interval too short for dx = {dx}, t = {t}")));
    }
    let sub = Grid1D::new(
        y0 + j0 as f64 * dx,
        y0 + j1 as f64 * dx,
        j1 - j0,
        t,
        lwr_grid.dt,
        Boundary::LinearExtension,
    )?;
    let rho_hj = pushforward_density(&xs, &u_t, &sub)?;
    let l1 = l1_distance(&rho_hj, &lwr.last()[j0..j1], dx);
    Ok(BridgeRun {
        report: BridgeReport {
            dx,
            t,
            interval: (sub.x_min, sub.x_max),
            l1,
            mass_change,
        },
        hj,
        lwr,
        pushed: rho_hj,
    })
}

/// One row of a fundamental-diagram study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramRow {
    pub p: f64,
    pub f_bar: f64,
    pub empirical_mean: f64,
    pub empirical_sd: f64,
    pub n_seeds: usize,
}

/// Long-time micro speeds at each headway in `p_list`, over `seeds`, next
/// to the tabulated `F(p)`.
pub fn fundamental_diagram_study(
    dist: &TypeDistribution,
    flux: &EffectiveFlux,
    p_list: &[f64],
    seeds: &[u64],
    probe: SpeedProbe,
) -> Result<Vec<DiagramRow>> {
    if seeds.is_empty() {
        return Err(config("at least one seed is required"));
    }
    let jobs: Vec<(usize, u64)> = (0..p_list.len())
        .flat_map(|k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let speeds: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, s)| asymptotic_speed(p_list[k], dist, s, probe))
        .collect::<Result<_>>()?;
    p_list
        .iter()
        .zip(speeds.chunks(seeds.len()))
        .map(|(&p, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok(DiagramRow {
                p,
                f_bar: flux.eval(p)?,
                empirical_mean: mean,
                empirical_sd: var.sqrt(),
                n_seeds: v.len(),
            })
        })
        .collect()
}


#[cfg(test)]
mod study_props {
    use super::*;
    use crate::velocity_models::VehicleTypeSpec;

    fn mix() -> TypeDistribution {
        TypeDistribution::new(vec![
            (VehicleTypeSpec::newell("A", 1.0, 1.0, 1.0).unwrap(), 0.5),
            (VehicleTypeSpec::newell("B", 2.0, 2.0, 0.5).unwrap(), 0.5),
        ])
        .unwrap()
    }

    fn ramp() -> InitialProfile {
        InitialProfile::SmoothRamp {
            p_left: 2.0,
            p_right: 4.0,
            center: 2.0,
            width: 0.5,
            offset: 0.0,
        }
    }

    #[test]
    fn lattice_values_do_not_depend_on_sampling_stride() {
        let mut s = Scenario::new(mix(), ramp(), (0.0, 4.0), 1.0, vec![0.1], vec![5]);
        s.lattice = (16, 4);
        let w = simulate_window(&s, 0.1, 5).unwrap();
        let plan = s.micro_plan(0.1).unwrap();
        assert!(plan.per_sample > 1);
        let dense = integrate(
            &MicroState::new(
                discretize_initial(&s.u0, 0.1, plan.first, plan.last).unwrap(),
                w.trajectory.type_indices.clone(),
                LeaderClosure::FreeFlow,
            )
            .unwrap(),
            &s.dist,
            StepConfig {
                horizon: plan.horizon,
                dt: plan.dt,
                sample_every: 1,
            },
        )
        .unwrap();
        let dense = MicroWindow {
            first_index: w.first_index,
            trajectory: dense,
        };
        let pts = s.lattice_points();
        assert_eq!(
            rescale_micro(&w, 0.1, &pts).unwrap(),
            rescale_micro(&dense, 0.1, &pts).unwrap()
        );
    }

    #[test]
    fn study_is_deterministic_given_seeds() {
        let s = Scenario::new(mix(), ramp(), (0.0, 4.0), 1.0, vec![0.2, 0.1], vec![1, 2]);
        let strip = |r: ConvergenceReport| -> Vec<_> {
            r.cells
                .into_iter()
                .map(|c| (c.epsilon, c.seed, c.sup_error, c.l1_error, c.initial_error, c.failure))
                .collect()
        };
        let a = strip(convergence_study(&s).unwrap());
        let b = strip(convergence_study(&s).unwrap());
        assert_eq!(a, b);
        let mut t = s.clone();
        t.seeds = vec![3, 4];
        assert_ne!(a, strip(convergence_study(&t).unwrap()));
    }
}
