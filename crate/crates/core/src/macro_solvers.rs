//! Macroscopic solvers.
//!
//! * `u_t = F(u_x)` on grid nodes with the upwind update
//!   `u_j += dt F((u_{j+1} - u_j) / dx)`. Because `F` is nondecreasing the
//!   update is nondecreasing in `u_{j+1}`, and in `u_j` once
//!   `dt Lip(F) <= dx`, so the scheme is monotone.
//! * `rho_t + q(rho)_x = 0` with `q(rho) = rho F(1/rho)` on cell averages,
//!   using the Godunov flux `min q` over `[rho_L, rho_R]` when
//!   `rho_L <= rho_R` and `max q` over `[rho_R, rho_L]` otherwise. No
//!   convexity of `q` is assumed.
//! * The bridge between the two: the spatial inverse `w = u^{-1}` and the
//!   push-forward density `rho = w_y`.

use std::io::Write;

use crate::effective_flux::EffectiveFlux;
use crate::error::{config, domain, Result};

/// Boundary treatment for both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// HJ: the ghost node continues the last gradient. LWR: the ghost cell
    /// repeats the edge density (the same thing seen through `rho = 1/u_x`).
    LinearExtension,
    /// HJ: gradients are periodic (`u` itself gains a constant per period).
    /// LWR: densities are periodic.
    Periodic,
}

/// Uniform space-time grid.
///
/// HJ fields live on the `nx + 1` nodes `x_min + j dx`; LWR fields on the
/// `nx` cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_final: f64,
    pub dt: f64,
    pub boundary: Boundary,
    /// Times at which snapshots are stored, besides `t = 0` and `t_final`.
    pub output_times: Vec<f64>,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_final: f64, dt: f64, boundary: Boundary) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(config(format!("bad spatial interval [{x_min}, {x_max}]")));
        }
        if nx < 4 {
            return Err(config(format!("grid needs at least 4 cells, got {nx}")));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(config(format!("bad horizon {t_final}")));
        }
        if !(dt > 0.0) {
            return Err(config(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            t_final,
            dt,
            boundary,
            output_times: Vec::new(),
        })
    }

    /// Grid whose `dt` is `safety * dx / speed`, the CFL step for a
    /// characteristic speed bound `speed`.
    pub fn with_cfl(
        x_min: f64,
        x_max: f64,
        nx: usize,
        t_final: f64,
        speed: f64,
        safety: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let dx = (x_max - x_min) / nx as f64;
        let dt = if speed > 0.0 { safety * dx / speed } else { dx };
        Self::new(x_min, x_max, nx, t_final, dt, boundary)
    }

    pub fn with_output_times(mut self, times: &[f64]) -> Result<Self> {
        if let Some(t) = times.iter().find(|&&t| !(t >= 0.0 && t <= self.t_final)) {
            return Err(config(format!("output time {t} outside [0, {}]", self.t_final)));
        }
        self.output_times = times.to_vec();
        Ok(self)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..=self.nx)
            .map(|j| {
                if j == self.nx {
                    self.x_max
                } else {
                    self.x_min + j as f64 * dx
                }
            })
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|j| self.x_min + (j as f64 + 0.5) * dx).collect()
    }

    /// Snapshot schedule: sorted, deduplicated, starting at 0 and ending at
    /// `t_final`.
    fn schedule(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = std::iter::once(0.0)
            .chain(self.output_times.iter().copied())
            .chain(std::iter::once(self.t_final))
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Runs `step(h)` with steps of at most `dt` landing exactly on each
    /// scheduled time, and records snapshots via `record`.
    fn march<S>(&self, state: &mut S, mut step: impl FnMut(&mut S, f64), mut record: impl FnMut(&S, f64)) {
        let ts = self.schedule();
        record(state, ts[0]);
        for w in ts.windows(2) {
            let span = w[1] - w[0];
            let m = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / m as f64;
            for _ in 0..m {
                step(state, h);
            }
            record(state, w[1]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Cumulative vehicle label `u(x, t)` at grid nodes.
    HjU,
    /// Density `rho(x, t)` at cell centers.
    LwrRho,
}

/// Stored snapshots of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid1D,
    pub kind: FieldKind,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Number of negative initial gradients clamped to 0 (HJ only).
    pub clamped_gradients: usize,
}

impl GridField {
    pub fn positions(&self) -> Vec<f64> {
        match self.kind {
            FieldKind::HjU => self.grid.nodes(),
            FieldKind::LwrRho => self.grid.centers(),
        }
    }

    /// Snapshot stored at time `t` (matched to 1e-12 relative).
    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|k| self.values[k].as_slice())
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("at least the initial snapshot")
    }

    /// Linear interpolation in space of the snapshot at `t`.
    pub fn interpolate(&self, t: f64, x: f64) -> Result<f64> {
        let snap = self
            .at(t)
            .ok_or_else(|| domain(format!("no snapshot stored at t = {t}")))?;
        let xs = self.positions();
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
            return Err(domain(format!("x = {x} outside [{lo}, {hi}]")));
        }
        let k = xs.partition_point(|&s| s <= x).clamp(1, xs.len() - 1);
        let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        Ok(snap[k - 1] + w * (snap[k] - snap[k - 1]))
    }

    /// CSV with columns `t,x,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,value")?;
        let xs = self.positions();
        for (t, snap) in self.times.iter().zip(&self.values) {
            for (x, v) in xs.iter().zip(snap) {
                writeln!(out, "{t},{x},{v}")?;
            }
            // Blank line between time blocks for gnuplot.
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Smallest and largest adjacent slope of a sampled profile.
pub fn gradient_bounds(xs: &[f64], us: &[f64]) -> (f64, f64) {
    xs.windows(2)
        .zip(us.windows(2))
        .map(|(x, u)| (u[1] - u[0]) / (x[1] - x[0]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)))
}

fn cfl_check(what: &str, dt: f64, speed: f64, dx: f64) -> Result<()> {
    if dt * speed > dx * (1.0 + 1e-12) {
        return Err(config(format!(
            "{what}: CFL violated, dt * speed = {} > dx = {dx} (speed {speed}, max dt {})",
            dt * speed,
            dx / speed
        )));
    }
    Ok(())
}

/// Solves `u_t = F(u_x)` from node values `u0` (length `nx + 1`).
///
/// Negative initial gradients are clamped to 0 inside `F` and counted in
/// [`GridField::clamped_gradients`]. Fails if `dt Lip(F) > dx` on the
/// initial gradient range, which the scheme leaves invariant.
pub fn solve_hj(u0: &[f64], flux: &EffectiveFlux, grid: &Grid1D) -> Result<GridField> {
    let n = grid.nx;
    if u0.len() != n + 1 {
        return Err(domain(format!("HJ data needs {} node values, got {}", n + 1, u0.len())));
    }
    if let Some(j) = u0.iter().position(|u| !u.is_finite()) {
        return Err(domain(format!("initial value at node {j} is not finite")));
    }
    let dx = grid.dx();
    let periodic = grid.boundary == Boundary::Periodic;
    let grads: Vec<f64> = u0.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    let clamped_gradients = grads.iter().filter(|&&g| g < 0.0).count();
    let g_lo = grads.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let g_hi = grads.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    cfl_check("Hamilton-Jacobi", grid.dt, flux.lipschitz_on(g_lo, g_hi), dx)?;

    let mut u = u0.to_vec();
    let mut next = vec![0.0; n + 1];
    let mut times = Vec::new();
    let mut values = Vec::new();
    grid.march(
        &mut u,
        |u, h| {
            for j in 0..n {
                next[j] = u[j] + h * flux.speed(((u[j + 1] - u[j]) / dx).max(0.0));
            }
            let ghost_grad = if periodic {
                (u[1] - u[0]) / dx
            } else {
                (u[n] - u[n - 1]) / dx
            };
            next[n] = u[n] + h * flux.speed(ghost_grad.max(0.0));
            std::mem::swap(u, &mut next);
        },
        |u, t| {
            times.push(t);
            values.push(u.clone());
        },
    );
    Ok(GridField {
        grid: grid.clone(),
        kind: FieldKind::HjU,
        times,
        values,
        clamped_gradients,
    })
}

/// Piecewise-linear view of `q(rho) = rho F(1/rho)`.
///
/// Linear interpolation of `F` in `p` between nodes `p_k < p_{k+1}` makes `q`
/// exactly linear in `rho` between `1/p_{k+1}` and `1/p_k`, so `q` is
/// determined by its values at `rho_k = 1/p_k` and at `rho = 0`. Beyond the
/// largest breakpoint `q` vanishes.
#[derive(Debug, Clone)]
pub struct DensityFlux {
    rho: Vec<f64>,
    q: Vec<f64>,
}

impl DensityFlux {
    pub fn new(flux: &EffectiveFlux) -> Self {
        let mut rho = vec![0.0];
        let mut q = vec![0.0];
        for (&p, &f) in flux.p_grid().iter().zip(flux.values()).rev() {
            if p > 0.0 {
                rho.push(1.0 / p);
                q.push(f / p);
            }
        }
        Self { rho, q }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.rho.len();
        if r >= self.rho[n - 1] {
            return self.q[n - 1];
        }
        if r <= 0.0 {
            return 0.0;
        }
        let k = self.rho.partition_point(|&s| s <= r);
        let (r0, r1) = (self.rho[k - 1], self.rho[k]);
        self.q[k - 1] + (self.q[k] - self.q[k - 1]) * (r - r0) / (r1 - r0)
    }

    /// Min (or max) of `q` over `[a, b]`, `a <= b`: attained at an endpoint or
    /// a breakpoint.
    fn extremum(&self, a: f64, b: f64, minimum: bool) -> f64 {
        let pick = |x: f64, y: f64| if minimum { x.min(y) } else { x.max(y) };
        let mut best = pick(self.eval(a), self.eval(b));
        let lo = self.rho.partition_point(|&s| s <= a);
        let hi = self.rho.partition_point(|&s| s < b);
        for k in lo..hi {
            best = pick(best, self.q[k]);
        }
        best
    }

    /// Godunov interface flux.
    #[inline]
    pub fn godunov(&self, left: f64, right: f64) -> f64 {
        if left <= right {
            self.extremum(left, right, true)
        } else {
            self.extremum(right, left, false)
        }
    }

    /// Largest `|q'|` over segments meeting `[a, b]`.
    pub fn max_speed_on(&self, a: f64, b: f64) -> f64 {
        self.rho
            .windows(2)
            .zip(self.q.windows(2))
            .filter(|(r, _)| r[1] >= a && r[0] <= b)
            .map(|(r, q)| ((q[1] - q[0]) / (r[1] - r[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `rho_t + q(rho)_x = 0` from cell averages `rho0` (length `nx`).
pub fn solve_lwr_godunov(rho0: &[f64], flux: &EffectiveFlux, grid: &Grid1D) -> Result<GridField> {
    let n = grid.nx;
    if rho0.len() != n {
        return Err(domain(format!("LWR data needs {n} cell values, got {}", rho0.len())));
    }
    if let Some(j) = rho0.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(domain(format!(
            "density at cell {j} is {} (must be finite and >= 0)",
            rho0[j]
        )));
    }
    let q = DensityFlux::new(flux);
    let dx = grid.dx();
    let lo = rho0.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rho0.iter().copied().fold(0.0, f64::max);
    cfl_check("Godunov", grid.dt, q.max_speed_on(lo, hi), dx)?;

    let periodic = grid.boundary == Boundary::Periodic;
    let mut rho = rho0.to_vec();
    let mut fluxes = vec![0.0; n + 1];
    let mut times = Vec::new();
    let mut values = Vec::new();
    grid.march(
        &mut rho,
        |rho, h| {
            // Interface j sits between cells j-1 and j.
            let (ghost_l, ghost_r) = if periodic {
                (rho[n - 1], rho[0])
            } else {
                (rho[0], rho[n - 1])
            };
            fluxes[0] = q.godunov(ghost_l, rho[0]);
            for j in 1..n {
                fluxes[j] = q.godunov(rho[j - 1], rho[j]);
            }
            fluxes[n] = if periodic {
                fluxes[0]
            } else {
                q.godunov(rho[n - 1], ghost_r)
            };
            let c = h / dx;
            for j in 0..n {
                rho[j] -= c * (fluxes[j + 1] - fluxes[j]);
            }
        },
        |rho, t| {
            times.push(t);
            values.push(rho.clone());
        },
    );
    Ok(GridField {
        grid: grid.clone(),
        kind: FieldKind::LwrRho,
        times,
        values,
        clamped_gradients: 0,
    })
}

fn check_increasing(us: &[f64]) -> Result<()> {
    if let Some(j) = us.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(domain(format!(
            "profile not strictly increasing at index {j} ({} then {})",
            us[j],
            us[j + 1]
        )));
    }
    Ok(())
}

/// Spatial inverse `w = u^{-1}` of the piecewise-linear profile through
/// `(xs, us)`, sampled at the nodes of `target`.
pub fn invert_profile(xs: &[f64], us: &[f64], target: &Grid1D) -> Result<Vec<f64>> {
    if xs.len() != us.len() || xs.len() < 2 {
        return Err(domain("profile needs matching abscissae and values (at least 2)"));
    }
    check_increasing(us)?;
    let (u_lo, u_hi) = (us[0], us[us.len() - 1]);
    let slack = 1e-12 * u_lo.abs().max(u_hi.abs()).max(1.0);
    target
        .nodes()
        .into_iter()
        .map(|y| {
            if !(y >= u_lo - slack && y <= u_hi + slack) {
                return Err(domain(format!(
                    "target point {y} outside profile range [{u_lo}, {u_hi}]"
                )));
            }
            let k = us.partition_point(|&u| u <= y).clamp(1, us.len() - 1);
            let s = (y - us[k - 1]) / (us[k] - us[k - 1]);
            Ok(xs[k - 1] + s * (xs[k] - xs[k - 1]))
        })
        .collect()
}

/// Cell-averaged density of the push-forward of `dx` by `u` on the cells of
/// `target`: `(w(y_{j+1}) - w(y_j)) / dy`. Summing over cells gives exactly
/// `w(y_max) - w(y_min)`.
pub fn pushforward_density(xs: &[f64], us: &[f64], target: &Grid1D) -> Result<Vec<f64>> {
    let w = invert_profile(xs, us, target)?;
    let dy = target.dx();
    Ok(w.windows(2).map(|p| (p[1] - p[0]) / dy).collect())
}

/// L1 distance `sum |a - b| dx`.
pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective_flux::build_flux;
    use crate::velocity_models::{TypeDistribution, VehicleTypeSpec};

    fn flux_a() -> EffectiveFlux {
        let d = TypeDistribution::single(VehicleTypeSpec::newell("A", 1.0, 1.0, 1.0).unwrap());
        build_flux(&d, 12.0, 1201, 1e-12).unwrap()
    }

    fn flux_mix() -> EffectiveFlux {
        let d = TypeDistribution::new(vec![
            (VehicleTypeSpec::newell("A", 1.0, 1.0, 1.0).unwrap(), 0.5),
            (VehicleTypeSpec::newell("B", 2.0, 2.0, 0.5).unwrap(), 0.5),
        ])
        .unwrap();
        build_flux(&d, 12.0, 1201, 1e-12).unwrap()
    }

    #[test]
    fn affine_is_exact() {
        let flux = flux_mix();
        let grid = Grid1D::with_cfl(-5.0, 5.0, 200, 3.0, flux.lipschitz(), 0.9, Boundary::LinearExtension)
            .unwrap()
            .with_output_times(&[1.0, 2.0])
            .unwrap();
        let p = 3.0;
        let u0: Vec<f64> = grid.nodes().iter().map(|x| p * x + 0.7).collect();
        let sol = solve_hj(&u0, &flux, &grid).unwrap();
        assert_eq!(sol.times, vec![0.0, 1.0, 2.0, 3.0]);
        let fp = flux.eval(p).unwrap();
        for (t, snap) in sol.times.iter().zip(&sol.values) {
            for (x, u) in grid.nodes().iter().zip(snap) {
                let exact = p * x + 0.7 + t * fp;
                assert!((u - exact).abs() <= 1e-12 * exact.abs().max(1.0), "t={t} x={x}");
            }
        }
    }

    #[test]
    fn frozen_below_mean_jam_headway() {
        let flux = flux_mix();
        let grid = Grid1D::new(0.0, 10.0, 100, 5.0, 0.05, Boundary::LinearExtension).unwrap();
        let u0: Vec<f64> = grid.nodes().iter().map(|x| 1.2 * x + 0.1 * (x * 0.3).sin()).collect();
        let sol = solve_hj(&u0, &flux, &grid).unwrap();
        assert_eq!(sol.last(), u0.as_slice());
    }

    #[test]
    fn cfl_and_input_errors() {
        let flux = flux_a();
        let grid = Grid1D::new(0.0, 1.0, 10, 1.0, 0.5, Boundary::LinearExtension).unwrap();
        let u0: Vec<f64> = grid.nodes().iter().map(|x| 2.0 * x).collect();
        assert!(matches!(solve_hj(&u0, &flux, &grid), Err(crate::Error::Config(_))));
        assert!(solve_hj(&u0[1..], &flux, &grid).is_err());
        let rho0 = vec![0.3; 10];
        assert!(matches!(
            solve_lwr_godunov(&rho0, &flux, &grid),
            Err(crate::Error::Config(_))
        ));
        let grid = Grid1D::new(0.0, 1.0, 10, 1.0, 0.01, Boundary::LinearExtension).unwrap();
        let mut bad = vec![0.3; 10];
        bad[3] = -0.1;
        assert!(matches!(
            solve_lwr_godunov(&bad, &flux, &grid),
            Err(crate::Error::Domain(_))
        ));
        assert!(Grid1D::new(0.0, 1.0, 3, 1.0, 0.1, Boundary::Periodic).is_err());
    }

    #[test]
    fn negative_gradients_are_clamped_and_counted() {
        let flux = flux_a();
        let grid = Grid1D::new(0.0, 10.0, 50, 1.0, 0.1, Boundary::LinearExtension).unwrap();
        let u0: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| if x < 5.0 { -x } else { 3.0 * x - 20.0 })
            .collect();
        let sol = solve_hj(&u0, &flux, &grid).unwrap();
        assert_eq!(sol.clamped_gradients, 25);
    }

    #[test]
    fn hj_comparison_and_gradient_range() {
        let flux = flux_mix();
        let grid = Grid1D::with_cfl(0.0, 10.0, 200, 4.0, flux.lipschitz(), 0.9, Boundary::LinearExtension).unwrap();
        let xs = grid.nodes();
        let u0: Vec<f64> = xs.iter().map(|x| 2.0 * x + (x * 1.3).sin()).collect();
        let v0: Vec<f64> = xs
            .iter()
            .zip(&u0)
            .map(|(x, u)| u + 0.2 + 0.1 * (x * 0.7).cos())
            .collect();
        let a = solve_hj(&u0, &flux, &grid.clone().with_output_times(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        let b = solve_hj(&v0, &flux, &grid.clone().with_output_times(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        let (g_lo, g_hi) = gradient_bounds(&xs, &u0);
        for (sa, sb) in a.values.iter().zip(&b.values) {
            assert!(sa.iter().zip(sb).all(|(x, y)| x <= y));
            let (lo, hi) = gradient_bounds(&xs, sa);
            assert!(lo >= g_lo - 1e-9 && hi <= g_hi + 1e-9);
        }
    }

    #[test]
    fn riemann_hj_self_convergence() {
        let flux = flux_a();
        let (p1, p2) = (1.5, 4.0);
        let run = |nx: usize, dt: f64| {
            let grid = Grid1D::new(-10.0, 10.0, nx, 2.0, dt, Boundary::LinearExtension).unwrap();
            let u0: Vec<f64> = grid.nodes().iter().map(|&x| (p1 * x).max(p2 * x)).collect();
            solve_hj(&u0, &flux, &grid).unwrap()
        };
        let dx = 0.1;
        let dt = 0.9 * dx / flux.lipschitz();
        let coarse = run(200, dt);
        let fine = run(800, dt / 4.0);
        let err = coarse
            .positions()
            .iter()
            .zip(coarse.last())
            .map(|(&x, u)| (u - fine.interpolate(2.0, x).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2.0 * dx, "sup error {err}");
    }

    #[test]
    fn density_flux_matches_direct_evaluation() {
        let flux = flux_mix();
        let q = DensityFlux::new(&flux);
        for k in 0..3000 {
            let r = k as f64 / 2000.0;
            assert!((q.eval(r) - flux.lwr_flow(r).unwrap()).abs() < 1e-12, "rho={r}");
        }
        // Interval extremum brute force.
        let dense: Vec<f64> = (0..=4000).map(|k| k as f64 / 4000.0).collect();
        for &(a, b) in &[(0.05, 0.6), (0.2, 0.3), (0.3, 0.9), (0.0, 1.0)] {
            let vals: Vec<f64> = dense
                .iter()
                .filter(|&&r| r >= a && r <= b)
                .map(|&r| q.eval(r))
                .collect();
            let mx = vals.iter().copied().fold(f64::MIN, f64::max);
            let mn = vals.iter().copied().fold(f64::MAX, f64::min);
            assert!(q.godunov(b, a) >= mx - 1e-12);
            assert!(q.godunov(a, b) <= mn + 1e-12);
            assert!((q.godunov(b, a) - mx).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_and_jam_states_stay() {
        let flux = flux_mix();
        let grid = Grid1D::new(0.0, 10.0, 100, 5.0, 0.05, Boundary::LinearExtension).unwrap();
        for rho in [0.3, 1.0 / flux.h0_bar()] {
            let sol = solve_lwr_godunov(&vec![rho; 100], &flux, &grid).unwrap();
            assert!(sol.last().iter().all(|&r| (r - rho).abs() < 1e-14));
        }
    }

    #[test]
    fn periodic_mass_conservation() {
        let flux = flux_mix();
        let grid = Grid1D::new(0.0, 20.0, 400, 50.0, 0.025, Boundary::Periodic)
            .unwrap()
            .with_output_times(&(1..50).map(|k| k as f64).collect::<Vec<_>>())
            .unwrap();
        let rho0: Vec<f64> = grid
            .centers()
            .iter()
            .map(|x| 0.35 + 0.25 * (x * std::f64::consts::PI / 10.0).sin())
            .collect();
        let sol = solve_lwr_godunov(&rho0, &flux, &grid).unwrap();
        let mass0: f64 = rho0.iter().sum::<f64>() * grid.dx();
        let steps = (50.0 / 0.025_f64).round();
        for snap in &sol.values {
            let m: f64 = snap.iter().sum::<f64>() * grid.dx();
            assert!((m - mass0).abs() <= 1e-12 * steps.max(1.0));
            assert!(snap.iter().all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn inversion_examples() {
        let grid = Grid1D::new(0.0, 10.0, 10, 1.0, 0.1, Boundary::LinearExtension).unwrap();
        let xs: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let us: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let w = invert_profile(&xs, &us, &grid).unwrap();
        for (y, w) in grid.nodes().iter().zip(&w) {
            assert!((w - y / 2.0).abs() < 1e-14);
        }
        let rho = pushforward_density(&xs, &us, &grid).unwrap();
        assert!(rho.iter().all(|r| (r - 0.5).abs() < 1e-14));

        let (p, c) = (1.7, -3.0);
        let us: Vec<f64> = xs.iter().map(|x| p * x + c).collect();
        let grid = Grid1D::new(-2.0, 13.0, 30, 1.0, 0.1, Boundary::LinearExtension).unwrap();
        let w = invert_profile(&xs, &us, &grid).unwrap();
        for (y, w) in grid.nodes().iter().zip(&w) {
            assert!((w - (y - c) / p).abs() < 1e-13);
        }
        let rho = pushforward_density(&xs, &us, &grid).unwrap();
        assert!(rho.iter().all(|r| (r - 1.0 / p).abs() < 1e-12));
    }

    #[test]
    fn inversion_errors() {
        let grid = Grid1D::new(0.0, 1.0, 4, 1.0, 0.1, Boundary::LinearExtension).unwrap();
        let xs = [0.0, 1.0, 2.0, 3.0];
        match invert_profile(&xs, &[0.0, 1.0, 1.0, 2.0], &grid) {
            Err(crate::Error::Domain(msg)) => assert!(msg.contains("index 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(invert_profile(&xs, &[0.5, 1.0, 1.5, 2.0], &grid).is_err());
    }
}
