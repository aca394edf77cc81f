//! Follow-the-leader integration.
//!
//! Vehicle `i` moves at `V_{Z_i}(U_{i+1} - U_i)`. The window `0..=N` is
//! closed at the top by a [`LeaderClosure`]. Time stepping is explicit Euler
//! with `dt * alpha <= 1`, which makes one step a nondecreasing map of every
//! position, so ordered data stay ordered (discrete comparison principle).
//! A step only reads the car directly ahead, so the closure can influence
//! car `i` no earlier than after `N - i` steps.

use std::io::Write;

use crate::error::{config, domain, Result};
use crate::velocity_models::{sample_types, TypeDistribution};

/// How the top vehicle `N` moves.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderClosure {
    /// The leader drives at the `v_max` of its own type.
    FreeFlow,
    /// Leader position read from a nondecreasing piecewise-linear table of
    /// `(time, position)`; constant before the first and after the last
    /// entry.
    PrescribedTrajectory { times: Vec<f64>, positions: Vec<f64> },
    /// A virtual car sits a fixed gap ahead of the leader.
    GhostHeadway(f64),
}

impl LeaderClosure {
    pub fn prescribed(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(domain("prescribed leader trajectory is empty"));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return Err(domain(
                "prescribed leader trajectory needs increasing times and nondecreasing positions",
            ));
        }
        Ok(LeaderClosure::PrescribedTrajectory {
            times: samples.iter().map(|s| s.0).collect(),
            positions: samples.iter().map(|s| s.1).collect(),
        })
    }

    fn prescribed_position(times: &[f64], positions: &[f64], t: f64) -> f64 {
        let k = times.partition_point(|&s| s <= t);
        if k == 0 {
            positions[0]
        } else if k == times.len() {
            positions[k - 1]
        } else {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            positions[k - 1] + w * (positions[k] - positions[k - 1])
        }
    }
}

/// Positions and frozen types of vehicles `0..=N` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub positions: Vec<f64>,
    pub type_indices: Vec<usize>,
    pub time: f64,
    pub leader: LeaderClosure,
}

impl MicroState {
    pub fn new(positions: Vec<f64>, type_indices: Vec<usize>, leader: LeaderClosure) -> Result<Self> {
        let state = Self {
            positions,
            type_indices,
            time: 0.0,
            leader,
        };
        state.check_shape()?;
        Ok(state)
    }

    fn check_shape(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(domain("micro state has no vehicles"));
        }
        if self.positions.len() != self.type_indices.len() {
            return Err(domain(format!(
                "{} positions but {} types",
                self.positions.len(),
                self.type_indices.len()
            )));
        }
        if let Some(i) = self.positions.iter().position(|x| !x.is_finite()) {
            return Err(domain(format!("position {i} is not finite")));
        }
        if let Some(i) = self.positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(domain(format!(
                "positions must increase strictly: U_{} = {} >= U_{} = {}",
                i,
                self.positions[i],
                i + 1,
                self.positions[i + 1]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Step control for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Keep every `sample_every`-th step; the final step is always kept.
    pub sample_every: usize,
}

impl StepConfig {
    /// Half of the largest monotone step, `dt = 0.5 / alpha`.
    pub fn default_dt(dist: &TypeDistribution) -> f64 {
        0.5 / dist.alpha()
    }
}

/// Sampled solution of the car-following system.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub type_indices: Vec<usize>,
    pub leader: LeaderClosure,
    pub dt: f64,
    pub seed: Option<u64>,
}

impl MicroTrajectory {
    pub fn final_positions(&self) -> &[f64] {
        self.snapshots
            .last()
            .expect("trajectory has at least the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial snapshot")
    }

    /// Position of vehicle `i` at time `t`, linear in time between samples.
    pub fn position_at(&self, i: usize, t: f64) -> Result<f64> {
        if i >= self.type_indices.len() {
            return Err(domain(format!(
                "vehicle {i} outside window of {}",
                self.type_indices.len()
            )));
        }
        let (t0, t1) = (self.times[0], self.final_time());
        if !(t >= t0 - 1e-9 * t1.abs().max(1.0) && t <= t1 + 1e-9 * t1.abs().max(1.0)) {
            return Err(domain(format!("time {t} outside trajectory span [{t0}, {t1}]")));
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Ok(self.snapshots[0][i]);
        }
        if k == self.times.len() {
            return Ok(self.snapshots[k - 1][i]);
        }
        let (s0, s1) = (self.times[k - 1], self.times[k]);
        let w = (t - s0) / (s1 - s0);
        let (a, b) = (self.snapshots[k - 1][i], self.snapshots[k][i]);
        Ok(a + w * (b - a))
    }

    /// CSV with columns `t,i,U_i,type`, one row per sampled `(t, i)`.
    pub fn write_csv<W: Write>(&self, dist: &TypeDistribution, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,i,U_i,type")?;
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            for (i, (x, z)) in snap.iter().zip(&self.type_indices).enumerate() {
                writeln!(out, "{t},{i},{x},{}", dist.spec(*z).id())?;
            }
        }
        Ok(())
    }
}

/// One forward-Euler step of the whole window, in place.
#[inline]
fn euler_step(
    positions: &mut [f64],
    types: &[usize],
    dist: &TypeDistribution,
    leader: &LeaderClosure,
    t: f64,
    dt: f64,
) {
    let n = positions.len() - 1;
    // Ascending order reads the old position of car i+1 before it moves.
    for i in 0..n {
        let gap = positions[i + 1] - positions[i];
        positions[i] += dt * dist.spec(types[i]).velocity(gap);
    }
    let spec = dist.spec(types[n]);
    match leader {
        LeaderClosure::FreeFlow => positions[n] += dt * spec.v_max(),
        LeaderClosure::GhostHeadway(g) => positions[n] += dt * spec.velocity(*g),
        LeaderClosure::PrescribedTrajectory {
            times,
            positions: track,
        } => {
            let target = LeaderClosure::prescribed_position(times, track, t + dt);
            positions[n] = positions[n].max(target);
        }
    }
}

/// Integrates the car-following system from `initial` over `[0, horizon]`.
///
/// Steps have size `dt` except possibly a shorter last one that lands on
/// `horizon`. Fails if `dt * alpha > 1` or the initial positions are not
/// strictly increasing.
pub fn integrate(initial: &MicroState, dist: &TypeDistribution, steps: StepConfig) -> Result<MicroTrajectory> {
    initial.check_shape()?;
    if let Some(&z) = initial.type_indices.iter().find(|&&z| z >= dist.len()) {
        return Err(domain(format!(
            "type index {z} outside distribution of {} types",
            dist.len()
        )));
    }
    let StepConfig {
        horizon,
        dt,
        sample_every,
    } = steps;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(config(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0) {
        return Err(config(format!("time step must be positive, got {dt}")));
    }
    if dt * dist.alpha() > 1.0 {
        return Err(config(format!(
            "dt = {dt} violates the monotone step bound dt * alpha <= 1 (alpha = {}, max dt = {})",
            dist.alpha(),
            1.0 / dist.alpha()
        )));
    }
    if let LeaderClosure::GhostHeadway(g) = initial.leader {
        if !(g >= 0.0) {
            return Err(domain(format!("ghost headway must be >= 0, got {g}")));
        }
    }
    let sample_every = sample_every.max(1);
    let n_steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;

    let mut positions = initial.positions.clone();
    let t_start = initial.time;
    let mut times = vec![t_start];
    let mut snapshots = vec![positions.clone()];
    for k in 0..n_steps {
        let t = t_start + k as f64 * dt;
        let h = if k + 1 == n_steps { horizon - k as f64 * dt } else { dt };
        euler_step(&mut positions, &initial.type_indices, dist, &initial.leader, t, h);
        if (k + 1) % sample_every == 0 || k + 1 == n_steps {
            times.push(if k + 1 == n_steps { t_start + horizon } else { t + h });
            snapshots.push(positions.clone());
        }
    }
    Ok(MicroTrajectory {
        times,
        snapshots,
        type_indices: initial.type_indices.clone(),
        leader: initial.leader.clone(),
        dt,
        seed: None,
    })
}

/// Positions `c_i` where every vehicle drives at exactly `theta`:
/// `c_0 = 0`, `c_{i+1} = c_i + V_{Z_i}^{-1}(theta)`.
///
/// Returns one position per entry of `type_indices`; the last type only
/// matters for the leader closure.
pub fn corrector_sequence(type_indices: &[usize], dist: &TypeDistribution, theta: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta < dist.v_max_under()) {
        return Err(domain(format!(
            "corrector speed must lie in (0, {}), got {theta}",
            dist.v_max_under()
        )));
    }
    if type_indices.is_empty() {
        return Err(domain("corrector needs at least one vehicle"));
    }
    let mut c = Vec::with_capacity(type_indices.len());
    let mut x = 0.0;
    c.push(x);
    for &z in &type_indices[..type_indices.len() - 1] {
        x += dist.spec(z).inverse_unchecked(theta);
        c.push(x);
    }
    Ok(c)
}

/// Micro state travelling at speed `theta`: corrector positions and a ghost
/// leader holding its own corrector gap.
pub fn corrector_state(type_indices: Vec<usize>, dist: &TypeDistribution, theta: f64) -> Result<MicroState> {
    let positions = corrector_sequence(&type_indices, dist, theta)?;
    let top = *type_indices.last().expect("non-empty after corrector_sequence");
    let gap = dist.spec(top).inverse_unchecked(theta);
    MicroState::new(positions, type_indices, LeaderClosure::GhostHeadway(gap))
}

/// Setup of a linear-data run `U_i(0) = p i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedProbe {
    pub vehicles: usize,
    pub horizon: f64,
    pub dt: f64,
}

/// Estimates the long-time speed `U_0(T)/T` from linear initial data with
/// headway `p` and i.i.d. types drawn with `seed`.
///
/// Requires `v_max_global * T < (N/2) p` so the top closure cannot reach
/// vehicle 0. When `p` is at most every jam headway nothing ever moves and the
/// result is exactly 0 without simulating.
pub fn asymptotic_speed(p: f64, dist: &TypeDistribution, seed: u64, probe: SpeedProbe) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(domain(format!("headway must be >= 0, got {p}")));
    }
    if p <= dist.min_h0() {
        return Ok(0.0);
    }
    let SpeedProbe { vehicles, horizon, dt } = probe;
    let reach = dist.v_max_global() * horizon;
    if !(reach < 0.5 * vehicles as f64 * p) {
        let needed = (2.0 * reach / p).floor() as usize + 1;
        return Err(config(format!(
            "{vehicles} vehicles cannot insulate vehicle 0 from the leader over {horizon} s at headway {p}; need N >= {needed}"
        )));
    }
    let types = sample_types(dist, vehicles + 1, seed)?;
    let positions = (0..=vehicles).map(|i| p * i as f64).collect();
    let state = MicroState::new(positions, types, LeaderClosure::FreeFlow)?;
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let traj = integrate(
        &state,
        dist,
        StepConfig {
            horizon,
            dt,
            sample_every: steps,
        },
    )?;
    Ok(traj.final_positions()[0] / horizon)
}

/// Checks `U_i(t) <= V_i(t) + 1e-9` for `i >= i0` at every sample time.
pub fn check_comparison(lower: &MicroTrajectory, upper: &MicroTrajectory, i0: usize) -> Result<bool> {
    if lower.type_indices != upper.type_indices
        || lower.leader != upper.leader
        || lower.dt != upper.dt
        || lower.times != upper.times
    {
        return Err(domain(
            "trajectories differ in types, leader closure, step size, or sample times",
        ));
    }
    let n = lower.type_indices.len();
    if i0 >= n {
        return Err(domain(format!("index {i0} outside window of {n}")));
    }
    if let Some(i) = (i0..n).find(|&i| lower.snapshots[0][i] > upper.snapshots[0][i]) {
        return Err(domain(format!("initial data not ordered at vehicle {i}")));
    }
    Ok(lower
        .snapshots
        .iter()
        .zip(&upper.snapshots)
        .all(|(a, b)| (i0..n).all(|i| a[i] <= b[i] + 1e-9)))
}

/// Outcome of a localization experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub k: usize,
    pub alpha: f64,
    pub v_max: f64,
    /// Largest `U_0(t) - W_0(t) - v_max t (1 - e^{-alpha t})^K` over samples.
    pub max_excess: f64,
    /// Largest raw difference `U_0(t) - W_0(t)`.
    pub max_difference: f64,
    pub holds: bool,
}

/// Two runs ordered (`U_i(0) <= W_i(0)`) only for `i <= K` and reversed
/// above; measures how far `U_0` can overtake `W_0` against the bound
/// `v_max t (1 - e^{-alpha t})^K`.
///
/// Above `K` the lower run is in free flow (gaps `3 * max h0 + 4 / rate`
/// scale) while the upper run is jammed (gaps `min h0 / 2`), so the
/// perturbation travels down the platoon as fast as the dynamics allow.
pub fn localization_bound_check(
    dist: &TypeDistribution,
    seed: u64,
    k: usize,
    horizon: f64,
    dt: f64,
) -> Result<LocalizationReport> {
    if k == 0 {
        return Err(domain("K must be at least 1"));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    // Enough cars above K that the top closure never reaches vehicle K.
    let n = k + steps + 2;
    let types = sample_types(dist, n + 1, seed)?;
    let free_gap = types
        .iter()
        .map(|&z| {
            let s = dist.spec(z);
            // Deep in the free regime: speed about 0.95 v_max or saturated.
            s.saturation_headway()
                .unwrap_or_else(|| s.inverse_unchecked(0.95 * s.v_max()))
        })
        .fold(0.0, f64::max);
    let jam_gap = 0.5 * dist.min_h0();
    let mut lower = Vec::with_capacity(n + 1);
    let mut upper = Vec::with_capacity(n + 1);
    let (mut x_low, mut x_up) = (0.0, 0.0);
    for i in 0..=n {
        lower.push(x_low);
        upper.push(x_up);
        if i < k {
            // Same gaps below K: equal positions up to K.
            x_low += free_gap;
            x_up += free_gap;
        } else {
            x_low += free_gap;
            x_up += jam_gap;
        }
    }
    // Upper at K+1 sits below lower at K+1: order violated just above K.
    let lo = MicroState::new(lower, types.clone(), LeaderClosure::FreeFlow)?;
    let up = MicroState::new(upper, types, LeaderClosure::FreeFlow)?;
    let cfg = StepConfig {
        horizon,
        dt,
        sample_every: 1,
    };
    let a = integrate(&lo, dist, cfg)?;
    let b = integrate(&up, dist, cfg)?;
    let (alpha, v_max) = (dist.alpha(), dist.v_max_global());
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_difference = f64::NEG_INFINITY;
    for ((t, sa), sb) in a.times.iter().zip(&a.snapshots).zip(&b.snapshots) {
        let diff = sa[0] - sb[0];
        let bound = v_max * t * (-(alpha * t)).exp_m1().abs().powi(k as i32);
        max_difference = max_difference.max(diff);
        max_excess = max_excess.max(diff - bound);
    }
    Ok(LocalizationReport {
        k,
        alpha,
        v_max,
        max_excess,
        max_difference,
        holds: max_excess <= 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_models::VehicleTypeSpec;
    use std::f64::consts::LN_2;

    fn type_a() -> VehicleTypeSpec {
        VehicleTypeSpec::newell("A", 1.0, 1.0, 1.0).unwrap()
    }

    fn mix() -> TypeDistribution {
        TypeDistribution::new(vec![
            (type_a(), 0.5),
            (VehicleTypeSpec::newell("B", 2.0, 2.0, 0.5).unwrap(), 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn jammed_follower_behind_free_leader() {
        let dist = TypeDistribution::single(type_a());
        let s = MicroState::new(vec![0.0, 1.0], vec![0, 0], LeaderClosure::FreeFlow).unwrap();
        let traj = integrate(
            &s,
            &dist,
            StepConfig {
                horizon: 10.0,
                dt: 0.01,
                sample_every: 1,
            },
        )
        .unwrap();
        // Speed 0 at t = 0 since the gap is exactly h0.
        assert_eq!(traj.snapshots[1][0], 0.0);
        assert_eq!(traj.final_time(), 10.0);
        let gaps: Vec<f64> = traj.snapshots.iter().map(|x| x[1] - x[0]).collect();
        assert!(gaps.windows(2).all(|g| g[1] >= g[0]));
        assert!(gaps.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let dist = mix();
        let s = MicroState::new(vec![0.0, 3.0], vec![0, 1], LeaderClosure::FreeFlow).unwrap();
        let too_big = StepConfig {
            horizon: 1.0,
            dt: 1.5,
            sample_every: 1,
        };
        assert!(matches!(integrate(&s, &dist, too_big), Err(crate::Error::Config(_))));
        assert!(MicroState::new(vec![0.0, 0.0], vec![0, 0], LeaderClosure::FreeFlow).is_err());
        assert!(MicroState::new(vec![1.0, 0.0], vec![0, 0], LeaderClosure::FreeFlow).is_err());
        assert!(MicroState::new(vec![0.0], vec![0, 0], LeaderClosure::FreeFlow).is_err());
    }

    #[test]
    fn corrector_single_type() {
        let dist = TypeDistribution::single(type_a());
        let c = corrector_sequence(&[0, 0, 0, 0], &dist, 0.5).unwrap();
        let step = 1.0 + LN_2;
        for (i, ci) in c.iter().enumerate() {
            assert!((ci - i as f64 * step).abs() < 1e-12);
        }
        assert!(corrector_sequence(&[0, 0], &dist, 1.0).is_err());
        assert!(corrector_sequence(&[0, 0], &dist, 0.0).is_err());
        let tiny = corrector_sequence(&[0, 0], &dist, 1e-12).unwrap();
        assert!((tiny[1] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn corrector_travels_at_theta() {
        let dist = mix();
        let types = sample_types(&dist, 200, 3).unwrap();
        let state = corrector_state(types, &dist, 0.5).unwrap();
        let traj = integrate(
            &state,
            &dist,
            StepConfig {
                horizon: 10.0,
                dt: 0.01,
                sample_every: 1,
            },
        )
        .unwrap();
        for w in traj.snapshots.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                let step = b - a;
                // Position rounding dominates: a few ulps at the position scale.
                let ulp = f64::EPSILON * b.abs().max(1.0);
                assert!((step - 0.005).abs() <= 4.0 * ulp + 1e-15, "step {step}");
            }
        }
    }

    #[test]
    fn lemma_speed_bounds_and_order() {
        let dist = mix();
        let types = sample_types(&dist, 101, 9).unwrap();
        let positions = (0..=100).map(|i| 1.9 * i as f64).collect();
        let s = MicroState::new(positions, types, LeaderClosure::FreeFlow).unwrap();
        let dt = 0.25;
        let traj = integrate(
            &s,
            &dist,
            StepConfig {
                horizon: 20.0,
                dt,
                sample_every: 1,
            },
        )
        .unwrap();
        for w in traj.snapshots.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                let v = (b - a) / dt;
                assert!(v >= 0.0 && v <= dist.v_max_global() + 1e-12);
            }
            assert!(w[1].windows(2).all(|g| g[1] > g[0]));
        }
        let moved = traj
            .final_positions()
            .iter()
            .zip(&traj.snapshots[0])
            .map(|(b, a)| b - a);
        assert!(moved.fold(0.0, f64::max) <= dist.v_max_global() * 20.0 + 1e-9);
    }

    #[test]
    fn prescribed_leader() {
        let dist = TypeDistribution::single(type_a());
        let leader = LeaderClosure::prescribed(&[(0.0, 5.0), (10.0, 10.0)]).unwrap();
        let s = MicroState::new(vec![0.0, 2.5, 5.0], vec![0, 0, 0], leader).unwrap();
        let traj = integrate(
            &s,
            &dist,
            StepConfig {
                horizon: 10.0,
                dt: 0.5,
                sample_every: 4,
            },
        )
        .unwrap();
        assert!((traj.position_at(2, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((traj.position_at(2, 5.0).unwrap() - 7.5).abs() < 1e-12);
        assert!(LeaderClosure::prescribed(&[(0.0, 5.0), (1.0, 4.0)]).is_err());
    }

    #[test]
    fn short_last_step_lands_on_horizon() {
        let dist = TypeDistribution::single(type_a());
        let s = MicroState::new(vec![0.0, 3.0], vec![0, 0], LeaderClosure::GhostHeadway(3.0)).unwrap();
        let traj = integrate(
            &s,
            &dist,
            StepConfig {
                horizon: 1.05,
                dt: 0.1,
                sample_every: 100,
            },
        )
        .unwrap();
        assert_eq!(traj.times, vec![0.0, 1.05]);
        let v = dist.spec(0).velocity(3.0);
        assert!((traj.final_positions()[1] - 3.0 - 1.05 * v).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_speed_frozen_and_insulation() {
        let dist = mix();
        let probe = SpeedProbe {
            vehicles: 100,
            horizon: 400.0,
            dt: 0.5,
        };
        assert_eq!(asymptotic_speed(0.5, &dist, 1, probe).unwrap(), 0.0);
        match asymptotic_speed(3.0, &dist, 1, probe) {
            Err(crate::Error::Config(msg)) => assert!(msg.contains("need N >= 534"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn asymptotic_speed_homogeneous() {
        let dist = TypeDistribution::single(type_a());
        let probe = SpeedProbe {
            vehicles: 1000,
            horizon: 200.0,
            dt: 0.5,
        };
        let v = asymptotic_speed(1.0 + LN_2, &dist, 5, probe).unwrap();
        assert!((v - 0.5).abs() <= 0.02, "{v}");
    }

    #[test]
    fn comparison_basics() {
        let dist = mix();
        let types = sample_types(&dist, 51, 4).unwrap();
        let base: Vec<f64> = (0..=50).map(|i| 2.2 * i as f64).collect();
        let shifted: Vec<f64> = base.iter().map(|x| x + 1.0).collect();
        let cfg = StepConfig {
            horizon: 30.0,
            dt: 0.5,
            sample_every: 2,
        };
        let a = integrate(
            &MicroState::new(base, types.clone(), LeaderClosure::FreeFlow).unwrap(),
            &dist,
            cfg,
        )
        .unwrap();
        let b = integrate(
            &MicroState::new(shifted, types, LeaderClosure::FreeFlow).unwrap(),
            &dist,
            cfg,
        )
        .unwrap();
        assert!(check_comparison(&a, &a, 0).unwrap());
        assert!(check_comparison(&a, &b, 0).unwrap());
        assert!(check_comparison(&b, &a, 0).is_err());
        let mut c = b.clone();
        c.dt = 0.25;
        assert!(check_comparison(&a, &c, 0).is_err());
    }

    #[test]
    fn localization_small_cases() {
        let dist = mix();
        let r = localization_bound_check(&dist, 1, 1, 10.0, 0.01).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.max_difference > 0.0);
        let r = localization_bound_check(&dist, 2, 50, 5.0, 0.01).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn csv_export() {
        let dist = mix();
        let s = MicroState::new(vec![0.0, 3.0], vec![0, 1], LeaderClosure::FreeFlow).unwrap();
        let traj = integrate(
            &s,
            &dist,
            StepConfig {
                horizon: 1.0,
                dt: 0.5,
                sample_every: 1,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&dist, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert!(text.starts_with("t,i,U_i,type\n0,0,0,A\n0,1,3,B\n"));
    }
}
