//! The effective velocity law `F(p)`.
//!
//! Below the mean jam headway `h0_bar` the law is zero. Above it, `F(p)` is
//! the unique `theta` in `(0, v_max_under)` with `E[V_{Z_0}^{-1}(theta)] = p`.
//! The expectation is an exact finite sum over the type law, and the root is
//! found by bisection since the left side is increasing in `theta` but may
//! have an unbounded slope near `v_max_under`.

use std::io::{BufRead, Write};

use crate::error::{domain, Error, Result};
use crate::velocity_models::{validate_assumptions, TypeDistribution};

/// `E[V_{Z_0}^{-1}(theta)]` for `0 <= theta < v_max_under`.
pub fn expected_inverse(dist: &TypeDistribution, theta: f64) -> Result<f64> {
    dist.expected_inverse(theta)
}

/// A single root of `E[V^{-1}(theta)] = p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSpeed {
    pub speed: f64,
    /// `|E[V^{-1}(speed)] - p|`.
    pub residual: f64,
    /// Bisection ran out of floating-point resolution before the residual
    /// reached the requested tolerance.
    pub precision_capped: bool,
}

/// Solves for `F(p)` directly, without a table. Assumes H5 holds.
pub fn effective_speed(dist: &TypeDistribution, p: f64, tol: f64) -> Result<EffectiveSpeed> {
    if !(p >= 0.0) {
        return Err(domain(format!("headway must be >= 0, got {p}")));
    }
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let h0_bar = dist.h0_bar();
    if p <= h0_bar {
        return Ok(EffectiveSpeed {
            speed: 0.0,
            residual: 0.0,
            precision_capped: false,
        });
    }
    let v_under = dist.v_max_under();
    let g = |theta: f64| dist.expected_inverse_unchecked(theta) - p;

    // Upper bracket v_under - eps, eps shrinking geometrically until the
    // residual turns positive.
    let mut eps = 0.5 * v_under;
    let mut hi = v_under - eps;
    while g(hi) <= 0.0 {
        eps *= 0.5;
        let next = v_under - eps;
        if next <= hi || next >= v_under {
            // No float below v_under brings E[V^-1] up to p.
            let r = g(hi).abs();
            return Ok(EffectiveSpeed {
                speed: hi,
                residual: r,
                precision_capped: r > tol,
            });
        }
        hi = next;
    }
    let mut lo = 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        let r = g(mid);
        if r.abs() <= tol {
            return Ok(EffectiveSpeed {
                speed: mid,
                residual: r.abs(),
                precision_capped: false,
            });
        }
        if mid <= lo || mid >= hi {
            // Adjacent floats: keep the better end.
            let (rl, rh) = (g(lo).abs(), g(hi).abs());
            let (speed, residual) = if rl <= rh { (lo, rl) } else { (hi, rh) };
            return Ok(EffectiveSpeed {
                speed,
                residual,
                precision_capped: residual > tol,
            });
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Tabulated effective velocity on `[0, p_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveFlux {
    p_grid: Vec<f64>,
    f_values: Vec<f64>,
    h0_bar: f64,
    v_max_under: f64,
    tol: f64,
    /// Grid headways whose root hit the floating-point floor before `tol`.
    capped: Vec<f64>,
}

/// Builds the table on a uniform grid of `grid_points` headways over
/// `[0, p_max]`, with `h0_bar` inserted as an extra node when it is not
/// already one.
pub fn build_flux(dist: &TypeDistribution, p_max: f64, grid_points: usize, tol: f64) -> Result<EffectiveFlux> {
    validate_assumptions(dist).into_result()?;
    let h0_bar = dist.h0_bar();
    if !(p_max > h0_bar && p_max.is_finite()) {
        return Err(Error::Construction(format!(
            "p_max = {p_max} must exceed the mean jam headway {h0_bar}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::Construction("flux grid needs at least 2 points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Construction(format!("tolerance must be positive, got {tol}")));
    }
    let n = grid_points - 1;
    let dp = p_max / n as f64;
    let mut p_grid: Vec<f64> = (0..=n).map(|k| if k == n { p_max } else { k as f64 * dp }).collect();
    let at = p_grid.partition_point(|&p| p < h0_bar);
    if p_grid[at] != h0_bar {
        p_grid.insert(at, h0_bar);
    }
    let mut f_values = Vec::with_capacity(p_grid.len());
    let mut capped = Vec::new();
    for &p in &p_grid {
        let root = effective_speed(dist, p, tol)?;
        if root.precision_capped {
            capped.push(p);
        }
        f_values.push(root.speed);
    }
    Ok(EffectiveFlux {
        p_grid,
        f_values,
        h0_bar,
        v_max_under: dist.v_max_under(),
        tol,
        capped,
    })
}

impl EffectiveFlux {
    /// Assembles a table from raw columns, checking its invariants.
    pub fn from_table(p_grid: Vec<f64>, f_values: Vec<f64>, h0_bar: f64, v_max_under: f64, tol: f64) -> Result<Self> {
        if p_grid.len() < 2 || p_grid.len() != f_values.len() {
            return Err(Error::Parse(format!(
                "flux table needs matching columns of length >= 2 (got {} and {})",
                p_grid.len(),
                f_values.len()
            )));
        }
        if p_grid[0] != 0.0 {
            return Err(Error::Parse("flux table must start at p = 0".into()));
        }
        if let Some(k) = p_grid.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Parse(format!("flux headways not increasing at row {}", k + 1)));
        }
        for (k, (&p, &f)) in p_grid.iter().zip(&f_values).enumerate() {
            let ok = if p <= h0_bar {
                f == 0.0
            } else {
                f > 0.0 && f < v_max_under
            };
            if !ok {
                return Err(Error::Parse(format!(
                    "flux value {f} at p = {p} (row {k}) out of range"
                )));
            }
        }
        if let Some(k) = f_values
            .windows(2)
            .zip(p_grid.windows(2))
            .position(|(f, p)| p[0] >= h0_bar && f[1] <= f[0])
        {
            return Err(Error::Parse(format!(
                "flux not increasing above h0_bar at row {}",
                k + 1
            )));
        }
        Ok(Self {
            p_grid,
            f_values,
            h0_bar,
            v_max_under,
            tol,
            capped: Vec::new(),
        })
    }

    pub fn p_grid(&self) -> &[f64] {
        &self.p_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn h0_bar(&self) -> f64 {
        self.h0_bar
    }

    pub fn v_max_under(&self) -> f64 {
        self.v_max_under
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn p_max(&self) -> f64 {
        *self.p_grid.last().expect("table is non-empty")
    }

    /// Headways whose bisection stopped at float resolution above `tol`.
    pub fn precision_capped(&self) -> &[f64] {
        &self.capped
    }

    /// `F(p)` by linear interpolation, saturating at `F(p_max)` beyond the
    /// table.
    pub fn eval(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(domain(format!("headway must be >= 0, got {p}")));
        }
        Ok(self.speed(p))
    }

    #[inline]
    pub(crate) fn speed(&self, p: f64) -> f64 {
        if p <= self.h0_bar {
            return 0.0;
        }
        let n = self.p_grid.len();
        if p >= self.p_grid[n - 1] {
            return self.f_values[n - 1];
        }
        let k = self.p_grid.partition_point(|&q| q <= p);
        let (p0, p1) = (self.p_grid[k - 1], self.p_grid[k]);
        let (f0, f1) = (self.f_values[k - 1], self.f_values[k]);
        f0 + (f1 - f0) * (p - p0) / (p1 - p0)
    }

    /// Largest segment slope over segments meeting `[p_lo, p_hi]`.
    pub fn lipschitz_on(&self, p_lo: f64, p_hi: f64) -> f64 {
        self.p_grid
            .windows(2)
            .zip(self.f_values.windows(2))
            .filter(|(p, _)| p[1] >= p_lo && p[0] <= p_hi)
            .map(|(p, f)| (f[1] - f[0]) / (p[1] - p[0]))
            .fold(0.0, f64::max)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_on(0.0, f64::INFINITY)
    }

    /// LWR speed law `v(rho) = F(1 / rho)`.
    pub fn lwr_speed(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(domain(format!("density must be > 0, got {rho}")));
        }
        Ok(self.speed(1.0 / rho))
    }

    /// LWR flow `q(rho) = rho v(rho)`, zero at `rho = 0`.
    pub fn lwr_flow(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(domain(format!("density must be >= 0, got {rho}")));
        }
        Ok(self.flow(rho))
    }

    #[inline]
    pub(crate) fn flow(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            rho * self.speed(1.0 / rho)
        }
    }

    /// Writes the table as CSV preceded by `# key=value` metadata lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# h0_bar={}", self.h0_bar)?;
        writeln!(out, "# v_max_under={}", self.v_max_under)?;
        writeln!(out, "# tol={}", self.tol)?;
        writeln!(out, "p,F_bar")?;
        for (p, f) in self.p_grid.iter().zip(&self.f_values) {
            writeln!(out, "{p},{f}")?;
        }
        Ok(())
    }

    /// Reads a table written by [`EffectiveFlux::write_csv`]. Unknown
    /// `#` lines are ignored.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let (mut h0_bar, mut v_under, mut tol) = (None, None, None);
        let mut header = false;
        let (mut ps, mut fs) = (Vec::new(), Vec::new());
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    let slot = match k.trim() {
                        "h0_bar" => &mut h0_bar,
                        "v_max_under" => &mut v_under,
                        "tol" => &mut tol,
                        _ => continue,
                    };
                    *slot = Some(v.trim().parse::<f64>().map_err(|_| bad("bad metadata value"))?);
                }
                continue;
            }
            if !header {
                if line != "p,F_bar" {
                    return Err(bad("expected header 'p,F_bar'"));
                }
                header = true;
                continue;
            }
            let (p, f) = line.split_once(',').ok_or_else(|| bad("expected two columns"))?;
            ps.push(p.trim().parse::<f64>().map_err(|_| bad("bad headway"))?);
            fs.push(f.trim().parse::<f64>().map_err(|_| bad("bad flux value"))?);
        }
        let missing = |k: &str| Error::Parse(format!("missing metadata '{k}'"));
        Self::from_table(
            ps,
            fs,
            h0_bar.ok_or_else(|| missing("h0_bar"))?,
            v_under.ok_or_else(|| missing("v_max_under"))?,
            tol.ok_or_else(|| missing("tol"))?,
        )
    }

    /// Fundamental diagram `(rho, v, q)` at the densities `1/p` of the table
    /// nodes with `p > 0`, in increasing density.
    pub fn fundamental_diagram(&self) -> Vec<(f64, f64, f64)> {
        self.p_grid
            .iter()
            .rev()
            .filter(|&&p| p > 0.0)
            .map(|&p| {
                let rho = 1.0 / p;
                let v = self.speed(p);
                (rho, v, rho * v)
            })
            .collect()
    }

    pub fn write_fundamental_diagram_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rho,v_bar,q")?;
        for (rho, v, q) in self.fundamental_diagram() {
            writeln!(out, "{rho},{v},{q}")?;
        }
        Ok(())
    }
}
