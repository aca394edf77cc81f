//! Optimal velocity functions, their inverses, finite type laws, and the
//! structural checks of the standing assumptions H1–H5.
//!
//! An optimal velocity function (OVF) `V_z` maps the headway `p` (meters) to
//! a speed (m/s). Every family here vanishes on `[0, h0]`, increases past the
//! jam headway `h0`, and tends to `v_max` as `p -> inf`.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::rng::TypeSampler;

/// Shape parameters of an OVF family.
#[derive(Debug, Clone, PartialEq)]
pub enum OvfFamily {
    /// `V(p) = v_max (1 - exp(-rate (p - h0)))` for `p >= h0`.
    NewellExponential { rate: f64 },
    /// `V(p) = min(slope (p - h0), v_max)` for `p >= h0`; saturates at
    /// `h0 + v_max / slope`.
    TruncatedLinear { slope: f64 },
    /// Linear interpolation between breakpoints `(headways[k], speeds[k])`,
    /// constant at the last speed beyond the last breakpoint.
    PiecewiseLinearTable { headways: Vec<f64>, speeds: Vec<f64> },
}

impl OvfFamily {
    pub fn name(&self) -> &'static str {
        match self {
            OvfFamily::NewellExponential { .. } => "NewellExponential",
            OvfFamily::TruncatedLinear { .. } => "TruncatedLinear",
            OvfFamily::PiecewiseLinearTable { .. } => "PiecewiseLinearTable",
        }
    }
}

/// One driver/vehicle type.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTypeSpec {
    id: String,
    family: OvfFamily,
    h0: f64,
    v_max: f64,
}

fn positive_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {x}")))
    }
}

impl VehicleTypeSpec {
    pub fn newell(id: impl Into<String>, h0: f64, v_max: f64, rate: f64) -> Result<Self> {
        positive_finite("h0", h0)?;
        positive_finite("v_max", v_max)?;
        positive_finite("rate", rate)?;
        Ok(Self {
            id: id.into(),
            family: OvfFamily::NewellExponential { rate },
            h0,
            v_max,
        })
    }

    pub fn truncated_linear(id: impl Into<String>, h0: f64, v_max: f64, slope: f64) -> Result<Self> {
        positive_finite("h0", h0)?;
        positive_finite("v_max", v_max)?;
        positive_finite("slope", slope)?;
        Ok(Self {
            id: id.into(),
            family: OvfFamily::TruncatedLinear { slope },
            h0,
            v_max,
        })
    }

    /// Table family from breakpoints `(headway, speed)`.
    ///
    /// The first breakpoint must be `(h0, 0)` with `h0 > 0`; headways must be
    /// strictly increasing and speeds nondecreasing. `v_max` is the last
    /// speed. Flat segments are accepted here and reported by
    /// [`validate_assumptions`] as an H3 failure.
    pub fn table(id: impl Into<String>, breakpoints: &[(f64, f64)]) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(domain("table needs at least two breakpoints"));
        }
        let (h0, v0) = breakpoints[0];
        positive_finite("h0 (first table headway)", h0)?;
        if v0 != 0.0 {
            return Err(domain(format!("first table speed must be 0, got {v0}")));
        }
        for (k, w) in breakpoints.windows(2).enumerate() {
            let ((p0, v0), (p1, v1)) = (w[0], w[1]);
            if !(p1.is_finite() && v1.is_finite()) {
                return Err(domain(format!("non-finite breakpoint at index {}", k + 1)));
            }
            if p1 <= p0 {
                return Err(domain(format!(
                    "table headways must increase strictly (index {})",
                    k + 1
                )));
            }
            if v1 < v0 {
                return Err(domain(format!("table speeds must be nondecreasing (index {})", k + 1)));
            }
        }
        let v_max = breakpoints[breakpoints.len() - 1].1;
        positive_finite("v_max (last table speed)", v_max)?;
        Ok(Self {
            id: id.into(),
            family: OvfFamily::PiecewiseLinearTable {
                headways: breakpoints.iter().map(|b| b.0).collect(),
                speeds: breakpoints.iter().map(|b| b.1).collect(),
            },
            h0,
            v_max,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> &OvfFamily {
        &self.family
    }

    /// Jam headway (m).
    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Limiting speed (m/s).
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Lipschitz constant `sup |V'|`.
    pub fn lipschitz(&self) -> f64 {
        match &self.family {
            OvfFamily::NewellExponential { rate } => self.v_max * rate,
            OvfFamily::TruncatedLinear { slope } => *slope,
            OvfFamily::PiecewiseLinearTable { headways, speeds } => headways
                .windows(2)
                .zip(speeds.windows(2))
                .map(|(p, v)| (v[1] - v[0]) / (p[1] - p[0]))
                .fold(0.0, f64::max),
        }
    }

    /// Headway at which `v_max` is reached, if it is reached at all.
    pub fn saturation_headway(&self) -> Option<f64> {
        match &self.family {
            OvfFamily::NewellExponential { .. } => None,
            OvfFamily::TruncatedLinear { slope } => Some(self.h0 + self.v_max / slope),
            OvfFamily::PiecewiseLinearTable { headways, speeds } => {
                let k = speeds.partition_point(|&v| v < self.v_max);
                Some(headways[k])
            }
        }
    }

    /// Whether `V^{-1}(theta)` is unbounded as `theta -> v_max`.
    pub fn inverse_diverges(&self) -> bool {
        matches!(self.family, OvfFamily::NewellExponential { .. })
    }

    /// `V(p)`, checked.
    pub fn eval(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(domain(format!("headway must be >= 0, got {p}")));
        }
        Ok(self.velocity(p))
    }

    /// `V(p)` without the sign check; negative headways read as jammed.
    #[inline]
    pub(crate) fn velocity(&self, p: f64) -> f64 {
        if p <= self.h0 {
            return 0.0;
        }
        match &self.family {
            OvfFamily::NewellExponential { rate } => -self.v_max * (-rate * (p - self.h0)).exp_m1(),
            OvfFamily::TruncatedLinear { slope } => (slope * (p - self.h0)).min(self.v_max),
            OvfFamily::PiecewiseLinearTable { headways, speeds } => {
                let n = headways.len();
                if p >= headways[n - 1] {
                    return speeds[n - 1];
                }
                // headways[0] = h0 < p < headways[n-1]
                let k = headways.partition_point(|&h| h <= p);
                let (p0, p1) = (headways[k - 1], headways[k]);
                let (v0, v1) = (speeds[k - 1], speeds[k]);
                v0 + (v1 - v0) * (p - p0) / (p1 - p0)
            }
        }
    }

    /// `V^{-1}(theta)` on `[0, v_max)`; the leftmost headway on flat table
    /// segments.
    pub fn inverse(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(domain(format!("speed must be >= 0, got {theta}")));
        }
        if theta >= self.v_max {
            return Err(domain(format!(
                "speed {theta} is not below v_max = {} of type '{}'",
                self.v_max, self.id
            )));
        }
        Ok(self.inverse_unchecked(theta))
    }

    #[inline]
    pub(crate) fn inverse_unchecked(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return self.h0;
        }
        match &self.family {
            OvfFamily::NewellExponential { rate } => self.h0 - (-theta / self.v_max).ln_1p() / rate,
            OvfFamily::TruncatedLinear { slope } => self.h0 + theta / slope,
            OvfFamily::PiecewiseLinearTable { headways, speeds } => {
                let k = speeds.partition_point(|&v| v < theta);
                if speeds[k] == theta {
                    return headways[k];
                }
                let (p0, p1) = (headways[k - 1], headways[k]);
                let (v0, v1) = (speeds[k - 1], speeds[k]);
                p0 + (theta - v0) * (p1 - p0) / (v1 - v0)
            }
        }
    }
}

impl fmt::Display for VehicleTypeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}, h0={}, v_max={})",
            self.id,
            self.family.name(),
            self.h0,
            self.v_max
        )
    }
}

/// Finite law of the type `Z_0`, with full support.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDistribution {
    types: Vec<VehicleTypeSpec>,
    probabilities: Vec<f64>,
    h0_bar: f64,
    v_max_under: f64,
    v_max_global: f64,
    alpha: f64,
}

impl TypeDistribution {
    pub fn new(entries: Vec<(VehicleTypeSpec, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(domain("type distribution needs at least one entry"));
        }
        for (spec, prob) in &entries {
            if !(prob.is_finite() && *prob > 0.0) {
                return Err(domain(format!(
                    "probability of type '{}' must be > 0, got {prob}",
                    spec.id()
                )));
            }
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("probabilities sum to {total}, expected 1")));
        }
        let (types, probabilities): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let h0_bar = types.iter().zip(&probabilities).map(|(t, p)| p * t.h0()).sum();
        let v_max_under = types.iter().map(|t| t.v_max()).fold(f64::INFINITY, f64::min);
        let v_max_global = types.iter().map(|t| t.v_max()).fold(0.0, f64::max);
        let alpha = types.iter().map(|t| t.lipschitz()).fold(0.0, f64::max);
        Ok(Self {
            types,
            probabilities,
            h0_bar,
            v_max_under,
            v_max_global,
            alpha,
        })
    }

    /// A one-type law.
    pub fn single(spec: VehicleTypeSpec) -> Self {
        Self::new(vec![(spec, 1.0)]).expect("one type with probability 1 is a valid law")
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[VehicleTypeSpec] {
        &self.types
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn spec(&self, index: usize) -> &VehicleTypeSpec {
        &self.types[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.types.iter().position(|t| t.id() == id)
    }

    /// Mean jam headway `E[h0^{Z_0}]`.
    pub fn h0_bar(&self) -> f64 {
        self.h0_bar
    }

    /// Smallest limiting speed over the types.
    pub fn v_max_under(&self) -> f64 {
        self.v_max_under
    }

    /// Largest limiting speed over the types.
    pub fn v_max_global(&self) -> f64 {
        self.v_max_global
    }

    /// Largest Lipschitz constant over the types.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min_h0(&self) -> f64 {
        self.types.iter().map(|t| t.h0()).fold(f64::INFINITY, f64::min)
    }

    /// `E[V_{Z_0}^{-1}(theta)]` as an exact finite sum, for
    /// `0 <= theta < v_max_under`.
    pub fn expected_inverse(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) || theta >= self.v_max_under {
            return Err(domain(format!(
                "expected inverse needs 0 <= theta < {}, got {theta}",
                self.v_max_under
            )));
        }
        Ok(self.expected_inverse_unchecked(theta))
    }

    #[inline]
    pub(crate) fn expected_inverse_unchecked(&self, theta: f64) -> f64 {
        self.types
            .iter()
            .zip(&self.probabilities)
            .map(|(t, p)| p * t.inverse_unchecked(theta))
            .sum()
    }
}

/// Draws `n` i.i.d. type indices from `dist`; see [`crate::rng`] for the
/// exact generator so sequences can be reproduced elsewhere.
pub fn sample_types(dist: &TypeDistribution, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    let mut sampler = TypeSampler::new(dist.probabilities(), seed);
    Ok((0..n).map(|_| sampler.next_index()).collect())
}

/// The five standing assumptions on the velocity map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assumption {
    H1,
    H2,
    H3,
    H4,
    H5,
}

impl Assumption {
    pub const ALL: [Assumption; 5] = [
        Assumption::H1,
        Assumption::H2,
        Assumption::H3,
        Assumption::H4,
        Assumption::H5,
    ];

    pub fn summary(self) -> &'static str {
        match self {
            Assumption::H1 => "uniform Lipschitz continuity",
            Assumption::H2 => "zero speed on [0, h0], h0 > 0",
            Assumption::H3 => "strictly increasing past h0",
            Assumption::H4 => "bounded, V(p) -> v_max",
            Assumption::H5 => "E[V^-1(theta)] -> inf as theta -> min v_max",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn passed(&self, a: Assumption) -> bool {
        self.checks.iter().any(|c| c.assumption == a && c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Turns a failed report into a construction error.
    pub fn into_result(self) -> Result<()> {
        if self.all_passed() {
            return Ok(());
        }
        let msg = self
            .failures()
            .map(|c| format!("{} ({})", c.assumption, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Construction(format!("assumptions violated: {msg}")))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<4} {}: {}",
                c.assumption,
                if c.passed { "PASS" } else { "FAIL" },
                c.assumption.summary(),
                c.detail
            )?;
        }
        Ok(())
    }
}

fn check(assumption: Assumption, failures: Vec<String>, ok: impl Into<String>) -> AssumptionCheck {
    let passed = failures.is_empty();
    AssumptionCheck {
        assumption,
        passed,
        detail: if passed { ok.into() } else { failures.join("; ") },
    }
}

/// Structural check of H1–H5 for a finite type law.
///
/// H5 uses the finite-support criterion: some type attaining the minimal
/// limiting speed must have an inverse that diverges at that speed.
pub fn validate_assumptions(dist: &TypeDistribution) -> ValidationReport {
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    let mut h3 = Vec::new();
    let mut h4 = Vec::new();
    for t in dist.types() {
        let lip = t.lipschitz();
        if !(lip.is_finite() && lip > 0.0) {
            h1.push(format!("type '{}' has Lipschitz constant {lip}", t.id()));
        }
        if !(t.h0() > 0.0) || t.velocity(t.h0()) != 0.0 {
            h2.push(format!("type '{}' does not vanish on [0, h0]", t.id()));
        }
        match t.family() {
            OvfFamily::NewellExponential { rate } if *rate <= 0.0 => {
                h3.push(format!("type '{}' has non-positive rate", t.id()))
            }
            OvfFamily::TruncatedLinear { slope } if *slope <= 0.0 => {
                h3.push(format!("type '{}' has non-positive slope", t.id()))
            }
            OvfFamily::PiecewiseLinearTable { headways, speeds } => {
                if let Some(k) = speeds.windows(2).position(|v| v[1] <= v[0]) {
                    h3.push(format!(
                        "type '{}' is flat on [{}, {}] below v_max",
                        t.id(),
                        headways[k],
                        headways[k + 1]
                    ));
                }
            }
            _ => {}
        }
        if !(t.v_max() > 0.0 && t.v_max().is_finite()) {
            h4.push(format!("type '{}' has v_max {}", t.id(), t.v_max()));
        }
    }
    let v_under = dist.v_max_under();
    let minimal: Vec<&VehicleTypeSpec> = dist
        .types()
        .iter()
        .zip(dist.probabilities())
        .filter(|(t, p)| t.v_max() == v_under && **p > 0.0)
        .map(|(t, _)| t)
        .collect();
    let h5 = if minimal.iter().any(|t| t.inverse_diverges()) {
        Vec::new()
    } else {
        vec![format!(
            "no type with v_max = {v_under} has a divergent inverse ({}); E[V^-1] stays bounded",
            minimal.iter().map(|t| t.id()).collect::<Vec<_>>().join(", ")
        )]
    };
    ValidationReport {
        checks: vec![
            check(Assumption::H1, h1, format!("alpha = {}", dist.alpha())),
            check(Assumption::H2, h2, format!("min h0 = {}", dist.min_h0())),
            check(Assumption::H3, h3, "all types strictly increasing"),
            check(
                Assumption::H4,
                h4,
                format!("v_max in [{v_under}, {}]", dist.v_max_global()),
            ),
            check(
                Assumption::H5,
                h5,
                format!("divergent inverse at min v_max = {v_under}"),
            ),
        ],
    }
}

/// `E[V^{-1}(v_max_under - 10^-k)]` for each `k`: a numerical look at the
/// H5 divergence.
pub fn divergence_probe(dist: &TypeDistribution, ks: impl IntoIterator<Item = i32>) -> Vec<f64> {
    ks.into_iter()
        .map(|k| dist.expected_inverse_unchecked(dist.v_max_under() - 10f64.powi(-k)))
        .collect()
}
