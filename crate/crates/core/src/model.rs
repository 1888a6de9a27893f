//! Structural components and their assembly into a linear-Gaussian
//! state-space model
//!
//! ```text
//! y_t     = Zᵀ α_t + ε_t,        ε_t ~ N(0, H)
//! α_{t+1} = T α_t + R η_t,       η_t ~ N(0, diag(Q))
//! ```
//!
//! Each component contributes a diagonal block of `T`, a slice of `Z`, and a
//! set of disturbances that share one variance parameter (a "variance
//! group"). The system matrices are time-invariant.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{draw_normal, psd_cholesky};
use crate::rng::SeedTree;
use crate::sampler::PriorConfig;
use crate::series::Series;

fn default_seasons() -> usize {
    12
}

/// Declarative description of one structural block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentSpec {
    /// Level and slope, both random walks.
    LocalLinearTrend,
    /// Random-walk level with an AR(1) slope around a long-run slope.
    SemilocalLinearTrend,
    /// `S - 1` states; the seasonal effects sum to noise over a cycle.
    SeasonalDummy {
        #[serde(default = "default_seasons")]
        seasons: usize,
    },
    /// Sum of stochastic harmonics at frequencies `2πj/S`. `harmonics`
    /// defaults to `floor(S/2)`.
    SeasonalTrig {
        #[serde(default = "default_seasons")]
        seasons: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        harmonics: Option<usize>,
    },
}

impl ComponentSpec {
    pub fn is_trend(&self) -> bool {
        matches!(
            self,
            ComponentSpec::LocalLinearTrend | ComponentSpec::SemilocalLinearTrend
        )
    }

    pub fn is_seasonal(&self) -> bool {
        !self.is_trend()
    }

    /// Number of state coordinates the block occupies.
    pub fn state_dimension(&self) -> usize {
        match *self {
            ComponentSpec::LocalLinearTrend => 2,
            ComponentSpec::SemilocalLinearTrend => 3,
            ComponentSpec::SeasonalDummy { seasons } => seasons - 1,
            ComponentSpec::SeasonalTrig { seasons, harmonics } => {
                let h = harmonics.unwrap_or(seasons / 2);
                if seasons % 2 == 0 && h == seasons / 2 {
                    2 * h - 1
                } else {
                    2 * h
                }
            }
        }
    }

    /// Names of the variance groups this block contributes, in order.
    pub fn variance_groups(&self) -> &'static [&'static str] {
        match self {
            ComponentSpec::LocalLinearTrend | ComponentSpec::SemilocalLinearTrend => {
                &["level", "slope"]
            }
            ComponentSpec::SeasonalDummy { .. } | ComponentSpec::SeasonalTrig { .. } => {
                &["seasonal"]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ComponentSpec::LocalLinearTrend | ComponentSpec::SemilocalLinearTrend => Ok(()),
            ComponentSpec::SeasonalDummy { seasons } if seasons < 2 => Err(Error::Spec(format!(
                "seasonal block needs at least 2 seasons, got {seasons}"
            ))),
            ComponentSpec::SeasonalDummy { .. } => Ok(()),
            ComponentSpec::SeasonalTrig { seasons, harmonics } => {
                if seasons < 2 {
                    return Err(Error::Spec(format!(
                        "seasonal block needs at least 2 seasons, got {seasons}"
                    )));
                }
                let h = harmonics.unwrap_or(seasons / 2);
                if h == 0 || h > seasons / 2 {
                    return Err(Error::Spec(format!(
                        "harmonics must lie in 1..={} for {seasons} seasons, got {h}",
                        seasons / 2
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Checks the component list: at least one block, at most one trend and
/// at most one seasonal block, each individually valid.
pub fn validate_components(components: &[ComponentSpec]) -> Result<()> {
    if components.is_empty() {
        return Err(Error::Spec("model needs at least one component".into()));
    }
    for c in components {
        c.validate()?;
    }
    if components.iter().filter(|c| c.is_trend()).count() > 1 {
        return Err(Error::Spec("at most one trend component is allowed".into()));
    }
    if components.iter().filter(|c| c.is_seasonal()).count() > 1 {
        return Err(Error::Spec(
            "at most one seasonal component is allowed".into(),
        ));
    }
    Ok(())
}

/// A model as written in a spec file: components plus optional prior
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub components: Vec<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PriorConfig>,
}

impl ModelSpec {
    pub fn new(components: Vec<ComponentSpec>) -> Self {
        ModelSpec {
            name: None,
            components,
            priors: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec =
            serde_json::from_str(text).map_err(|e| Error::Spec(format!("model spec: {e}")))?;
        validate_components(&spec.components)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    /// Name used in reports; derived from the components when unset.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.components
                .iter()
                .map(|c| match c {
                    ComponentSpec::LocalLinearTrend => "local_linear_trend".to_owned(),
                    ComponentSpec::SemilocalLinearTrend => "semilocal_linear_trend".to_owned(),
                    ComponentSpec::SeasonalDummy { seasons } => {
                        format!("seasonal_dummy({seasons})")
                    }
                    ComponentSpec::SeasonalTrig { seasons, harmonics } => format!(
                        "seasonal_trig({seasons},{})",
                        harmonics.unwrap_or(seasons / 2)
                    ),
                })
                .collect::<Vec<_>>()
                .join("+")
        })
    }
}

/// Total state dimension of a component list.
pub fn state_dimension(components: &[ComponentSpec]) -> usize {
    components.iter().map(ComponentSpec::state_dimension).sum()
}

/// Long-run slope `D` and slope autoregression `ρ` of the semilocal trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemilocalParams {
    pub long_run_slope: f64,
    pub slope_ar: f64,
}

/// Values of every variance and trend parameter of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub observation_variance: f64,
    /// One entry per variance group, in component order.
    pub state_variances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semilocal: Option<SemilocalParams>,
}

/// How the initial state moments `a1`, `P1` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    /// `a1 = 0` except the level, `P1 = κ I`. The semilocal long-run slope
    /// coordinate is pinned at its parameter value with zero variance.
    Diffuse { level: f64, kappa: f64 },
    /// Explicit moments of the first state. The semilocal long-run slope
    /// coordinate is still pinned at its parameter value.
    Exact {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    },
}

impl Initialization {
    /// Level at the first observation, `κ = 10⁶ × var(y)`.
    pub fn from_data(y: &Series) -> Self {
        let level = y.observed().next().unwrap_or(0.0);
        let var = y.variance().filter(|v| *v > 0.0).unwrap_or(1.0);
        Initialization::Diffuse {
            level,
            kappa: 1e6 * var,
        }
    }
}

/// Where one component lives inside the assembled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLayout {
    pub component: Option<ComponentSpec>,
    /// Rows of the state vector.
    pub states: Range<usize>,
    /// Columns of `R` (entries of `η`).
    pub disturbances: Range<usize>,
}

/// Assembled, time-invariant system matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub z: DVector<f64>,
    pub t: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Diagonal of the state-noise covariance.
    pub q: DVector<f64>,
    pub h: f64,
    pub a1: DVector<f64>,
    pub p1: DMatrix<f64>,
    pub layout: Vec<ComponentLayout>,
    /// Variance group of each disturbance column.
    pub disturbance_groups: Vec<usize>,
}

impl StateSpace {
    /// Builds a model from raw matrices, checking their mutual consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        z: DVector<f64>,
        t: DMatrix<f64>,
        r: DMatrix<f64>,
        q: DVector<f64>,
        h: f64,
        a1: DVector<f64>,
        p1: DMatrix<f64>,
    ) -> Result<Self> {
        let m = z.len();
        let k = q.len();
        let ss = StateSpace {
            layout: vec![ComponentLayout {
                component: None,
                states: 0..m,
                disturbances: 0..k,
            }],
            disturbance_groups: (0..k).collect(),
            z,
            t,
            r,
            q,
            h,
            a1,
            p1,
        };
        ss.validate()?;
        Ok(ss)
    }

    pub fn state_dimension(&self) -> usize {
        self.z.len()
    }

    pub fn disturbance_dimension(&self) -> usize {
        self.q.len()
    }

    /// `R diag(Q) Rᵀ`.
    pub fn state_noise_covariance(&self) -> DMatrix<f64> {
        &self.r * DMatrix::from_diagonal(&self.q) * self.r.transpose()
    }

    /// `T α + R η` with a fresh disturbance `η ~ N(0, diag(Q))`.
    pub(crate) fn step<R: Rng + ?Sized>(&self, state: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let eta = DVector::from_iterator(
            self.q.len(),
            self.q
                .iter()
                .map(|v| v.sqrt() * rng.sample::<f64, _>(StandardNormal)),
        );
        &self.t * state + &self.r * eta
    }

    /// State row that each disturbance column drives. Only meaningful when
    /// `R` is a selection matrix, which holds for every built model.
    pub fn disturbance_rows(&self) -> Vec<usize> {
        (0..self.r.ncols())
            .map(|j| self.r.column(j).iamax())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.z.len();
        let k = self.q.len();
        let dims_ok = self.t.shape() == (m, m)
            && self.r.shape() == (m, k)
            && self.a1.len() == m
            && self.p1.shape() == (m, m)
            && self.disturbance_groups.len() == k;
        if !dims_ok {
            return Err(Error::Spec(
                "state-space dimensions are inconsistent".into(),
            ));
        }
        if m == 0 {
            return Err(Error::Spec("state dimension must be positive".into()));
        }
        if self.q.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || !(self.h.is_finite() && self.h >= 0.0)
        {
            return Err(Error::Domain(
                "variances must be finite and non-negative".into(),
            ));
        }
        if (&self.p1 - self.p1.transpose()).amax() > 1e-12 * self.p1.amax().max(1.0) {
            return Err(Error::Domain("initial covariance must be symmetric".into()));
        }
        Ok(())
    }
}

/// Assembles the state-space form of `components` at parameter values
/// `params`, with initial moments from `init`.
pub fn build(
    components: &[ComponentSpec],
    params: &ModelParams,
    init: &Initialization,
) -> Result<StateSpace> {
    validate_components(components)?;
    let groups: usize = components.iter().map(|c| c.variance_groups().len()).sum();
    if params.state_variances.len() != groups {
        return Err(Error::Argument(format!(
            "expected {groups} state variances, got {}",
            params.state_variances.len()
        )));
    }
    let all_variances = params
        .state_variances
        .iter()
        .chain([&params.observation_variance]);
    if all_variances.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(
            "variances must be finite and non-negative".into(),
        ));
    }
    let has_semilocal = components.contains(&ComponentSpec::SemilocalLinearTrend);
    let semilocal = match (has_semilocal, params.semilocal) {
        (true, Some(p)) => {
            if !(p.slope_ar.abs() < 1.0) {
                return Err(Error::Domain(format!(
                    "slope autoregression must satisfy |ρ| < 1, got {}",
                    p.slope_ar
                )));
            }
            if !p.long_run_slope.is_finite() {
                return Err(Error::Domain("long-run slope must be finite".into()));
            }
            Some(p)
        }
        (true, None) => {
            return Err(Error::Argument(
                "semilocal trend needs its (D, ρ) parameters".into(),
            ))
        }
        (false, _) => None,
    };

    let m = state_dimension(components);
    let k: usize = components.iter().map(disturbance_count).sum();
    let mut z = DVector::zeros(m);
    let mut t = DMatrix::zeros(m, m);
    let mut r = DMatrix::zeros(m, k);
    let mut q = DVector::zeros(k);
    let mut layout = Vec::with_capacity(components.len());
    let mut disturbance_groups = Vec::with_capacity(k);
    // state rows that start diffuse vs. pinned
    let mut pinned = vec![false; m];
    let mut a1 = DVector::zeros(m);

    let (mut s0, mut d0, mut g0) = (0, 0, 0);
    for comp in components {
        let dim = comp.state_dimension();
        let nd = disturbance_count(comp);
        match *comp {
            ComponentSpec::LocalLinearTrend => {
                z[s0] = 1.0;
                t[(s0, s0)] = 1.0;
                t[(s0, s0 + 1)] = 1.0;
                t[(s0 + 1, s0 + 1)] = 1.0;
            }
            ComponentSpec::SemilocalLinearTrend => {
                let p = semilocal.expect("checked above");
                z[s0] = 1.0;
                t[(s0, s0)] = 1.0;
                t[(s0, s0 + 1)] = 1.0;
                t[(s0 + 1, s0 + 1)] = p.slope_ar;
                t[(s0 + 1, s0 + 2)] = 1.0 - p.slope_ar;
                t[(s0 + 2, s0 + 2)] = 1.0;
                pinned[s0 + 2] = true;
                a1[s0 + 2] = p.long_run_slope;
            }
            ComponentSpec::SeasonalDummy { .. } => {
                z[s0] = 1.0;
                for j in 0..dim {
                    t[(s0, s0 + j)] = -1.0;
                }
                for j in 1..dim {
                    t[(s0 + j, s0 + j - 1)] = 1.0;
                }
            }
            ComponentSpec::SeasonalTrig { seasons, .. } => {
                let mut row = s0;
                let mut j = 1;
                while row < s0 + dim {
                    let lambda = 2.0 * PI * j as f64 / seasons as f64;
                    z[row] = 1.0;
                    if seasons % 2 == 0 && 2 * j == seasons {
                        t[(row, row)] = -1.0;
                        row += 1;
                    } else {
                        let (s, c) = lambda.sin_cos();
                        t[(row, row)] = c;
                        t[(row, row + 1)] = s;
                        t[(row + 1, row)] = -s;
                        t[(row + 1, row + 1)] = c;
                        row += 2;
                    }
                    j += 1;
                }
            }
        }
        // disturbance columns: trend blocks drive level and slope, seasonal
        // blocks drive the first state (dummy) or every state (trig)
        let rows: Vec<usize> = match comp {
            ComponentSpec::LocalLinearTrend | ComponentSpec::SemilocalLinearTrend => {
                vec![s0, s0 + 1]
            }
            ComponentSpec::SeasonalDummy { .. } => vec![s0],
            ComponentSpec::SeasonalTrig { .. } => (s0..s0 + dim).collect(),
        };
        for (i, row) in rows.into_iter().enumerate() {
            let col = d0 + i;
            r[(row, col)] = 1.0;
            let group = match comp {
                ComponentSpec::LocalLinearTrend | ComponentSpec::SemilocalLinearTrend => g0 + i,
                _ => g0,
            };
            q[col] = params.state_variances[group];
            disturbance_groups.push(group);
        }
        layout.push(ComponentLayout {
            component: Some(*comp),
            states: s0..s0 + dim,
            disturbances: d0..d0 + nd,
        });
        s0 += dim;
        d0 += nd;
        g0 += comp.variance_groups().len();
    }

    let (a1, p1) = match init {
        Initialization::Diffuse { level, kappa } => {
            if !(kappa.is_finite() && *kappa >= 0.0) {
                return Err(Error::Domain(
                    "diffuse scale must be finite and non-negative".into(),
                ));
            }
            if let Some(trend) = components.iter().position(ComponentSpec::is_trend) {
                a1[layout[trend].states.start] = *level;
            }
            let diag =
                DVector::from_iterator(m, pinned.iter().map(|&p| if p { 0.0 } else { *kappa }));
            (a1, DMatrix::from_diagonal(&diag))
        }
        Initialization::Exact { mean, cov } => {
            if mean.len() != m || cov.shape() != (m, m) {
                return Err(Error::Argument(format!(
                    "initial moments must have dimension {m}"
                )));
            }
            let (mut mean, mut cov) = (mean.clone(), cov.clone());
            for row in (0..m).filter(|&i| pinned[i]) {
                mean[row] = a1[row];
                cov.row_mut(row).fill(0.0);
                cov.column_mut(row).fill(0.0);
            }
            (mean, cov)
        }
    };

    let ss = StateSpace {
        z,
        t,
        r,
        q,
        h: params.observation_variance,
        a1,
        p1,
        layout,
        disturbance_groups,
    };
    ss.validate()?;
    Ok(ss)
}

fn disturbance_count(comp: &ComponentSpec) -> usize {
    match comp {
        ComponentSpec::LocalLinearTrend | ComponentSpec::SemilocalLinearTrend => 2,
        ComponentSpec::SeasonalDummy { .. } => 1,
        ComponentSpec::SeasonalTrig { .. } => comp.state_dimension(),
    }
}

/// A simulated state path together with its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<f64>,
}

/// Draws `α_1 ~ N(a1, P1)` and iterates both equations for `n` periods.
pub fn simulate_with<R: Rng + ?Sized>(ss: &StateSpace, n: usize, rng: &mut R) -> Simulation {
    let chol = psd_cholesky(&ss.p1);
    let first = draw_normal(&ss.a1, &chol, rng);
    simulate_from(ss, first, n, rng)
}

/// Continues from a known first state.
pub(crate) fn simulate_from<R: Rng + ?Sized>(
    ss: &StateSpace,
    first: DVector<f64>,
    n: usize,
    rng: &mut R,
) -> Simulation {
    let obs_sd = ss.h.sqrt();
    let mut states = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    let mut state = first;
    for i in 0..n {
        let eps: f64 = rng.sample(StandardNormal);
        observations.push(ss.z.dot(&state) + obs_sd * eps);
        states.push(state.clone());
        if i + 1 < n {
            state = ss.step(&state, rng);
        }
    }
    Simulation {
        states,
        observations,
    }
}

/// Simulates `n` observations; the result is a monthly series starting
/// January 2000 and is fully determined by `seed`.
pub fn simulate(ss: &StateSpace, n: usize, seed: u64) -> Result<Series> {
    if n == 0 {
        return Err(Error::Argument(
            "simulation length must be at least 1".into(),
        ));
    }
    ss.validate()?;
    let mut rng = SeedTree::new(seed).stream("simulate", 0);
    Series::synthetic(&simulate_with(ss, n, &mut rng).observations)
}
