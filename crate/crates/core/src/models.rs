//! Samplers for the implemented field laws.
//!
//! Three families are provided, all normalized so that `E||Z(t)||^alpha = 1`
//! at every covered point:
//!
//! * `brown_resnick` — `Z(t) = exp(W(t) - alpha Var(W(t))/2)` with `W` a
//!   centered Gaussian field pinned at the origin (`W(0) = 0`, so
//!   `Z(0) = 1` exactly and the spectral tail field equals `Z`). The
//!   covariance comes from the variogram, simulated by dense Cholesky with
//!   jitter escalation.
//! * `ar1_tail_chain` — the tail chain with forward ratio `phi`: forward
//!   values `phi^t` are deterministic, backward survival to `-k` has
//!   probability `phi^(alpha k)`, zero beyond the kill time. Exact sampler.
//! * `moving_max` / `deterministic_q` — a deterministic cluster profile
//!   `q`; `Z` is its random-shift construction and the spectral tail field
//!   picks an index `J` with probability `q_J^alpha / sum q^alpha`. Exact
//!   sampler.
//!
//! For the discrete families `Z` is assembled as `B^N q / p_N(N)^(1/alpha)`
//! on an internally enlarged window, so that every public-window point has
//! its full complement of shifted-cluster mass (exactly for finite-support
//! profiles, up to the documented decay tolerance for the tail chain).

use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::field::{FieldSample, Norm};

/// Tail mass tolerated outside a truncated geometric support.
pub const GEOMETRIC_TAIL_TOLERANCE: f64 = 1e-6;

/// Variogram of the Gaussian layer of a Brown-Resnick model.
#[derive(Debug, Clone, PartialEq)]
pub enum Variogram {
    /// `gamma(h) = c * |h|_1`
    Linear { c: f64 },
    /// `gamma(h) = c * |h|^(2H)`, one-dimensional index set only.
    Power { c: f64, hurst: f64 },
}

impl Variogram {
    pub fn eval(&self, h_physical: &[f64]) -> f64 {
        match self {
            Variogram::Linear { c } => c * h_physical.iter().map(|v| v.abs()).sum::<f64>(),
            Variogram::Power { c, hurst } => c * h_physical[0].abs().powf(2.0 * hurst),
        }
    }

    /// Asymptotic linear slope of `gamma(h) / max_i |h_i|`.
    fn asymptotic_slope(&self) -> f64 {
        match self {
            Variogram::Linear { c } => *c,
            Variogram::Power { c, hurst } => {
                if *hurst > 0.5 {
                    f64::INFINITY
                } else if *hurst < 0.5 {
                    0.0
                } else {
                    *c
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    BrownResnick {
        variogram: Variogram,
        dim_l: usize,
        delta: f64,
    },
    Ar1TailChain {
        phi: f64,
    },
    MovingMax {
        coeffs: Vec<f64>,
    },
    DeterministicQ {
        values: Vec<f64>,
        start: i64,
    },
}

/// Declarative description of a field law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub alpha: f64,
    pub norm: Norm,
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn brown_resnick(alpha: f64, variogram: Variogram, dim_l: usize, delta: f64) -> Self {
        ModelSpec {
            alpha,
            norm: Norm::Abs,
            kind: ModelKind::BrownResnick {
                variogram,
                dim_l,
                delta,
            },
        }
    }

    pub fn ar1(alpha: f64, phi: f64) -> Self {
        ModelSpec {
            alpha,
            norm: Norm::Abs,
            kind: ModelKind::Ar1TailChain { phi },
        }
    }

    pub fn moving_max(alpha: f64, coeffs: Vec<f64>) -> Self {
        ModelSpec {
            alpha,
            norm: Norm::Abs,
            kind: ModelKind::MovingMax { coeffs },
        }
    }

    pub fn deterministic_q(alpha: f64, values: Vec<f64>, start: i64) -> Self {
        ModelSpec {
            alpha,
            norm: Norm::Abs,
            kind: ModelKind::DeterministicQ { values, start },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config("alpha must be positive and finite"));
        }
        match &self.kind {
            ModelKind::BrownResnick {
                variogram,
                dim_l,
                delta,
            } => {
                if *dim_l == 0 {
                    return Err(Error::config("brown_resnick needs dim_l >= 1"));
                }
                if !(*delta > 0.0) {
                    return Err(Error::config("brown_resnick needs delta > 0"));
                }
                match variogram {
                    Variogram::Linear { c } => {
                        if !(*c > 0.0) {
                            return Err(Error::config("variogram slope must be positive"));
                        }
                    }
                    Variogram::Power { c, hurst } => {
                        if !(*c > 0.0) || !(*hurst > 0.0 && *hurst <= 1.0) {
                            return Err(Error::config("power variogram needs c > 0, hurst in (0,1]"));
                        }
                        if *dim_l != 1 {
                            return Err(Error::config("power variogram is one-dimensional"));
                        }
                    }
                }
            }
            ModelKind::Ar1TailChain { phi } => {
                if !(*phi > 0.0 && *phi < 1.0) {
                    return Err(Error::config("phi must lie in (0,1)"));
                }
            }
            ModelKind::MovingMax { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                    return Err(Error::config("moving_max coefficients must be nonnegative"));
                }
                if !coeffs.iter().any(|&c| c > 0.0) {
                    return Err(Error::config("moving_max needs at least one positive coefficient"));
                }
            }
            ModelKind::DeterministicQ { values, .. } => {
                if values.is_empty() || values.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                    return Err(Error::config("deterministic_q values must be nonnegative"));
                }
                if !values.iter().any(|&c| c > 0.0) {
                    return Err(Error::config("deterministic_q needs a positive value"));
                }
            }
        }
        Ok(())
    }

    pub fn dim_l(&self) -> usize {
        match &self.kind {
            ModelKind::BrownResnick { dim_l, .. } => *dim_l,
            _ => 1,
        }
    }

    pub fn delta(&self) -> f64 {
        match &self.kind {
            ModelKind::BrownResnick { delta, .. } => *delta,
            _ => 1.0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            ModelKind::BrownResnick { .. } => "brown_resnick",
            ModelKind::Ar1TailChain { .. } => "ar1_tail_chain",
            ModelKind::MovingMax { .. } => "moving_max",
            ModelKind::DeterministicQ { .. } => "deterministic_q",
        }
    }

    /// Radius beyond which a cluster's alpha-mass is below the geometric
    /// tail tolerance (exact support radius for finite profiles).
    pub fn decay_radius(&self) -> i64 {
        match &self.kind {
            ModelKind::BrownResnick { variogram, delta, .. } => {
                // ln E[Z(t)^alpha 1{..}] decays like -alpha * slope * |t| / 2;
                // solve for the tolerance at physical scale, floor at 8 cells.
                let slope = match variogram {
                    Variogram::Linear { c } => *c,
                    Variogram::Power { c, .. } => *c,
                };
                let phys = -GEOMETRIC_TAIL_TOLERANCE.ln() * 2.0 / (self.alpha * slope);
                ((phys / delta).ceil() as i64).max(8)
            }
            ModelKind::Ar1TailChain { phi } => {
                (GEOMETRIC_TAIL_TOLERANCE.ln() / (self.alpha * phi.ln())).ceil() as i64
            }
            ModelKind::MovingMax { coeffs } => coeffs.len() as i64,
            ModelKind::DeterministicQ { values, start } => {
                let end = start + values.len() as i64;
                start.abs().max(end.abs())
            }
        }
    }

    /// Normalized deterministic profile for the random-shift construction,
    /// `sum_t q(t)^alpha = 1`. Only defined for the deterministic kinds.
    fn normalized_profile(&self) -> Option<(Vec<f64>, i64)> {
        let (values, start) = match &self.kind {
            ModelKind::MovingMax { coeffs } => (coeffs.clone(), 0i64),
            ModelKind::DeterministicQ { values, start } => (values.clone(), *start),
            _ => return None,
        };
        let total: f64 = values.iter().map(|v| v.powf(self.alpha)).sum();
        let scale = total.powf(1.0 / self.alpha);
        Some((values.iter().map(|v| v / scale).collect(), start))
    }
}

/// `true` iff the variogram's asymptotic linear slope strictly exceeds `8 l`.
pub fn validate_dissipative(model: &ModelSpec) -> Result<bool> {
    match &model.kind {
        ModelKind::BrownResnick { variogram, dim_l, .. } => {
            Ok(variogram.asymptotic_slope() > 8.0 * *dim_l as f64)
        }
        _ => Err(Error::config(
            "dissipativity slope check applies to brown_resnick models only",
        )),
    }
}

/// A field sample paired with a nonnegative importance weight. Streams with
/// all weights 1 are exact samplers; tilted laws carry their tilting factor
/// here and estimators self-normalize.
#[derive(Debug, Clone)]
pub struct WeightedDraw {
    pub sample: FieldSample,
    pub weight: f64,
}

/// Distribution of the random shift `N` on the grid, with positive mass on
/// a finite box support. `density_at` reports the lambda-density
/// `mass / delta^l` used in the `p_N(N)^(-1/alpha)` rescaling.
#[derive(Debug, Clone)]
pub struct ShiftDistribution {
    kind: ShiftKind,
    support_half: Vec<i64>,
    delta: f64,
    /// Masses in lexicographic order over the support box; sums to 1.
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftKind {
    /// `mass(t) propto prod_i ratio^|t_i|`
    SymmetricGeometric { ratio: f64 },
    UniformWindow,
    /// `mass(t) propto exp(-|t|^2 / (2 sigma^2))`
    TruncatedGaussian { sigma: f64 },
}

fn box_points(half: &[i64]) -> Vec<Vec<i64>> {
    let mut pts = vec![vec![]];
    for &a in half {
        let mut next = Vec::with_capacity(pts.len() * (2 * a + 1) as usize);
        for p in &pts {
            for v in -a..=a {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

impl ShiftDistribution {
    pub fn new(kind: ShiftKind, support_half: Vec<i64>, delta: f64) -> Result<Self> {
        if support_half.is_empty() || support_half.iter().any(|&a| a < 0) {
            return Err(Error::config("shift support must have nonnegative half-widths"));
        }
        match kind {
            ShiftKind::SymmetricGeometric { ratio } => {
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::config("geometric ratio must lie in (0,1)"));
                }
            }
            ShiftKind::TruncatedGaussian { sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::config("gaussian shift needs sigma > 0"));
                }
            }
            ShiftKind::UniformWindow => {}
        }
        let pts = box_points(&support_half);
        let mut masses: Vec<f64> = pts
            .iter()
            .map(|t| match kind {
                ShiftKind::SymmetricGeometric { ratio } => {
                    ratio.powi(t.iter().map(|v| v.abs()).sum::<i64>() as i32)
                }
                ShiftKind::UniformWindow => 1.0,
                ShiftKind::TruncatedGaussian { sigma } => {
                    let r2: f64 = t.iter().map(|&v| (v as f64) * (v as f64)).sum();
                    (-r2 / (2.0 * sigma * sigma)).exp()
                }
            })
            .collect();
        let total: f64 = masses.iter().sum();
        for m in &mut masses {
            *m /= total;
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        Ok(ShiftDistribution {
            kind,
            support_half,
            delta,
            masses,
            cumulative,
        })
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn support_half(&self) -> &[i64] {
        &self.support_half
    }

    /// Degenerate single-point distribution; only sensible in tests.
    pub fn point_mass(dim_l: usize, delta: f64) -> Self {
        ShiftDistribution::new(ShiftKind::UniformWindow, vec![0; dim_l], delta).unwrap()
    }

    fn point_for_index(&self, mut idx: usize) -> Vec<i64> {
        let mut t = vec![0i64; self.support_half.len()];
        for axis in (0..self.support_half.len()).rev() {
            let extent = (2 * self.support_half[axis] + 1) as usize;
            t[axis] = (idx % extent) as i64 - self.support_half[axis];
            idx /= extent;
        }
        t
    }

    /// Sample a shift; returns the point and its lambda-density.
    pub fn sample(&self, rng: &mut Pcg64) -> (Vec<i64>, f64) {
        let u: f64 = rng.random();
        let idx = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) => (i + 1).min(self.masses.len() - 1),
            Err(i) => i.min(self.masses.len() - 1),
        };
        let t = self.point_for_index(idx);
        (t, self.density_of_index(idx))
    }

    fn density_of_index(&self, idx: usize) -> f64 {
        self.masses[idx] / self.delta.powi(self.support_half.len() as i32)
    }

    pub fn density_at(&self, t: &[i64]) -> Option<f64> {
        if t.iter()
            .zip(&self.support_half)
            .any(|(v, a)| v.abs() > *a)
        {
            return None;
        }
        let mut idx = 0usize;
        for axis in 0..self.support_half.len() {
            let extent = (2 * self.support_half[axis] + 1) as usize;
            idx = idx * extent + (t[axis] + self.support_half[axis]) as usize;
        }
        Some(self.density_of_index(idx))
    }

    pub fn support_points(&self) -> Vec<Vec<i64>> {
        box_points(&self.support_half)
    }
}

/// Cholesky factor of the pinned covariance of the Gaussian layer.
struct GaussianFactor {
    /// Window points excluding the origin, lexicographic order.
    points: Vec<Vec<i64>>,
    /// Dense lower-triangular factor, row-major.
    chol: Vec<f64>,
    /// `Var W(t) = gamma(t)` per point.
    variances: Vec<f64>,
    jitter_used: f64,
}

fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(())
}

impl GaussianFactor {
    fn build(variogram: &Variogram, delta: f64, window: &[i64]) -> Result<Self> {
        let mut points = box_points(window);
        points.retain(|t| t.iter().any(|&v| v != 0));
        let n = points.len();
        let phys =
            |t: &[i64]| -> Vec<f64> { t.iter().map(|&v| v as f64 * delta).collect::<Vec<f64>>() };
        let gamma = |t: &[i64]| variogram.eval(&phys(t));
        let variances: Vec<f64> = points.iter().map(|t| gamma(t)).collect();
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let diff: Vec<i64> = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| a - b)
                    .collect();
                let c = 0.5 * (variances[i] + variances[j] - gamma(&diff));
                cov[i * n + j] = c;
                cov[j * n + i] = c;
            }
        }
        // jitter escalation for borderline positive semidefinite grids
        let mut jitter = 0.0f64;
        loop {
            let mut attempt = cov.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    attempt[i * n + i] += jitter;
                }
            }
            match cholesky_in_place(&mut attempt, n) {
                Ok(()) => {
                    return Ok(GaussianFactor {
                        points,
                        chol: attempt,
                        variances,
                        jitter_used: jitter,
                    });
                }
                Err(pivot) => {
                    jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
                    if jitter > 1e-6 {
                        return Err(Error::numerical(format!(
                            "covariance not positive definite after jitter escalation \
                             (n = {n}, failing pivot {pivot}, last jitter 1e-6)"
                        )));
                    }
                }
            }
        }
    }
}

/// Sampler for one model on one window. Immutable after construction; the
/// Gaussian factor is computed once and shared.
pub struct Sampler {
    model: ModelSpec,
    window: Vec<i64>,
    gaussian: Option<GaussianFactor>,
    /// Default shift distribution for the discrete random-shift `Z`.
    default_shift: Option<ShiftDistribution>,
    /// Internal sampling window for the discrete construction.
    internal_half: Vec<i64>,
}

impl Sampler {
    pub fn new(model: &ModelSpec, window: &[i64]) -> Result<Self> {
        model.validate()?;
        let l = model.dim_l();
        if window.len() != l {
            return Err(Error::config(format!(
                "window has {} axes, model needs {}",
                window.len(),
                l
            )));
        }
        if window.iter().any(|&a| a < 1) {
            return Err(Error::config("window half-width must be at least 1"));
        }
        let mut gaussian = None;
        let mut default_shift = None;
        let mut internal_half = window.to_vec();
        match &model.kind {
            ModelKind::BrownResnick {
                variogram, delta, ..
            } => {
                gaussian = Some(GaussianFactor::build(variogram, *delta, window)?);
            }
            _ => {
                // shift support reaches one decay radius past the window so
                // every public point sees its full shifted-cluster mass;
                // uniform masses keep the 1/p_N(N) factor bounded
                let r = model.decay_radius();
                let b: Vec<i64> = window.iter().map(|&a| a + r).collect();
                internal_half = window.iter().map(|&a| 2 * a + r).collect();
                default_shift = Some(ShiftDistribution::new(
                    ShiftKind::UniformWindow,
                    b,
                    model.delta(),
                )?);
            }
        }
        Ok(Sampler {
            model: model.clone(),
            window: window.to_vec(),
            gaussian,
            default_shift,
            internal_half,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn window(&self) -> &[i64] {
        &self.window
    }

    pub fn default_shift(&self) -> Option<&ShiftDistribution> {
        self.default_shift.as_ref()
    }

    pub fn jitter_used(&self) -> Option<f64> {
        self.gaussian.as_ref().map(|g| g.jitter_used)
    }

    /// One realization of the representer `Z` on the window.
    pub fn sample_z(&self, rng: &mut Pcg64) -> FieldSample {
        match &self.model.kind {
            ModelKind::BrownResnick { .. } => self.sample_brown_resnick(rng),
            _ => {
                let shift = self.default_shift.as_ref().unwrap();
                self.sample_z_shifted(shift, rng)
            }
        }
    }

    /// Discrete-model `Z` with an explicit shift distribution
    /// (`Z = B^N Q / p_N(N)^(1/alpha)`).
    pub fn sample_z_shifted(&self, shift: &ShiftDistribution, rng: &mut Pcg64) -> FieldSample {
        match &self.model.kind {
            ModelKind::BrownResnick { .. } => self.sample_brown_resnick(rng),
            _ => {
                let q = self.sample_cluster_profile(rng);
                let (n, density) = shift.sample(rng);
                let scale = density.powf(-1.0 / self.model.alpha);
                FieldSample::scalar_from_fn(1, &self.window, self.model.delta(), |t| {
                    let s = t[0] - n[0];
                    scale * q.at(s)
                })
            }
        }
    }

    /// The spectral tail field `Theta` (`||Theta(0)|| = 1` on every draw).
    pub fn sample_theta(&self, rng: &mut Pcg64) -> WeightedDraw {
        match &self.model.kind {
            ModelKind::BrownResnick { .. } => WeightedDraw {
                sample: self.sample_brown_resnick(rng),
                weight: 1.0,
            },
            ModelKind::Ar1TailChain { phi } => {
                let alpha = self.model.alpha;
                let u: f64 = 1.0 - rng.random::<f64>();
                let kill = (u.ln() / (alpha * phi.ln())).floor() as i64;
                let a = self.window[0];
                let phi = *phi;
                let sample = FieldSample::scalar_from_fn(1, &self.window, 1.0, |t| {
                    if t[0] >= -kill.min(a) {
                        phi.powi(t[0] as i32)
                    } else {
                        0.0
                    }
                });
                WeightedDraw {
                    sample,
                    weight: 1.0,
                }
            }
            ModelKind::MovingMax { .. } | ModelKind::DeterministicQ { .. } => {
                let (q, start) = self.model.normalized_profile().unwrap();
                let alpha = self.model.alpha;
                let weights: Vec<f64> = q.iter().map(|v| v.powf(alpha)).collect();
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                let j = start + pick as i64;
                let q_at_j = q[pick];
                let sample = FieldSample::scalar_from_fn(1, &self.window, 1.0, |t| {
                    let idx = j + t[0] - start;
                    if idx >= 0 && (idx as usize) < q.len() {
                        q[idx as usize] / q_at_j
                    } else {
                        0.0
                    }
                });
                WeightedDraw {
                    sample,
                    weight: 1.0,
                }
            }
        }
    }

    /// The tail field `Y = R Theta` with `R` alpha-Pareto via inverse
    /// transform, independent of `Theta`.
    pub fn sample_y(&self, rng: &mut Pcg64) -> WeightedDraw {
        let mut draw = self.sample_theta(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        let r = u.powf(-1.0 / self.model.alpha);
        draw.sample.scale(r);
        draw
    }

    fn sample_brown_resnick(&self, rng: &mut Pcg64) -> FieldSample {
        let g = self.gaussian.as_ref().unwrap();
        let n = g.points.len();
        let alpha = self.model.alpha;
        let mut noise = vec![0.0f64; n];
        for z in &mut noise {
            *z = rng.sample(StandardNormal);
        }
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += g.chol[i * n + k] * noise[k];
            }
            w[i] = acc;
        }
        let mut values = std::collections::HashMap::new();
        for (i, p) in g.points.iter().enumerate() {
            values.insert(p.clone(), (w[i] - alpha * g.variances[i] / 2.0).exp());
        }
        let l = self.model.dim_l();
        FieldSample::from_fn(l, 1, &self.window, self.model.delta(), |t, out| {
            out[0] = if t.iter().all(|&v| v == 0) {
                1.0
            } else {
                values[t]
            };
        })
    }

    /// Sample the normalized cluster profile used by the random-shift `Z`
    /// on the internal window: the deterministic profile for moving-max
    /// kinds, `Theta / S(Theta)^(1/alpha)` for the tail chain.
    fn sample_cluster_profile(&self, rng: &mut Pcg64) -> ClusterProfile {
        match &self.model.kind {
            ModelKind::MovingMax { .. } | ModelKind::DeterministicQ { .. } => {
                let (q, start) = self.model.normalized_profile().unwrap();
                ClusterProfile {
                    values: q,
                    start,
                }
            }
            ModelKind::Ar1TailChain { phi } => {
                let alpha = self.model.alpha;
                let u: f64 = 1.0 - rng.random::<f64>();
                let kill = (u.ln() / (alpha * phi.ln())).floor() as i64;
                let a_int = self.internal_half[0];
                let lo = -kill.min(a_int);
                let mut values = Vec::with_capacity((a_int - lo + 1) as usize);
                for t in lo..=a_int {
                    values.push(phi.powi(t as i32));
                }
                let total: f64 = values.iter().map(|v| v.powf(alpha)).sum();
                let scale = total.powf(1.0 / alpha);
                for v in &mut values {
                    *v /= scale;
                }
                ClusterProfile { values, start: lo }
            }
            ModelKind::BrownResnick { .. } => unreachable!(),
        }
    }
}

struct ClusterProfile {
    values: Vec<f64>,
    start: i64,
}

impl ClusterProfile {
    fn at(&self, t: i64) -> f64 {
        let idx = t - self.start;
        if idx >= 0 && (idx as usize) < self.values.len() {
            self.values[idx as usize]
        } else {
            0.0
        }
    }
}
