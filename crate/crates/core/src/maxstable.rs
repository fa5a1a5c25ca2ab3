//! Simulation of the associated stationary max-stable field via the
//! extreme-value series `X(t) = max_i Gamma_i^(-1/alpha) ||Z_i(t)||` over a
//! unit-rate Poisson arrival sequence, with two interchangeable
//! representers: the model's `Z` directly, or the randomly shifted cluster
//! field `Z_N = B^N Q / p_N(N)^(1/alpha)`.
//!
//! The series is truncated when the Markov bound on the probability that a
//! future term still changes the running minimum falls below the requested
//! epsilon: terms stop at `Gamma > C_hat / (eps * m_min^alpha)` with
//! `C_hat` a pilot estimate of `E[sup over the evaluation points of
//! ||Z||^alpha]`. The bound used and the truncation count are reported.

use rand::Rng;
use rand_pcg::Pcg64;

use crate::cluster::{
    random_shift, ClusterConstructionSpec, ClusterSampler, ConstructionMethod,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::models::{validate_dissipative, ModelKind, ModelSpec, Sampler, ShiftDistribution, ShiftKind};
use crate::rng::rng_for;

/// Which representer feeds the series.
#[derive(Debug, Clone, PartialEq)]
pub enum MaxStableRep {
    DeHaan,
    /// Shifted-cluster representer; the construction must have a pathwise
    /// scale constant.
    Rosinski { construction: ConstructionMethod },
}

/// Configuration of one max-stable sampling run.
#[derive(Debug, Clone)]
pub struct MaxStableSampleSpec {
    pub points: Vec<Vec<i64>>,
    pub representation: MaxStableRep,
    pub stopping_epsilon: f64,
    pub max_terms: u64,
}

impl MaxStableSampleSpec {
    pub fn new(points: Vec<Vec<i64>>, representation: MaxStableRep) -> Self {
        MaxStableSampleSpec {
            points,
            representation,
            stopping_epsilon: 0.01,
            max_terms: 100_000,
        }
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.stopping_epsilon = eps;
        self
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::config("max-stable sampling needs at least one point"));
        }
        let l = model.dim_l();
        if self.points.iter().any(|p| p.len() != l) {
            return Err(Error::config("point dimension does not match the model"));
        }
        if !(self.stopping_epsilon > 0.0 && self.stopping_epsilon <= 0.1) {
            return Err(Error::config("stopping epsilon must lie in (0, 0.1]"));
        }
        if let MaxStableRep::Rosinski { construction } = &self.representation {
            if !construction.has_exact_scale() {
                return Err(Error::config(
                    "rosinski representer needs a construction with a pathwise scale \
                     (ffd_theta or ffd_z)",
                ));
            }
            match &model.kind {
                ModelKind::BrownResnick { .. } => {
                    if !validate_dissipative(model)? {
                        return Err(Error::config(
                            "rosinski representation needs a purely dissipative model",
                        ));
                    }
                }
                _ => {} // discrete kinds here have geometrically decaying clusters
            }
        }
        Ok(())
    }
}

/// Output of a max-stable sampling run.
#[derive(Debug, Clone)]
pub struct MaxStableRun {
    /// `values[s][i]` = sample `s` of `X(points[i])`.
    pub values: Vec<Vec<f64>>,
    pub mean_terms: f64,
    pub truncated_samples: u64,
    /// Pilot estimate of `E[sup over points of ||Z||^alpha]`.
    pub c_hat: f64,
    pub epsilon: f64,
}

/// Draws one representer realization and reads it at the evaluation points.
trait Representer: Sync {
    fn values_at(&self, points: &[Vec<i64>], rng: &mut Pcg64, out: &mut [f64]);
}

struct DirectRepresenter {
    sampler: Sampler,
    norm: crate::field::Norm,
}

impl Representer for DirectRepresenter {
    fn values_at(&self, points: &[Vec<i64>], rng: &mut Pcg64, out: &mut [f64]) {
        let z = self.sampler.sample_z(rng);
        for (o, p) in out.iter_mut().zip(points) {
            *o = z.norm_at(&self.norm, p).unwrap_or(0.0);
        }
    }
}

struct ShiftedClusterRepresenter<'a> {
    cluster: ClusterSampler<'a>,
    shift: ShiftDistribution,
    alpha: f64,
    decay_radius: i64,
    norm: crate::field::Norm,
}

impl Representer for ShiftedClusterRepresenter<'_> {
    fn values_at(&self, points: &[Vec<i64>], rng: &mut Pcg64, out: &mut [f64]) {
        let q = self
            .cluster
            .weighted_draw(rng)
            .expect("exact-scale constructions cannot fail pathwise")
            .draw;
        let shifted = random_shift(&q, &self.shift, self.alpha, self.decay_radius, rng);
        for (o, p) in out.iter_mut().zip(points) {
            *o = shifted.draw.sample.norm_at(&self.norm, p).unwrap_or(0.0);
        }
    }
}

fn max_abs_point(points: &[Vec<i64>]) -> i64 {
    points
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .max()
        .unwrap_or(0)
}

/// Parallel map over sample indices with deterministic ordering.
fn par_map_samples<T, F>(n: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let workers = threads.max(1);
    let chunk = n.div_ceil(workers as u64).max(1);
    let mut out: Vec<Option<T>> = Vec::with_capacity(n as usize);
    out.resize_with(n as usize, || None);
    let mut slices: Vec<&mut [Option<T>]> = Vec::new();
    let mut rest = out.as_mut_slice();
    while !rest.is_empty() {
        let take = (chunk as usize).min(rest.len());
        let (head, tail) = rest.split_at_mut(take);
        slices.push(head);
        rest = tail;
    }
    let err: std::sync::Mutex<Option<Error>> = std::sync::Mutex::new(None);
    std::thread::scope(|scope| {
        for (ci, slice) in slices.into_iter().enumerate() {
            let f = &f;
            let err = &err;
            scope.spawn(move || {
                let base = ci as u64 * chunk;
                for (off, slot) in slice.iter_mut().enumerate() {
                    match f(base + off as u64) {
                        Ok(v) => *slot = Some(v),
                        Err(e) => {
                            *err.lock().unwrap() = Some(e);
                            return;
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    Ok(out.into_iter().map(|v| v.expect("filled")).collect())
}

fn pilot_c_hat<R: Representer>(rep: &R, points: &[Vec<i64>], alpha: f64, seed: u64) -> f64 {
    let n = 2000u64;
    let mut total = 0.0;
    let mut buf = vec![0.0f64; points.len()];
    for i in 0..n {
        let mut rng = rng_for(seed, crate::rng::salt(0xF0, i));
        rep.values_at(points, &mut rng, &mut buf);
        total += buf.iter().fold(0.0f64, |m, v| m.max(*v)).powf(alpha);
    }
    total / n as f64
}

fn series_sample<R: Representer>(
    rep: &R,
    points: &[Vec<i64>],
    alpha: f64,
    c_hat: f64,
    eps: f64,
    max_terms: u64,
    rng: &mut Pcg64,
) -> (Vec<f64>, u64, bool) {
    let k = points.len();
    let mut maxima = vec![0.0f64; k];
    let mut gamma = 0.0f64;
    let mut buf = vec![0.0f64; k];
    let mut terms = 0u64;
    let mut truncated = false;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        gamma += -u.ln();
        let m_min = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
        if m_min > 0.0 && gamma > c_hat / (eps * m_min.powf(alpha)) {
            break;
        }
        if terms >= max_terms {
            truncated = true;
            break;
        }
        rep.values_at(points, rng, &mut buf);
        let scale = gamma.powf(-1.0 / alpha);
        for (m, v) in maxima.iter_mut().zip(&buf) {
            *m = m.max(scale * v);
        }
        terms += 1;
    }
    (maxima, terms, truncated)
}

fn run_series<R: Representer>(
    rep: &R,
    spec: &MaxStableSampleSpec,
    alpha: f64,
    n: u64,
    seed: u64,
    threads: usize,
    salt: u64,
) -> Result<MaxStableRun> {
    let c_hat = pilot_c_hat(rep, &spec.points, alpha, seed);
    let results = par_map_samples(n, threads, |i| {
        let mut rng = rng_for(seed, crate::rng::salt(salt, i));
        Ok(series_sample(
            rep,
            &spec.points,
            alpha,
            c_hat,
            spec.stopping_epsilon,
            spec.max_terms,
            &mut rng,
        ))
    })?;
    let mut values = Vec::with_capacity(results.len());
    let mut term_total = 0u64;
    let mut truncated = 0u64;
    for (v, t, tr) in results {
        values.push(v);
        term_total += t;
        truncated += tr as u64;
    }
    Ok(MaxStableRun {
        mean_terms: term_total as f64 / n as f64,
        truncated_samples: truncated,
        c_hat,
        epsilon: spec.stopping_epsilon,
        values,
    })
}

/// Sample the max-stable field at the spec's points, `n` independent
/// realizations.
pub fn sample_max_stable(
    model: &ModelSpec,
    spec: &MaxStableSampleSpec,
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<MaxStableRun> {
    spec.validate(model)?;
    let alpha = model.alpha;
    let reach = max_abs_point(&spec.points);
    match &spec.representation {
        MaxStableRep::DeHaan => {
            let window = vec![reach.max(1); model.dim_l()];
            let rep = DirectRepresenter {
                sampler: Sampler::new(model, &window)?,
                norm: model.norm.clone(),
            };
            run_series(&rep, spec, alpha, n, seed, threads, 0xF1)
        }
        MaxStableRep::Rosinski { construction } => {
            let r = model.decay_radius();
            let shift_half = vec![reach + r; model.dim_l()];
            let q_half = vec![2 * reach + 2 * r; model.dim_l()];
            let sampler = Sampler::new(model, &q_half)?;
            let lattice = LatticeSpec::identity(model.dim_l(), model.delta());
            let cluster = ClusterSampler::new(
                ClusterConstructionSpec::new(*construction, lattice),
                &sampler,
            )?;
            let shift = ShiftDistribution::new(
                ShiftKind::UniformWindow,
                shift_half,
                model.delta(),
            )?;
            let rep = ShiftedClusterRepresenter {
                cluster,
                shift,
                alpha,
                decay_radius: r,
                norm: model.norm.clone(),
            };
            run_series(&rep, spec, alpha, n, seed, threads, 0xF2)
        }
    }
}

/// Monte Carlo estimate of `-ln P(X(t_1) <= x_1, ..., X(t_k) <= x_k)` via
/// `E[max_i x_i^-alpha ||Z(t_i)||^alpha]` over representer draws.
pub fn fidi_neglog(
    model: &ModelSpec,
    points: &[Vec<i64>],
    levels: &[f64],
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<(f64, f64)> {
    if points.is_empty() || points.len() != levels.len() {
        return Err(Error::config("points and levels must be nonempty and matched"));
    }
    if levels.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::config("levels must be positive"));
    }
    let reach = max_abs_point(points);
    let window = vec![reach.max(1); model.dim_l()];
    let sampler = Sampler::new(model, &window)?;
    let alpha = model.alpha;
    let norm = model.norm.clone();
    let acc = crate::extremal::run_samples(n, seed, 0xF4, threads, |_i, rng| {
        let z = sampler.sample_z(rng);
        let mut m = 0.0f64;
        for (p, &x) in points.iter().zip(levels) {
            let v = z.norm_at(&norm, p).unwrap_or(0.0);
            m = m.max(x.powf(-alpha) * v.powf(alpha));
        }
        Ok((1.0, m))
    })?;
    Ok((acc.mean(), acc.stderr()))
}

/// Empirical `-ln P(X <= levels pointwise)` from a sampling run, with a
/// delta-method standard error.
pub fn neglog_empirical(run: &MaxStableRun, levels: &[f64]) -> Result<(f64, f64)> {
    let n = run.values.len();
    if n == 0 || levels.len() != run.values[0].len() {
        return Err(Error::config("levels must match the sampled points"));
    }
    let hits = run
        .values
        .iter()
        .filter(|v| v.iter().zip(levels).all(|(x, l)| x <= l))
        .count();
    let p = hits as f64 / n as f64;
    if p == 0.0 {
        return Err(Error::numerical("empirical CDF is zero at the requested levels"));
    }
    let se_p = (p * (1.0 - p) / n as f64).sqrt();
    Ok((-p.ln(), se_p / p))
}
