//! Monte Carlo estimators of the candidate extremal index and the
//! machinery they share: a mergeable weighted accumulator with delta-method
//! standard errors, a block-deterministic parallel runner, and the
//! cross-representation consistency report.
//!
//! Sample index `i` always maps to the same random stream, and samples are
//! accumulated in fixed blocks merged in block order, so a run's output is
//! bit-identical for any worker count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand_pcg::Pcg64;

use crate::cluster::{ClusterConstructionSpec, ClusterSampler};
use crate::error::{Error, Result};
use crate::field::{
    exceedance_sum, first_exceedance, sum_alpha, sup_norm, sup_norm_region, OrderRegion,
};
use crate::lattice::LatticeSpec;
use crate::models::{ModelSpec, Sampler, ShiftDistribution};
use crate::rng::rng_for;
use crate::stats::ks_statistic;

/// Samples per accumulation block; fixed so that float summation order is
/// independent of the worker count.
const BLOCK: u64 = 4096;

/// Mergeable moments of a weighted stream `(w_i, g_i)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    pub count: u64,
    pub weight_sum: f64,
    pub weighted_sum: f64,
    pub weighted_sum_sq: f64,
    pub weight_sq_sum: f64,
    pub weight_sq_g: f64,
    pub weight_sq_g_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, weight: f64, value: f64) {
        self.count += 1;
        self.weight_sum += weight;
        self.weighted_sum += weight * value;
        self.weighted_sum_sq += weight * value * value;
        self.weight_sq_sum += weight * weight;
        self.weight_sq_g += weight * weight * value;
        self.weight_sq_g_sq += weight * weight * value * value;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.weight_sum += other.weight_sum;
        self.weighted_sum += other.weighted_sum;
        self.weighted_sum_sq += other.weighted_sum_sq;
        self.weight_sq_sum += other.weight_sq_sum;
        self.weight_sq_g += other.weight_sq_g;
        self.weight_sq_g_sq += other.weight_sq_g_sq;
    }

    /// Self-normalized mean `sum(w g) / sum(w)`.
    pub fn mean(&self) -> f64 {
        if self.weight_sum > 0.0 {
            self.weighted_sum / self.weight_sum
        } else {
            f64::NAN
        }
    }

    /// Delta-method standard error of the self-normalized ratio.
    pub fn stderr(&self) -> f64 {
        if self.weight_sum <= 0.0 {
            return f64::NAN;
        }
        let m = self.mean();
        let num = self.weight_sq_g_sq - 2.0 * m * self.weight_sq_g + m * m * self.weight_sq_sum;
        (num.max(0.0)).sqrt() / self.weight_sum
    }

    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub fn n_effective(&self) -> f64 {
        if self.weight_sq_sum > 0.0 {
            self.weight_sum * self.weight_sum / self.weight_sq_sum
        } else {
            0.0
        }
    }

    /// Weighted per-draw sample variance of `g`.
    pub fn per_draw_variance(&self) -> f64 {
        if self.weight_sum <= 0.0 {
            return f64::NAN;
        }
        let m = self.mean();
        (self.weighted_sum_sq / self.weight_sum - m * m).max(0.0)
    }
}

/// Point estimate with diagnostics for one representation.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub representation: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub n_effective: f64,
    pub per_draw_variance: f64,
    /// Estimate at twice the window half-width minus the estimate at the
    /// run window, from a small diagnostic re-run.
    pub window_drift: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Run `n` samples through `per_sample`, producing `k` coupled accumulators.
/// `per_sample(i, rng, values)` fills the per-output values and returns the
/// draw weight shared by all outputs.
pub fn run_samples_multi<F>(
    n: u64,
    seed: u64,
    op_salt: u64,
    threads: usize,
    k: usize,
    per_sample: F,
) -> Result<Vec<Accumulator>>
where
    F: Fn(u64, &mut Pcg64, &mut [f64]) -> Result<f64> + Sync,
{
    let n_blocks = n.div_ceil(BLOCK) as usize;
    let slots: Mutex<Vec<Option<Vec<Accumulator>>>> = Mutex::new(vec![None; n_blocks]);
    let next_block = AtomicUsize::new(0);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let workers = threads.max(1).min(n_blocks.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut values = vec![0.0f64; k];
                loop {
                    let b = next_block.fetch_add(1, Ordering::Relaxed);
                    if b >= n_blocks {
                        return;
                    }
                    if first_error.lock().unwrap().is_some() {
                        return;
                    }
                    let lo = b as u64 * BLOCK;
                    let hi = (lo + BLOCK).min(n);
                    let mut accs = vec![Accumulator::default(); k];
                    for i in lo..hi {
                        let mut rng = rng_for(seed, crate::rng::salt(op_salt, i));
                        match per_sample(i, &mut rng, &mut values) {
                            Ok(w) => {
                                for (acc, &v) in accs.iter_mut().zip(values.iter()) {
                                    acc.push(w, v);
                                }
                            }
                            Err(e) => {
                                *first_error.lock().unwrap() = Some(e);
                                return;
                            }
                        }
                    }
                    slots.lock().unwrap()[b] = Some(accs);
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let slots = slots.into_inner().unwrap();
    let mut merged = vec![Accumulator::default(); k];
    for block in slots {
        let block = block.expect("all blocks complete when no error was raised");
        for (m, b) in merged.iter_mut().zip(&block) {
            m.merge(b);
        }
    }
    Ok(merged)
}

/// Single-output convenience wrapper around [`run_samples_multi`].
pub fn run_samples<F>(
    n: u64,
    seed: u64,
    op_salt: u64,
    threads: usize,
    per_sample: F,
) -> Result<Accumulator>
where
    F: Fn(u64, &mut Pcg64) -> Result<(f64, f64)> + Sync,
{
    let accs = run_samples_multi(n, seed, op_salt, threads, 1, |i, rng, out| {
        let (w, g) = per_sample(i, rng)?;
        out[0] = g;
        Ok(w)
    })?;
    Ok(accs[0])
}

/// Identifies which representation an estimator run used.
#[derive(Debug, Clone)]
pub enum Representation {
    Samorodnitsky,
    Berman { tau: f64, b: f64, literal_b_variant: bool },
    Albin { b: f64 },
    Difference { use_z: bool },
    ClusterSup { construction: ClusterConstructionSpec },
}

impl Representation {
    pub fn label(&self) -> String {
        match self {
            Representation::Samorodnitsky => "samorodnitsky".into(),
            Representation::Berman {
                tau,
                b,
                literal_b_variant,
            } => {
                if *literal_b_variant {
                    format!("berman_tau{tau}_b{b}_literal")
                } else {
                    format!("berman_tau{tau}_b{b}")
                }
            }
            Representation::Albin { b } => format!("albin_b{b}"),
            Representation::Difference { use_z } => {
                if *use_z {
                    "difference_z".into()
                } else {
                    "difference_theta".into()
                }
            }
            Representation::ClusterSup { construction } => {
                format!("cluster_sup_{}", construction.method.name())
            }
        }
    }

    fn op_salt(&self) -> u64 {
        match self {
            Representation::Samorodnitsky => 0x11,
            Representation::Berman { literal_b_variant, tau, b } => {
                0x20 ^ ((*tau as u64) << 1)
                    ^ ((*b as u64) << 3)
                    ^ if *literal_b_variant { 0x100 } else { 0 }
            }
            Representation::Albin { b } => 0x40 ^ ((*b as u64) << 1),
            Representation::Difference { use_z } => 0x60 ^ *use_z as u64,
            Representation::ClusterSup { construction } => {
                0x80 ^ construction.method as u64
            }
        }
    }
}

struct RunPlan<'a> {
    model: &'a ModelSpec,
    lattice: &'a LatticeSpec,
    window: &'a [i64],
    n: u64,
    seed: u64,
    threads: usize,
}

fn per_draw_value(
    rep: &Representation,
    sampler: &Sampler,
    cs: Option<&ClusterSampler>,
    lattice: &LatticeSpec,
    rng: &mut Pcg64,
) -> Result<(f64, f64)> {
    let model = sampler.model();
    let alpha = model.alpha;
    let norm = &model.norm;
    // counting-measure lattice sums paired with the physical covolume
    let cell = lattice
        .grid_spacing()
        .powi(lattice.ambient_dim() as i32);
    let delta_l = lattice.covolume();
    match rep {
        Representation::Samorodnitsky => {
            let theta = sampler.sample_theta(rng);
            let s_l = sum_alpha(&theta.sample, lattice, norm, alpha) / cell;
            if s_l <= 0.0 && theta.weight > 0.0 {
                return Err(Error::contract("S_L(Theta) = 0 on a positive-weight draw"));
            }
            let sup_l = sup_norm(&theta.sample, lattice, norm).powf(alpha);
            Ok((theta.weight, sup_l / (delta_l * s_l)))
        }
        Representation::Berman {
            tau,
            b,
            literal_b_variant,
        } => {
            let y = sampler.sample_y(rng);
            let y0 = y.sample.norm_at(norm, &vec![0; y.sample.dim_l()]).unwrap();
            let b_sum = exceedance_sum(&y.sample, lattice, norm, *tau, 1.0) / cell;
            if b_sum <= 0.0 && y.weight > 0.0 && y0 > 0.0 {
                return Err(Error::contract(
                    "B_{L,tau}(Y) = 0 while ||Y(0)||^tau > 0",
                ));
            }
            let indicator = if *b <= 1.0 {
                1.0
            } else if *literal_b_variant {
                // literal reading: 1{B_{L,tau}(bY) > 0}
                if exceedance_sum(&y.sample, lattice, norm, *tau, *b) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else if sup_norm(&y.sample, lattice, norm) > *b {
                1.0
            } else {
                0.0
            };
            Ok((
                y.weight,
                b.powf(alpha) * y0.powf(*tau) * indicator / (delta_l * b_sum),
            ))
        }
        Representation::Albin { b } => {
            let y = sampler.sample_y(rng);
            let after = sup_norm_region(&y.sample, lattice, norm, OrderRegion::AfterZero);
            let m_l = sup_norm(&y.sample, lattice, norm);
            let hit = after <= 1.0 && m_l > *b;
            Ok((
                y.weight,
                if hit { b.powf(alpha) / delta_l } else { 0.0 },
            ))
        }
        Representation::Difference { use_z } => {
            let (sample, weight) = if *use_z {
                (sampler.sample_z(rng), 1.0)
            } else {
                let d = sampler.sample_theta(rng);
                (d.sample, d.weight)
            };
            let from = sup_norm_region(&sample, lattice, norm, OrderRegion::FromZero).powf(alpha);
            let after = sup_norm_region(&sample, lattice, norm, OrderRegion::AfterZero).powf(alpha);
            Ok((weight, (from - after) / delta_l))
        }
        Representation::ClusterSup { .. } => {
            let out = cs.expect("cluster sampler prepared for cluster_sup").weighted_draw(rng)?;
            Ok((out.index_weight, out.index_value))
        }
    }
}

fn run_estimator(rep: &Representation, plan: &RunPlan) -> Result<EstimateReport> {
    let sampler = Sampler::new(plan.model, plan.window)?;
    let cs = match rep {
        Representation::ClusterSup { construction } => {
            Some(ClusterSampler::new(construction.clone(), &sampler)?)
        }
        _ => None,
    };
    let acc = run_samples(plan.n, plan.seed, rep.op_salt(), plan.threads, |_i, rng| {
        per_draw_value(rep, &sampler, cs.as_ref(), plan.lattice, rng)
    })?;

    // window-doubling diagnostic on a small side run
    let n_diag = plan.n.min(4000);
    let wide: Vec<i64> = plan.window.iter().map(|&a| 2 * a).collect();
    let wide_sampler = Sampler::new(plan.model, &wide)?;
    let wide_cs = match rep {
        Representation::ClusterSup { construction } => {
            Some(ClusterSampler::new(construction.clone(), &wide_sampler)?)
        }
        _ => None,
    };
    let wide_acc = run_samples(
        n_diag,
        plan.seed,
        rep.op_salt() ^ 0xD1A6,
        plan.threads,
        |_i, rng| per_draw_value(rep, &wide_sampler, wide_cs.as_ref(), plan.lattice, rng),
    )?;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("window_half_width".into(), plan.window[0] as f64);
    diagnostics.insert("wide_window_value".into(), wide_acc.mean());
    if let Representation::ClusterSup { .. } = rep {
        // acceptance rate of the construction event over the main run is
        // recoverable from the weights for the conditioned methods
        diagnostics.insert("n_effective_fraction".into(), acc.n_effective() / acc.count as f64);
    }
    Ok(EstimateReport {
        representation: rep.label(),
        value: acc.mean(),
        stderr: acc.stderr(),
        n_samples: acc.count,
        n_effective: acc.n_effective(),
        per_draw_variance: acc.per_draw_variance(),
        window_drift: wide_acc.mean() - acc.mean(),
        diagnostics,
    })
}

pub fn estimate_samorodnitsky(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimateReport> {
    run_estimator(
        &Representation::Samorodnitsky,
        &RunPlan {
            model,
            lattice,
            window,
            n,
            seed,
            threads,
        },
    )
}

pub fn estimate_berman(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    tau: f64,
    b: f64,
    literal_b_variant: bool,
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimateReport> {
    if !(tau >= 0.0 && tau <= model.alpha) {
        return Err(Error::config("tau outside the always-admissible range [0, alpha]"));
    }
    if !(b >= 1.0) {
        return Err(Error::config("berman threshold b must be >= 1"));
    }
    run_estimator(
        &Representation::Berman {
            tau,
            b,
            literal_b_variant,
        },
        &RunPlan {
            model,
            lattice,
            window,
            n,
            seed,
            threads,
        },
    )
}

pub fn estimate_albin(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    b: f64,
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimateReport> {
    if !(b >= 1.0) {
        return Err(Error::config("albin threshold b must be >= 1"));
    }
    run_estimator(
        &Representation::Albin { b },
        &RunPlan {
            model,
            lattice,
            window,
            n,
            seed,
            threads,
        },
    )
}

pub fn estimate_difference(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    use_z: bool,
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimateReport> {
    run_estimator(
        &Representation::Difference { use_z },
        &RunPlan {
            model,
            lattice,
            window,
            n,
            seed,
            threads,
        },
    )
}

pub fn estimate_cluster_sup(
    construction: &ClusterConstructionSpec,
    model: &ModelSpec,
    window: &[i64],
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimateReport> {
    let lattice = construction.lattice.clone();
    run_estimator(
        &Representation::ClusterSup {
            construction: construction.clone(),
        },
        &RunPlan {
            model,
            lattice: &lattice,
            window,
            n,
            seed,
            threads,
        },
    )
}

/// Difference-form estimate over `Z_N` built with an explicit shift
/// distribution; used to check that the representation does not depend on
/// the shift law.
pub fn estimate_difference_with_shift(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    shift: &ShiftDistribution,
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EstimateReport> {
    let sampler = Sampler::new(model, window)?;
    let alpha = model.alpha;
    let norm = &model.norm;
    let delta_l = lattice.covolume();
    let acc = run_samples(n, seed, 0x70, threads, |_i, rng| {
        let z = sampler.sample_z_shifted(shift, rng);
        let from = sup_norm_region(&z, lattice, norm, OrderRegion::FromZero).powf(alpha);
        let after = sup_norm_region(&z, lattice, norm, OrderRegion::AfterZero).powf(alpha);
        Ok((1.0, (from - after) / delta_l))
    })?;
    Ok(EstimateReport {
        representation: format!("difference_z_shift_{:?}", shift.kind()),
        value: acc.mean(),
        stderr: acc.stderr(),
        n_samples: acc.count,
        n_effective: acc.n_effective(),
        per_draw_variance: acc.per_draw_variance(),
        window_drift: 0.0,
        diagnostics: BTreeMap::new(),
    })
}

/// One point of the normalized-sup curve `B_Z(n)` plus adjacent differences.
#[derive(Debug, Clone)]
pub struct GridLimitCurve {
    /// `(n, value, stderr)` per requested grid size.
    pub points: Vec<(i64, f64, f64)>,
    /// `(B(n_i) - B(n_{i+1}), stderr)` from coupled draws.
    pub adjacent_differences: Vec<(f64, f64)>,
}

/// `B_Z(n) = n^-l E[sup over [0,n]^l of ||Z||^alpha]` for each `n`, from a
/// shared set of `Z` draws so adjacent differences are tightly coupled.
pub fn estimate_grid_limit(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    n_list: &[i64],
    samples: u64,
    seed: u64,
    threads: usize,
) -> Result<GridLimitCurve> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("grid list must be strictly increasing"));
    }
    let max_n = *n_list.last().unwrap();
    if window.iter().any(|&a| a < max_n) {
        return Err(Error::config("window too small for the largest grid size"));
    }
    let sampler = Sampler::new(model, window)?;
    let alpha = model.alpha;
    let norm = &model.norm;
    let l = model.dim_l() as i32;
    let k = n_list.len();
    let accs = run_samples_multi(samples, seed, 0x90, threads, 2 * k - 1, |_i, rng, out| {
        let z = sampler.sample_z(rng);
        let mut sups = vec![0.0f64; k];
        z.for_each_covered(|t, v| {
            if t.iter().any(|&x| x < 0) {
                return;
            }
            if !lattice.is_identity() && !lattice.contains(t) {
                return;
            }
            let reach = *t.iter().max().unwrap();
            let nv = norm.eval(v);
            for (idx, &gn) in n_list.iter().enumerate() {
                if reach <= gn {
                    sups[idx] = sups[idx].max(nv);
                }
            }
        });
        for (idx, &gn) in n_list.iter().enumerate() {
            out[idx] = sups[idx].powf(alpha) / (gn as f64).powi(l);
        }
        for idx in 0..k - 1 {
            out[k + idx] = out[idx] - out[idx + 1];
        }
        Ok(1.0)
    })?;
    let points = n_list
        .iter()
        .zip(&accs[..k])
        .map(|(&gn, a)| (gn, a.mean(), a.stderr()))
        .collect();
    let adjacent_differences = accs[k..].iter().map(|a| (a.mean(), a.stderr())).collect();
    Ok(GridLimitCurve {
        points,
        adjacent_differences,
    })
}

/// Conditional law check: collect `M_L(Y)` given anchoring at the origin
/// (and `M_L(Y) > b`) by rejection, and return the KS distance to the
/// conditional alpha-Pareto law together with the sample.
pub fn pareto_conditional_check(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    b: f64,
    n_conditional: u64,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if !(b >= 1.0) {
        return Err(Error::config("conditioning threshold b must be >= 1"));
    }
    let sampler = Sampler::new(model, window)?;
    let norm = &model.norm;
    let alpha = model.alpha;
    let mut draws = Vec::with_capacity(n_conditional as usize);
    let budget_per_draw = 100_000u64;
    for i in 0..n_conditional {
        let mut rng = rng_for(seed, crate::rng::salt(0xA0, i));
        let mut accepted = None;
        for _ in 0..budget_per_draw {
            let y = sampler.sample_y(&mut rng);
            let anchored = first_exceedance(&y.sample, lattice, norm)
                .map(|t| t.iter().all(|&v| v == 0))
                .unwrap_or(false);
            if !anchored {
                continue;
            }
            let m = sup_norm(&y.sample, lattice, norm);
            if m > b {
                accepted = Some(m);
                break;
            }
        }
        match accepted {
            Some(m) => draws.push(m),
            None => {
                return Err(Error::DegenerateConditioning(format!(
                    "no anchored draw within {budget_per_draw} attempts (sample {i})"
                )))
            }
        }
    }
    let mut sample = draws.clone();
    let ks = ks_statistic(&mut sample, |x| {
        if x <= b {
            0.0
        } else {
            1.0 - (x / b).powf(-alpha)
        }
    });
    Ok((ks, draws))
}

/// Pairwise agreement verdict over a set of estimates of the same quantity.
#[derive(Debug, Clone)]
pub struct ConsistencyVerdict {
    /// `(label_i, label_j, |z|)` per pair.
    pub pairs: Vec<(String, String, f64)>,
    pub max_z: f64,
    /// Count of pairs with `|z|` in `[4, 5)`.
    pub n_flagged: usize,
    pub pass: bool,
}

/// Pairwise `z = |v_i - v_j| / sqrt(se_i^2 + se_j^2)`; PASS iff every
/// `|z| < 5`, with values in `[4, 5)` flagged.
pub fn consistency_report(reports: &[EstimateReport]) -> Result<ConsistencyVerdict> {
    if reports.len() < 2 {
        return Err(Error::config("consistency report needs at least two estimates"));
    }
    let mut pairs = Vec::new();
    let mut max_z = 0.0f64;
    let mut n_flagged = 0usize;
    let mut pass = true;
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&reports[i], &reports[j]);
            let diff = (a.value - b.value).abs();
            let denom = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
            let floor = 1e-6 * a.value.abs().max(b.value.abs()).max(1.0);
            let z = if denom > 0.0 {
                diff / denom.max(floor)
            } else if diff <= floor {
                0.0
            } else {
                f64::INFINITY
            };
            if z >= 5.0 {
                pass = false;
            } else if z >= 4.0 {
                n_flagged += 1;
            }
            max_z = max_z.max(z);
            pairs.push((a.representation.clone(), b.representation.clone(), z));
        }
    }
    Ok(ConsistencyVerdict {
        pairs,
        max_z,
        n_flagged,
        pass,
    })
}

/// Truncation-error curve of the m-approximation for a model's default
/// cluster construction, with the shift averaged analytically per draw.
pub fn m_approximation_curve(
    model: &ModelSpec,
    eval_half: &[i64],
    shift_support_half: &[i64],
    m_list: &[f64],
    samples: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("m list must be strictly increasing"));
    }
    // the cluster draw needs to cover every shifted evaluation point
    let q_half: Vec<i64> = eval_half
        .iter()
        .zip(shift_support_half)
        .map(|(a, b)| a + b + model.decay_radius())
        .collect();
    let sampler = Sampler::new(model, &q_half)?;
    let lattice = LatticeSpec::identity(model.dim_l(), model.delta());
    let cs = ClusterSampler::new(
        ClusterConstructionSpec::new(crate::cluster::ConstructionMethod::FfdTheta, lattice),
        &sampler,
    )?;
    let support = ShiftDistribution::new(
        crate::models::ShiftKind::UniformWindow,
        shift_support_half.to_vec(),
        model.delta(),
    )?
    .support_points();
    let k = m_list.len();
    let norm = model.norm.clone();
    let alpha = model.alpha;
    let accs = run_samples_multi(samples, seed, 0xB0, threads, k, |_i, rng, out| {
        let q = cs.weighted_draw(rng)?;
        for (idx, &m) in m_list.iter().enumerate() {
            out[idx] = crate::cluster::truncation_error_given_q(
                &q.draw.sample,
                &norm,
                alpha,
                &support,
                eval_half,
                m,
            );
        }
        Ok(q.index_weight)
    })?;
    Ok(m_list
        .iter()
        .zip(&accs)
        .map(|(&m, a)| (m, a.mean(), a.stderr()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z1() -> LatticeSpec {
        LatticeSpec::identity(1, 1.0)
    }

    #[test]
    fn accumulator_merge_matches_concatenation() {
        let mut rng = rng_for(31, 0);
        use rand::Rng;
        let data: Vec<(f64, f64)> = (0..1000)
            .map(|_| (rng.random::<f64>() + 0.1, rng.random::<f64>() * 3.0))
            .collect();
        let mut whole = Accumulator::default();
        for &(w, g) in &data {
            whole.push(w, g);
        }
        let mut left = Accumulator::default();
        let mut right = Accumulator::default();
        for &(w, g) in &data[..400] {
            left.push(w, g);
        }
        for &(w, g) in &data[400..] {
            right.push(w, g);
        }
        left.merge(&right);
        assert_eq!(whole.count, left.count);
        assert!((whole.mean() - left.mean()).abs() < 1e-14);
        assert!((whole.stderr() - left.stderr()).abs() < 1e-14);
        assert!((whole.n_effective() - left.n_effective()).abs() < 1e-9);
    }

    #[test]
    fn unweighted_stderr_reduces_to_classic() {
        let mut acc = Accumulator::default();
        let xs = [1.0, 2.0, 3.0, 4.0];
        for &x in &xs {
            acc.push(1.0, x);
        }
        let mean = 2.5;
        let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        let classic = (var / 4.0).sqrt();
        assert!((acc.stderr() - classic).abs() < 1e-14);
        assert!((acc.n_effective() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn samorodnitsky_moving_max_is_exact() {
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let rep =
            estimate_samorodnitsky(&model, &z1(), &[8], 4000, 7, 1).unwrap();
        assert!((rep.value - 2.0 / 3.0).abs() < 1e-12);
        assert!(rep.per_draw_variance < 1e-20);
    }

    #[test]
    fn samorodnitsky_ar1_closed_form() {
        for (alpha, expect) in [(1.0, 0.5), (2.0, 0.75)] {
            let model = ModelSpec::ar1(alpha, 0.5);
            let rep =
                estimate_samorodnitsky(&model, &z1(), &[24], 4000, 7, 1).unwrap();
            assert!((rep.value - expect).abs() < 1e-5, "alpha {alpha}: {}", rep.value);
        }
    }

    #[test]
    fn berman_tau_zero_ar1() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let rep = estimate_berman(&model, &z1(), &[24], 0.0, 1.0, false, 40_000, 7, 2).unwrap();
        assert!(
            (rep.value - 0.5).abs() < 3.0 * rep.stderr,
            "{} +/- {}",
            rep.value,
            rep.stderr
        );
    }

    #[test]
    fn berman_moving_max() {
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let rep = estimate_berman(&model, &z1(), &[8], 0.0, 1.0, false, 40_000, 7, 2).unwrap();
        assert!((rep.value - 2.0 / 3.0).abs() < 3.0 * rep.stderr);
    }

    #[test]
    fn berman_tau_invariance() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let a = estimate_berman(&model, &z1(), &[24], 0.0, 1.0, false, 40_000, 7, 2).unwrap();
        let b = estimate_berman(&model, &z1(), &[24], 1.0, 1.0, false, 40_000, 11, 2).unwrap();
        let z = (a.value - b.value).abs() / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(z < 3.0, "tau=0 {} vs tau=alpha {} (z={z})", a.value, b.value);
    }

    #[test]
    fn albin_b_invariance_ar1() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let a = estimate_albin(&model, &z1(), &[24], 1.0, 40_000, 7, 2).unwrap();
        let b = estimate_albin(&model, &z1(), &[24], 2.0, 40_000, 11, 2).unwrap();
        assert!((a.value - 0.5).abs() < 3.0 * a.stderr);
        let z = (a.value - b.value).abs() / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(z < 3.0, "b=1 {} vs b=2 {} (z={z})", a.value, b.value);
    }

    #[test]
    fn difference_forms_agree() {
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let t = estimate_difference(&model, &z1(), &[8], false, 40_000, 7, 2).unwrap();
        let zf = estimate_difference(&model, &z1(), &[8], true, 40_000, 11, 2).unwrap();
        assert!((t.value - 2.0 / 3.0).abs() < 3.0 * t.stderr);
        let z = (t.value - zf.value).abs() / (t.stderr.powi(2) + zf.stderr.powi(2)).sqrt();
        assert!(z < 3.0, "theta {} vs z {} (z={z})", t.value, zf.value);
    }

    #[test]
    fn consistency_report_arithmetic() {
        let mk = |label: &str, v: f64, se: f64| EstimateReport {
            representation: label.into(),
            value: v,
            stderr: se,
            n_samples: 1,
            n_effective: 1.0,
            per_draw_variance: 0.0,
            window_drift: 0.0,
            diagnostics: BTreeMap::new(),
        };
        let same = consistency_report(&[mk("a", 0.5, 0.01), mk("b", 0.5, 0.01)]).unwrap();
        assert!(same.pass);
        assert_eq!(same.max_z, 0.0);
        let far = consistency_report(&[mk("a", 0.5, 0.01), mk("b", 0.8, 0.01)]).unwrap();
        assert!(!far.pass);
        assert!((far.max_z - 21.2).abs() < 0.1);
        assert!(consistency_report(&[mk("a", 0.5, 0.01)]).is_err());
    }

    #[test]
    fn grid_limit_moving_max_matches_enumeration() {
        // E sup_{[0,n]} Z = 2n/3 + 1, so B(n) = 2/3 + 1/n exactly
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let curve =
            estimate_grid_limit(&model, &z1(), &[16], &[1, 2, 4, 8], 40_000, 7, 2).unwrap();
        for &(n, value, stderr) in &curve.points {
            let expect = 2.0 / 3.0 + 1.0 / n as f64;
            assert!(
                (value - expect).abs() < 4.0 * stderr.max(1e-4),
                "n={n}: {value} vs {expect}"
            );
        }
        for &(d, se) in &curve.adjacent_differences {
            assert!(d > -3.0 * se, "curve not nonincreasing: diff {d} se {se}");
        }
    }

    #[test]
    fn pareto_conditional_ar1() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let (ks, draws) =
            pareto_conditional_check(&model, &z1(), &[24], 1.0, 4000, 7).unwrap();
        assert!(draws.iter().all(|&m| m >= 1.0));
        assert!(ks < 0.03, "KS {ks}");
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let one = estimate_berman(&model, &z1(), &[24], 0.0, 1.0, false, 9000, 13, 1).unwrap();
        let eight = estimate_berman(&model, &z1(), &[24], 0.0, 1.0, false, 9000, 13, 8).unwrap();
        assert_eq!(one.value.to_bits(), eight.value.to_bits());
        assert_eq!(one.stderr.to_bits(), eight.stderr.to_bits());
    }
}
