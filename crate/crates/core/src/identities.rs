//! Two-sided Monte Carlo checks of the distributional identities linking
//! the spectral tail field, the tail field, the representer, and the
//! cluster constructions.
//!
//! Each case estimates every side of one identity from independent random
//! streams and reports the largest pairwise z-score. Conventions: `0/0`
//! and `inf * 0` evaluate to 0.

use rand_pcg::Pcg64;

use crate::cluster::{ClusterConstructionSpec, ClusterSampler, ConstructionMethod};
use crate::error::{Error, Result};
use crate::field::{
    exceedance_sum, first_exceedance, infargsup, mass_split, sum_alpha, sup_norm, FieldSample,
    Norm,
};
use crate::lattice::LatticeSpec;
use crate::models::{ModelSpec, Sampler};
use crate::extremal::{run_samples, Accumulator};

/// Division with the `0/0 = 0` convention.
fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// A member of the declared battery of test maps.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctional {
    /// Constant 1.
    One,
    /// `||f(t1)|| / (||f(t1)|| + ||f(t2)||)`, bounded and 0-homogeneous.
    BoundedRatio { t1: i64, t2: i64 },
    /// `sup^alpha / (sup^alpha + S)`, bounded, 0-homogeneous, shift-invariant.
    SupRatio,
    /// `sup_t ||f(t)||^alpha`, alpha-homogeneous, shift-invariant.
    SupAlpha,
    /// `sup^alpha * sup^alpha / (sup^alpha + S)`, alpha-homogeneous,
    /// shift-invariant with a bounded ratio part.
    SupAlphaDamped,
    /// `||f(t1)||^alpha * BoundedRatio`, alpha-homogeneous.
    AlphaWeighted { t1: i64, t2: i64 },
    /// `1{||f(t)|| > 1}`; measurable but not homogeneous.
    IndicatorExceedance { t: i64 },
}

impl TestFunctional {
    pub fn label(&self) -> String {
        match self {
            TestFunctional::One => "one".into(),
            TestFunctional::BoundedRatio { t1, t2 } => format!("bounded_ratio({t1},{t2})"),
            TestFunctional::SupRatio => "sup_ratio".into(),
            TestFunctional::SupAlpha => "sup_alpha".into(),
            TestFunctional::SupAlphaDamped => "sup_alpha_damped".into(),
            TestFunctional::AlphaWeighted { t1, t2 } => format!("alpha_weighted({t1},{t2})"),
            TestFunctional::IndicatorExceedance { t } => format!("indicator_exceedance({t})"),
        }
    }

    /// Homogeneity degree when the map is homogeneous.
    pub fn homogeneity(&self, alpha: f64) -> Option<f64> {
        match self {
            TestFunctional::One | TestFunctional::BoundedRatio { .. } | TestFunctional::SupRatio => {
                Some(0.0)
            }
            TestFunctional::SupAlpha
            | TestFunctional::SupAlphaDamped
            | TestFunctional::AlphaWeighted { .. } => Some(alpha),
            TestFunctional::IndicatorExceedance { .. } => None,
        }
    }

    pub fn shift_invariant(&self) -> bool {
        matches!(
            self,
            TestFunctional::One
                | TestFunctional::SupRatio
                | TestFunctional::SupAlpha
                | TestFunctional::SupAlphaDamped
        )
    }

    pub fn eval(&self, f: &FieldSample, norm: &Norm, alpha: f64) -> f64 {
        let ambient = LatticeSpec::identity(f.dim_l(), f.grid_spacing());
        match self {
            TestFunctional::One => 1.0,
            TestFunctional::BoundedRatio { t1, t2 } => {
                let a = f.norm_at(norm, &[*t1]).unwrap_or(0.0);
                let b = f.norm_at(norm, &[*t2]).unwrap_or(0.0);
                safe_div(a, a + b)
            }
            TestFunctional::SupRatio => {
                let sup = sup_norm(f, &ambient, norm).powf(alpha);
                let s = sum_alpha(f, &ambient, norm, alpha);
                safe_div(sup, sup + s)
            }
            TestFunctional::SupAlpha => sup_norm(f, &ambient, norm).powf(alpha),
            TestFunctional::SupAlphaDamped => {
                let sup = sup_norm(f, &ambient, norm).powf(alpha);
                let s = sum_alpha(f, &ambient, norm, alpha);
                sup * safe_div(sup, sup + s)
            }
            TestFunctional::AlphaWeighted { t1, t2 } => {
                let a = f.norm_at(norm, &[*t1]).unwrap_or(0.0);
                let b = f.norm_at(norm, &[*t2]).unwrap_or(0.0);
                a.powf(alpha) * safe_div(a, a + b)
            }
            TestFunctional::IndicatorExceedance { t } => {
                if f.norm_at(norm, &[*t]).unwrap_or(0.0) > 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Which identity a case exercises.
#[derive(Debug, Clone, PartialEq)]
pub enum IdentityKind {
    /// Time change of the spectral tail field at lag `h`.
    TimeChangeTheta { h: i64 },
    /// Time change of the tail field at lag `h` and level `x > 0`.
    TimeChangeY { h: i64, x: f64 },
    /// Four-way equality of the cluster normalizations (`Theta`, anchored
    /// `Y`, weighted `Z`, constructed `Q`).
    FourWay,
    /// Anchoring identities at the origin (sum, involution, anchor, `Z`).
    AnchorAtZero,
    /// Exceedance-weighted anchoring identity at exponent `tau`.
    AnchorExceedance { tau: f64 },
    /// Windowed sup expectation vs the reciprocal exceedance-window sum.
    WindowReciprocal { k_half: i64, tau: f64 },
}

impl IdentityKind {
    pub fn name(&self) -> &'static str {
        match self {
            IdentityKind::TimeChangeTheta { .. } => "time_change_theta",
            IdentityKind::TimeChangeY { .. } => "time_change_y",
            IdentityKind::FourWay => "four_way",
            IdentityKind::AnchorAtZero => "anchor_at_zero",
            IdentityKind::AnchorExceedance { .. } => "anchor_exceedance",
            IdentityKind::WindowReciprocal { .. } => "window_reciprocal",
        }
    }

    fn functional_ok(&self, f: Option<&TestFunctional>, alpha: f64) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "functional incompatible with {}: needs {}",
                    self.name(),
                    what
                )))
            }
        };
        match self {
            IdentityKind::TimeChangeTheta { .. } => {
                let f = f.ok_or_else(|| Error::config("time_change_theta needs a functional"))?;
                need(f.homogeneity(alpha) == Some(0.0), "a 0-homogeneous map")
            }
            IdentityKind::TimeChangeY { .. } => {
                // products F1 * F2 with F1 homogeneous and F2 measurable;
                // everything in the battery qualifies
                f.map(|_| ()).ok_or_else(|| Error::config("time_change_y needs a functional"))
            }
            IdentityKind::FourWay | IdentityKind::AnchorAtZero => {
                let f = f.ok_or_else(|| Error::config("identity needs a functional"))?;
                need(
                    f.homogeneity(alpha) == Some(alpha) && f.shift_invariant(),
                    "an alpha-homogeneous shift-invariant map",
                )
            }
            IdentityKind::AnchorExceedance { .. } => {
                let f = f.ok_or_else(|| Error::config("identity needs a functional"))?;
                need(f.shift_invariant(), "a shift-invariant map")
            }
            IdentityKind::WindowReciprocal { .. } => need(f.is_none(), "no functional"),
        }
    }
}

/// One configured identity check.
#[derive(Debug, Clone)]
pub struct IdentityCase {
    pub id: String,
    pub kind: IdentityKind,
    pub model: ModelSpec,
    pub lattice: LatticeSpec,
    pub window: Vec<i64>,
    pub functional: Option<TestFunctional>,
    pub n: u64,
    pub seed: u64,
    /// Base salt separating this case's streams from every other case.
    pub salt: u64,
    /// Swap the per-side stream salts (left/right exchange).
    pub swap_streams: bool,
}

/// Estimate of one side of an identity.
#[derive(Debug, Clone)]
pub struct SideEstimate {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
}

/// Result of one identity case: all sides and the worst pairwise z.
#[derive(Debug, Clone)]
pub struct IdentityOutcome {
    pub id: String,
    pub identity: String,
    pub sides: Vec<SideEstimate>,
    pub z_max: f64,
}

fn z_between(a: &SideEstimate, b: &SideEstimate) -> f64 {
    let diff = (a.value - b.value).abs();
    let denom = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    // window-tolerance floor: path-constant sides carry zero Monte Carlo
    // error but still differ by the truncated tail mass
    let floor = 1e-6 * a.value.abs().max(b.value.abs()).max(1.0);
    if denom > 0.0 {
        diff / denom.max(floor)
    } else if diff <= floor {
        0.0
    } else {
        f64::INFINITY
    }
}

fn origin(l: usize) -> Vec<i64> {
    vec![0; l]
}

fn at_origin(p: Option<Vec<i64>>) -> bool {
    p.map(|t| t.iter().all(|&v| v == 0)).unwrap_or(false)
}

/// Run one side as its own weighted Monte Carlo stream.
fn side<F>(
    label: &str,
    case: &IdentityCase,
    side_salt: u64,
    threads: usize,
    per_draw: F,
) -> Result<SideEstimate>
where
    F: Fn(&Sampler, &mut Pcg64) -> Result<(f64, f64)> + Sync,
{
    let sampler = Sampler::new(&case.model, &case.window)?;
    let acc: Accumulator = run_samples(case.n, case.seed, side_salt, threads, |_i, rng| {
        per_draw(&sampler, rng)
    })?;
    Ok(SideEstimate {
        label: label.into(),
        value: acc.mean(),
        stderr: acc.stderr(),
    })
}

/// Evaluate all sides of `case` on independent streams and return the
/// worst pairwise z-score.
pub fn run_identity(case: &IdentityCase, threads: usize) -> Result<IdentityOutcome> {
    case.kind
        .functional_ok(case.functional.as_ref(), case.model.alpha)?;
    let alpha = case.model.alpha;
    let norm = case.model.norm.clone();
    let lat = case.lattice.clone();
    let cell = lat.grid_spacing().powi(lat.ambient_dim() as i32);
    let delta_l = lat.covolume();
    let l = case.model.dim_l();
    let gamma = case.functional.clone();
    let eval_norm = norm.clone();
    let eval = move |f: &FieldSample| -> f64 {
        gamma
            .as_ref()
            .map(|g| g.eval(f, &eval_norm, alpha))
            .unwrap_or(1.0)
    };
    let salts: Vec<u64> = (0..6u64)
        .map(|s| case.salt * 8 + if case.swap_streams { 5 - s } else { s })
        .collect();

    let sides: Vec<SideEstimate> = match &case.kind {
        IdentityKind::TimeChangeTheta { h } => {
            let h = *h;
            let lhs = side("E[|Theta(h)|^a G(Theta)]", case, salts[0], threads, {
                let eval = &eval;
                let norm = norm.clone();
                move |sampler, rng| {
                    let th = sampler.sample_theta(rng);
                    let v = th.sample.norm_at(&norm, &[h]).unwrap_or(0.0).powf(alpha);
                    Ok((th.weight, v * eval(&th.sample)))
                }
            })?;
            let rhs = side("E[1{Theta(-h)!=0} G(B^h Theta)]", case, salts[1], threads, {
                let eval = &eval;
                let norm = norm.clone();
                move |sampler, rng| {
                    let th = sampler.sample_theta(rng);
                    let alive = th.sample.norm_at(&norm, &[-h]).unwrap_or(0.0) != 0.0;
                    let g = if alive {
                        eval(&th.sample.shift(&[h]))
                    } else {
                        0.0
                    };
                    Ok((th.weight, g))
                }
            })?;
            vec![lhs, rhs]
        }
        IdentityKind::TimeChangeY { h, x } => {
            let (h, x) = (*h, *x);
            let lhs = side("x^-a E[G(x B^h Y) 1{x|Y(-h)|>1}]", case, salts[0], threads, {
                let eval = &eval;
                let norm = norm.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let hit = x * y.sample.norm_at(&norm, &[-h]).unwrap_or(0.0) > 1.0;
                    let g = if hit {
                        x.powf(-alpha) * eval(&y.sample.shift(&[h]).scaled(x))
                    } else {
                        0.0
                    };
                    Ok((y.weight, g))
                }
            })?;
            let rhs = side("E[G(Y) 1{|Y(h)|>x}]", case, salts[1], threads, {
                let eval = &eval;
                let norm = norm.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let hit = y.sample.norm_at(&norm, &[h]).unwrap_or(0.0) > x;
                    Ok((y.weight, if hit { eval(&y.sample) } else { 0.0 }))
                }
            })?;
            vec![lhs, rhs]
        }
        IdentityKind::FourWay => {
            let t1 = side("E[H(Theta)/(D S_L)]", case, salts[0], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = norm.clone();
                move |sampler, rng| {
                    let th = sampler.sample_theta(rng);
                    let s = sum_alpha(&th.sample, &lat, &norm, alpha) / cell;
                    Ok((th.weight, safe_div(eval(&th.sample), delta_l * s)))
                }
            })?;
            let norm2 = case.model.norm.clone();
            let t2 = side("E[H(Y)1{anchor}/(D M_L^a)]", case, salts[1], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = norm2.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let anchored = at_origin(first_exceedance(&y.sample, &lat, &norm));
                    let g = if anchored {
                        let m = sup_norm(&y.sample, &lat, &norm).powf(alpha);
                        safe_div(eval(&y.sample), delta_l * m)
                    } else {
                        0.0
                    };
                    Ok((y.weight, g))
                }
            })?;
            let norm3 = case.model.norm.clone();
            let t3 = side("E[|Z(0)|^a H(Z)/(D S_L)]", case, salts[2], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = norm3.clone();
                move |sampler, rng| {
                    let z = sampler.sample_z(rng);
                    let z0 = z.norm_at(&norm, &origin(l)).unwrap_or(0.0).powf(alpha);
                    let s = sum_alpha(&z, &lat, &norm, alpha) / cell;
                    Ok((1.0, safe_div(z0 * eval(&z), delta_l * s)))
                }
            })?;
            let t4 = {
                let sampler = Sampler::new(&case.model, &case.window)?;
                let cs = ClusterSampler::new(
                    ClusterConstructionSpec::new(ConstructionMethod::FfdTheta, lat.clone()),
                    &sampler,
                )?;
                let eval = &eval;
                let acc = run_samples(case.n, case.seed, salts[3], threads, |_i, rng| {
                    let q = cs.weighted_draw(rng)?;
                    Ok((q.index_weight, eval(&q.draw.sample)))
                })?;
                SideEstimate {
                    label: "E[H(Q)]".into(),
                    value: acc.mean(),
                    stderr: acc.stderr(),
                }
            };
            vec![t1, t2, t3, t4]
        }
        IdentityKind::AnchorAtZero => {
            let e1 = side("E[F(Theta)/S_L]", case, salts[0], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let th = sampler.sample_theta(rng);
                    let s = sum_alpha(&th.sample, &lat, &norm, alpha) / cell;
                    Ok((th.weight, safe_div(eval(&th.sample), s)))
                }
            })?;
            let e2 = side("E[F(Theta);J1=0]", case, salts[1], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let th = sampler.sample_theta(rng);
                    let hit = at_origin(infargsup(&th.sample, &lat, &norm));
                    Ok((th.weight, if hit { eval(&th.sample) } else { 0.0 }))
                }
            })?;
            let e3 = side("E[F(Y/M_L);J2=0]", case, salts[2], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let hit = at_origin(first_exceedance(&y.sample, &lat, &norm));
                    let g = if hit {
                        let m = sup_norm(&y.sample, &lat, &norm);
                        eval(&y.sample.scaled(1.0 / m))
                    } else {
                        0.0
                    };
                    Ok((y.weight, g))
                }
            })?;
            let e4 = side("E[F(Z);J3=0]", case, salts[3], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let z = sampler.sample_z(rng);
                    let hit = at_origin(infargsup(&z, &lat, &norm));
                    Ok((1.0, if hit { eval(&z) } else { 0.0 }))
                }
            })?;
            vec![e1, e2, e3, e4]
        }
        IdentityKind::AnchorExceedance { tau } => {
            let tau = *tau;
            let lhs = side("E[|Y(0)|^t G(Y)/B_Lt]", case, salts[0], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let y0 = y.sample.norm_at(&norm, &origin(l)).unwrap_or(0.0);
                    let bsum = exceedance_sum(&y.sample, &lat, &norm, tau, 1.0) / cell;
                    Ok((y.weight, safe_div(y0.powf(tau) * eval(&y.sample), bsum)))
                }
            })?;
            let rhs = side("E[G(Y);J2=0]", case, salts[1], threads, {
                let eval = &eval;
                let lat = lat.clone();
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let hit = at_origin(first_exceedance(&y.sample, &lat, &norm));
                    Ok((y.weight, if hit { eval(&y.sample) } else { 0.0 }))
                }
            })?;
            vec![lhs, rhs]
        }
        IdentityKind::WindowReciprocal { k_half, tau } => {
            let (k, tau) = (*k_half, *tau);
            if case.window[0] < 2 * k {
                return Err(Error::config(
                    "window too small: the reciprocal side reads lags up to 2k",
                ));
            }
            let lhs = side("E[sup_K |Z|^a]", case, salts[0], threads, {
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let z = sampler.sample_z(rng);
                    let mut sup = 0.0f64;
                    z.for_each_covered(|t, v| {
                        if t.iter().all(|&c| c.abs() <= k) {
                            sup = sup.max(norm.eval(v));
                        }
                    });
                    Ok((1.0, sup.powf(alpha)))
                }
            })?;
            let rhs = side("sum_K E[1/W_t]", case, salts[1], threads, {
                let norm = case.model.norm.clone();
                move |sampler, rng| {
                    let y = sampler.sample_y(rng);
                    let r = y.sample.norm_at(&norm, &origin(l)).unwrap_or(f64::NAN);
                    let cell = y.sample.cell_measure();
                    let mut total = 0.0;
                    for t in -k..=k {
                        let mut w_t = 0.0;
                        for s in -k..=k {
                            let yn = y.sample.norm_at(&norm, &[s - t]).unwrap_or(0.0);
                            if yn > 1.0 {
                                w_t += (yn / r).powf(tau) * cell;
                            }
                        }
                        total += safe_div(cell, w_t);
                    }
                    Ok((y.weight, total))
                }
            })?;
            vec![lhs, rhs]
        }
    };

    let mut z_max = 0.0f64;
    for i in 0..sides.len() {
        for j in i + 1..sides.len() {
            z_max = z_max.max(z_between(&sides[i], &sides[j]));
        }
    }
    Ok(IdentityOutcome {
        id: case.id.clone(),
        identity: case.kind.name().into(),
        sides,
        z_max,
    })
}

/// The default identity battery over the discrete models: every identity
/// kind, two models, two functionals where a functional applies.
pub fn default_battery(n: u64, seed: u64) -> Vec<IdentityCase> {
    let models = [
        ("ar1", ModelSpec::ar1(1.0, 0.5), 26i64),
        ("mm21", ModelSpec::moving_max(1.0, vec![2.0, 1.0]), 8i64),
    ];
    let mut cases = Vec::new();
    let mut salt = 0u64;
    let mut push = |cases: &mut Vec<IdentityCase>,
                    id: String,
                    kind: IdentityKind,
                    model: &ModelSpec,
                    window: i64,
                    functional: Option<TestFunctional>| {
        salt += 1;
        cases.push(IdentityCase {
            id,
            kind,
            model: model.clone(),
            lattice: LatticeSpec::identity(1, 1.0),
            window: vec![window],
            functional,
            n,
            seed,
            salt,
            swap_streams: false,
        });
    };
    for (mname, model, window) in &models {
        for f in [
            TestFunctional::BoundedRatio { t1: 1, t2: -1 },
            TestFunctional::SupRatio,
        ] {
            push(
                &mut cases,
                format!("time_change_theta/{mname}/{}", f.label()),
                IdentityKind::TimeChangeTheta { h: 1 },
                model,
                *window,
                Some(f),
            );
        }
        for f in [
            TestFunctional::SupRatio,
            TestFunctional::IndicatorExceedance { t: 0 },
        ] {
            push(
                &mut cases,
                format!("time_change_y/{mname}/{}", f.label()),
                IdentityKind::TimeChangeY { h: 1, x: 1.5 },
                model,
                *window,
                Some(f),
            );
        }
        for f in [TestFunctional::SupAlpha, TestFunctional::SupAlphaDamped] {
            push(
                &mut cases,
                format!("four_way/{mname}/{}", f.label()),
                IdentityKind::FourWay,
                model,
                *window,
                Some(f.clone()),
            );
            push(
                &mut cases,
                format!("anchor_at_zero/{mname}/{}", f.label()),
                IdentityKind::AnchorAtZero,
                model,
                *window,
                Some(f),
            );
        }
        for (f, tau) in [
            (TestFunctional::One, 0.0),
            (TestFunctional::SupRatio, 1.0),
        ] {
            push(
                &mut cases,
                format!("anchor_exceedance/{mname}/tau{tau}/{}", f.label()),
                IdentityKind::AnchorExceedance { tau },
                model,
                *window,
                Some(f),
            );
        }
        for tau in [0.0, 1.0] {
            push(
                &mut cases,
                format!("window_reciprocal/{mname}/tau{tau}"),
                IdentityKind::WindowReciprocal { k_half: 2, tau },
                model,
                (*window).max(6),
                None,
            );
        }
    }
    cases
}

/// Agreement rates between the proxied finiteness events.
#[derive(Debug, Clone)]
pub struct EventAgreement {
    pub labels: Vec<&'static str>,
    /// Pairwise agreement rates, `rates[i][j]` for `i < j`.
    pub rates: Vec<Vec<f64>>,
    pub min_rate: f64,
    pub pass: bool,
}

/// Per-draw indicator vector of the proxied events (mass confinement, sup
/// decay, argmax and anchor hits, confined exceedances) and their pairwise
/// agreement. Diagnostic only: the proxies are window statements, not
/// finiteness proofs.
pub fn run_event_equality(
    model: &ModelSpec,
    lattice: &LatticeSpec,
    window: &[i64],
    n: u64,
    seed: u64,
    threads: usize,
) -> Result<EventAgreement> {
    let sampler = Sampler::new(model, window)?;
    let norm = model.norm.clone();
    let alpha = model.alpha;
    let k = 5usize;
    // encode the 2^5 joint outcomes as one accumulator index via weights:
    // simpler to track pairwise agreements as 10 indicator outputs
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();
    let accs = run_samples_multi_events(&sampler, lattice, &norm, alpha, n, seed, threads, &pairs)?;
    let labels = vec![
        "mass_confined",
        "sup_decays",
        "argmax_in_window",
        "anchor_in_window",
        "exceedances_confined",
    ];
    let mut rates = vec![vec![0.0; k]; k];
    let mut min_rate = 1.0f64;
    for ((i, j), acc) in pairs.iter().zip(&accs) {
        let rate = acc.mean();
        rates[*i][*j] = rate;
        min_rate = min_rate.min(rate);
    }
    Ok(EventAgreement {
        labels,
        rates,
        min_rate,
        pass: min_rate >= 0.999,
    })
}

fn run_samples_multi_events(
    sampler: &Sampler,
    lattice: &LatticeSpec,
    norm: &Norm,
    alpha: f64,
    n: u64,
    seed: u64,
    threads: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<Accumulator>> {
    crate::extremal::run_samples_multi(n, seed, 0xE0, threads, pairs.len(), |_i, rng, out| {
        let y = sampler.sample_y(rng);
        let theta_scale = 1.0 / y.sample.norm_at(norm, &origin(y.sample.dim_l())).unwrap();
        let theta = y.sample.scaled(theta_scale);
        let (inner_mass, outer_mass, inner_sup, outer_sup) = mass_split(&theta, norm, alpha);
        let ev = [
            outer_mass <= 1e-4 * inner_mass,
            outer_sup <= 1e-2 * inner_sup,
            sup_norm(&theta, lattice, norm) > 0.0,
            sup_norm(&y.sample, lattice, norm) > 1.0,
            exceedance_sum(&y.sample, lattice, norm, 0.0, 1.0)
                == inner_exceedances(&y.sample, lattice, norm),
        ];
        for (slot, (i, j)) in out.iter_mut().zip(pairs) {
            *slot = if ev[*i] == ev[*j] { 1.0 } else { 0.0 };
        }
        Ok(y.weight)
    })
}

fn inner_exceedances(f: &FieldSample, lattice: &LatticeSpec, norm: &Norm) -> f64 {
    let halves: Vec<i64> = f.half_width().iter().map(|&a| a / 2).collect();
    let cell = f.cell_measure();
    let mut acc = 0.0;
    f.for_each_covered(|t, v| {
        let inside = t.iter().zip(&halves).all(|(ti, h)| ti.abs() <= *h);
        if inside && (lattice.is_identity() || lattice.contains(t)) && norm.eval(v) >= 1.0 {
            acc += cell;
        }
    });
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn bounded_functionals_are_zero_homogeneous() {
        let mut rng = rng_for(40, 0);
        let fs = [
            TestFunctional::BoundedRatio { t1: 1, t2: -1 },
            TestFunctional::SupRatio,
        ];
        for f in &fs {
            for _ in 0..100 {
                let field = FieldSample::scalar_from_fn(1, &[4], 1.0, |_| rng.random::<f64>());
                let c: f64 = rng.random::<f64>() * 10.0 + 0.01;
                let base = f.eval(&field, &Norm::Abs, 1.7);
                let scaled = f.eval(&field.scaled(c), &Norm::Abs, 1.7);
                assert!(
                    (scaled - base).abs() <= 1e-12 * base.abs().max(1.0),
                    "{}: {base} vs {scaled}",
                    f.label()
                );
            }
        }
    }

    #[test]
    fn alpha_functionals_scale_correctly() {
        let mut rng = rng_for(41, 0);
        let alpha = 2.0;
        let fs = [
            TestFunctional::SupAlpha,
            TestFunctional::SupAlphaDamped,
            TestFunctional::AlphaWeighted { t1: 0, t2: 1 },
        ];
        for f in &fs {
            for _ in 0..50 {
                let field = FieldSample::scalar_from_fn(1, &[4], 1.0, |_| rng.random::<f64>());
                let c: f64 = rng.random::<f64>() * 5.0 + 0.1;
                let base = f.eval(&field, &Norm::Abs, alpha);
                let scaled = f.eval(&field.scaled(c), &Norm::Abs, alpha);
                assert!(
                    (scaled - c.powf(alpha) * base).abs() <= 1e-10 * (base.abs() + 1.0),
                    "{}",
                    f.label()
                );
            }
        }
    }

    #[test]
    fn incompatible_functionals_are_rejected() {
        let case = IdentityCase {
            id: "bad".into(),
            kind: IdentityKind::TimeChangeTheta { h: 1 },
            model: ModelSpec::ar1(1.0, 0.5),
            lattice: LatticeSpec::identity(1, 1.0),
            window: vec![16],
            functional: Some(TestFunctional::SupAlpha),
            n: 10,
            seed: 1,
            salt: 0,
            swap_streams: false,
        };
        assert!(run_identity(&case, 1).is_err());
        let mut no_f = case.clone();
        no_f.functional = None;
        assert!(run_identity(&no_f, 1).is_err());
    }

    #[test]
    fn time_change_theta_holds_on_ar1() {
        let case = IdentityCase {
            id: "tc".into(),
            kind: IdentityKind::TimeChangeTheta { h: 1 },
            model: ModelSpec::ar1(1.0, 0.5),
            lattice: LatticeSpec::identity(1, 1.0),
            window: vec![26],
            functional: Some(TestFunctional::BoundedRatio { t1: 1, t2: -1 }),
            n: 60_000,
            seed: 5,
            salt: 1,
            swap_streams: false,
        };
        let out = run_identity(&case, 2).unwrap();
        assert!(out.z_max < 4.0, "z = {} sides {:?}", out.z_max, out.sides);
        // kill-time enumeration oracle, phi = 0.5, alpha = 1:
        //   left:  E[Theta(1) G] = phi [P(K=0) + P(K>=1) phi/(phi + 1/phi)]
        //   right: E[1{K>=1}/(1 + 1{K>=2}/phi^2)]
        // both evaluate to 0.3
        for s in &out.sides {
            assert!(
                (s.value - 0.3).abs() < 4.0 * s.stderr,
                "{}: {} vs enumeration 0.3",
                s.label,
                s.value
            );
        }
    }

    #[test]
    fn time_change_y_closed_form_case() {
        // h = 0, G = 1, x = 2: both sides are the Pareto survival x^-alpha
        let alpha = 1.0;
        let x = 2.0;
        let case = IdentityCase {
            id: "tyy0".into(),
            kind: IdentityKind::TimeChangeY { h: 0, x },
            model: ModelSpec::ar1(alpha, 0.5),
            lattice: LatticeSpec::identity(1, 1.0),
            window: vec![26],
            functional: Some(TestFunctional::One),
            n: 60_000,
            seed: 6,
            salt: 2,
            swap_streams: false,
        };
        let out = run_identity(&case, 2).unwrap();
        let expect = x.powf(-alpha);
        for s in &out.sides {
            assert!(
                (s.value - expect).abs() <= 3.0 * s.stderr + 1e-12,
                "{}: {} vs {}",
                s.label,
                s.value,
                expect
            );
        }
        assert!(out.z_max < 4.0);
    }

    #[test]
    fn four_way_equality_on_moving_max() {
        let case = IdentityCase {
            id: "fw".into(),
            kind: IdentityKind::FourWay,
            model: ModelSpec::moving_max(1.0, vec![2.0, 1.0]),
            lattice: LatticeSpec::identity(1, 1.0),
            window: vec![8],
            functional: Some(TestFunctional::SupAlpha),
            n: 60_000,
            seed: 7,
            salt: 3,
            swap_streams: false,
        };
        let out = run_identity(&case, 2).unwrap();
        // every side equals the candidate extremal index 2/3 here
        for s in &out.sides {
            assert!(
                (s.value - 2.0 / 3.0).abs() < 4.0 * s.stderr.max(1e-9),
                "{}: {}",
                s.label,
                s.value
            );
        }
        assert!(out.z_max < 4.0, "z = {}", out.z_max);
    }

    #[test]
    fn window_reciprocal_moving_max_enumeration() {
        // K = {-1,0,1}: sum over shifts of the window max of the profile
        // gives E[sup_K Z] = 7/3 for coefficients (2,1) at alpha = 1
        let case = IdentityCase {
            id: "nota".into(),
            kind: IdentityKind::WindowReciprocal { k_half: 1, tau: 0.0 },
            model: ModelSpec::moving_max(1.0, vec![2.0, 1.0]),
            lattice: LatticeSpec::identity(1, 1.0),
            window: vec![8],
            functional: None,
            n: 60_000,
            seed: 8,
            salt: 4,
            swap_streams: false,
        };
        let out = run_identity(&case, 2).unwrap();
        let expect = 7.0 / 3.0;
        for s in &out.sides {
            assert!(
                (s.value - expect).abs() < 4.0 * s.stderr,
                "{}: {} vs {expect}",
                s.label,
                s.value
            );
        }
        assert!(out.z_max < 4.0, "z = {}", out.z_max);
    }

    #[test]
    fn default_battery_is_large_enough() {
        let battery = default_battery(1000, 3);
        assert!(battery.len() >= 20, "battery has {} cases", battery.len());
        let kinds: std::collections::HashSet<_> =
            battery.iter().map(|c| c.kind.name()).collect();
        assert_eq!(kinds.len(), 6);
    }

    #[test]
    fn event_equality_on_moving_max_is_unanimous() {
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let out = run_event_equality(
            &model,
            &LatticeSpec::identity(1, 1.0),
            &[8],
            4000,
            9,
            2,
        )
        .unwrap();
        assert!(out.pass, "min rate {}", out.min_rate);
        assert_eq!(out.min_rate, 1.0);
    }
}
