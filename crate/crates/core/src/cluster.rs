//! Cluster-field constructions and the random-shift machinery.
//!
//! Seven constructions are supported. Four rescale a raw draw pathwise
//! (`ffd_*`), three condition on an anchoring or involution event at the
//! origin (`hoff_*`). All of them produce, for a fixed model and lattice,
//! cluster fields of the same class, so the weighted mean of
//! `sup_t ||Q(t)||^alpha` is the same number for every method; that is the
//! cross-construction consistency the estimator battery checks.
//!
//! Weighted-mode semantics: a draw whose construction indicator is zero is
//! returned as a zero field with its base weight intact. Expectations of
//! alpha-homogeneous functionals over the stream stay unbiased; the
//! conditional law is available through `conditional_draw` (rejection).

use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::field::{
    exceedance_sum, first_exceedance, infargsup, sum_alpha, sup_norm, FieldSample,
};
use crate::lattice::LatticeSpec;
use crate::models::{Sampler, ShiftDistribution, WeightedDraw};

pub use crate::models::ShiftKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionMethod {
    FfdTheta,
    FfdY,
    FfdZ,
    FfdTiltedY,
    HoffInvolutionTheta,
    HoffAnchorY,
    HoffInvolutionZ,
}

impl ConstructionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ConstructionMethod::FfdTheta => "ffd_theta",
            ConstructionMethod::FfdY => "ffd_y",
            ConstructionMethod::FfdZ => "ffd_z",
            ConstructionMethod::FfdTiltedY => "ffd_tilted_y",
            ConstructionMethod::HoffInvolutionTheta => "hoff_involution_theta",
            ConstructionMethod::HoffAnchorY => "hoff_anchor_y",
            ConstructionMethod::HoffInvolutionZ => "hoff_involution_z",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ffd_theta" => ConstructionMethod::FfdTheta,
            "ffd_y" => ConstructionMethod::FfdY,
            "ffd_z" => ConstructionMethod::FfdZ,
            "ffd_tilted_y" => ConstructionMethod::FfdTiltedY,
            "hoff_involution_theta" => ConstructionMethod::HoffInvolutionTheta,
            "hoff_anchor_y" => ConstructionMethod::HoffAnchorY,
            "hoff_involution_z" => ConstructionMethod::HoffInvolutionZ,
            other => return Err(Error::config(format!("unknown construction '{other}'"))),
        })
    }

    pub fn all() -> [ConstructionMethod; 7] {
        [
            ConstructionMethod::FfdTheta,
            ConstructionMethod::FfdY,
            ConstructionMethod::FfdZ,
            ConstructionMethod::FfdTiltedY,
            ConstructionMethod::HoffInvolutionTheta,
            ConstructionMethod::HoffAnchorY,
            ConstructionMethod::HoffInvolutionZ,
        ]
    }

    /// Whether the per-draw scale constant is known pathwise (rather than
    /// through an acceptance rate), so draws can feed a representer chain
    /// without a pilot estimate.
    pub fn has_exact_scale(self) -> bool {
        matches!(
            self,
            ConstructionMethod::FfdTheta | ConstructionMethod::FfdZ
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Infargsup,
    FirstExceedance,
}

impl Anchor {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "infargsup" => Anchor::Infargsup,
            "first_exceedance" => Anchor::FirstExceedance,
            other => return Err(Error::config(format!("unknown anchor '{other}'"))),
        })
    }
}

/// Parameters of one cluster construction.
#[derive(Debug, Clone)]
pub struct ClusterConstructionSpec {
    pub method: ConstructionMethod,
    pub lattice: LatticeSpec,
    pub b: f64,
    pub tau: f64,
    pub anchor: Anchor,
}

impl ClusterConstructionSpec {
    pub fn new(method: ConstructionMethod, lattice: LatticeSpec) -> Self {
        ClusterConstructionSpec {
            method,
            lattice,
            b: 1.0,
            tau: 0.0,
            anchor: Anchor::FirstExceedance,
        }
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_anchor(mut self, anchor: Anchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        if !(self.b >= 1.0) {
            return Err(Error::config("construction parameter b must be >= 1"));
        }
        if !(self.tau >= 0.0 && self.tau <= alpha) {
            return Err(Error::config(
                "tau outside [0, alpha]; only the always-admissible range is accepted",
            ));
        }
        Ok(())
    }
}

fn is_origin(t: &[i64]) -> bool {
    t.iter().all(|&v| v == 0)
}

fn anchored_at_origin(
    anchor: Anchor,
    sample: &FieldSample,
    lattice: &LatticeSpec,
    norm: &crate::field::Norm,
) -> bool {
    let picked = match anchor {
        Anchor::Infargsup => infargsup(sample, lattice, norm),
        Anchor::FirstExceedance => first_exceedance(sample, lattice, norm),
    };
    picked.map(|t| is_origin(&t)).unwrap_or(false)
}

/// Per-draw construction outcome. `draw` carries the cluster field under
/// the construction's own law (tilts and conditioning folded into its
/// weight). `index_value`/`index_weight` form the estimator pair: the
/// weighted mean of `index_value` under `index_weight` is the candidate
/// extremal index, with event indicators and scale constants folded into
/// the value so the mean stays unbiased.
pub struct ConstructedDraw {
    pub draw: WeightedDraw,
    pub index_value: f64,
    pub index_weight: f64,
    pub event: bool,
}

/// Draw-by-draw construction of the cluster field `Q` for one model.
pub struct ClusterSampler<'a> {
    spec: ClusterConstructionSpec,
    sampler: &'a Sampler,
}

impl<'a> ClusterSampler<'a> {
    pub fn new(spec: ClusterConstructionSpec, sampler: &'a Sampler) -> Result<Self> {
        spec.validate(sampler.model().alpha)?;
        Ok(ClusterSampler { spec, sampler })
    }

    pub fn spec(&self) -> &ClusterConstructionSpec {
        &self.spec
    }

    /// One weighted draw of `Q`.
    pub fn weighted_draw(&self, rng: &mut Pcg64) -> Result<ConstructedDraw> {
        let model = self.sampler.model();
        let alpha = model.alpha;
        let norm = &model.norm;
        let lat = &self.spec.lattice;
        // lattice sums enter the construction constants under the
        // counting measure, paired with the physical covolume
        let cell = lat
            .grid_spacing()
            .powi(lat.ambient_dim() as i32);
        let delta_l = lat.covolume();
        let b = self.spec.b;
        let tau = self.spec.tau;
        match self.spec.method {
            ConstructionMethod::FfdTheta => {
                let theta = self.sampler.sample_theta(rng);
                let s_l = sum_alpha(&theta.sample, lat, norm, alpha) / cell;
                if s_l <= 0.0 && theta.weight > 0.0 {
                    return Err(Error::contract(
                        "S_L(Theta) = 0 on a positive-weight draw",
                    ));
                }
                let c = 1.0 / (delta_l * s_l);
                let q = theta.sample.scaled(c.powf(1.0 / alpha));
                let g = sup_norm(&q, &ambient(lat), norm).powf(alpha);
                Ok(ConstructedDraw {
                    index_value: g,
                    index_weight: theta.weight,
                    draw: WeightedDraw {
                        sample: q,
                        weight: theta.weight,
                    },
                    event: true,
                })
            }
            ConstructionMethod::FfdZ => {
                let z = self.sampler.sample_z(rng);
                let z0 = z.norm_at(norm, &vec![0; z.dim_l()]).unwrap_or(0.0);
                let s_l = sum_alpha(&z, lat, norm, alpha) / cell;
                if s_l <= 0.0 && sup_norm(&z, &ambient(lat), norm) > 0.0 && z0 > 0.0 {
                    return Err(Error::contract("S_L(Z) = 0 with ||Z(0)|| > 0"));
                }
                let c = if z0 > 0.0 && s_l > 0.0 {
                    z0.powf(alpha) / (delta_l * s_l)
                } else {
                    0.0
                };
                let q = z.scaled(c.powf(1.0 / alpha));
                let g = sup_norm(&q, &ambient(lat), norm).powf(alpha);
                Ok(ConstructedDraw {
                    index_value: g,
                    index_weight: 1.0,
                    draw: WeightedDraw {
                        sample: q,
                        weight: 1.0,
                    },
                    event: c > 0.0,
                })
            }
            ConstructionMethod::FfdY => {
                let y = self.sampler.sample_y(rng);
                let y0 = y.sample.norm_at(norm, &vec![0; y.sample.dim_l()]).unwrap();
                let m_l = sup_norm(&y.sample, lat, norm);
                let b_sum = exceedance_sum(&y.sample, lat, norm, tau, 1.0) / cell;
                if b_sum <= 0.0 && y.weight > 0.0 {
                    return Err(Error::contract(
                        "B_{L,tau}(Y) = 0 on a positive-weight draw",
                    ));
                }
                let event = m_l > b;
                let c = if event {
                    b.powf(alpha) * y0.powf(tau) / (delta_l * m_l.powf(alpha) * b_sum)
                } else {
                    0.0
                };
                let q = y.sample.scaled(c.powf(1.0 / alpha));
                let g = sup_norm(&q, &ambient(lat), norm).powf(alpha);
                Ok(ConstructedDraw {
                    index_value: g,
                    index_weight: y.weight,
                    draw: WeightedDraw {
                        sample: q,
                        weight: y.weight,
                    },
                    event,
                })
            }
            ConstructionMethod::FfdTiltedY => {
                // The tilting factor ||Y(0)||^tau / (Delta B_{L,tau}(Y)) is
                // carried unnormalized, so the plain weighted mean of the
                // sup integrand recovers the index without knowing its own
                // normalizing constant.
                let y = self.sampler.sample_y(rng);
                let y0 = y.sample.norm_at(norm, &vec![0; y.sample.dim_l()]).unwrap();
                let m_l = sup_norm(&y.sample, lat, norm);
                let b_sum = exceedance_sum(&y.sample, lat, norm, tau, 1.0) / cell;
                if b_sum <= 0.0 && y.weight > 0.0 {
                    return Err(Error::contract(
                        "B_{L,tau}(Y) = 0 on a positive-weight draw",
                    ));
                }
                let tilt = y0.powf(tau) / (delta_l * b_sum);
                let event = m_l > b;
                let mut q = y.sample.clone();
                if event {
                    q.scale(b / m_l);
                } else {
                    q.scale(0.0);
                }
                let m_v = sup_norm(&q, &ambient(lat), norm).powf(alpha);
                Ok(ConstructedDraw {
                    index_value: tilt * m_v,
                    index_weight: y.weight,
                    draw: WeightedDraw {
                        sample: q,
                        weight: y.weight * tilt,
                    },
                    event,
                })
            }
            ConstructionMethod::HoffInvolutionTheta => {
                let theta = self.sampler.sample_theta(rng);
                let event = anchored_at_origin(Anchor::Infargsup, &theta.sample, lat, norm);
                let g = if event {
                    sup_norm(&theta.sample, &ambient(lat), norm).powf(alpha) / delta_l
                } else {
                    0.0
                };
                Ok(ConstructedDraw {
                    index_value: g,
                    index_weight: theta.weight,
                    draw: WeightedDraw {
                        sample: theta.sample,
                        weight: theta.weight * if event { 1.0 } else { 0.0 },
                    },
                    event,
                })
            }
            ConstructionMethod::HoffAnchorY => {
                let y = self.sampler.sample_y(rng);
                let m_l = sup_norm(&y.sample, lat, norm);
                let event = m_l > b
                    && anchored_at_origin(self.spec.anchor, &y.sample, lat, norm);
                let mut q = y.sample;
                let g = if event {
                    let m_v = sup_norm(&q, &ambient(lat), norm).powf(alpha);
                    q.scale(1.0 / m_l);
                    b.powf(alpha) * m_v / (m_l.powf(alpha) * delta_l)
                } else {
                    q.scale(0.0);
                    0.0
                };
                Ok(ConstructedDraw {
                    index_value: g,
                    index_weight: y.weight,
                    draw: WeightedDraw {
                        sample: q,
                        weight: y.weight * if event { 1.0 } else { 0.0 },
                    },
                    event,
                })
            }
            ConstructionMethod::HoffInvolutionZ => {
                let z = self.sampler.sample_z(rng);
                let event = anchored_at_origin(Anchor::Infargsup, &z, lat, norm);
                let g = if event {
                    sup_norm(&z, &ambient(lat), norm).powf(alpha) / delta_l
                } else {
                    0.0
                };
                Ok(ConstructedDraw {
                    index_value: g,
                    index_weight: 1.0,
                    draw: WeightedDraw {
                        sample: z,
                        weight: if event { 1.0 } else { 0.0 },
                    },
                    event,
                })
            }
        }
    }

    /// Rejection sampling of the conditional law; errors out when the
    /// construction event never fires within `budget` attempts.
    pub fn conditional_draw(
        &self,
        rng: &mut Pcg64,
        budget: u64,
    ) -> Result<(WeightedDraw, u64)> {
        for attempt in 1..=budget {
            let out = self.weighted_draw(rng)?;
            if out.event && out.draw.weight > 0.0 {
                return Ok((out.draw, attempt));
            }
        }
        Err(Error::DegenerateConditioning(format!(
            "construction {} produced no accepted draw in {} attempts",
            self.spec.method.name(),
            budget
        )))
    }
}

fn ambient(lat: &LatticeSpec) -> LatticeSpec {
    LatticeSpec::identity(lat.ambient_dim(), lat.grid_spacing())
}

/// Outcome of a random shift, with a truncation warning when the shifted
/// support may protrude past the window buffer.
pub struct ShiftedDraw {
    pub draw: WeightedDraw,
    pub shift: Vec<i64>,
    pub truncation_warning: bool,
}

/// `Z_N = B^N Q / p_N(N)^(1/alpha)`: sample a shift, translate the cluster
/// draw, and rescale by the shift density.
pub fn random_shift(
    q_draw: &WeightedDraw,
    shift_dist: &ShiftDistribution,
    alpha: f64,
    decay_radius: i64,
    rng: &mut Pcg64,
) -> ShiftedDraw {
    let (n, density) = shift_dist.sample(rng);
    let mut shifted = q_draw.sample.shift(&n);
    shifted.scale(density.powf(-1.0 / alpha));
    let warn = shift_dist
        .support_half()
        .iter()
        .zip(q_draw.sample.half_width())
        .any(|(b, a)| b + decay_radius > *a);
    ShiftedDraw {
        draw: WeightedDraw {
            sample: shifted,
            weight: q_draw.weight,
        },
        shift: n,
        truncation_warning: warn,
    }
}

/// `Q^(m)`: zero out the values at points with `|t|_1 > m`; weight unchanged.
pub fn m_truncate(q_draw: &WeightedDraw, m: f64) -> Result<WeightedDraw> {
    if !(m > 0.0) {
        return Err(Error::config("truncation radius m must be positive"));
    }
    let mut sample = q_draw.sample.clone();
    sample.truncate_l1(m);
    Ok(WeightedDraw {
        sample,
        weight: q_draw.weight,
    })
}

/// Normalizing functional for the spectral cluster transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaFunctional {
    /// `Gamma(f) = integral ||f||^p`, tilt exponent `xi = alpha / p`.
    PSum { p: f64 },
    /// `Gamma(f) = sup ||f||^alpha`, tilt exponent `xi = 1`.
    SupAlpha,
}

impl GammaFunctional {
    pub fn eval(&self, f: &FieldSample, norm: &crate::field::Norm, alpha: f64) -> f64 {
        let lat = LatticeSpec::identity(f.dim_l(), f.grid_spacing());
        match self {
            GammaFunctional::PSum { p } => sum_alpha(f, &lat, norm, *p),
            GammaFunctional::SupAlpha => sup_norm(f, &lat, norm).powf(alpha),
        }
    }

    fn xi(&self, alpha: f64) -> f64 {
        match self {
            GammaFunctional::PSum { p } => alpha / p,
            GammaFunctional::SupAlpha => 1.0,
        }
    }

    fn field_exponent(&self, alpha: f64) -> f64 {
        // Q / Gamma(Q)^(xi/alpha)
        self.xi(alpha) / alpha
    }
}

/// Tilt by `Gamma(Q)^xi` and normalize the field so `Gamma(Q_out) = 1`.
pub fn spectral_cluster_transform(
    q_draw: &WeightedDraw,
    gamma: GammaFunctional,
    norm: &crate::field::Norm,
    alpha: f64,
) -> Result<WeightedDraw> {
    let g = gamma.eval(&q_draw.sample, norm, alpha);
    if !(g > 0.0) {
        return Err(Error::contract("Gamma(Q) = 0 on a transform draw"));
    }
    let mut sample = q_draw.sample.scaled(g.powf(-gamma.field_exponent(alpha)));
    let check = gamma.eval(&sample, norm, alpha);
    debug_assert!((check - 1.0).abs() < 1e-9, "Gamma normalization drift {check}");
    if (check - 1.0).abs() > 1e-6 {
        // renormalize once if powf roundoff accumulated
        sample.scale(check.powf(-gamma.field_exponent(alpha)));
    }
    Ok(WeightedDraw {
        sample,
        weight: q_draw.weight * g.powf(gamma.xi(alpha)),
    })
}

/// Per-draw truncation error of the m-approximation, with the shift
/// averaged out analytically: conditional on the cluster draw `Q`,
/// `E[ sup_{t in W} ||Z_N(t) - Z_N^(m)(t)||^alpha | Q ]` equals the sum
/// over the shift support of the windowed sup of `||Q||^alpha` outside
/// radius `m`, normalized per window point.
pub fn truncation_error_given_q(
    q: &FieldSample,
    norm: &crate::field::Norm,
    alpha: f64,
    shift_support: &[Vec<i64>],
    eval_half: &[i64],
    m: f64,
) -> f64 {
    let mut total = 0.0;
    for n in shift_support {
        let mut sup = 0.0f64;
        q.for_each_covered(|s, v| {
            let l1: i64 = s.iter().map(|x| x.abs()).sum();
            if (l1 as f64) * q.grid_spacing() <= m {
                return;
            }
            // s must land inside the evaluation window after the shift
            let inside = s
                .iter()
                .zip(n.iter().zip(eval_half))
                .all(|(si, (ni, a))| (si + ni).abs() <= *a);
            if inside {
                sup = sup.max(norm.eval(v));
            }
        });
        total += sup.powf(alpha);
    }
    let points: i64 = eval_half.iter().map(|&a| 2 * a + 1).product();
    total / points as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Norm;
    use crate::models::{ModelSpec, ShiftKind};
    use crate::rng::rng_for;

    fn z1() -> LatticeSpec {
        LatticeSpec::identity(1, 1.0)
    }

    #[test]
    fn ffd_theta_on_moving_max_matches_enumeration() {
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let sampler = Sampler::new(&model, &[8]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::FfdTheta, z1()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(20, 0);
        for _ in 0..200 {
            let out = cs.weighted_draw(&mut rng).unwrap();
            // S_L(Theta) is 1.5 for J=0 and 3 for J=1; Q sums to 1 either way
            let s = sum_alpha(&out.draw.sample, &z1(), &Norm::Abs, 1.0);
            assert!((s - 1.0).abs() < 1e-12);
            assert!((out.index_value - 2.0 / 3.0).abs() < 1e-12);
            let at0 = out.draw.sample.value(&[0]).unwrap()[0];
            let at1 = out.draw.sample.value(&[1]).unwrap()[0];
            if at1 > 0.0 {
                // J = 0 draw: Q = {0: 2/3, 1: 1/3}
                assert!((at0 - 2.0 / 3.0).abs() < 1e-12);
                assert!((at1 - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ffd_y_with_b_one_never_zeroes() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let sampler = Sampler::new(&model, &[24]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::FfdY, z1()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(21, 0);
        for _ in 0..200 {
            let out = cs.weighted_draw(&mut rng).unwrap();
            assert!(out.event, "||Y(0)|| = R > 1 makes M_L(Y) > 1 a.s.");
            assert!(out.index_value > 0.0);
        }
    }

    #[test]
    fn hoff_acceptance_rate_matches_albin_oracle() {
        // first-exceedance anchoring at b = 1: the acceptance probability is
        // P(sup_{0 < t} ||Y|| <= 1) = 1 - phi^alpha for the tail chain
        let model = ModelSpec::ar1(1.0, 0.5);
        let sampler = Sampler::new(&model, &[24]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::HoffAnchorY, z1()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(22, 0);
        let n = 40_000;
        let mut accepted = 0usize;
        for _ in 0..n {
            if cs.weighted_draw(&mut rng).unwrap().event {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / n as f64;
        let se = (0.5 * 0.5 / n as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * se, "rate {rate}");
    }

    #[test]
    fn conditional_draw_returns_accepted_paths() {
        let model = ModelSpec::moving_max(1.0, vec![2.0, 1.0]);
        let sampler = Sampler::new(&model, &[8]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::HoffInvolutionTheta, z1()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(23, 0);
        for _ in 0..50 {
            let (draw, _) = cs.conditional_draw(&mut rng, 10_000).unwrap();
            let arg = infargsup(&draw.sample, &z1(), &Norm::Abs).unwrap();
            assert_eq!(arg, vec![0]);
        }
    }

    #[test]
    fn random_shift_rescales_by_density() {
        let q = WeightedDraw {
            sample: FieldSample::scalar_from_fn(1, &[8], 1.0, |t| {
                if t[0] == 0 {
                    1.0
                } else {
                    0.0
                }
            }),
            weight: 1.0,
        };
        let dist =
            ShiftDistribution::new(ShiftKind::UniformWindow, vec![3], 1.0).unwrap();
        let mut rng = rng_for(24, 0);
        let out = random_shift(&q, &dist, 1.0, 0, &mut rng);
        let n = out.shift[0];
        let v = out.draw.sample.value(&[n]).unwrap()[0];
        assert!((v - 7.0).abs() < 1e-12, "density 1/7 -> value 7, got {v}");
    }

    #[test]
    fn point_mass_shift_is_identity() {
        let q = WeightedDraw {
            sample: FieldSample::scalar_from_fn(1, &[4], 1.0, |t| 1.0 / (1 + t[0].abs()) as f64),
            weight: 1.0,
        };
        let dist = ShiftDistribution::point_mass(1, 1.0);
        let mut rng = rng_for(25, 0);
        let out = random_shift(&q, &dist, 2.0, 0, &mut rng);
        q.sample.for_each_covered(|t, v| {
            assert_eq!(out.draw.sample.value(t).unwrap(), v);
        });
    }

    #[test]
    fn m_truncate_zeroes_outside_radius() {
        let q = WeightedDraw {
            sample: FieldSample::scalar_from_fn(1, &[2], 1.0, |t| (t[0] + 3) as f64),
            weight: 0.7,
        };
        let out = m_truncate(&q, 1.0).unwrap();
        assert_eq!(out.weight, 0.7);
        assert_eq!(out.draw_value(-2), 0.0);
        assert_eq!(out.draw_value(-1), 2.0);
        assert_eq!(out.draw_value(2), 0.0);
        let unchanged = m_truncate(&q, 2.0).unwrap();
        q.sample.for_each_covered(|t, v| {
            assert_eq!(unchanged.sample.value(t).unwrap(), v);
        });
        assert!(m_truncate(&q, 0.0).is_err());
    }

    impl WeightedDraw {
        fn draw_value(&self, t: i64) -> f64 {
            self.sample.value(&[t]).unwrap()[0]
        }
    }

    #[test]
    fn spectral_transform_normalizes_gamma() {
        let model = ModelSpec::ar1(1.3, 0.6);
        let sampler = Sampler::new(&model, &[30]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::FfdTheta, z1()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(26, 0);
        for gamma in [
            GammaFunctional::PSum { p: 1.3 },
            GammaFunctional::PSum { p: 2.0 },
            GammaFunctional::SupAlpha,
        ] {
            for _ in 0..100 {
                let q = cs.weighted_draw(&mut rng).unwrap().draw;
                let out = spectral_cluster_transform(&q, gamma, &Norm::Abs, 1.3).unwrap();
                let g = gamma.eval(&out.sample, &Norm::Abs, 1.3);
                assert!((g - 1.0).abs() < 1e-10, "Gamma(Q_out) = {g}");
            }
        }
    }

    #[test]
    fn spectral_transform_sup_example() {
        // sup_alpha with alpha = 1 and sup = 2: field halves, weight doubles
        let q = WeightedDraw {
            sample: FieldSample::scalar_from_fn(1, &[2], 1.0, |t| {
                if t[0] == 0 {
                    2.0
                } else {
                    0.0
                }
            }),
            weight: 1.0,
        };
        let out =
            spectral_cluster_transform(&q, GammaFunctional::SupAlpha, &Norm::Abs, 1.0).unwrap();
        assert!((out.weight - 2.0).abs() < 1e-12);
        assert!((out.sample.value(&[0]).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_sum_at_alpha_normalizes_total_mass() {
        let model = ModelSpec::moving_max(2.0, vec![2.0, 1.0]);
        let sampler = Sampler::new(&model, &[8]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::FfdTheta, z1()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(27, 0);
        let q = cs.weighted_draw(&mut rng).unwrap().draw;
        let out =
            spectral_cluster_transform(&q, GammaFunctional::PSum { p: 2.0 }, &Norm::Abs, 2.0)
                .unwrap();
        let s = sum_alpha(&out.sample, &z1(), &Norm::Abs, 2.0);
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_gamma_is_a_contract_violation() {
        let q = WeightedDraw {
            sample: FieldSample::scalar_from_fn(1, &[2], 1.0, |_| 0.0),
            weight: 1.0,
        };
        assert!(
            spectral_cluster_transform(&q, GammaFunctional::SupAlpha, &Norm::Abs, 1.0).is_err()
        );
    }

    #[test]
    fn truncation_error_is_monotone_in_m_pathwise() {
        let model = ModelSpec::ar1(1.0, 0.5);
        let sampler = Sampler::new(&model, &[40]).unwrap();
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::FfdTheta, z1()),
            &sampler,
        )
        .unwrap();
        let support = ShiftDistribution::new(ShiftKind::UniformWindow, vec![10], 1.0)
            .unwrap()
            .support_points();
        let mut rng = rng_for(28, 0);
        for _ in 0..50 {
            let q = cs.weighted_draw(&mut rng).unwrap().draw;
            let errs: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|&m| {
                    truncation_error_given_q(&q.sample, &Norm::Abs, 1.0, &support, &[16], m)
                })
                .collect();
            for w in errs.windows(2) {
                assert!(w[0] >= w[1] - 1e-15, "not monotone: {errs:?}");
            }
        }
    }
}


#[cfg(test)]
mod invariant_tests {
    use super::*;
    use crate::field::Norm;
    use crate::models::ModelSpec;
    use crate::rng::rng_for;

    #[test]
    fn every_construction_yields_well_formed_cluster_draws() {
        // positive-weight draws have a positive sup and a finite positive
        // alpha-sum, for each of the seven methods
        let model = ModelSpec::ar1(1.0, 0.5);
        let sampler = Sampler::new(&model, &[24]).unwrap();
        let lat = LatticeSpec::identity(1, 1.0);
        for method in ConstructionMethod::all() {
            let cs = ClusterSampler::new(
                ClusterConstructionSpec::new(method, lat.clone()),
                &sampler,
            )
            .unwrap();
            let mut rng = rng_for(60, method as u64);
            let mut positive = 0usize;
            // conditioned methods can have low acceptance (the involution
            // on Z must hit the origin under a wide shift law)
            for _ in 0..3000 {
                let out = cs.weighted_draw(&mut rng).unwrap();
                if out.draw.weight > 0.0 && out.event {
                    positive += 1;
                    let sup = sup_norm(&out.draw.sample, &lat, &Norm::Abs);
                    let s = sum_alpha(&out.draw.sample, &lat, &Norm::Abs, 1.0);
                    assert!(sup > 0.0, "{}: zero sup", method.name());
                    assert!(s > 0.0 && s.is_finite(), "{}: degenerate sum {s}", method.name());
                }
            }
            assert!(positive >= 10, "{}: almost no accepted draws", method.name());
        }
    }

    #[test]
    fn sublattice_construction_is_normalized() {
        // the lattice-paired sum is 1 pathwise, and the full-grid
        // alpha-mass of Q has unit mean (the tiling identity)
        let model = ModelSpec::ar1(1.0, 0.5);
        let sampler = Sampler::new(&model, &[40]).unwrap();
        let two_z = LatticeSpec::new(1, vec![2], 1.0).unwrap();
        let ambient = LatticeSpec::identity(1, 1.0);
        let cs = ClusterSampler::new(
            ClusterConstructionSpec::new(ConstructionMethod::FfdTheta, two_z.clone()),
            &sampler,
        )
        .unwrap();
        let mut rng = rng_for(61, 0);
        let mut acc = crate::extremal::Accumulator::default();
        for _ in 0..40_000 {
            let out = cs.weighted_draw(&mut rng).unwrap();
            let s_lat = sum_alpha(&out.draw.sample, &two_z, &Norm::Abs, 1.0);
            // Delta_phys * counting sum over L is 1 by construction
            assert!((2.0 * s_lat - 1.0).abs() < 1e-9, "paired sum {}", 2.0 * s_lat);
            acc.push(
                out.index_weight,
                sum_alpha(&out.draw.sample, &ambient, &Norm::Abs, 1.0),
            );
        }
        let mean = acc.mean();
        assert!(
            (mean - 1.0).abs() < 3.0 * acc.stderr() + 1e-4,
            "E[S(Q)] = {mean} +/- {}",
            acc.stderr()
        );
    }

    #[test]
    fn samorodnitsky_ratio_is_bounded_by_reciprocal_covolume() {
        let model = ModelSpec::ar1(1.3, 0.6);
        let sampler = Sampler::new(&model, &[30]).unwrap();
        let two_z = LatticeSpec::new(1, vec![2], 1.0).unwrap();
        let mut rng = rng_for(62, 0);
        for _ in 0..300 {
            let th = sampler.sample_theta(&mut rng);
            let sup = sup_norm(&th.sample, &two_z, &Norm::Abs).powf(1.3);
            let s_count = sum_alpha(&th.sample, &two_z, &Norm::Abs, 1.3);
            let ratio = sup / (two_z.covolume() * s_count);
            assert!(ratio > 0.0 && ratio <= 1.0 / two_z.covolume() + 1e-12, "{ratio}");
        }
    }
}
