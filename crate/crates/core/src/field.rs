//! Finite-window field realizations and the path functionals built on them.
//!
//! A [`FieldSample`] holds an `R^d`-valued field on the grid window
//! `W = [-a, a]^l`, anchored at the origin, together with a coverage box:
//! shifting translates coverage and intersects it with the window, and
//! functionals only ever read covered points. The total order on grid
//! points is lexicographic on coordinates, which is shift-invariant.

use crate::lattice::LatticeSpec;

/// 1-homogeneous continuous norm on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Norm {
    /// Absolute value, `d = 1`.
    Abs,
    Euclid,
    MaxComponent,
    WeightedSum(Vec<f64>),
}

impl Norm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Norm::Abs => x[0].abs(),
            Norm::Euclid => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::MaxComponent => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Norm::WeightedSum(w) => x.iter().zip(w).map(|(v, wi)| wi * v.abs()).sum(),
        }
    }
}

/// Lexicographic comparison of grid points; total and shift-invariant.
pub fn lex_cmp(a: &[i64], b: &[i64]) -> std::cmp::Ordering {
    a.cmp(b)
}

/// `true` iff the origin strictly precedes `t` lexicographically.
pub fn succ_zero(t: &[i64]) -> bool {
    t.iter().any(|&v| v != 0) && t.iter().find(|&&v| v != 0).map(|&v| v > 0).unwrap_or(false)
}

/// Which grid points a one-sided functional ranges over, relative to the
/// lexicographic order anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRegion {
    All,
    /// `0 <= t` (origin included).
    FromZero,
    /// `0 < t` (origin excluded).
    AfterZero,
}

impl OrderRegion {
    fn admits(self, t: &[i64]) -> bool {
        match self {
            OrderRegion::All => true,
            OrderRegion::FromZero => !t.iter().any(|&v| v != 0) || succ_zero(t),
            OrderRegion::AfterZero => succ_zero(t),
        }
    }
}

/// One realization of an `R^d`-valued field on a finite window.
#[derive(Debug, Clone)]
pub struct FieldSample {
    dim_l: usize,
    dim_d: usize,
    grid_spacing: f64,
    half_width: Vec<i64>,
    cov_lo: Vec<i64>,
    cov_hi: Vec<i64>,
    /// Dense window-box storage, row-major over axes, `d` values per point.
    values: Vec<f64>,
}

fn for_each_point(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    let l = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut t = lo.to_vec();
    'outer: loop {
        f(&t);
        for axis in (0..l).rev() {
            if t[axis] < hi[axis] {
                t[axis] += 1;
                continue 'outer;
            }
            t[axis] = lo[axis];
            if axis == 0 {
                break 'outer;
            }
        }
    }
}

impl FieldSample {
    /// Build a fully covered sample by evaluating `fill` at every window point.
    pub fn from_fn(
        dim_l: usize,
        dim_d: usize,
        half_width: &[i64],
        grid_spacing: f64,
        mut fill: impl FnMut(&[i64], &mut [f64]),
    ) -> Self {
        assert_eq!(half_width.len(), dim_l);
        assert!(half_width.iter().all(|&a| a >= 0));
        let cov_lo: Vec<i64> = half_width.iter().map(|&a| -a).collect();
        let cov_hi: Vec<i64> = half_width.to_vec();
        let n_points: usize = half_width.iter().map(|&a| (2 * a + 1) as usize).product();
        let mut sample = FieldSample {
            dim_l,
            dim_d,
            grid_spacing,
            half_width: half_width.to_vec(),
            cov_lo,
            cov_hi,
            values: vec![0.0; n_points * dim_d],
        };
        let mut buf = vec![0.0; dim_d];
        let lo = sample.cov_lo.clone();
        let hi = sample.cov_hi.clone();
        for_each_point(&lo, &hi, |t| {
            fill(t, &mut buf);
            let idx = sample.index_of(t) * dim_d;
            sample.values[idx..idx + dim_d].copy_from_slice(&buf);
        });
        sample
    }

    /// Scalar (`d = 1`) sample from a value function.
    pub fn scalar_from_fn(
        dim_l: usize,
        half_width: &[i64],
        grid_spacing: f64,
        mut fill: impl FnMut(&[i64]) -> f64,
    ) -> Self {
        FieldSample::from_fn(dim_l, 1, half_width, grid_spacing, |t, out| {
            out[0] = fill(t)
        })
    }

    pub fn dim_l(&self) -> usize {
        self.dim_l
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn grid_spacing(&self) -> f64 {
        self.grid_spacing
    }

    pub fn half_width(&self) -> &[i64] {
        &self.half_width
    }

    /// Measure weight of one grid cell, `delta^l`.
    pub fn cell_measure(&self) -> f64 {
        self.grid_spacing.powi(self.dim_l as i32)
    }

    fn index_of(&self, t: &[i64]) -> usize {
        let mut idx = 0usize;
        for axis in 0..self.dim_l {
            let extent = (2 * self.half_width[axis] + 1) as usize;
            idx = idx * extent + (t[axis] + self.half_width[axis]) as usize;
        }
        idx
    }

    pub fn is_covered(&self, t: &[i64]) -> bool {
        t.iter()
            .zip(self.cov_lo.iter().zip(&self.cov_hi))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Values at `t`, or `None` when the point fell out of coverage.
    pub fn value(&self, t: &[i64]) -> Option<&[f64]> {
        if !self.is_covered(t) {
            return None;
        }
        let idx = self.index_of(t) * self.dim_d;
        Some(&self.values[idx..idx + self.dim_d])
    }

    pub fn norm_at(&self, norm: &Norm, t: &[i64]) -> Option<f64> {
        self.value(t).map(|v| norm.eval(v))
    }

    /// Visit every covered point in lexicographic order.
    pub fn for_each_covered(&self, mut f: impl FnMut(&[i64], &[f64])) {
        let lo = self.cov_lo.clone();
        let hi = self.cov_hi.clone();
        for_each_point(&lo, &hi, |t| {
            let idx = self.index_of(t) * self.dim_d;
            f(t, &self.values[idx..idx + self.dim_d]);
        });
    }

    /// Back-shift by `h`: the result holds `g(t) = f(t - h)` wherever
    /// `t - h` was covered, with coverage clipped to the window.
    pub fn shift(&self, h: &[i64]) -> FieldSample {
        assert_eq!(h.len(), self.dim_l);
        let cov_lo: Vec<i64> = self
            .cov_lo
            .iter()
            .zip(h)
            .zip(&self.half_width)
            .map(|((lo, hh), a)| (lo + hh).max(-a))
            .collect();
        let cov_hi: Vec<i64> = self
            .cov_hi
            .iter()
            .zip(h)
            .zip(&self.half_width)
            .map(|((hi, hh), a)| (hi + hh).min(*a))
            .collect();
        let mut out = FieldSample {
            dim_l: self.dim_l,
            dim_d: self.dim_d,
            grid_spacing: self.grid_spacing,
            half_width: self.half_width.clone(),
            cov_lo,
            cov_hi,
            values: vec![0.0; self.values.len()],
        };
        let lo = out.cov_lo.clone();
        let hi = out.cov_hi.clone();
        let mut src = vec![0i64; self.dim_l];
        for_each_point(&lo, &hi, |t| {
            for (s, (ti, hi_)) in src.iter_mut().zip(t.iter().zip(h)) {
                *s = ti - hi_;
            }
            let from = self.index_of(&src) * self.dim_d;
            let to = out.index_of(t) * self.dim_d;
            for k in 0..self.dim_d {
                out.values[to + k] = self.values[from + k];
            }
        });
        out
    }

    /// Multiply every value by `c`.
    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> FieldSample {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// Zero out values at points with `|t|_1 > m` (support truncation; the
    /// points stay covered).
    pub fn truncate_l1(&mut self, m: f64) {
        let lo = self.cov_lo.clone();
        let hi = self.cov_hi.clone();
        let d = self.dim_d;
        let mut kill = Vec::new();
        for_each_point(&lo, &hi, |t| {
            let l1: i64 = t.iter().map(|v| v.abs()).sum();
            if (l1 as f64) * self.grid_spacing > m {
                kill.push(self.index_of(t));
            }
        });
        for idx in kill {
            for k in 0..d {
                self.values[idx * d + k] = 0.0;
            }
        }
    }
}

fn lattice_admits(lattice: &LatticeSpec, t: &[i64]) -> bool {
    lattice.is_identity() || lattice.contains(t)
}

/// `S_L(f)`: sum of `||f(t)||^alpha` over lattice points in coverage,
/// weighted by the cell measure.
pub fn sum_alpha(f: &FieldSample, lattice: &LatticeSpec, norm: &Norm, alpha: f64) -> f64 {
    assert!(alpha > 0.0);
    let cell = f.cell_measure();
    let mut acc = 0.0;
    f.for_each_covered(|t, v| {
        if lattice_admits(lattice, t) {
            acc += norm.eval(v).powf(alpha) * cell;
        }
    });
    acc
}

/// `B_{L,tau}(b f)`: sum of `||b f(t)||^tau 1{||b f(t)|| >= 1}` over lattice
/// points in coverage, weighted by the cell measure.
pub fn exceedance_sum(
    f: &FieldSample,
    lattice: &LatticeSpec,
    norm: &Norm,
    tau: f64,
    threshold_scale: f64,
) -> f64 {
    assert!(threshold_scale > 0.0);
    let cell = f.cell_measure();
    let mut acc = 0.0;
    f.for_each_covered(|t, v| {
        if lattice_admits(lattice, t) {
            let s = threshold_scale * norm.eval(v);
            if s >= 1.0 {
                acc += s.powf(tau) * cell;
            }
        }
    });
    acc
}

/// `M_L(f)`: max of `||f(t)||` over lattice points in coverage; 0 when empty.
pub fn sup_norm(f: &FieldSample, lattice: &LatticeSpec, norm: &Norm) -> f64 {
    sup_norm_region(f, lattice, norm, OrderRegion::All)
}

/// Sup of the norm over a one-sided region of the lattice.
pub fn sup_norm_region(
    f: &FieldSample,
    lattice: &LatticeSpec,
    norm: &Norm,
    region: OrderRegion,
) -> f64 {
    let mut m = 0.0f64;
    f.for_each_covered(|t, v| {
        if region.admits(t) && lattice_admits(lattice, t) {
            m = m.max(norm.eval(v));
        }
    });
    m
}

/// Lexicographically least lattice point attaining the sup of the norm;
/// `None` when the sup is 0.
pub fn infargsup(f: &FieldSample, lattice: &LatticeSpec, norm: &Norm) -> Option<Vec<i64>> {
    let mut best: Option<(Vec<i64>, f64)> = None;
    f.for_each_covered(|t, v| {
        if !lattice_admits(lattice, t) {
            return;
        }
        let n = norm.eval(v);
        match &best {
            Some((_, b)) if n <= *b => {}
            _ => {
                if n > best.as_ref().map(|(_, b)| *b).unwrap_or(0.0) {
                    best = Some((t.to_vec(), n));
                }
            }
        }
    });
    // lexicographic iteration order makes the first strict maximum the
    // least argmax
    best.filter(|(_, n)| *n > 0.0).map(|(t, _)| t)
}

/// Lexicographically least lattice point with `||f(t)|| > 1` (strict);
/// `None` when there is no exceedance in the window.
pub fn first_exceedance(f: &FieldSample, lattice: &LatticeSpec, norm: &Norm) -> Option<Vec<i64>> {
    let mut found: Option<Vec<i64>> = None;
    f.for_each_covered(|t, v| {
        if found.is_some() || !lattice_admits(lattice, t) {
            return;
        }
        if norm.eval(v) > 1.0 {
            found = Some(t.to_vec());
        }
    });
    found
}

/// Alpha-mass of the inner half of the window vs the outer shell, used as a
/// finiteness proxy in diagnostics.
pub fn mass_split(f: &FieldSample, norm: &Norm, alpha: f64) -> (f64, f64, f64, f64) {
    let halves: Vec<i64> = f.half_width().iter().map(|&a| a / 2).collect();
    let mut inner_mass = 0.0;
    let mut outer_mass = 0.0;
    let mut inner_sup = 0.0f64;
    let mut outer_sup = 0.0f64;
    let cell = f.cell_measure();
    f.for_each_covered(|t, v| {
        let n = norm.eval(v);
        let inside = t
            .iter()
            .zip(&halves)
            .all(|(ti, h)| ti.abs() <= *h);
        if inside {
            inner_mass += n.powf(alpha) * cell;
            inner_sup = inner_sup.max(n);
        } else {
            outer_mass += n.powf(alpha) * cell;
            outer_sup = outer_sup.max(n);
        }
    });
    (inner_mass, outer_mass, inner_sup, outer_sup)
}
