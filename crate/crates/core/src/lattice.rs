//! Full-rank integer lattices on the ambient grid.
//!
//! A lattice is given by an integer base matrix `A` whose columns generate
//! it, in units of the grid spacing. Determinant and membership use exact
//! integer arithmetic, and coset representatives enumerate the integer
//! points of the half-open fundamental parallelepiped `{Ax : x in [0,1)^l}`
//! in lexicographic order, so repeated calls are canonical.

use crate::error::{Error, Result};

/// A full-rank sublattice of the ambient grid.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    ambient_dim: usize,
    /// Row-major l x l integer matrix; columns are generators.
    base: Vec<i64>,
    grid_spacing: f64,
    det: i128,
    /// Row-major adjugate, `A * adj(A) = det * I`.
    adj: Vec<i128>,
}

/// One representative per coset of the lattice in the ambient grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetTable {
    pub representatives: Vec<Vec<i64>>,
}

fn det_i128(m: &[i128], n: usize) -> i128 {
    // Bareiss fraction-free elimination; exact for integer input.
    let mut a = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k * n + k] == 0 {
            let swap = (k + 1..n).find(|&r| a[r * n + k] != 0);
            match swap {
                Some(r) => {
                    for c in 0..n {
                        a.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
            a[i * n + k] = 0;
        }
        prev = a[k * n + k];
    }
    sign * a[(n - 1) * n + (n - 1)]
}

fn minor(m: &[i128], n: usize, skip_row: usize, skip_col: usize) -> i128 {
    let mut sub = Vec::with_capacity((n - 1) * (n - 1));
    for r in 0..n {
        if r == skip_row {
            continue;
        }
        for c in 0..n {
            if c == skip_col {
                continue;
            }
            sub.push(m[r * n + c]);
        }
    }
    det_i128(&sub, n - 1)
}

impl LatticeSpec {
    pub fn new(ambient_dim: usize, base: Vec<i64>, grid_spacing: f64) -> Result<Self> {
        let l = ambient_dim;
        if l == 0 {
            return Err(Error::config("lattice dimension must be positive"));
        }
        if base.len() != l * l {
            return Err(Error::config(format!(
                "base matrix needs {} entries, got {}",
                l * l,
                base.len()
            )));
        }
        if !(grid_spacing > 0.0) || !grid_spacing.is_finite() {
            return Err(Error::config("grid spacing must be positive and finite"));
        }
        let m: Vec<i128> = base.iter().map(|&v| v as i128).collect();
        let det = det_i128(&m, l);
        if det == 0 {
            return Err(Error::config("singular base matrix: lattice is not full rank"));
        }
        let mut adj = vec![0i128; l * l];
        if l == 1 {
            adj[0] = 1;
        } else {
            for r in 0..l {
                for c in 0..l {
                    let cof = minor(&m, l, r, c);
                    let s = if (r + c) % 2 == 0 { 1 } else { -1 };
                    // adjugate is the transposed cofactor matrix
                    adj[c * l + r] = s * cof;
                }
            }
        }
        Ok(LatticeSpec {
            ambient_dim: l,
            base,
            grid_spacing,
            det,
            adj,
        })
    }

    /// The ambient grid itself (`A = I`), which also encodes the `L = V` case.
    pub fn identity(ambient_dim: usize, grid_spacing: f64) -> Self {
        let l = ambient_dim;
        let mut base = vec![0i64; l * l];
        for i in 0..l {
            base[i * l + i] = 1;
        }
        LatticeSpec::new(l, base, grid_spacing).expect("identity lattice is always valid")
    }

    /// Parse row-major `"a11,a12;a21,a22"` integer text.
    pub fn parse(text: &str, grid_spacing: f64) -> Result<Self> {
        let rows: Vec<&str> = text.split(';').collect();
        let l = rows.len();
        let mut base = Vec::with_capacity(l * l);
        for row in &rows {
            let entries: Vec<&str> = row.split(',').collect();
            if entries.len() != l {
                return Err(Error::config(format!(
                    "lattice row '{}' has {} entries, expected {}",
                    row,
                    entries.len(),
                    l
                )));
            }
            for e in entries {
                let v: i64 = e
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad lattice entry '{}'", e)))?;
                base.push(v);
            }
        }
        LatticeSpec::new(l, base, grid_spacing)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn grid_spacing(&self) -> f64 {
        self.grid_spacing
    }

    pub fn base(&self) -> &[i64] {
        &self.base
    }

    pub fn is_identity(&self) -> bool {
        let l = self.ambient_dim;
        self.base
            .iter()
            .enumerate()
            .all(|(i, &v)| v == if i / l == i % l { 1 } else { 0 })
    }

    /// Covolume of the fundamental parallelepiped, `|det A| * delta^l`.
    pub fn covolume(&self) -> f64 {
        self.det.unsigned_abs() as f64 * self.grid_spacing.powi(self.ambient_dim as i32)
    }

    /// Number of cosets of the lattice in the ambient grid.
    pub fn quotient_order(&self) -> u64 {
        self.det.unsigned_abs() as u64
    }

    /// Exact membership: true iff `A^-1 point` is an integer vector.
    pub fn contains(&self, point: &[i64]) -> bool {
        let l = self.ambient_dim;
        debug_assert_eq!(point.len(), l);
        if self.is_identity() {
            return true;
        }
        for r in 0..l {
            let mut acc = 0i128;
            for c in 0..l {
                acc += self.adj[r * l + c] * point[c] as i128;
            }
            if acc % self.det != 0 {
                return false;
            }
        }
        true
    }

    /// Fractional coordinates check: point = A x with every `x_i in [0,1)`.
    fn in_fundamental_parallelepiped(&self, point: &[i64]) -> bool {
        let l = self.ambient_dim;
        let abs_det = self.det.unsigned_abs() as i128;
        let sign = if self.det > 0 { 1i128 } else { -1i128 };
        for r in 0..l {
            let mut acc = 0i128;
            for c in 0..l {
                acc += self.adj[r * l + c] * point[c] as i128;
            }
            let num = sign * acc; // x_r = num / |det|
            if num < 0 || num >= abs_det {
                return false;
            }
        }
        true
    }

    /// Canonical coset representatives: the integer points of the
    /// fundamental parallelepiped, in lexicographic order.
    pub fn coset_representatives(&self) -> CosetTable {
        let l = self.ambient_dim;
        // Bounding box of {Ax : x in [0,1)^l}: per row, sum of the
        // negative/positive parts of the row entries.
        let mut lo = vec![0i64; l];
        let mut hi = vec![0i64; l];
        for r in 0..l {
            for c in 0..l {
                let v = self.base[r * l + c];
                if v < 0 {
                    lo[r] += v;
                } else {
                    hi[r] += v;
                }
            }
        }
        let mut reps = Vec::new();
        let mut point = lo.clone();
        'outer: loop {
            if self.in_fundamental_parallelepiped(&point) {
                reps.push(point.clone());
            }
            // lexicographic odometer over the box
            for axis in (0..l).rev() {
                if point[axis] < hi[axis] {
                    point[axis] += 1;
                    continue 'outer;
                }
                point[axis] = lo[axis];
                if axis == 0 {
                    break 'outer;
                }
            }
        }
        debug_assert_eq!(reps.len() as u64, self.quotient_order());
        CosetTable {
            representatives: reps,
        }
    }
}
