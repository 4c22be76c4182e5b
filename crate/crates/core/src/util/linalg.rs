//! Small dense and banded linear algebra.
//!
//! The smoothing spline needs a symmetric positive-definite banded factor/solve
//! plus the in-band entries of the inverse (for the hat-matrix trace in GCV);
//! the identifiability diagnostics need a small symmetric eigensolve. Nothing
//! here is tuned for large dense problems.

use crate::scalar::Scalar;

/// Symmetric banded matrix, lower storage: `bands[k][i] = A[i+k][i]`,
/// `k = 0..=w`. Band `k` has length `n - k`.
#[derive(Clone, Debug)]
pub struct SymBanded<S> {
    pub n: usize,
    pub bands: Vec<Vec<S>>,
}

impl<S: Scalar> SymBanded<S> {
    pub fn zeros(n: usize, w: usize) -> Self {
        let bands = (0..=w).map(|k| vec![S::zero(); n - k.min(n)]).collect();
        SymBanded { n, bands }
    }

    pub fn width(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k >= self.bands.len() {
            S::zero()
        } else {
            self.bands[k][lo]
        }
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: S) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        self.bands[k][lo] += v;
    }

    /// In-place LDL^T factorization. Returns the unit-lower factor (same band
    /// layout, band 0 holding D) or `None` if a pivot is not strictly positive.
    pub fn ldlt(&self) -> Option<SymBanded<S>> {
        let n = self.n;
        let w = self.width();
        let mut f = self.clone();
        for i in 0..n {
            let start = i.saturating_sub(w);
            let mut d = self.bands[0][i];
            for k in start..i {
                let l_ik = f.bands[i - k][k];
                d -= l_ik * l_ik * f.bands[0][k];
            }
            if !(d > S::zero()) || !d.is_finite() {
                return None;
            }
            f.bands[0][i] = d;
            for j in (i + 1)..(i + w + 1).min(n) {
                let mut s = self.get(j, i);
                let kstart = j.saturating_sub(w);
                for k in kstart..i {
                    s -= f.bands[j - k][k] * f.bands[i - k][k] * f.bands[0][k];
                }
                f.bands[j - i][i] = s / d;
            }
        }
        Some(f)
    }
}

/// Factorized symmetric banded system.
pub struct LdltFactor<S> {
    f: SymBanded<S>,
}

impl<S: Scalar> LdltFactor<S> {
    pub fn new(a: &SymBanded<S>) -> Option<Self> {
        a.ldlt().map(|f| LdltFactor { f })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.f.n;
        let w = self.f.width();
        let mut x = b.to_vec();
        // L y = b
        for i in 0..n {
            let start = i.saturating_sub(w);
            let mut s = x[i];
            for k in start..i {
                s -= self.f.bands[i - k][k] * x[k];
            }
            x[i] = s;
        }
        // D z = y
        for i in 0..n {
            x[i] = x[i] / self.f.bands[0][i];
        }
        // L^T x = z
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + w + 1).min(n) {
                s -= self.f.bands[k - i][i] * x[k];
            }
            x[i] = s;
        }
        x
    }

    /// In-band entries of `A^{-1}` (Hutchinson–de Hoog recurrence on the LDL^T
    /// factor). Only entries with `|i-j| <= width` are produced, which is all
    /// the hat-matrix trace needs.
    pub fn inverse_band(&self) -> SymBanded<S> {
        let n = self.f.n;
        let w = self.f.width();
        let mut z = SymBanded::zeros(n, w);
        for i in (0..n).rev() {
            for j in ((i)..(i + w + 1).min(n)).rev() {
                let mut s = S::zero();
                for k in (i + 1)..(i + w + 1).min(n) {
                    s += self.f.bands[k - i][i] * z.get(k, j);
                }
                let diag = if i == j {
                    S::one() / self.f.bands[0][i]
                } else {
                    S::zero()
                };
                let (lo, hi) = (i, j);
                z.bands[hi - lo][lo] = diag - s;
            }
        }
        z
    }
}

/// `trace(A^{-1} C)` for symmetric banded `A` (via its factor) and symmetric
/// banded `C` of no greater bandwidth.
pub fn trace_inv_mul<S: Scalar>(factor: &LdltFactor<S>, c: &SymBanded<S>) -> S {
    let z = factor.inverse_band();
    let n = c.n;
    let mut t = S::zero();
    for i in 0..n {
        t += z.bands[0][i] * c.bands[0][i];
    }
    let two = S::of(2.0);
    for k in 1..c.bands.len() {
        for i in 0..(n - k) {
            t += two * z.get(i + k, i) * c.bands[k][i];
        }
    }
    t
}

/// Dense symmetric eigendecomposition by cyclic Jacobi rotations. Suitable for
/// the small (p x p) Fisher matrices. Returns (eigenvalues, eigenvectors as
/// columns), eigenvalues ascending.
pub fn sym_eigen<S: Scalar>(a: &[Vec<S>]) -> (Vec<S>, Vec<Vec<S>>) {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut v: Vec<Vec<S>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
        .collect();
    let eps = S::of(1e-14);
    for _sweep in 0..64 {
        let mut off = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() <= eps {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= S::of(1e-300) {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (S::of(2.0) * m[p][q]);
                let t = {
                    let s = if theta >= S::zero() { S::one() } else { -S::one() };
                    s / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (vals, vecs)
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_dense<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Option<Vec<S>> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < S::of(1e-300) {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                let v = m[col][k];
                m[row][k] = m[row][k] - f * v;
            }
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut s = m[row][n];
        for k in (row + 1)..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Least-squares polynomial fit `y ~ poly(t)` of the given degree; returns
/// coefficients lowest-order first. Normal equations are fine at the tiny
/// sizes used here (endpoint derivative correction, test oracles).
pub fn polyfit<S: Scalar>(t: &[S], y: &[S], degree: usize) -> Option<Vec<S>> {
    let p = degree + 1;
    let mut ata = vec![vec![S::zero(); p]; p];
    let mut atb = vec![S::zero(); p];
    for (&ti, &yi) in t.iter().zip(y) {
        let mut pow = vec![S::one(); p];
        for k in 1..p {
            pow[k] = pow[k - 1] * ti;
        }
        for i in 0..p {
            atb[i] += pow[i] * yi;
            for j in 0..p {
                ata[i][j] += pow[i] * pow[j];
            }
        }
    }
    solve_dense(&ata, &atb)
}
