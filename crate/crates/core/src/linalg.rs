//! Small complex linear-algebra toolkit shared by the design algorithms.
//!
//! Everything is dense `DMatrix<Complex64>`; the matrices involved are at most
//! a few hundred rows, so no structure is exploited beyond Hermitian symmetry.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative tolerance used by all rank-revealing solves.
pub const RANK_TOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

impl SortedSvd {
    pub fn new(m: &CMat) -> Self {
        let (rows, cols) = m.shape();
        let k = rows.min(cols);
        if k == 0 {
            return SortedSvd {
                u: CMat::zeros(rows, 0),
                singular_values: Vec::new(),
                v: CMat::zeros(cols, 0),
            };
        }
        let svd = m.clone().svd(true, true);
        let u_raw = svd.u.expect("u requested");
        let v_raw = svd.v_t.expect("v_t requested").adjoint();
        let sv = svd.singular_values;

        let mut order: Vec<usize> = (0..sv.len()).collect();
        // Stable sort keeps the factorization's own order among exact ties.
        order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));

        let mut u = CMat::zeros(rows, order.len());
        let mut v = CMat::zeros(cols, order.len());
        let mut values = Vec::with_capacity(order.len());
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &u_raw.column(src));
            v.set_column(dst, &v_raw.column(src));
            values.push(sv[src]);
        }
        SortedSvd {
            u,
            singular_values: values,
            v,
        }
    }

    /// Number of singular values above `tol * sigma_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > tol * smax)
            .count()
    }
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `tol * sigma_max`.
pub fn lstsq(a: &CMat, b: &CMat, tol: f64) -> CMat {
    let svd = SortedSvd::new(a);
    let r = svd.rank(tol);
    let mut x = CMat::zeros(a.ncols(), b.ncols());
    for i in 0..r {
        let ui = svd.u.column(i);
        let vi = svd.v.column(i);
        let coeff = ui.adjoint() * b / C64::new(svd.singular_values[i], 0.0);
        x += vi * coeff;
    }
    x
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix through its
/// eigendecomposition, zeroing eigenvalues below `tol * lambda_max`.
pub fn hermitian_pinv(g: &CMat, tol: f64) -> CMat {
    let n = g.nrows();
    let eig = SymmetricEigen::new(hermitian_part(g));
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = CMat::zeros(n, n);
    if lmax <= 0.0 {
        return out;
    }
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > tol * lmax {
            let q = eig.eigenvectors.column(i);
            out += q * q.adjoint() * C64::new(1.0 / l, 0.0);
        }
    }
    out
}

/// `(m + m^*) / 2`, removing round-off asymmetry before Hermitian routines.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `log2 det(m)` for a Hermitian positive-definite matrix.
pub fn log2_det_hpd(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let m = hermitian_part(m);
    match Cholesky::new(m.clone()) {
        Some(chol) => {
            let l = chol.l();
            (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2
        }
        None => {
            let eig = SymmetricEigen::new(m);
            eig.eigenvalues
                .iter()
                .map(|&l| l.max(f64::MIN_POSITIVE).log2())
                .sum()
        }
    }
}

/// Unitary polar factor `U V^*` of `m`, the solution of the orthogonal
/// Procrustes problem `max Re tr(X^* m)` over matrices with orthonormal
/// columns (or rows, when `m` is wide).
pub fn polar_factor(m: &CMat) -> CMat {
    let svd = SortedSvd::new(m);
    &svd.u * svd.v.adjoint()
}

/// Scales each column so that its largest-modulus entry is real and positive.
/// The first entry wins among equal moduli.
pub fn fix_column_phases(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs > 0.0 {
            let z = col[best];
            let rot = z.conj() / z.norm();
            col *= rot;
        }
    }
}

pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `tr(d^* c d)` for Hermitian `c`: the squared `c`-weighted Frobenius norm.
pub fn weighted_frob_sq(d: &CMat, c: &CMat) -> f64 {
    (d.adjoint() * c * d).trace().re.max(0.0)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Gather the listed columns of `m` (repeats allowed) into a new matrix.
pub fn select_columns(m: &CMat, cols: &[usize]) -> CMat {
    let mut out = CMat::zeros(m.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

/// Orthonormal basis for the column space of `m` (rank-revealing).
pub fn orthonormal_basis(m: &CMat, tol: f64) -> CMat {
    let svd = SortedSvd::new(m);
    let r = svd.rank(tol);
    svd.u.columns(0, r).into_owned()
}

/// Sum of `values` with a fixed pairwise reduction tree, so the result does
/// not depend on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
