//! Dense complex kernels sized for per-subcarrier antenna arrays.
//!
//! Matrices here are tiny (N_A x N_A, N_A is usually 4), so the cyclic Jacobi
//! methods are both accurate and fast enough. Storage comes from nalgebra;
//! the decompositions themselves are implemented here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// non-increasing. Column `j` of `vectors` belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Thin SVD `a = u * diag(singular_values) * v^H` with non-increasing
/// singular values. `u` is always square and unitary (columns belonging to
/// zero singular values are completed to an orthonormal basis).
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Canonical basis vector `e_index` of length `n`.
pub fn basis_vector(n: usize, index: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[index] = c64(1.0, 0.0);
    v
}

/// `a^H b` for two vectors.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Scales `v` to unit Euclidean norm; `None` when `v` is zero or not finite.
pub fn normalize(v: &CVec) -> Option<CVec> {
    let n = norm_sqr(v).sqrt();
    if n > 0.0 && n.is_finite() {
        Some(v.unscale(n))
    } else {
        None
    }
}

/// Rotates `v` by a global phase so that its largest-magnitude component is
/// real and positive. Near-ties resolve to the lowest index.
pub fn normalize_phase(v: &mut CVec) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap_or(0);
    let phase = v[pivot] / v[pivot].norm();
    let rot = phase.conj();
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[pivot] = c64(v[pivot].re, 0.0);
}

/// Coefficients of the 2x2 unitary `G = [[c, s], [-s*conj(ph), c*conj(ph)]]`
/// that zeroes the off-diagonal of `[[app, apq], [conj(apq), aqq]]` under
/// `G^H A G`. Returns `None` when `apq` is already zero.
fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> Option<(f64, f64, Complex64)> {
    let mag = apq.norm();
    if mag == 0.0 || !mag.is_finite() {
        return None;
    }
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    Some((c, s, apq / mag))
}

/// `m <- m G` on columns `p`, `q`.
fn rotate_cols(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, ph: Complex64) {
    let phc = ph.conj();
    for k in 0..m.nrows() {
        let xp = m[(k, p)];
        let xq = m[(k, q)];
        m[(k, p)] = xp * c - xq * (phc * s);
        m[(k, q)] = xp * s + xq * (phc * c);
    }
}

/// `m <- G^H m` on rows `p`, `q`.
fn rotate_rows(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, ph: Complex64) {
    for k in 0..m.ncols() {
        let xp = m[(p, k)];
        let xq = m[(q, k)];
        m[(p, k)] = xp * c - xq * (ph * s);
        m[(q, k)] = xp * s + xq * (ph * c);
    }
}

/// Cyclic two-sided Jacobi eigen-decomposition of a Hermitian matrix.
///
/// Only the Hermitian part `(a + a^H)/2` is used. Each eigenvector is
/// phase-normalized with [`normalize_phase`].
pub fn hermitian_eigen(a: &CMat) -> HermitianEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eigen needs a square matrix");
    let mut m = (a + a.adjoint()).scale(0.5);
    let mut v = CMat::identity(n, n);
    let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let Some((c, s, ph)) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, m[(p, q)]) else {
                    continue;
                };
                rotate_cols(&mut m, p, q, c, s, ph);
                rotate_rows(&mut m, p, q, c, s, ph);
                rotate_cols(&mut v, p, q, c, s, ph);
                m[(p, q)] = c64(0.0, 0.0);
                m[(q, p)] = c64(0.0, 0.0);
                m[(p, p)] = c64(m[(p, p)].re, 0.0);
                m[(q, q)] = c64(m[(q, q)].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: CVec = v.column(src).into_owned();
        normalize_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    HermitianEigen { values, vectors }
}

/// One-sided (Hestenes) Jacobi SVD for a matrix with `nrows >= ncols`.
pub fn svd(a: &CMat) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.adjoint());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let mut w = a.clone();
    let mut v = CMat::identity(n, n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, c64(0.0, 0.0));
                for k in 0..m {
                    alpha += w[(k, p)].norm_sqr();
                    beta += w[(k, q)].norm_sqr();
                    gamma += w[(k, p)].conj() * w[(k, q)];
                }
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                let Some((c, s, ph)) = jacobi_rotation(alpha, beta, gamma) else {
                    continue;
                };
                rotate_cols(&mut w, p, q, c, s, ph);
                rotate_cols(&mut v, p, q, c, s, ph);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma_max = norms[order[0]];
    let cutoff = sigma_max * (m.max(n) as f64) * f64::EPSILON;

    let mut u = CMat::zeros(m, m);
    let mut v_sorted = CMat::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut filled = 0;
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        let mut vcol: CVec = v.column(src).into_owned();
        normalize_phase(&mut vcol);
        if sigma > cutoff && sigma > 0.0 {
            // Phase of u follows v so that a v = sigma u still holds.
            let ucol = (a * &vcol).unscale(sigma);
            u.set_column(dst, &ucol);
            filled += 1;
            singular_values.push(sigma);
        } else {
            singular_values.push(0.0);
        }
        v_sorted.set_column(dst, &vcol);
    }
    complete_orthonormal(&mut u, filled);
    Svd {
        u,
        singular_values,
        v: v_sorted,
    }
}

/// Fills columns `filled..` of `u` with an orthonormal completion of the
/// first `filled` columns, using canonical vectors and Gram-Schmidt.
fn complete_orthonormal(u: &mut CMat, filled: usize) {
    let m = u.nrows();
    let mut next = filled;
    for e in 0..m {
        if next >= u.ncols() {
            break;
        }
        let mut cand = basis_vector(m, e);
        // Twice for numerical orthogonality.
        for _ in 0..2 {
            for j in 0..next {
                let col: CVec = u.column(j).into_owned();
                let proj = inner(&col, &cand);
                cand -= col * proj;
            }
        }
        if norm_sqr(&cand) > 1e-12 {
            let mut col = normalize(&cand).expect("non-zero candidate");
            normalize_phase(&mut col);
            u.set_column(next, &col);
            next += 1;
        }
    }
}

/// Moore-Penrose pseudoinverse of a Hermitian positive semi-definite matrix.
/// Eigenvalues below `1e-12 * max_eigenvalue` are treated as zero.
pub fn pinv_hermitian(a: &CMat) -> CMat {
    let n = a.nrows();
    let eig = hermitian_eigen(a);
    let top = eig.values.first().copied().unwrap_or(0.0);
    let mut out = CMat::zeros(n, n);
    if top <= 0.0 {
        return out;
    }
    for (j, &lambda) in eig.values.iter().enumerate() {
        if lambda > 1e-12 * top {
            let col: CVec = eig.vectors.column(j).into_owned();
            out += (&col * col.adjoint()).unscale(lambda);
        }
    }
    out
}

/// Hermitian residual `||a - a^H||_F / ||a||_F`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let denom = a.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / denom
}

/// Orthogonal projector onto the column span of an orthonormal `q`.
pub fn projector(q: &CMat) -> CMat {
    q * q.adjoint()
}
