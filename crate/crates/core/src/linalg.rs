//! Small dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// `‖R† R − I‖_F`.
pub fn unitarity_residual(r: &CMatrix) -> f64 {
    let n = r.ncols();
    (r.adjoint() * r - CMatrix::identity(n, n)).norm()
}

/// Thin SVD with singular values sorted in descending order.
///
/// Returns `(V, D, W)` with `V† M W = diag(D)`. The factors from `nalgebra`
/// are polished with one-sided Jacobi sweeps: its bidiagonal QR leaves
/// off-diagonal residuals near `1e−10 ‖M‖` on nearly rank-one inputs, which is
/// too large next to the small singular values that carry the information.
pub fn sorted_svd(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(
            "SVD input contains non-finite entries".into(),
        ));
    }
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let svd = m
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "SVD did not converge for a {}x{} matrix with Frobenius norm {:.3e}",
                m.nrows(),
                m.ncols(),
                m.norm()
            ))
        })?;
    let mut w = svd.v_t.expect("requested V^T").adjoint();
    let mut g = m * &w;
    jacobi_orthogonalize(&mut g, &mut w)?;

    let n = m.ncols();
    let norms: Vec<f64> = (0..n).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let d: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let w = w.select_columns(&order);
    let g = g.select_columns(&order);
    let floor = f64::EPSILON * d.first().copied().unwrap_or(0.0) * n as f64;
    let mut v = CMatrix::zeros(m.nrows(), n);
    let mut filled = 0;
    for j in 0..n {
        if d[j] > floor {
            v.set_column(j, &(g.column(j) / Complex64::new(d[j], 0.0)));
            filled += 1;
        }
    }
    complete_orthonormal(&mut v, filled);
    Ok((v, d, w))
}

/// Rotates the columns of `g` (and `w` alongside) until they are mutually orthogonal.
fn jacobi_orthogonalize(g: &mut CMatrix, w: &mut CMatrix) -> Result<()> {
    let n = g.ncols();
    // Columns at rounding level carry no direction worth aligning.
    let floor = (f64::EPSILON * g.norm()).powi(2);
    for _ in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dotc(&g.column(j));
                let mag = gamma.norm();
                if mag <= f64::EPSILON * (alpha * beta).sqrt() || mag <= floor {
                    continue;
                }
                rotated = true;
                let phase = gamma / mag;
                let zeta = (beta - alpha) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut *g, &mut *w] {
                    for r in 0..mat.nrows() {
                        let x = mat[(r, i)];
                        let y = mat[(r, j)] * phase.conj();
                        mat[(r, i)] = x * c - y * s;
                        mat[(r, j)] = x * s + y * c;
                    }
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::Numerical(
        "Jacobi SVD refinement did not converge".into(),
    ))
}

/// Fills columns `filled..` of `v` with an orthonormal complement of the first ones.
fn complete_orthonormal(v: &mut CMatrix, filled: usize) {
    let (m, n) = v.shape();
    let mut next = filled;
    for e in 0..m {
        if next == n {
            break;
        }
        let mut x = nalgebra::DVector::<Complex64>::zeros(m);
        x[e] = ONE;
        for _ in 0..2 {
            for k in 0..next {
                let proj = v.column(k).dotc(&x);
                x -= v.column(k) * proj;
            }
        }
        let norm = x.norm();
        if norm > 0.5 {
            v.set_column(next, &(x / Complex64::new(norm, 0.0)));
            next += 1;
        }
    }
}

/// Result of a Householder triangularization `Q A = T` (`T` upper triangular).
#[derive(Debug, Clone)]
pub struct Triangularization {
    /// Full square unitary with `q * a.select_columns(pivots)` upper triangular.
    pub q: CMatrix,
    /// Column order used; identity when no pivoting took place.
    pub pivots: Vec<usize>,
}

/// Householder triangularization of a tall matrix, returning the full unitary.
///
/// With `pivot` set, each step picks the remaining column of largest residual
/// norm. The diagonal of the triangular factor is made real and nonnegative by
/// rephasing rows of `q`.
pub fn householder_triangularize(a: &CMatrix, pivot: bool) -> Triangularization {
    let (m, n) = a.shape();
    let mut work = a.clone();
    let mut q = CMatrix::identity(m, m);
    let mut pivots: Vec<usize> = (0..n).collect();

    for k in 0..n.min(m) {
        if pivot {
            let best = (k..n)
                .max_by(|&i, &j| {
                    let ni = work.view((k, i), (m - k, 1)).norm_squared();
                    let nj = work.view((k, j), (m - k, 1)).norm_squared();
                    ni.total_cmp(&nj)
                })
                .unwrap_or(k);
            if best != k {
                work.swap_columns(k, best);
                pivots.swap(k, best);
            }
        }
        if k + 1 == m {
            break;
        }

        let x: Vec<Complex64> = (k..m).map(|i| work[(i, k)]).collect();
        let norm_x = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if norm_x == 0.0 || tail == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            ONE
        };
        let alpha = -phase * norm_x;
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();

        // H = I - 2 v v† / (v† v), applied to rows k.. of both matrices.
        reflect_rows(&mut work, &v, vnorm2, k);
        reflect_rows(&mut q, &v, vnorm2, k);
    }

    for s in 0..n.min(m) {
        let d = work[(s, s)];
        if d.norm() > 0.0 {
            let fix = d.conj() / d.norm();
            for j in 0..m {
                q[(s, j)] *= fix;
            }
            for j in 0..n {
                work[(s, j)] *= fix;
            }
        }
    }

    Triangularization { q, pivots }
}

fn reflect_rows(target: &mut CMatrix, v: &[Complex64], vnorm2: f64, k: usize) {
    let cols = target.ncols();
    for j in 0..cols {
        let mut dot = ZERO;
        for (i, vi) in v.iter().enumerate() {
            dot += vi.conj() * target[(k + i, j)];
        }
        let scale = dot * (2.0 / vnorm2);
        for (i, vi) in v.iter().enumerate() {
            target[(k + i, j)] -= vi * scale;
        }
    }
}
