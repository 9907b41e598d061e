//! Dense linear algebra used by the motion-space code.
//!
//! The SVD is a one-sided (Hestenes) Jacobi iteration. It orthogonalises the
//! columns of the input directly, which keeps full accuracy on the small
//! singular values and hands back an exactly orthogonal right factor.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U · diag(sigma) · Vᵀ`.
///
/// `sigma` is sorted in descending order. `v` is square (n × n) and
/// orthogonal; `u` is m × n with zero columns where `sigma` vanishes.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Array2<T>,
    pub sigma: Array1<T>,
    pub v: Array2<T>,
}

impl<T: Scalar> Svd<T> {
    /// Numerical rank using the usual `max(m, n) · eps · sigma_max` cutoff.
    pub fn rank(&self) -> usize {
        let cutoff = self.cutoff();
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }

    fn cutoff(&self) -> T {
        let dim = self.u.nrows().max(self.v.nrows());
        let top = self.sigma.first().copied().unwrap_or_else(T::zero);
        T::of(dim as f64) * T::epsilon() * top
    }
}

/// Computes the SVD of `a` by one-sided Jacobi rotations.
pub fn svd<T: Scalar>(a: ArrayView2<'_, T>) -> Svd<T> {
    let (m, n) = a.dim();
    let mut w = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = w.column(p);
                    let cq = w.column(q);
                    (cp.dot(&cp), cq.dot(&cq), cp.dot(&cq))
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = c * t;
                rotate_columns(&mut w, p, q, c, sn);
                rotate_columns(&mut v, p, q, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..n)
        .map(|j| w.column(j).dot(&w.column(j)).sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut u = Array2::<T>::zeros((m, n));
    let mut sigma = Array1::<T>::zeros(n);
    let mut v_sorted = Array2::<T>::zeros((n, n));
    let top = order.first().map(|&i| norms[i]).unwrap_or_else(T::zero);
    let cutoff = T::of(m.max(n) as f64) * eps * top;
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma[dst] = s;
        v_sorted.column_mut(dst).assign(&v.column(src));
        if s > cutoff && s > T::zero() {
            u.column_mut(dst).assign(&w.column(src).mapv(|x| x / s));
        }
    }
    Svd {
        u,
        sigma,
        v: v_sorted,
    }
}

fn rotate_columns<T: Scalar>(mat: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    for mut row in mat.rows_mut() {
        let xp = row[p];
        let xq = row[q];
        row[p] = c * xp - s * xq;
        row[q] = s * xp + c * xq;
    }
}

/// Moore–Penrose pseudo-inverse via [`svd`].
pub fn pinv<T: Scalar>(a: ArrayView2<'_, T>) -> Array2<T> {
    let (m, n) = a.dim();
    // Jacobi works on columns; feed it the taller orientation.
    if m < n {
        return pinv(a.t()).reversed_axes();
    }
    let dec = svd(a);
    let cutoff = dec.cutoff();
    let mut out = Array2::<T>::zeros((n, m));
    for k in 0..n {
        let s = dec.sigma[k];
        if s <= cutoff || s == T::zero() {
            continue;
        }
        let vk = dec.v.column(k);
        let uk = dec.u.column(k);
        for i in 0..n {
            let scaled = vk[i] / s;
            if scaled == T::zero() {
                continue;
            }
            for j in 0..m {
                out[[i, j]] += scaled * uk[j];
            }
        }
    }
    out
}

/// Extends the orthonormal columns of `basis` to `target` columns with
/// Gram–Schmidt over the canonical vectors e_0, e_1, ….
pub fn complete_orthonormal<T: Scalar>(basis: ArrayView2<'_, T>, target: usize) -> Array2<T> {
    let n = basis.nrows();
    assert!(
        target <= n,
        "cannot complete {target} columns in dimension {n}"
    );
    let mut cols: Vec<Array1<T>> = basis.columns().into_iter().map(|c| c.to_owned()).collect();
    cols.truncate(target);
    let mut candidate = 0;
    while cols.len() < target && candidate < n {
        let mut e = Array1::<T>::zeros(n);
        e[candidate] = T::one();
        candidate += 1;
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&e);
                e.scaled_add(-proj, c);
            }
        }
        let norm = e.dot(&e).sqrt();
        if norm > T::of(1e-6) {
            cols.push(e.mapv(|x| x / norm));
        }
    }
    let mut out = Array2::<T>::zeros((n, target));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

/// Flips each column so its largest-magnitude entry is positive.
pub(crate) fn canonical_signs<T: Scalar>(v: &mut Array2<T>) {
    for mut col in v.axis_iter_mut(Axis(1)) {
        let mut best = T::zero();
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < T::zero() {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// `‖QᵀQ − I‖_∞` (max-abs entry).
pub fn orthonormality_error<T: Scalar>(q: ArrayView2<'_, T>) -> T {
    let gram = q.t().dot(&q);
    let mut worst = T::zero();
    for ((i, j), &g) in gram.indexed_iter() {
        let target = if i == j { T::one() } else { T::zero() };
        worst = worst.max((g - target).abs());
    }
    worst
}

/// Frobenius norm of `a − a·v·vᵀ` for a basis `v` with orthonormal columns.
pub fn reconstruction_error<T: Scalar>(a: ArrayView2<'_, T>, v: ArrayView2<'_, T>) -> T {
    let approx = a.dot(&v).dot(&v.t());
    let diff = &a - &approx;
    diff.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Leading `k` columns of a matrix.
pub(crate) fn leading_columns<T: Scalar>(v: &Array2<T>, k: usize) -> Array2<T> {
    v.slice(s![.., ..k]).to_owned()
}
