//! Complex Schur factorization `A = Z T Z†` of dense matrices with
//! eigenvalue reordering.
//!
//! The factorization reduces `A` to upper Hessenberg form with Householder
//! reflectors and then runs implicitly shifted single-shift QR sweeps
//! (Wilkinson shifts, with exceptional shifts on stagnation). Reordering
//! moves diagonal entries with unitary Givens swaps of adjacent 1×1 blocks,
//! so the factorization identity is preserved at every step.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SchurDecomposition {
    /// Unitary `Z` whose columns are the Schur vectors.
    pub vectors: DMatrix<C64>,
    /// Upper triangular `T`.
    pub triangular: DMatrix<C64>,
}

impl SchurDecomposition {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.triangular.diagonal().iter().copied().collect()
    }

    /// Reorders the factorization so `|T_kk|` is non-increasing.
    pub fn sort_by_modulus_descending(&mut self) {
        reorder(&mut self.triangular, Some(&mut self.vectors), |z| -z.norm());
    }

    /// `max |A - Z T Z†|`.
    pub fn residual(&self, a: &DMatrix<C64>) -> f64 {
        let rebuilt = &self.vectors * &self.triangular * self.vectors.adjoint();
        max_abs(&(a - rebuilt))
    }

    /// `max |Z†Z - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.vectors.ncols();
        let g = self.vectors.adjoint() * &self.vectors;
        max_abs(&(g - DMatrix::<C64>::identity(n, n)))
    }
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[inline]
fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Complex Givens rotation: real `c`, complex `s` and `r` with
/// `c·f + s·g = r` and `-conj(s)·f + c·g = 0`.
#[inline]
fn givens(f: C64, g: C64) -> (f64, C64, C64) {
    if g == C64::new(0.0, 0.0) {
        return (1.0, C64::new(0.0, 0.0), f);
    }
    let ga = g.norm();
    if f == C64::new(0.0, 0.0) {
        return (0.0, g.conj() / ga, C64::new(ga, 0.0));
    }
    let fa = f.norm();
    let norm = fa.hypot(ga);
    let phase = f / fa;
    (fa / norm, phase * g.conj() / norm, phase * norm)
}

/// Full Schur factorization, unsorted.
pub fn schur(a: &DMatrix<C64>) -> Result<SchurDecomposition> {
    let n = square_dim(a)?;
    let mut h = a.clone();
    let mut z = DMatrix::<C64>::identity(n, n);
    hessenberg(h.as_mut_slice(), n, Some(z.as_mut_slice()));
    hessenberg_qr(h.as_mut_slice(), n, true, Some(z.as_mut_slice()))?;
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(SchurDecomposition {
        vectors: z,
        triangular: h,
    })
}

/// Eigenvalues only; skips the accumulation of Schur vectors and of the
/// off-window part of `T`.
pub fn eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    let n = square_dim(a)?;
    let mut h = a.clone();
    hessenberg(h.as_mut_slice(), n, None);
    hessenberg_qr(h.as_mut_slice(), n, false, None)
}

fn square_dim(a: &DMatrix<C64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// In-place Householder reduction to upper Hessenberg form on a
/// column-major `n×n` buffer, accumulating the reflectors into `z`.
fn hessenberg(h: &mut [C64], n: usize, mut z: Option<&mut [C64]>) {
    let zero = C64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut w = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let col = k * n + k + 1;
        let norm = h[col..col + len]
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let tail = h[col + 1..col + len].iter().map(|x| x.norm_sqr()).sum::<f64>();
        if norm == 0.0 || tail == 0.0 {
            continue;
        }
        let x0 = h[col];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let v = &mut v[..len];
        v.copy_from_slice(&h[col..col + len]);
        v[0] = x0 - alpha;
        let beta = 2.0 / v.iter().map(|x| x.norm_sqr()).sum::<f64>();

        // H <- P H on columns k+1.., with P = I - beta v v†.
        for j in k + 1..n {
            let c = &mut h[j * n + k + 1..j * n + n];
            let dot: C64 = v.iter().zip(c.iter()).map(|(vi, ci)| vi.conj() * ci).sum();
            let f = dot * beta;
            for (ci, vi) in c.iter_mut().zip(v.iter()) {
                *ci -= f * vi;
            }
        }
        h[col] = alpha;
        for x in &mut h[col + 1..col + len] {
            *x = zero;
        }

        // H <- H P and Z <- Z P.
        apply_reflector_right(h, n, k + 1, v, beta, &mut w);
        if let Some(z) = z.as_deref_mut() {
            apply_reflector_right(z, n, k + 1, v, beta, &mut w);
        }
    }
}

fn apply_reflector_right(m: &mut [C64], n: usize, offset: usize, v: &[C64], beta: f64, w: &mut [C64]) {
    w.fill(C64::new(0.0, 0.0));
    for (c, vc) in v.iter().enumerate() {
        let col = &m[(offset + c) * n..(offset + c + 1) * n];
        for (wi, mi) in w.iter_mut().zip(col) {
            *wi += mi * vc;
        }
    }
    for (c, vc) in v.iter().enumerate() {
        let f = vc.conj() * beta;
        let col = &mut m[(offset + c) * n..(offset + c + 1) * n];
        for (mi, wi) in col.iter_mut().zip(w.iter()) {
            *mi -= wi * f;
        }
    }
}

/// Single-shift QR iteration on an upper Hessenberg matrix. With `full`,
/// rotations are applied to the whole matrix so that it ends upper
/// triangular; otherwise only the active window is updated.
fn hessenberg_qr(h: &mut [C64], n: usize, full: bool, mut z: Option<&mut [C64]>) -> Result<Vec<C64>> {
    let zero = C64::new(0.0, 0.0);
    let mut eig = vec![zero; n];
    if n == 0 {
        return Ok(eig);
    }
    let at = |i: usize, j: usize| i + j * n;
    let ulp = f64::EPSILON;
    let safmin = f64::MIN_POSITIVE;
    let smlnum = safmin * (n as f64 / ulp);
    let itmax = 30 * n.max(10);

    let mut i = n - 1;
    loop {
        let mut l = 0usize;
        let mut converged = false;
        for its in 0..=itmax {
            // Look for a negligible subdiagonal entry.
            let mut k = i;
            while k > l {
                let sub = h[at(k, k - 1)];
                if cabs1(sub) <= smlnum {
                    break;
                }
                let mut tst = cabs1(h[at(k - 1, k - 1)]) + cabs1(h[at(k, k)]);
                if tst == 0.0 {
                    if k >= 2 {
                        tst += h[at(k - 1, k - 2)].re.abs();
                    }
                    if k + 1 < n {
                        tst += h[at(k + 1, k)].re.abs();
                    }
                }
                if sub.re.abs() <= ulp * tst {
                    let ab = cabs1(sub).max(cabs1(h[at(k - 1, k)]));
                    let ba = cabs1(sub).min(cabs1(h[at(k - 1, k)]));
                    let diff = h[at(k - 1, k - 1)] - h[at(k, k)];
                    let aa = cabs1(h[at(k, k)]).max(cabs1(diff));
                    let bb = cabs1(h[at(k, k)]).min(cabs1(diff));
                    let s = aa + ab;
                    if ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s))) {
                        break;
                    }
                }
                k -= 1;
            }
            l = k;
            if l > 0 {
                h[at(l, l - 1)] = zero;
            }
            if l >= i {
                converged = true;
                break;
            }

            let (i1, i2) = if full { (0, n - 1) } else { (l, i) };

            let shift = if its == 10 {
                C64::new(0.75 * cabs1(h[at(l + 1, l)]), 0.0) + h[at(l, l)]
            } else if its == 20 {
                C64::new(0.75 * cabs1(h[at(i, i - 1)]), 0.0) + h[at(i, i)]
            } else {
                wilkinson_shift(
                    h[at(i - 1, i - 1)],
                    h[at(i - 1, i)],
                    h[at(i, i - 1)],
                    h[at(i, i)],
                )
            };

            // Chase the bulge from the top of the active window.
            let mut x = h[at(l, l)] - shift;
            let mut y = h[at(l + 1, l)];
            for k in l..i {
                if k > l {
                    x = h[at(k, k - 1)];
                    y = h[at(k + 1, k - 1)];
                }
                let (c, s, r) = givens(x, y);
                if k > l {
                    h[at(k, k - 1)] = r;
                    h[at(k + 1, k - 1)] = zero;
                }
                for j in k..=i2 {
                    let a = h[at(k, j)];
                    let b = h[at(k + 1, j)];
                    h[at(k, j)] = a * c + s * b;
                    h[at(k + 1, j)] = b * c - s.conj() * a;
                }
                let sc = s.conj();
                let rows = (k + 2).min(i);
                for r in i1..=rows {
                    let a = h[at(r, k)];
                    let b = h[at(r, k + 1)];
                    h[at(r, k)] = a * c + sc * b;
                    h[at(r, k + 1)] = b * c - s * a;
                }
                if let Some(z) = z.as_deref_mut() {
                    let (left, right) = z.split_at_mut((k + 1) * n);
                    let zk = &mut left[k * n..];
                    let zk1 = &mut right[..n];
                    for (a, b) in zk.iter_mut().zip(zk1.iter_mut()) {
                        let (va, vb) = (*a, *b);
                        *a = va * c + sc * vb;
                        *b = vb * c - s * va;
                    }
                }
            }
        }
        if !converged {
            let max_abs = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
            return Err(Error::SchurNoConvergence {
                row: i,
                iterations: itmax,
                dim: n,
                max_abs,
                non_finite: h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()),
            });
        }
        eig[i] = h[at(i, i)];
        if l == 0 {
            break;
        }
        i = l - 1;
        if i == 0 {
            eig[0] = h[at(0, 0)];
            break;
        }
    }
    Ok(eig)
}

/// Eigenvalue of the trailing 2×2 block closest to its bottom-right entry.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let u = b.sqrt() * c.sqrt();
    let s = cabs1(u);
    if s == 0.0 {
        return d;
    }
    let x = (a - d) * 0.5;
    let sx = cabs1(x);
    let s = s.max(sx);
    let mut y = ((x / s) * (x / s) + (u / s) * (u / s)).sqrt() * s;
    if sx > 0.0 {
        let xs = x / sx;
        if xs.re * y.re + xs.im * y.im < 0.0 {
            y = -y;
        }
    }
    d - u * (u / (x + y))
}

/// Swaps the adjacent diagonal entries `k` and `k+1` of an upper triangular
/// `t`, updating `z` so that `Z T Z†` is unchanged.
pub fn swap_adjacent(t: &mut DMatrix<C64>, z: Option<&mut DMatrix<C64>>, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s, _) = givens(t[(k, k + 1)], t22 - t11);
    for j in k + 2..n {
        let a = t[(k, j)];
        let b = t[(k + 1, j)];
        t[(k, j)] = a * c + s * b;
        t[(k + 1, j)] = b * c - s.conj() * a;
    }
    let sc = s.conj();
    for r in 0..k {
        let a = t[(r, k)];
        let b = t[(r, k + 1)];
        t[(r, k)] = a * c + sc * b;
        t[(r, k + 1)] = b * c - s * a;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    if let Some(z) = z {
        for r in 0..n {
            let a = z[(r, k)];
            let b = z[(r, k + 1)];
            z[(r, k)] = a * c + sc * b;
            z[(r, k + 1)] = b * c - s * a;
        }
    }
}

/// Stable selection reordering: the diagonal ends up sorted by increasing
/// `key`; entries with equal keys keep their relative order.
pub fn reorder(t: &mut DMatrix<C64>, mut z: Option<&mut DMatrix<C64>>, key: impl Fn(C64) -> f64) {
    let n = t.nrows();
    for pos in 0..n {
        let mut best = pos;
        let mut best_key = key(t[(pos, pos)]);
        for j in pos + 1..n {
            let kj = key(t[(j, j)]);
            if kj < best_key {
                best = j;
                best_key = kj;
            }
        }
        for k in (pos..best).rev() {
            swap_adjacent(t, z.as_deref_mut(), k);
        }
    }
}

/// Splits row indices into rows with a nonzero entry and rows that are
/// exactly zero.
fn split_zero_rows(a: &DMatrix<C64>) -> (Vec<usize>, Vec<usize>) {
    (0..a.nrows()).partition(|&i| a.row(i).iter().any(|z| *z != C64::new(0.0, 0.0)))
}

/// Sorted Schur factorization that deflates exactly-zero rows.
///
/// With the coordinates ordered as (nonzero rows `S`, zero rows `M`),
/// `A = [[A_SS, A_SM], [0, 0]]`. Factoring `A_SS = Q T_S Q†` gives the exact
/// Schur form `Z = Q ⊕ I`, `T = [[T_S, Q†A_SM], [0, 0]]`. The zero-eigenvalue
/// block is degenerate, so its Schur vectors are not fixed by `A`; here they
/// are the unit vectors `e_k`, `k ∈ M`, in increasing `k`.
/// Diagonal entries are ordered by non-increasing modulus.
pub fn deflated_sorted_schur(a: &DMatrix<C64>) -> Result<SchurDecomposition> {
    let n = square_dim(a)?;
    let (kept, zero) = split_zero_rows(a);
    let ns = kept.len();
    let a_ss = DMatrix::from_fn(ns, ns, |i, j| a[(kept[i], kept[j])]);
    let a_sm = DMatrix::from_fn(ns, zero.len(), |i, j| a[(kept[i], zero[j])]);
    let mut inner = schur(&a_ss)?;
    inner.sort_by_modulus_descending();
    let coupling = inner.vectors.adjoint() * a_sm;

    let mut vectors = DMatrix::<C64>::zeros(n, n);
    let mut triangular = DMatrix::<C64>::zeros(n, n);
    for (i, &row) in kept.iter().enumerate() {
        for j in 0..ns {
            vectors[(row, j)] = inner.vectors[(i, j)];
        }
    }
    for (l, &row) in zero.iter().enumerate() {
        vectors[(row, ns + l)] = C64::new(1.0, 0.0);
    }
    triangular.view_mut((0, 0), (ns, ns)).copy_from(&inner.triangular);
    triangular.view_mut((0, ns), (ns, zero.len())).copy_from(&coupling);
    Ok(SchurDecomposition { vectors, triangular })
}

/// Eigenvalues with exactly-zero rows deflated: those of `A_SS` followed by
/// one exact zero per zero row.
pub fn deflated_eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    square_dim(a)?;
    let (kept, zero) = split_zero_rows(a);
    let a_ss = DMatrix::from_fn(kept.len(), kept.len(), |i, j| a[(kept[i], kept[j])]);
    let mut z = eigenvalues(&a_ss)?;
    z.extend(std::iter::repeat_n(C64::new(0.0, 0.0), zero.len()));
    Ok(z)
}
