//! Dense symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by implicit-shift QL.
//! Two vector strategies share the reduction:
//!
//! * [`SymmetricEigen::decompose`] accumulates every rotation (classic `tql2`)
//!   and returns all eigenpairs.
//! * [`SymmetricEigen::largest_magnitude`] computes the whole spectrum with QL
//!   but only the requested eigenvectors, by inverse iteration on the
//!   tridiagonal matrix and back-transformation. This is the path used on
//!   large Gramians, where accumulating all `n^2` rotations would dominate.

use alloc::vec;
use alloc::vec::Vec;

use super::{dot, norm2, scale, Matrix};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Below this size (or when most of the spectrum is requested) the full
/// rotation-accumulating path is cheaper than inverse iteration.
const FULL_PATH_MAX_N: usize = 256;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// All eigenpairs, eigenvalues ascending.
    pub fn decompose(a: &Matrix) -> Result<Self> {
        check_square(a)?;
        let n = a.rows();
        let tri = Tridiagonal::reduce(a.clone());
        let mut d = tri.diag.clone();
        let mut e = tri.sub_padded();
        let mut z = Matrix::identity(n);
        tql(&mut d, &mut e, Some(&mut z))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
        let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
        let mut vectors = z.select_columns(&order);
        tri.back_transform(&mut vectors);
        Ok(Self { values, vectors })
    }

    /// The `count` eigenpairs of largest `|lambda|`, ordered by `|lambda|`
    /// descending (ties: larger `lambda` first).
    pub fn largest_magnitude(a: &Matrix, count: usize) -> Result<Self> {
        Self::largest_magnitude_owned(a.clone(), count)
    }

    /// [`Self::largest_magnitude`] using `a` as workspace.
    pub fn largest_magnitude_owned(a: Matrix, count: usize) -> Result<Self> {
        check_square(&a)?;
        let n = a.rows();
        if count > n {
            return Err(Error::param("count", "more eigenpairs than the matrix dimension"));
        }
        if n <= FULL_PATH_MAX_N || 4 * count > n {
            let full = Self::decompose(&a)?;
            let order = magnitude_order(&full.values);
            let keep = &order[..count];
            return Ok(Self {
                values: keep.iter().map(|&i| full.values[i]).collect(),
                vectors: full.vectors.select_columns(keep),
            });
        }
        Self::selected(a, count)
    }

    /// Eigenvalues-only QL over the whole spectrum plus inverse iteration for
    /// the `count` largest-magnitude pairs. Consumes `a` as workspace.
    pub fn selected(a: Matrix, count: usize) -> Result<Self> {
        check_square(&a)?;
        let tri = Tridiagonal::reduce(a);
        let mut d = tri.diag.clone();
        let mut e = tri.sub_padded();
        tql(&mut d, &mut e, None)?;
        let order = magnitude_order(&d);
        let values: Vec<f64> = order[..count].iter().map(|&i| d[i]).collect();
        let mut vectors = tri.inverse_iteration(&values);
        tri.back_transform(&mut vectors);
        Ok(Self { values, vectors })
    }
}

/// All eigenvalues, ascending.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    check_square(a)?;
    let tri = Tridiagonal::reduce(a.clone());
    let mut d = tri.diag.clone();
    let mut e = tri.sub_padded();
    tql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn check_square(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (a.rows(), a.rows()),
            found: a.shape(),
        });
    }
    Ok(())
}

fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .abs()
            .total_cmp(&values[i].abs())
            .then(values[j].total_cmp(&values[i]))
            .then(i.cmp(&j))
    });
    order
}

/// Columns per panel in the blocked tridiagonal reduction.
const PANEL: usize = 32;

/// `Qᵀ A Q = T` with `Q = H_0 H_1 ... H_{n-3}`; reflector `k` acts on rows
/// `k+1..n` and its tail is stored below the subdiagonal of column `k` of
/// `work`.
struct Tridiagonal {
    diag: Vec<f64>,
    sub: Vec<f64>,
    taus: Vec<f64>,
    work: Matrix,
}

impl Tridiagonal {
    /// Reads only the lower triangle of `a`. Columns are reduced in panels of
    /// `PANEL`: within a panel the trailing matrix is only read (the panel's
    /// own reflectors are applied through `V`, `W` corrections), and the
    /// rank-2·PANEL update is written back once per panel.
    fn reduce(mut a: Matrix) -> Self {
        let n = a.rows();
        let mut diag = vec![0.0; n];
        let mut sub = vec![0.0; n.saturating_sub(1)];
        let mut taus = vec![0.0; n.saturating_sub(1)];

        let mut k0 = 0;
        while k0 < n {
            let kb = PANEL.min(n - k0);
            let m = n - k0;
            // Row `r` of the panel vectors is global row `k0 + r`.
            let mut vs: Vec<Vec<f64>> = Vec::with_capacity(kb);
            let mut ws: Vec<Vec<f64>> = Vec::with_capacity(kb);
            for i in 0..kb {
                let k = k0 + i;
                let r = k - k0;
                {
                    let col = &mut a.col_mut(k)[k..];
                    for (v, w) in vs.iter().zip(&ws) {
                        rank2_update(col, &v[r..], &w[r..], v[r], w[r]);
                    }
                }
                diag[k] = a[(k, k)];
                if k + 1 == n {
                    break;
                }

                let (tau, beta) = householder(&mut a.col_mut(k)[k + 1..]);
                sub[k] = beta;
                taus[k] = tau;

                let mut v = vec![0.0; m];
                v[r + 1] = 1.0;
                v[r + 2..].copy_from_slice(&a.col(k)[k + 2..]);
                let mut p = vec![0.0; m];
                if tau != 0.0 {
                    symv_lower(&a, k + 1, k0, &v, &mut p);
                    let tail = r + 1;
                    for (vt, wt) in vs.iter().zip(&ws) {
                        let cw = dot(&wt[tail..], &v[tail..]);
                        let cv = dot(&vt[tail..], &v[tail..]);
                        for ((pi, x), y) in p[tail..].iter_mut().zip(&vt[tail..]).zip(&wt[tail..]) {
                            *pi -= x * cw + y * cv;
                        }
                    }
                    scale(&mut p, tau);
                    let k_half = 0.5 * tau * dot(&p, &v);
                    for (pi, vi) in p.iter_mut().zip(&v) {
                        *pi -= k_half * vi;
                    }
                }
                vs.push(v);
                ws.push(p);
            }
            if k0 + kb < n {
                panel_update(&mut a, k0, k0 + kb, &vs, &ws);
            }
            k0 += kb;
        }
        Self {
            diag,
            sub,
            taus,
            work: a,
        }
    }

    /// Subdiagonal padded with a trailing zero, the layout `tql` expects.
    fn sub_padded(&self) -> Vec<f64> {
        let mut e = self.sub.clone();
        e.push(0.0);
        e
    }

    /// `z <- Q z` for every column of `z`.
    fn back_transform(&self, z: &mut Matrix) {
        let n = self.diag.len();
        for k in (0..n.saturating_sub(1)).rev() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            let v_tail = &self.work.col(k)[k + 2..];
            for c in 0..z.cols() {
                let target = &mut z.col_mut(c)[k + 1..];
                let w = target[0] + dot(v_tail, &target[1..]);
                let f = tau * w;
                target[0] -= f;
                for (t, v) in target[1..].iter_mut().zip(v_tail) {
                    *t -= f * v;
                }
            }
        }
    }

    /// Eigenvectors of the tridiagonal matrix for the given (accurate)
    /// eigenvalues. Vectors whose eigenvalues lie within `1e-3 * ||T||` of
    /// each other are kept mutually orthogonal.
    fn inverse_iteration(&self, values: &[f64]) -> Matrix {
        let n = self.diag.len();
        let t_norm = (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 { self.sub[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.sub[i].abs() } else { 0.0 }
            })
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let cluster_tol = 1e-3 * t_norm;

        // Process in ascending eigenvalue order so clusters are contiguous.
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));

        let mut out = Matrix::zeros(n, values.len());
        let mut cluster: Vec<usize> = Vec::new();
        let mut prev: Option<f64> = None;
        for &slot in &order {
            let lambda = values[slot];
            if prev.is_some_and(|p| lambda - p > cluster_tol) {
                cluster.clear();
            }
            prev = Some(lambda);

            let lu = ShiftedLu::new(&self.diag, &self.sub, lambda, t_norm);
            let mut stream = Stream::new(0x5eed_0000 ^ slot as u64);
            let mut x: Vec<f64> = (0..n).map(|_| stream.uniform() - 0.5).collect();
            for _ in 0..4 {
                lu.solve(&mut x);
                for &other in &cluster {
                    let q = out.col(other);
                    let c = dot(q, &x);
                    for (xi, qi) in x.iter_mut().zip(q) {
                        *xi -= c * qi;
                    }
                }
                let nrm = norm2(&x);
                if nrm == 0.0 || !nrm.is_finite() {
                    x = (0..n).map(|_| stream.uniform() - 0.5).collect();
                    continue;
                }
                scale(&mut x, 1.0 / nrm);
            }
            out.col_mut(slot).copy_from_slice(&x);
            cluster.push(slot);
        }
        out
    }
}

/// Overwrites `x` (length >= 1) with the Householder vector tail and returns
/// `(tau, beta)` such that `(I - tau v vᵀ) x = beta e_1` with `v = [1; tail]`.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let sigma = norm2(&x[1..]);
    if sigma == 0.0 {
        return (0.0, alpha);
    }
    let norm = libm::hypot(alpha, sigma);
    let beta = if alpha <= 0.0 { norm } else { -norm };
    let tau = (beta - alpha) / beta;
    scale(&mut x[1..], 1.0 / (alpha - beta));
    x[0] = beta;
    (tau, beta)
}

/// `col -= v_old * w_old[0] + w_old * v_old[0]` (one lower column of a
/// symmetric rank-2 update).
#[inline]
fn rank2_update(col: &mut [f64], v_old: &[f64], w_old: &[f64], vj: f64, wj: f64) {
    for ((c, v), w) in col.iter_mut().zip(v_old).zip(w_old) {
        *c -= v * wj + w * vj;
    }
}

/// `p += A[s.., s..] v` from the lower triangle of `a`, where entry `r` of
/// `v` and `p` is global row `k0 + r`. Columns are taken four at a time so
/// every pass over `p` serves all of them.
fn symv_lower(a: &Matrix, s: usize, k0: usize, v: &[f64], p: &mut [f64]) {
    const W: usize = 4;
    let n = a.rows();
    let mut j = s;
    while j < n {
        let width = W.min(n - j);
        let o = j - k0;
        // Diagonal block, lower part only.
        for c in 0..width {
            let col = a.col(j + c);
            p[o + c] += col[j + c] * v[o + c];
            for r in c + 1..width {
                p[o + r] += col[j + r] * v[o + c];
                p[o + c] += col[j + r] * v[o + r];
            }
        }
        if width < W {
            break;
        }
        let lo = j + W;
        let (c0, c1, c2, c3) = (&a.col(j)[lo..], &a.col(j + 1)[lo..], &a.col(j + 2)[lo..], &a.col(j + 3)[lo..]);
        let (v0, v1, v2, v3) = (v[o], v[o + 1], v[o + 2], v[o + 3]);
        let len = n - lo;
        let (vt, pt) = (&v[lo - k0..lo - k0 + len], &mut p[lo - k0..lo - k0 + len]);
        let mut acc = [[0.0_f64; 2]; W];
        let mut x0 = c0.chunks_exact(2);
        let mut x1 = c1.chunks_exact(2);
        let mut x2 = c2.chunks_exact(2);
        let mut x3 = c3.chunks_exact(2);
        let mut xv = vt.chunks_exact(2);
        let mut xp = pt.chunks_exact_mut(2);
        for (((((a0, a1), a2), a3), w), q) in (&mut x0).zip(&mut x1).zip(&mut x2).zip(&mut x3).zip(&mut xv).zip(&mut xp) {
            for l in 0..2 {
                acc[0][l] += a0[l] * w[l];
                acc[1][l] += a1[l] * w[l];
                acc[2][l] += a2[l] * w[l];
                acc[3][l] += a3[l] * w[l];
                q[l] += (a0[l] * v0 + a1[l] * v1) + (a2[l] * v2 + a3[l] * v3);
            }
        }
        let mut tail = [0.0_f64; W];
        let rest = x0
            .remainder()
            .iter()
            .zip(x1.remainder())
            .zip(x2.remainder())
            .zip(x3.remainder())
            .zip(xv.remainder())
            .zip(xp.into_remainder());
        for (((((a0, a1), a2), a3), w), q) in rest {
            tail[0] += a0 * w;
            tail[1] += a1 * w;
            tail[2] += a2 * w;
            tail[3] += a3 * w;
            *q += (a0 * v0 + a1 * v1) + (a2 * v2 + a3 * v3);
        }
        for c in 0..W {
            p[o + c] += acc[c][0] + acc[c][1] + tail[c];
        }
        j += W;
    }
}

/// Lower triangle of `A[j0.., j0..] -= V Wᵀ + W Vᵀ`, where row `r` of each
/// panel vector is global row `k0 + r`.
///
/// Written as `A -= X Yᵀ` with `X = [V W]` and `Y = [W V]`, both packed into
/// 4-row tiles (`p`-major, 4 rows inner) and applied in 4x4 register tiles.
/// Row blocks keep the packed `X` tiles in cache while columns stream past.
fn panel_update(a: &mut Matrix, k0: usize, j0: usize, vs: &[Vec<f64>], ws: &[Vec<f64>]) {
    const T: usize = 4;
    const ROW_TILES: usize = 64;
    let n = a.rows();
    let kb = vs.len();
    let depth = 2 * kb;
    let tiles = (n - j0).div_ceil(T);
    let mut xp = vec![0.0; tiles * depth * T];
    let mut yp = vec![0.0; tiles * depth * T];
    for t in 0..tiles {
        let (x, y) = (&mut xp[t * depth * T..][..depth * T], &mut yp[t * depth * T..][..depth * T]);
        for r in 0..T.min(n - j0 - t * T) {
            let row = j0 + t * T + r - k0;
            for (p, (v, w)) in vs.iter().zip(ws).enumerate() {
                x[p * T + r] = v[row];
                x[(kb + p) * T + r] = w[row];
                y[p * T + r] = w[row];
                y[(kb + p) * T + r] = v[row];
            }
        }
    }
    let mut rb = 0;
    while rb < tiles {
        let rb_end = (rb + ROW_TILES).min(tiles);
        for s in 0..rb_end {
            let y = &yp[s * depth * T..][..depth * T];
            for t in s.max(rb)..rb_end {
                let acc = tile_product(&xp[t * depth * T..][..depth * T], y);
                for (c, acc_c) in acc.iter().enumerate() {
                    let col = j0 + s * T + c;
                    if col >= n {
                        break;
                    }
                    let row0 = j0 + t * T;
                    let skip = col.saturating_sub(row0);
                    let rows = T.min(n - row0);
                    if skip >= rows {
                        continue;
                    }
                    let dst = &mut a.col_mut(col)[row0 + skip..row0 + rows];
                    for (d, x) in dst.iter_mut().zip(&acc_c[skip..]) {
                        *d -= x;
                    }
                }
            }
        }
        rb = rb_end;
    }
}

/// `acc[c][r] = sum_p x[p][r] y[p][c]` for 4-wide packed tiles.
#[inline(always)]
fn tile_product(x: &[f64], y: &[f64]) -> [[f64; 4]; 4] {
    let mut acc = [[0.0_f64; 4]; 4];
    for (xs, ys) in x.chunks_exact(4).zip(y.chunks_exact(4)) {
        for c in 0..4 {
            for r in 0..4 {
                acc[c][r] += xs[r] * ys[c];
            }
        }
    }
    acc
}

/// Implicit-shift QL on a symmetric tridiagonal matrix (`d` diagonal, `e`
/// subdiagonal padded to length n). Eigenvalues are left in `d`, unsorted.
/// When `z` is given the rotations are accumulated into its columns.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let max_iterations = 30 * n.max(1);
    let mut iterations = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iterations {
                    return Err(Error::NoConvergence {
                        what: "implicit QL",
                        iterations,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        rotate_columns(z, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_columns(z: &mut Matrix, i: usize, c: f64, s: f64) {
    let rows = z.rows();
    let data = z.as_mut_slice();
    let (left, right) = data.split_at_mut((i + 1) * rows);
    let zi = &mut left[i * rows..];
    let zi1 = &mut right[..rows];
    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

/// `P (T - lambda I) = L U` with partial pivoting; `U` has two
/// superdiagonals.
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swap: Vec<bool>,
}

impl ShiftedLu {
    fn new(diag: &[f64], sub: &[f64], lambda: f64, t_norm: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * t_norm;
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swap = vec![false; n];
        // Active row: (a, b) at columns (i, i+1).
        let mut a = diag[0] - lambda;
        let mut b = if n > 1 { sub[0] } else { 0.0 };
        for i in 0..n.saturating_sub(1) {
            let c = sub[i];
            let next_diag = diag[i + 1] - lambda;
            let next_super = if i + 2 < n { sub[i + 1] } else { 0.0 };
            if a.abs() >= c.abs() {
                if a == 0.0 {
                    a = tiny;
                }
                let m = c / a;
                u0[i] = a;
                u1[i] = b;
                u2[i] = 0.0;
                mult[i] = m;
                a = next_diag - m * b;
                b = next_super;
            } else {
                let m = a / c;
                u0[i] = c;
                u1[i] = next_diag;
                u2[i] = next_super;
                mult[i] = m;
                swap[i] = true;
                a = b - m * next_diag;
                b = -m * next_super;
            }
        }
        u0[n - 1] = if a == 0.0 { tiny } else { a };
        Self {
            u0,
            u1,
            u2,
            mult,
            swap,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                let (ri, ri1) = (x[i], x[i + 1]);
                x[i] = ri1;
                x[i + 1] = ri - self.mult[i] * ri1;
            } else {
                x[i + 1] -= self.mult[i] * x[i];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}
