//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicitly shifted QL iteration.
//!
//! Two reductions are provided. The values-only path works on the lower
//! triangle with row-contiguous matrix-vector products and rank-2 updates,
//! which is what the Monte Carlo loops hit. The vector path follows the
//! classic Householder accumulation (EISPACK `tred2`/`tql2` lineage).

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// QL sweeps allowed per eigenvalue before giving up.
const MAX_SWEEPS_PER_VALUE: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoConvergence;

/// Eigenvalues (ascending) and, if requested, eigenvectors stored
/// column-major: vector `k` is `vectors[k*n..(k+1)*n]`.
pub struct EigenOutput {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
}

/// Decompose the row-major symmetric matrix `a` of order `n`. Only the lower
/// triangle is read.
pub fn symmetric_eigen(a: &[f64], n: usize, want_vectors: bool) -> Result<EigenOutput, NoConvergence> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(EigenOutput { values: Vec::new(), vectors: want_vectors.then(Vec::new) });
    }
    if want_vectors {
        let mut v = a.to_vec();
        let (mut d, mut e) = (vec![0.0; n], vec![0.0; n]);
        tred2(&mut v, n, &mut d, &mut e);
        // Rotations act on columns of V; work on V^T so they touch rows.
        let mut vt = transpose(&v, n);
        tql(&mut d, &mut e, Some(&mut vt))?;
        let (values, vectors) = sort_pairs(d, Some(vt), n);
        Ok(EigenOutput { values, vectors })
    } else {
        let mut work = a.to_vec();
        let (mut d, mut e) = (vec![0.0; n], vec![0.0; n]);
        tridiagonalize_values(&mut work, n, &mut d, &mut e);
        tql(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(EigenOutput { values: d, vectors: None })
    }
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

fn sort_pairs(d: Vec<f64>, vt: Option<Vec<f64>>, n: usize) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = vt.map(|vt| {
        let mut out = Vec::with_capacity(n * n);
        for &i in &order {
            out.extend_from_slice(&vt[i * n..(i + 1) * n]);
        }
        out
    });
    (values, vectors)
}

/// Householder reduction to tridiagonal form, values only. On exit `d` is the
/// diagonal and `e[i]` couples `i-1` and `i` (`e[0] = 0`). `a` is destroyed.
fn tridiagonalize_values(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for i in (1..n).rev() {
        let row = &a[i * n..i * n + i];
        let scale: f64 = row.iter().map(|x| math::abs(*x)).sum();
        if i == 1 || scale == 0.0 {
            e[i] = row[i - 1];
            d[i] = a[i * n + i];
            continue;
        }
        let mut sigma = 0.0;
        for k in 0..i {
            v[k] = row[k] / scale;
            sigma += v[k] * v[k];
        }
        let f = v[i - 1];
        let g = if f >= 0.0 { -math::sqrt(sigma) } else { math::sqrt(sigma) };
        e[i] = scale * g;
        // H = I - v v^T / h with v = x/scale - g e_{i-1}
        let h = sigma - f * g;
        v[i - 1] = f - g;

        // p = A' v / h over the leading i x i block, lower triangle only.
        p[..i].fill(0.0);
        for j in 0..i {
            let rj = &a[j * n..j * n + j + 1];
            let vj = v[j];
            let mut acc = rj[j] * vj;
            for k in 0..j {
                acc += rj[k] * v[k];
                p[k] += rj[k] * vj;
            }
            p[j] += acc;
        }
        let mut kdot = 0.0;
        for k in 0..i {
            p[k] /= h;
            kdot += v[k] * p[k];
        }
        let kk = kdot / (2.0 * h);
        for k in 0..i {
            p[k] -= kk * v[k];
        }
        // A' <- A' - v q^T - q v^T
        for j in 0..i {
            let (vj, qj) = (v[j], p[j]);
            let rj = &mut a[j * n..j * n + j + 1];
            for k in 0..=j {
                rj[k] -= vj * p[k] + qj * v[k];
            }
        }
        d[i] = a[i * n + i];
    }
    d[0] = a[0];
    e[0] = 0.0;
}

/// Householder reduction with accumulated transformation. `v` holds the
/// matrix on entry and the orthogonal factor (row-major) on exit.
fn tred2(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += math::abs(d[k]);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = math::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)` with `e[i]` coupling `i-1, i`.
/// If `vt` is given (rows = current basis vectors) the rotations are applied
/// to it. Eigenvalues are left unsorted in `d`.
fn tql(d: &mut [f64], e: &mut [f64], mut vt: Option<&mut [f64]>) -> Result<(), NoConvergence> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(math::abs(d[l]) + math::abs(e[l]));
        let mut m = l;
        while m < n - 1 && math::abs(e[m]) > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS_PER_VALUE {
                    return Err(NoConvergence);
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = math::hypot(p, 1.0);
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
                    let g = c * e[i];
                    h = c * p;
                    r = math::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(vt) = vt.as_deref_mut() {
                        let (lo, hi) = vt.split_at_mut((i + 1) * n);
                        let ri = &mut lo[i * n..];
                        let ri1 = &mut hi[..n];
                        for k in 0..n {
                            let hk = ri1[k];
                            ri1[k] = s * ri[k] + c * hk;
                            ri[k] = c * ri[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if math::abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
