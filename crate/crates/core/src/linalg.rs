//! Dense symmetric eigensolvers and Gram helpers.
//!
//! Everything here is dependency-free and deterministic: the same input
//! produces the same bits on every run, which the training and spectral
//! tests rely on. Two solvers are provided:
//!
//! - [`sym_eig_jacobi`]: cyclic Jacobi with an optional warm-start basis.
//!   Used for the small (≤ 64×64) Kronecker factors refreshed every couple
//!   of optimizer steps, where the previous eigenbasis makes the rotated
//!   matrix nearly diagonal and a sweep or two suffices.
//! - [`sym_eig`]: Householder tridiagonalization followed by implicit-shift
//!   QL, for the kernel Gram matrices (up to ~1200×1200).
//!
//! Both return eigenvalues sorted descending with eigenvectors as columns,
//! sign-fixed so the largest-magnitude entry of each vector is positive.

use crate::{Error, Result};
use ndarray::{s, Array1, Array2, ArrayView2};
use rayon::prelude::*;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations,
/// eigenvalues sorted descending.
///
/// `warm` is a previously computed orthogonal basis; the matrix is rotated
/// into that basis first so Jacobi starts from a nearly diagonal matrix.
/// Fails with [`Error::EigFailure`] if the off-diagonal mass has not
/// converged after `max_sweeps`.
pub fn sym_eig_jacobi(
    a: &ArrayView2<f64>,
    warm: Option<&Array2<f64>>,
    max_sweeps: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let (vals, vecs) = jacobi_core(a, warm, max_sweeps)?;
    Ok(sort_and_fix(vals, vecs))
}

/// Warm-started Jacobi refresh that preserves the column order of the
/// previous basis instead of sorting by eigenvalue.
///
/// Rotated-space optimizer state is stored per coordinate slot; re-sorting
/// near-degenerate eigenvalues would permute slots between refreshes and
/// scramble that state, so a continuation refresh must keep each column
/// where its predecessor was. Signs are still fixed
/// (largest-magnitude entry positive); sign flips are harmless because the
/// rotated second moment is even in the basis sign.
pub fn sym_eig_jacobi_continuation(
    a: &ArrayView2<f64>,
    warm: &Array2<f64>,
    max_sweeps: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let (vals, mut vecs) = jacobi_core(a, Some(warm), max_sweeps)?;
    let n = vals.len();
    for col in 0..n {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (k, &x) in vecs.column(col).iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = k;
            }
        }
        if vecs[[best, col]] < 0.0 {
            for k in 0..n {
                vecs[[k, col]] = -vecs[[k, col]];
            }
        }
    }
    Ok((vals, vecs))
}

fn jacobi_core(
    a: &ArrayView2<f64>,
    warm: Option<&Array2<f64>>,
    max_sweeps: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }

    let (mut m, mut v) = match warm {
        Some(q) => {
            debug_assert_eq!(q.nrows(), n);
            (q.t().dot(a).dot(q), q.clone())
        }
        None => (a.to_owned(), Array2::eye(n)),
    };
    // Symmetrize once: the rotation below assumes exact symmetry.
    for p in 0..n {
        for q in (p + 1)..n {
            let x = 0.5 * (m[[p, q]] + m[[q, p]]);
            m[[p, q]] = x;
            m[[q, p]] = x;
        }
    }

    let norm: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-14 * norm;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += m[[p, q]] * m[[p, q]];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-2 * tol / (n as f64) {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = 0.5 * (aqq - app) / apq;
                // tan of the rotation angle, smaller root for stability.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;
                // Update rows/columns p and q.
                for k in 0..n {
                    let akp = m[[k, p]];
                    let akq = m[[k, q]];
                    m[[k, p]] = c * akp - s_ * akq;
                    m[[k, q]] = s_ * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[[p, k]];
                    let aqk = m[[q, k]];
                    m[[p, k]] = c * apk - s_ * aqk;
                    m[[q, k]] = s_ * apk + c * aqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s_ * vkq;
                    v[[k, q]] = s_ * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigFailure);
    }
    let vals = Array1::from_iter((0..n).map(|i| m[[i, i]]));
    Ok((vals, v))
}

/// Eigendecomposition of a symmetric matrix via Householder tridiagonalization
/// and implicit-shift QL. Set `vectors = false` for eigenvalues only (the
/// returned matrix is then empty).
pub fn sym_eig(a: &ArrayView2<f64>, vectors: bool) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut z = a.to_owned();
    for p in 0..n {
        for q in (p + 1)..n {
            let x = 0.5 * (z[[p, q]] + z[[q, p]]);
            z[[p, q]] = x;
            z[[q, p]] = x;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e, vectors);
    tqli(&mut d, &mut e, if vectors { Some(&mut z) } else { None })?;
    let vals = Array1::from(d);
    if vectors {
        Ok(sort_and_fix(vals, z))
    } else {
        let mut v: Vec<f64> = vals.to_vec();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok((Array1::from(v), Array2::zeros((0, 0))))
    }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max_sym(a: &ArrayView2<f64>) -> Result<f64> {
    let (vals, _) = sym_eig(a, false)?;
    Ok(vals[0])
}

/// `A Aᵀ` computed over fixed column chunks in parallel.
///
/// The chunk partition is constant (2048 columns) so the floating-point
/// reduction order, and therefore the result, does not depend on thread
/// count.
pub fn gram_aat(a: &ArrayView2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let p = a.ncols();
    const CHUNK: usize = 2048;
    if p <= CHUNK {
        let mut g = a.dot(&a.t());
        symmetrize(&mut g);
        return g;
    }
    let bounds: Vec<(usize, usize)> = (0..p)
        .step_by(CHUNK)
        .map(|lo| (lo, (lo + CHUNK).min(p)))
        .collect();
    let partials: Vec<Array2<f64>> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let block = a.slice(s![.., lo..hi]);
            block.dot(&block.t())
        })
        .collect();
    let mut g = Array2::zeros((n, n));
    for part in partials {
        g += &part;
    }
    symmetrize(&mut g);
    g
}

fn symmetrize(g: &mut Array2<f64>) {
    let n = g.nrows();
    for p in 0..n {
        for q in (p + 1)..n {
            let x = 0.5 * (g[[p, q]] + g[[q, p]]);
            g[[p, q]] = x;
            g[[q, p]] = x;
        }
    }
}

/// Sort eigenpairs descending by eigenvalue and fix each eigenvector's sign
/// so its largest-magnitude entry is positive.
fn sort_and_fix(vals: Array1<f64>, vecs: Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = vals.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap().then(i.cmp(&j)));
    let mut out_vals = Array1::zeros(n);
    let mut out_vecs = Array2::zeros((n, n));
    for (col, &i) in idx.iter().enumerate() {
        out_vals[col] = vals[i];
        let src = vecs.column(i);
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (k, &x) in src.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = k;
            }
        }
        let sign = if src[best] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            out_vecs[[k, col]] = sign * src[k];
        }
    }
    (out_vals, out_vecs)
}

/// Householder reduction to tridiagonal form (d = diagonal, e = subdiagonal
/// with e[0] = 0). When `vectors` is set, `a` is overwritten with the
/// accumulated orthogonal transform.
fn tred2(a: &mut Array2<f64>, d: &mut [f64], e: &mut [f64], vectors: bool) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = a[[i, l]];
            } else {
                for k in 0..=l {
                    a[[i, k]] /= scale;
                    h += a[[i, k]] * a[[i, k]];
                }
                let f = a[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[[i, l]] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    if vectors {
                        a[[j, i]] = a[[i, j]] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[[j, k]] * a[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g += a[[k, j]] * a[[i, k]];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[[i, j]];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[[i, k]];
                        a[[j, k]] -= delta;
                    }
                }
            }
        } else {
            e[i] = a[[i, l]];
        }
        d[i] = h;
    }
    if vectors {
        d[0] = 0.0;
    }
    e[0] = 0.0;
    for i in 0..n {
        if vectors {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += a[[i, k]] * a[[k, j]];
                    }
                    for k in 0..i {
                        let delta = g * a[[k, i]];
                        a[[k, j]] -= delta;
                    }
                }
            }
            d[i] = a[[i, i]];
            a[[i, i]] = 1.0;
            for j in 0..i {
                a[[j, i]] = 0.0;
                a[[i, j]] = 0.0;
            }
        } else {
            d[i] = a[[i, i]];
        }
    }
}

/// Implicit-shift QL iteration on a tridiagonal matrix, optionally
/// accumulating rotations into `z`.
fn tqli(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Array2<f64>>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::EigFailure);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m as isize - 1;
            while i >= l as isize {
                let iu = i as usize;
                let mut f = s * e[iu];
                let b = c * e[iu];
                r = f.hypot(g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + 2.0 * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    let nz = zm.nrows();
                    for k in 0..nz {
                        f = zm[[k, iu + 1]];
                        zm[[k, iu + 1]] = s * zm[[k, iu]] + c * f;
                        zm[[k, iu]] = c * zm[[k, iu]] - s * f;
                    }
                }
                i -= 1;
            }
            if r == 0.0 && i >= l as isize {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use ndarray::Array2;

    fn random_sym(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let x = rng.uniform(-1.0, 1.0);
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        a
    }

    fn check_decomposition(a: &Array2<f64>, vals: &Array1<f64>, vecs: &Array2<f64>, tol: f64) {
        let n = a.nrows();
        // A v_k = λ_k v_k
        for k in 0..n {
            let v = vecs.column(k);
            let av = a.dot(&v);
            for i in 0..n {
                assert!(
                    (av[i] - vals[k] * v[i]).abs() < tol,
                    "residual {} at ({}, {})",
                    (av[i] - vals[k] * v[i]).abs(),
                    i,
                    k
                );
            }
        }
        // Orthonormality
        let vtv = vecs.t().dot(vecs);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_known_2x2() {
        let a = ndarray::array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = sym_eig_jacobi(&a.view(), None, 30).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        check_decomposition(&a, &vals, &vecs, 1e-12);
    }

    #[test]
    fn jacobi_random_and_warm_start() {
        let a = random_sym(24, 9);
        let (vals, vecs) = sym_eig_jacobi(&a.view(), None, 40).unwrap();
        check_decomposition(&a, &vals, &vecs, 1e-9);

        // Perturb slightly and re-solve warm-started: should agree with cold.
        let mut b = a.clone();
        for i in 0..24 {
            b[[i, i]] += 1e-3 * (i as f64);
        }
        let (wv, wq) = sym_eig_jacobi(&b.view(), Some(&vecs), 40).unwrap();
        let (cv, _) = sym_eig_jacobi(&b.view(), None, 40).unwrap();
        for i in 0..24 {
            assert!((wv[i] - cv[i]).abs() < 1e-9);
        }
        check_decomposition(&b, &wv, &wq, 1e-9);
    }

    #[test]
    fn ql_matches_jacobi() {
        for n in [1usize, 2, 3, 17, 64, 120] {
            let a = random_sym(n, 1000 + n as u64);
            let (jv, _) = sym_eig_jacobi(&a.view(), None, 60).unwrap();
            let (qv, qz) = sym_eig(&a.view(), true).unwrap();
            for i in 0..n {
                assert!(
                    (jv[i] - qv[i]).abs() < 1e-9 * (1.0 + jv[0].abs()),
                    "n={n} i={i}: {} vs {}",
                    jv[i],
                    qv[i]
                );
            }
            check_decomposition(&a, &qv, &qz, 1e-8 * (1.0 + qv[0].abs()));
            // values-only path agrees
            let (only, _) = sym_eig(&a.view(), false).unwrap();
            for i in 0..n {
                assert!((only[i] - qv[i]).abs() < 1e-10 * (1.0 + qv[0].abs()));
            }
        }
    }

    #[test]
    fn ql_handles_rank_deficiency() {
        // PSD matrix with exact zero block.
        let mut a = Array2::zeros((8, 8));
        let b = random_sym(4, 5);
        let g = b.dot(&b.t());
        for i in 0..4 {
            for j in 0..4 {
                a[[i, j]] = g[[i, j]];
            }
        }
        let (vals, vecs) = sym_eig(&a.view(), true).unwrap();
        check_decomposition(&a, &vals, &vecs, 1e-10);
        for i in 4..8 {
            assert!(vals[i].abs() < 1e-12);
        }
    }

    #[test]
    fn gram_matches_direct() {
        let mut rng = SplitMix64::new(3);
        let mut a = Array2::zeros((7, 5000));
        for x in a.iter_mut() {
            *x = rng.uniform(-1.0, 1.0);
        }
        let g = gram_aat(&a.view());
        let direct = a.dot(&a.t());
        for i in 0..7 {
            for j in 0..7 {
                assert!((g[[i, j]] - direct[[i, j]]).abs() < 1e-9 * direct[[i, i]].abs().max(1.0));
            }
        }
    }

    #[test]
    fn eigenvector_sign_is_fixed() {
        let a = random_sym(12, 77);
        let (_, v1) = sym_eig(&a.view(), true).unwrap();
        let (_, v2) = sym_eig_jacobi(&a.view(), None, 40).unwrap();
        for k in 0..12 {
            // Same convention in both solvers: dominant entry positive.
            let dot: f64 = v1.column(k).iter().zip(v2.column(k)).map(|(a, b)| a * b).sum();
            assert!(dot > 0.99, "column {k} disagrees: dot = {dot}");
        }
    }
}
