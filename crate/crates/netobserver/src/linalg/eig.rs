//! Real nonsymmetric eigensolver: Householder reduction to Hessenberg form
//! followed by Francis double-shift QR with eigenvector back-substitution.
//!
//! The iteration is the classic EISPACK/Jama hqr2 scheme; complex pairs come
//! out of the 2x2 diagonal blocks of the real Schur form.

use num_complex::Complex64;

use super::{CMatrix, LinalgError, Matrix, Result};

/// Spectrum of a real square matrix. Complex eigenvalues appear in conjugate
/// pairs; when requested, `eigenvectors` holds unit-norm columns matched to
/// `eigenvalues` with residual |A v - lambda v| <= 1e-8 |A| |v|.
#[derive(Debug, Clone)]
pub struct ComplexSpectrum {
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Option<CMatrix>,
}

pub(super) fn eig(a: &Matrix, with_vectors: bool) -> Result<ComplexSpectrum> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if n == 1 {
        let lambda = Complex64::new(a[(0, 0)], 0.0);
        let vectors = with_vectors.then(|| CMatrix::from_fn(1, 1, |_, _| Complex64::new(1.0, 0.0)));
        return Ok(ComplexSpectrum { eigenvalues: vec![lambda], eigenvectors: vectors });
    }

    let mut h = a.clone();
    let mut v = Matrix::identity(n);
    orthes(&mut h, &mut v);
    let (d, e) = hqr2(&mut h, &mut v, with_vectors)?;

    let eigenvalues: Vec<Complex64> =
        d.iter().zip(e.iter()).map(|(&re, &im)| Complex64::new(re, im)).collect();

    let eigenvectors = if with_vectors {
        // hqr2 stores a complex pair (re, im) in consecutive columns of V,
        // with the +i omega member first.
        let mut x = CMatrix::zeros(n, n);
        let mut j = 0;
        while j < n {
            if e[j] == 0.0 {
                for i in 0..n {
                    x.set(i, j, Complex64::new(v[(i, j)], 0.0));
                }
                j += 1;
            } else {
                for i in 0..n {
                    x.set(i, j, Complex64::new(v[(i, j)], v[(i, j + 1)]));
                    x.set(i, j + 1, Complex64::new(v[(i, j)], -v[(i, j + 1)]));
                }
                j += 2;
            }
        }
        for j in 0..n {
            x.normalize_column(j);
        }
        Some(x)
    } else {
        None
    };

    Ok(ComplexSpectrum { eigenvalues, eigenvectors })
}

/// Householder reduction of `h` to upper Hessenberg form, accumulating the
/// orthogonal transformation into `v`.
fn orthes(h: &mut Matrix, v: &mut Matrix) {
    let n = h.rows();
    let low = 0;
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in (low + 1)..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale != 0.0 {
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
    }

    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Francis double-shift QR on a Hessenberg matrix, with optional eigenvector
/// back-substitution. Returns (real parts, imaginary parts).
#[allow(clippy::needless_range_loop)]
fn hqr2(h: &mut Matrix, v: &mut Matrix, with_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.rows();
    let mut n = nn as isize - 1;
    let low = 0isize;
    let high = nn as isize - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut w, mut x, mut y);
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    if norm == 0.0 {
        return Ok((d, e));
    }

    let mut iter = 0;
    let mut total_iter = 0usize;
    while n >= low {
        // Single-source of non-convergence: cap the total iteration count.
        total_iter += 1;
        if total_iter > 80 * nn {
            return Err(LinalgError::NoConvergence);
        }

        let mut l = n;
        while l > low {
            s = h[((l - 1) as usize, (l - 1) as usize)].abs() + h[(l as usize, l as usize)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l as usize, (l - 1) as usize)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            h[(n as usize, n as usize)] += exshift;
            d[n as usize] = h[(n as usize, n as usize)];
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h[(n as usize, (n - 1) as usize)] * h[((n - 1) as usize, n as usize)];
            p = (h[((n - 1) as usize, (n - 1) as usize)] - h[(n as usize, n as usize)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(n as usize, n as usize)] += exshift;
            h[((n - 1) as usize, (n - 1) as usize)] += exshift;
            x = h[(n as usize, n as usize)];

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = h[(n as usize, (n - 1) as usize)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (n - 1) as usize..nn {
                    z = h[((n - 1) as usize, j)];
                    h[((n - 1) as usize, j)] = q * z + p * h[(n as usize, j)];
                    h[(n as usize, j)] = q * h[(n as usize, j)] - p * z;
                }
                for i in 0..=n as usize {
                    z = h[(i, (n - 1) as usize)];
                    h[(i, (n - 1) as usize)] = q * z + p * h[(i, n as usize)];
                    h[(i, n as usize)] = q * h[(i, n as usize)] - p * z;
                }
                for i in low as usize..=high as usize {
                    z = v[(i, (n - 1) as usize)];
                    v[(i, (n - 1) as usize)] = q * z + p * v[(i, n as usize)];
                    v[(i, n as usize)] = q * v[(i, n as usize)] - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(n as usize, n as usize)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[((n - 1) as usize, (n - 1) as usize)];
                w = h[(n as usize, (n - 1) as usize)] * h[((n - 1) as usize, n as usize)];
            }

            if iter == 10 || iter == 20 {
                exshift += x;
                for i in low..=n {
                    h[(i as usize, i as usize)] -= x;
                }
                s = h[(n as usize, (n - 1) as usize)].abs()
                    + h[((n - 1) as usize, (n - 2) as usize)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[(i as usize, i as usize)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;

            let mut m = n - 2;
            while m >= l {
                z = h[(m as usize, m as usize)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[((m + 1) as usize, m as usize)] + h[(m as usize, (m + 1) as usize)];
                q = h[((m + 1) as usize, (m + 1) as usize)] - z - r - s;
                r = h[((m + 2) as usize, (m + 1) as usize)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m as usize, (m - 1) as usize)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[((m - 1) as usize, (m - 1) as usize)].abs()
                                + z.abs()
                                + h[((m + 1) as usize, (m + 1) as usize)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h[(i as usize, (i - 2) as usize)] = 0.0;
                if i > m + 2 {
                    h[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }

            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[(k as usize, (k - 1) as usize)];
                    q = h[((k + 1) as usize, (k - 1) as usize)];
                    r = if notlast { h[((k + 2) as usize, (k - 1) as usize)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k as usize, (k - 1) as usize)] = -s * x;
                    } else if l != m {
                        h[(k as usize, (k - 1) as usize)] = -h[(k as usize, (k - 1) as usize)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k as usize..nn {
                        p = h[(k as usize, j)] + q * h[((k + 1) as usize, j)];
                        if notlast {
                            p += r * h[((k + 2) as usize, j)];
                            h[((k + 2) as usize, j)] -= p * z;
                        }
                        h[(k as usize, j)] -= p * x;
                        h[((k + 1) as usize, j)] -= p * y;
                    }

                    let upper = n.min(k + 3) as usize;
                    for i in 0..=upper {
                        p = x * h[(i, k as usize)] + y * h[(i, (k + 1) as usize)];
                        if notlast {
                            p += z * h[(i, (k + 2) as usize)];
                            h[(i, (k + 2) as usize)] -= p * r;
                        }
                        h[(i, k as usize)] -= p;
                        h[(i, (k + 1) as usize)] -= p * q;
                    }

                    for i in low as usize..=high as usize {
                        p = x * v[(i, k as usize)] + y * v[(i, (k + 1) as usize)];
                        if notlast {
                            p += z * v[(i, (k + 2) as usize)];
                            v[(i, (k + 2) as usize)] -= p * r;
                        }
                        v[(i, k as usize)] -= p;
                        v[(i, (k + 1) as usize)] -= p * q;
                    }
                }
            }
        }
    }

    if !with_vectors {
        return Ok((d, e));
    }

    // Back-substitute to find vectors of the upper quasi-triangular form.
    for n in (0..nn as isize).rev() {
        p = d[n as usize];
        q = e[n as usize];
        if q == 0.0 {
            let mut l = n;
            h[(n as usize, n as usize)] = 1.0;
            for i in (0..n).rev() {
                w = h[(i as usize, i as usize)] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[(i as usize, j as usize)] * h[(j as usize, n as usize)];
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        if w != 0.0 {
                            h[(i as usize, n as usize)] = -r / w;
                        } else {
                            h[(i as usize, n as usize)] = -r / (eps * norm);
                        }
                    } else {
                        x = h[(i as usize, (i + 1) as usize)];
                        y = h[((i + 1) as usize, i as usize)];
                        q = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize];
                        let t = (x * s - z * r) / q;
                        h[(i as usize, n as usize)] = t;
                        if x.abs() > z.abs() {
                            h[((i + 1) as usize, n as usize)] = (-r - w * t) / x;
                        } else {
                            h[((i + 1) as usize, n as usize)] = (-s - y * t) / z;
                        }
                    }
                    let t = h[(i as usize, n as usize)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j as usize, n as usize)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h[(n as usize, (n - 1) as usize)].abs() > h[((n - 1) as usize, n as usize)].abs() {
                h[((n - 1) as usize, (n - 1) as usize)] = q / h[(n as usize, (n - 1) as usize)];
                h[((n - 1) as usize, n as usize)] =
                    -(h[(n as usize, n as usize)] - p) / h[(n as usize, (n - 1) as usize)];
            } else {
                let (cr, ci) = cdiv(
                    0.0,
                    -h[((n - 1) as usize, n as usize)],
                    h[((n - 1) as usize, (n - 1) as usize)] - p,
                    q,
                );
                h[((n - 1) as usize, (n - 1) as usize)] = cr;
                h[((n - 1) as usize, n as usize)] = ci;
            }
            h[(n as usize, (n - 1) as usize)] = 0.0;
            h[(n as usize, n as usize)] = 1.0;
            for i in (0..n - 1).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[(i as usize, j as usize)] * h[(j as usize, (n - 1) as usize)];
                    sa += h[(i as usize, j as usize)] * h[(j as usize, n as usize)];
                }
                w = h[(i as usize, i as usize)] - p;

                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[(i as usize, (n - 1) as usize)] = cr;
                        h[(i as usize, n as usize)] = ci;
                    } else {
                        x = h[(i as usize, (i + 1) as usize)];
                        y = h[((i + 1) as usize, i as usize)];
                        let mut vr = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize]
                            - q * q;
                        let vi = (d[i as usize] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps
                                * norm
                                * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[(i as usize, (n - 1) as usize)] = cr;
                        h[(i as usize, n as usize)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[((i + 1) as usize, (n - 1) as usize)] = (-ra - w
                                * h[(i as usize, (n - 1) as usize)]
                                + q * h[(i as usize, n as usize)])
                                / x;
                            h[((i + 1) as usize, n as usize)] = (-sa
                                - w * h[(i as usize, n as usize)]
                                - q * h[(i as usize, (n - 1) as usize)])
                                / x;
                        } else {
                            let (cr, ci) = cdiv(
                                -r - y * h[(i as usize, (n - 1) as usize)],
                                -s - y * h[(i as usize, n as usize)],
                                z,
                                q,
                            );
                            h[((i + 1) as usize, (n - 1) as usize)] = cr;
                            h[((i + 1) as usize, n as usize)] = ci;
                        }
                    }
                    let t = h[(i as usize, (n - 1) as usize)]
                        .abs()
                        .max(h[(i as usize, n as usize)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j as usize, (n - 1) as usize)] /= t;
                            h[(j as usize, n as usize)] /= t;
                        }
                    }
                }
            }
        }
    }

    // Transform back to the original basis.
    for j in (low as usize..=high as usize).rev() {
        for i in low as usize..=high as usize {
            z = 0.0;
            for k in low as usize..=j.min(high as usize) {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }

    Ok((d, e))
}
