//! Matrix exponential by scaling and squaring with a degree-13 Pade
//! approximant (Higham 2005), with the lower-degree approximants used when
//! the 1-norm permits.

use super::Matrix;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn pade_3(a: &Matrix, a2: &Matrix) -> (Matrix, Matrix) {
    let b = [120.0, 60.0, 12.0, 1.0];
    let n = a.rows();
    let i = Matrix::identity(n);
    let u = a * &(a2.scale(b[3]) + i.scale(b[1]));
    let v = a2.scale(b[2]) + i.scale(b[0]);
    (u, v)
}

fn pade_5(a: &Matrix, a2: &Matrix, a4: &Matrix) -> (Matrix, Matrix) {
    let b = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
    let n = a.rows();
    let i = Matrix::identity(n);
    let u = a * &(a4.scale(b[5]) + a2.scale(b[3]) + i.scale(b[1]));
    let v = a4.scale(b[4]) + a2.scale(b[2]) + i.scale(b[0]);
    (u, v)
}

fn pade_7(a: &Matrix, a2: &Matrix, a4: &Matrix, a6: &Matrix) -> (Matrix, Matrix) {
    let b = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
    let n = a.rows();
    let i = Matrix::identity(n);
    let u = a * &(a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + i.scale(b[1]));
    let v = a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + i.scale(b[0]);
    (u, v)
}

fn pade_9(a: &Matrix, a2: &Matrix, a4: &Matrix, a6: &Matrix, a8: &Matrix) -> (Matrix, Matrix) {
    let b = [
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ];
    let n = a.rows();
    let i = Matrix::identity(n);
    let u = a * &(a8.scale(b[9]) + a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + i.scale(b[1]));
    let v = a8.scale(b[8]) + a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + i.scale(b[0]);
    (u, v)
}

fn pade_13(a: &Matrix, a2: &Matrix, a4: &Matrix, a6: &Matrix) -> (Matrix, Matrix) {
    let b = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.rows();
    let i = Matrix::identity(n);
    let w1 = a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]);
    let w2 = a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + i.scale(b[1]);
    let u = a * &(a6 * &w1 + w2);
    let z1 = a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]);
    let v = a6 * &z1 + a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + i.scale(b[0]);
    (u, v)
}

/// exp(A) for a square A (pre-scaled by the caller when a time step is
/// involved).
pub(super) fn expm_scaled(a: &Matrix) -> Matrix {
    let norm = a.norm_1();
    let mut a = a.clone();
    let mut squarings = 0u32;

    if norm > THETA_13 {
        squarings = (norm / THETA_13).log2().ceil() as u32;
        a = a.scale(0.5_f64.powi(squarings as i32));
    }

    let a2 = &a * &a;
    let (u, v) = if norm <= THETA_3 {
        pade_3(&a, &a2)
    } else if norm <= THETA_5 {
        let a4 = &a2 * &a2;
        pade_5(&a, &a2, &a4)
    } else if norm <= THETA_7 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        pade_7(&a, &a2, &a4, &a6)
    } else if norm <= THETA_9 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let a8 = &a6 * &a2;
        pade_9(&a, &a2, &a4, &a6, &a8)
    } else {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        pade_13(&a, &a2, &a4, &a6)
    };

    // (V - U) F = (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut f = super::lu_factor(&lhs)
        .expect("Pade denominator is nonsingular for scaled input")
        .solve(&rhs);
    for _ in 0..squarings {
        f = &f * &f;
    }
    f
}
