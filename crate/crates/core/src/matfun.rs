//! Dense matrix functions: exponential, principal logarithm, principal square
//! root and the Fréchet derivative of the exponential.
//!
//! `expm` is scaling-and-squaring around diagonal Padé approximants of degree
//! 3, 5, 7, 9 or 13 (Higham, 2005). `logm` is inverse scaling-and-squaring:
//! repeated Denman–Beavers square roots until the argument is close to the
//! identity, then an 8-node Gauss–Legendre rule for `log(I + E)`, which equals
//! the [8/8] Padé approximant.

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
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
const PADE_13: [f64; 14] = [
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

// Gauss-Legendre nodes/weights on [-1, 1], positive half.
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Maximum absolute column sum.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_square_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(invalid(alloc::format!("{what}: matrix must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(invalid(alloc::format!("{what}: matrix has non-finite entries")));
    }
    Ok(())
}

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut u = &id * b[1];
    let mut v = &id * b[0];
    let mut pow = id.clone();
    let m = b.len() - 1;
    let mut k = 2;
    while k <= m {
        pow = &pow * &a2;
        v += &pow * b[k];
        if k + 1 <= m {
            u += &pow * b[k + 1];
        }
        k += 2;
    }
    (a * u, v)
}

fn pade_13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE_13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

fn solve(lhs: DMatrix<f64>, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    lhs.lu().solve(&rhs).ok_or_else(|| invalid("singular linear system in matrix function"))
}

/// Matrix exponential by scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a, "expm")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = norm1(a);
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &PADE_3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &PADE_5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &PADE_7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &PADE_9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade_13(&scaled);
        (u, v, s)
    };
    let mut r = solve(&v - &u, &v + &u)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Fréchet derivative `d/dε exp(a + ε·e)` at `ε = 0`, read off the upper right
/// block of `exp([[a, e], [0, a]])`.
pub fn expm_frechet(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a, "expm_frechet")?;
    let n = a.nrows();
    if e.shape() != (n, n) {
        return Err(invalid("expm_frechet: direction shape mismatch"));
    }
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(a);
    block.view_mut((n, n), (n, n)).copy_from(a);
    block.view_mut((0, n), (n, n)).copy_from(e);
    let full = expm(&block)?;
    Ok(full.view((0, n), (n, n)).into_owned())
}

/// Eigenvalues that forbid a real principal logarithm, if any.
pub fn negative_axis_eigenvalue(a: &DMatrix<f64>) -> Option<Complex<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    a.clone().complex_eigenvalues().iter().copied().find(|z| z.im.abs() <= tol && z.re <= tol)
}

/// Principal square root by the Denman–Beavers iteration.
pub fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a, "sqrtm")?;
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().ok_or_else(|| invalid("sqrtm: singular iterate"))?;
        let z_inv = z.clone().try_inverse().ok_or_else(|| invalid("sqrtm: singular iterate"))?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm();
        let scale = y_next.norm();
        y = y_next;
        z = z_next;
        if delta <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a, "logm")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if let Some(z) = negative_axis_eigenvalue(a) {
        return Err(Error::LogDomain { re: z.re, im: z.im });
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut roots = 0i32;
    while norm1(&(&x - &id)) > 0.25 {
        if roots >= 60 {
            return Err(invalid("logm: square-root iteration did not approach the identity"));
        }
        x = sqrtm(&x)?;
        roots += 1;
    }
    let e = &x - &id;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        for sign in [-1.0, 1.0] {
            let t = 0.5 * (1.0 + sign * node);
            let w = 0.5 * weight;
            let m = &id + &e * t;
            acc += solve(m, e.clone())? * w;
        }
    }
    Ok(acc * 2f64.powi(roots))
}
