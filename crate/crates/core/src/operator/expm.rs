use nalgebra::linalg::Schur;
use num_complex::Complex64;

use super::{ensure_square, identity, is_finite, norm_1, ComplexMatrix};
use crate::{Error, Result};

/// Gauss-Legendre nodes on [-1, 1] for the logarithm quadrature.
const GL_NODES: usize = 16;

/// `||A - I||_1` below which the logarithm series is evaluated directly.
const LOG_SERIES_RADIUS: f64 = 0.25;

/// An eigenvalue with `|Im| <= BRANCH_CUT_TOL * |lambda|` and `Re <= 0`
/// counts as sitting on the branch cut.
const BRANCH_CUT_TOL: f64 = 1e-12;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    if !is_finite(m) {
        return Err(Error::InvalidInput(
            "matrix_exp: non-finite entries".to_string(),
        ));
    }
    Ok(m.exp())
}

/// Eigenvalues of a general complex square matrix.
pub(crate) fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::NonConvergence("Schur decomposition did not converge".to_string())
    })?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Principal square root by the product form of the Denman-Beavers iteration.
pub fn matrix_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    let eye = identity(n);
    let mut y = m.clone();
    let mut z = eye.clone();
    for _ in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("matrix_sqrt: singular iterate".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("matrix_sqrt: singular iterate".into()))?;
        let y_next = (&y + zi).scale(0.5);
        let z_next = (&z + yi).scale(0.5);
        let delta = norm_1(&(&y_next - &y));
        let scale = norm_1(&y_next).max(f64::MIN_POSITIVE);
        y = y_next;
        z = z_next;
        if delta <= 4.0 * f64::EPSILON * scale {
            return Ok(y);
        }
    }
    // Quadratic convergence stalls at rounding level; the last iterate is as
    // good as it gets.
    Ok(y)
}

/// Principal matrix logarithm.
///
/// Inverse scaling and squaring: take square roots until `A^(1/2^k)` is close
/// to the identity, evaluate `log(I + X)` by Gauss-Legendre quadrature of
/// `X (I + s X)^-1` over `s in [0, 1]`, and scale back by `2^k`.
pub fn principal_log(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    if !is_finite(m) {
        return Err(Error::InvalidInput(
            "principal_log: non-finite entries".to_string(),
        ));
    }
    for lambda in eigenvalues(m)? {
        let on_cut = lambda.re <= 0.0 && lambda.im.abs() <= BRANCH_CUT_TOL * lambda.norm();
        if on_cut || lambda.norm() == 0.0 {
            return Err(Error::BranchCut { eigenvalue: lambda });
        }
    }

    let eye = identity(n);
    let mut a = m.clone();
    let mut squarings = 0u32;
    while norm_1(&(&a - &eye)) > LOG_SERIES_RADIUS {
        if squarings >= 64 {
            return Err(Error::NonConvergence(
                "principal_log: square roots did not approach the identity".into(),
            ));
        }
        a = matrix_sqrt(&a)?;
        squarings += 1;
    }

    let x = &a - &eye;
    let (nodes, weights) = gauss_legendre(GL_NODES);
    let mut log = ComplexMatrix::zeros(n, n);
    for (node, weight) in nodes.iter().zip(&weights) {
        // map [-1, 1] -> [0, 1]
        let s = 0.5 * (node + 1.0);
        let shifted = &eye + x.scale(s);
        let inv = shifted
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("principal_log: singular quadrature node".into()))?;
        log += (&x * inv).scale(0.5 * weight);
    }
    Ok(log.scale(2f64.powi(squarings as i32)))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
