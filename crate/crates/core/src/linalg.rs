//! Dense matrix kernels shared by the kernel algebra and the solvers.
//!
//! Everything here works on `ndarray` matrices and leans on LAPACK (through
//! `ndarray-linalg`) for factorizations. The exponential uses scaling and
//! squaring with the diagonal Padé family up to degree 13; the logarithm uses
//! inverse scaling and squaring with Denman–Beavers square roots and a
//! Gauss–Legendre partial-fraction Padé approximant.

use ndarray::{s, Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eig, EigVals, Eigh, Inverse, Lapack, OperationNorm, Scalar, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type RMat = Array2<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity<A: Scalar>(n: usize) -> Array2<A> {
    Array2::from_diag_elem(n, A::one())
}

pub fn to_complex(a: &RMat) -> CMat {
    a.mapv(c)
}

pub fn norm1<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.opnorm_one().unwrap_or(f64::INFINITY)
}

pub fn norm_inf<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.opnorm_inf().unwrap_or(f64::INFINITY)
}

pub fn fro<A: Scalar<Real = f64>>(a: &Array2<A>) -> f64 {
    a.iter().map(|x| x.square()).sum::<f64>().sqrt()
}

pub fn fro_view(a: ArrayView2<'_, C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Upper bound for the spectral norm, `sqrt(‖a‖₁ ‖a‖∞)`.
pub fn spectral_bound(a: &CMat) -> f64 {
    (norm1(a) * norm_inf(a)).sqrt()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn max_abs<A: Scalar<Real = f64>>(a: &Array2<A>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves a fixed well-conditioned 16×16 real and complex system and returns
/// the largest residual. Some OpenBLAS builds select a broken real kernel on
/// AVX-512 hosts; `OPENBLAS_CORETYPE=Haswell` avoids it.
pub fn backend_self_check() -> Result<f64> {
    let n = 16;
    let r = RMat::from_shape_fn((n, n), |(i, j)| ((i * 7 + j * 3) % 11) as f64 + if i == j { 10.0 } else { 0.0 });
    let real = max_abs(&(r.dot(&inverse(&r)?) - identity::<f64>(n)));
    let z = to_complex(&r) + to_complex(&r.t().to_owned()) * I;
    let cplx = max_abs(&(z.dot(&inverse(&z)?) - identity::<C64>(n)));
    let worst = real.max(cplx);
    if worst > 1e-10 {
        return Err(Error::Singular(format!(
            "LAPACK self-check residual {worst:.3e}; set OPENBLAS_CORETYPE=Haswell"
        )));
    }
    Ok(worst)
}

pub fn inverse<A: Scalar + Lapack>(a: &Array2<A>) -> Result<Array2<A>> {
    a.inv().map_err(|_| Error::Singular("matrix inversion failed".into()))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
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
const PADE13: [f64; 14] = [
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
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

fn pade_low<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>, b: &[f64]) -> (Array2<A>, Array2<A>) {
    let n = a.nrows();
    let eye = identity::<A>(n);
    let a2 = a.dot(a);
    // powers A^0, A^2, A^4, ...
    let mut pows = vec![eye.clone(), a2.clone()];
    while 2 * pows.len() < b.len() {
        let next = pows.last().unwrap().dot(&a2);
        pows.push(next);
    }
    let mut u = Array2::<A>::zeros((n, n));
    let mut v = Array2::<A>::zeros((n, n));
    for (k, p) in pows.iter().enumerate() {
        if 2 * k + 1 < b.len() {
            u.scaled_add(A::from_real(b[2 * k + 1]), p);
        }
        v.scaled_add(A::from_real(b[2 * k]), p);
    }
    (a.dot(&u), v)
}

fn pade13<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> (Array2<A>, Array2<A>) {
    let b = &PADE13;
    let n = a.nrows();
    let eye = identity::<A>(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let r = |x: f64| A::from_real(x);
    let mut inner_u = a6.mapv(|x| x * r(b[13]));
    inner_u.scaled_add(r(b[11]), &a4);
    inner_u.scaled_add(r(b[9]), &a2);
    let mut u = a6.dot(&inner_u);
    u.scaled_add(r(b[7]), &a6);
    u.scaled_add(r(b[5]), &a4);
    u.scaled_add(r(b[3]), &a2);
    u.scaled_add(r(b[1]), &eye);
    let u = a.dot(&u);
    let mut inner_v = a6.mapv(|x| x * r(b[12]));
    inner_v.scaled_add(r(b[10]), &a4);
    inner_v.scaled_add(r(b[8]), &a2);
    let mut v = a6.dot(&inner_v);
    v.scaled_add(r(b[6]), &a6);
    v.scaled_add(r(b[4]), &a4);
    v.scaled_add(r(b[2]), &a2);
    v.scaled_add(r(b[0]), &eye);
    (u, v)
}

/// Matrix exponential by scaling and squaring with a degree-adaptive Padé
/// approximant (degrees 3, 5, 7, 9, 13).
pub fn expm<A: Scalar<Real = f64> + Lapack>(a: &Array2<A>) -> Result<Array2<A>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("expm of a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::InvalidArgument("expm argument has non-finite entries".into()));
    }
    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = pade_low(a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = pade_low(a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = pade_low(a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = pade_low(a, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        let scaled = a.mapv(|x| x.mul_real(0.5f64.powi(s)));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = inverse(&q)?.dot(&p);
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Returns `(exp(x), φ₁(x))` with `φ₁(x) = Σ xᵏ/(k+1)!`, so that
/// `exp(x) = I + x φ₁(x)`.
///
/// Taylor series on the scaled argument, then the doubling recurrences
/// `φ₁(2y) = ½ φ₁(y)(e^y + I)` and `e^{2y} = (e^y)²`.
pub fn expm_phi1(x: &CMat) -> Result<(CMat, CMat)> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::Dimension(format!("phi1 of a {}x{} matrix", n, x.ncols())));
    }
    let eye = identity::<C64>(n);
    if n == 0 {
        return Ok((eye.clone(), eye));
    }
    let norm = norm1(x);
    if !norm.is_finite() {
        return Err(Error::InvalidArgument("phi1 argument has non-finite entries".into()));
    }
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let y = x.mapv(|v| v * 0.5f64.powi(s));
    let ynorm = norm1(&y);
    let mut phi = eye.clone();
    let mut term = eye.clone();
    let mut bound = 1.0;
    for k in 1..40 {
        term = term.dot(&y) / c((k + 1) as f64);
        phi += &term;
        bound *= ynorm / (k + 1) as f64;
        if bound < 1e-18 {
            break;
        }
    }
    let mut e = &eye + &y.dot(&phi);
    for _ in 0..s {
        phi = phi.dot(&(&e + &eye)) * c(0.5);
        e = e.dot(&e);
    }
    Ok((e, phi))
}

/// Principal square root by the product form of the Denman–Beavers iteration.
pub fn sqrtm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let eye = identity::<C64>(n);
    let mut m = a.clone();
    let mut y = a.clone();
    for _ in 0..100 {
        let minv = inverse(&m)?;
        y = y.dot(&(&eye + &minv)) * c(0.5);
        m = (&eye * c(0.5)) + (&m + &minv) * c(0.25);
        let delta = norm1(&(&m - &eye));
        if delta < 1e-14 {
            return Ok(y);
        }
        if !delta.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence("Denman-Beavers square root".into()))
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// The caller is responsible for excluding eigenvalues on the closed negative
/// real axis; the square-root iteration fails to converge there.
pub fn logm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("logm of a {}x{} matrix", n, a.ncols())));
    }
    let eye = identity::<C64>(n);
    if n == 0 {
        return Ok(eye);
    }
    let mut x = a.clone();
    let mut roots = 0;
    while norm1(&(&x - &eye)) > 0.25 {
        x = sqrtm(&x)?;
        roots += 1;
        if roots > 60 {
            return Err(Error::NoConvergence("inverse scaling and squaring".into()));
        }
    }
    let z = &x - &eye;
    // log(I + Z) = ∫₀¹ Z (I + tZ)⁻¹ dt, Gauss–Legendre on [0, 1].
    let (nodes, weights) = gauss_legendre(9);
    let mut acc = CMat::zeros((n, n));
    for (t, w) in nodes.iter().zip(weights.iter()) {
        let t = 0.5 * (t + 1.0);
        let w = 0.5 * w;
        let shifted = &eye + &(&z * c(t));
        acc.scaled_add(c(w), &inverse(&shifted)?);
    }
    let log = z.dot(&acc);
    Ok(log * c(2f64.powi(roots)))
}

pub fn eigenvalues(a: &CMat) -> Result<Array1<C64>> {
    if a.is_empty() {
        return Ok(Array1::zeros(0));
    }
    Ok(a.eigvals()?)
}

pub fn eigen(a: &CMat) -> Result<(Array1<C64>, CMat)> {
    Ok(a.eig()?)
}

/// Ascending eigenpairs of a Hermitian matrix. The input is copied to column
/// major first: the row-major path of the backend returns conjugated vectors.
pub fn hermitian_eigen(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    let mut f = CMat::zeros(a.raw_dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Lower)?)
}

pub fn real_eigenvalues(a: &RMat) -> Result<Array1<C64>> {
    Ok(a.eigvals()?)
}

/// `exp(H)` for a matrix `H` whose nonzero columns all lie in `[start, end)`.
///
/// Writing `H = U E_Cᵀ` with `U = H[:, C]`, the exponential is the rank-|C|
/// update `exp(H) = I + U φ₁(U[C, :]) E_Cᵀ`.
#[derive(Debug, Clone)]
pub struct ColumnExp {
    pub start: usize,
    pub end: usize,
    /// `U φ₁(U[C, :])`, all rows by `end - start` columns.
    pub update: CMat,
}

impl ColumnExp {
    pub fn new(columns: ArrayView2<'_, C64>, start: usize) -> Result<Self> {
        let width = columns.ncols();
        let end = start + width;
        if end > columns.nrows() {
            return Err(Error::Dimension("column support exceeds matrix size".into()));
        }
        let corner = columns.slice(s![start..end, ..]).to_owned();
        let (_, phi) = expm_phi1(&corner)?;
        Ok(Self { start, end, update: columns.dot(&phi) })
    }

    pub fn dim(&self) -> usize {
        self.update.nrows()
    }

    /// `exp(H) · m`.
    pub fn apply_left(&self, m: &CMat) -> CMat {
        let rows = m.slice(s![self.start..self.end, ..]);
        let mut out = m.clone();
        ndarray::linalg::general_mat_mul(c(1.0), &self.update, &rows, c(1.0), &mut out);
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = identity::<C64>(self.dim());
        let mut cols = out.slice_mut(s![.., self.start..self.end]);
        cols += &self.update;
        out
    }
}
