//! Numeric backends.
//!
//! Every moment-space computation in this crate is generic over [`Scalar`],
//! which has two implementations: `f64` for optimization and [`Rational`]
//! (arbitrary precision) for exact oracle checks.

use std::fmt::Debug;

use num::bigint::BigInt;
use num::integer::Integer;
use num::traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use num::BigRational;

/// Exact rational number used by the oracle paths.
pub type Rational = BigRational;

/// Denominators below this magnitude count as degenerate in float mode.
pub const DEGENERATE_TOL: f64 = 1e-13;

pub trait Scalar:
    Num + Signed + Clone + Debug + PartialOrd + Send + Sync + FromPrimitive + ToPrimitive + 'static
{
    /// Whether arithmetic is exact.
    const EXACT: bool;

    /// Converts a float. Exact for the rational backend.
    fn from_real(x: f64) -> Self;

    fn to_real(&self) -> f64;

    /// `|self| < tol` in float mode, `self == 0` in exact mode.
    fn near_zero(&self, tol: f64) -> bool;

    /// Denominator test used by the recurrence sweeps.
    fn is_degenerate(&self) -> bool {
        self.near_zero(DEGENERATE_TOL)
    }

    /// Determinant of a square matrix given as rows.
    fn determinant(rows: Vec<Vec<Self>>) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer conversion")
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_real(x: f64) -> Self {
        x
    }

    fn to_real(&self) -> f64 {
        *self
    }

    fn near_zero(&self, tol: f64) -> bool {
        self.abs() < tol
    }

    fn determinant(rows: Vec<Vec<Self>>) -> Self {
        lu_determinant(rows)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_real(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }

    fn to_real(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn near_zero(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn determinant(rows: Vec<Vec<Self>>) -> Self {
        bareiss_rational(rows)
    }
}

/// Partial-pivot LU determinant.
pub fn lu_determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for row in col + 1..n {
            let factor = a[row][col] / p;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    det
}

/// Fraction-free determinant: each row is scaled to integers, Bareiss
/// elimination runs over `BigInt`, and the row scales are divided back out.
pub fn bareiss_rational(rows: Vec<Vec<Rational>>) -> Rational {
    let n = rows.len();
    if n == 0 {
        return Rational::one();
    }
    let mut scale = BigInt::one();
    let mut a: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for row in rows {
        let lcm = row
            .iter()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let ints = row
            .iter()
            .map(|x| x.numer() * (&lcm / x.denom()))
            .collect();
        scale *= &lcm;
        a.push(ints);
    }
    let det = bareiss(a);
    Rational::new(det, scale)
}

/// Bareiss elimination on an integer matrix.
pub fn bareiss(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

/// `base^exp` by repeated squaring.
pub fn powi<S: Scalar>(base: &S, exp: usize) -> S {
    num::traits::pow(base.clone(), exp)
}
