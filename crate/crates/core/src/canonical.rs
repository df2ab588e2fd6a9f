//! Canonical moments on `[0, 1]`.
//!
//! A moment sequence `c_0 = 1, c_1, ...` of a probability measure on `[0, 1]`
//! is reparameterized by its canonical moments `p_k`, the relative position
//! of `c_k` between the smallest and largest value it can take given
//! `c_0..c_{k-1}`. The canonical moments live in a box, which is what makes
//! them a convenient search space for design problems. The companion
//! variables `zeta_1 = p_1`, `zeta_k = (1 - p_{k-1}) p_k` are the entries of the
//! LU factors of the measure's Jacobi matrix.

use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::measure::{DesignMeasure, Domain, MomentSequence};
use crate::scalar::{powi, Scalar};

/// A float canonical moment within this distance of 0 or 1 ends the sequence.
pub const TERMINAL_TOL: f64 = 1e-9;
/// Interior canonical moments must stay this far from the faces (float mode).
pub const INTERIOR_MARGIN: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Zero,
    One,
}

impl Terminal {
    pub fn value<S: Scalar>(self) -> S {
        match self {
            Terminal::Zero => S::zero(),
            Terminal::One => S::one(),
        }
    }
}

/// Canonical moments `p_1..p_{N-1}` in `(0, 1)` and an optional terminal
/// `p_N` in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSequence<S> {
    interior: Vec<S>,
    terminal: Option<Terminal>,
}

impl<S: Scalar> CanonicalSequence<S> {
    pub fn new(interior: Vec<S>, terminal: Option<Terminal>) -> Result<Self> {
        let margin = if S::EXACT { 0.0 } else { INTERIOR_MARGIN };
        for (i, p) in interior.iter().enumerate() {
            let lo = S::from_real(margin);
            let hi = S::one() - S::from_real(margin);
            if *p <= lo || *p >= hi {
                return Err(DesignError::InvalidCanonical(format!(
                    "p_{} = {} is not inside (0, 1)",
                    i + 1,
                    p.to_real()
                )));
            }
        }
        Ok(CanonicalSequence { interior, terminal })
    }

    /// Reads a flat list of values. The first entry at (or, in float mode,
    /// within [`TERMINAL_TOL`] of) 0 or 1 becomes the terminal and anything
    /// after it is dropped.
    pub fn from_values(values: &[S]) -> Result<Self> {
        let tol = if S::EXACT { 0.0 } else { TERMINAL_TOL };
        let mut interior = Vec::with_capacity(values.len());
        for (i, p) in values.iter().enumerate() {
            if *p < -S::from_real(tol) || *p > S::one() + S::from_real(tol) {
                return Err(DesignError::InvalidCanonical(format!(
                    "p_{} = {} is outside [0, 1]",
                    i + 1,
                    p.to_real()
                )));
            }
            if p.near_zero(tol) {
                return Self::new(interior, Some(Terminal::Zero));
            }
            if (S::one() - p.clone()).near_zero(tol) {
                return Self::new(interior, Some(Terminal::One));
            }
            interior.push(p.clone());
        }
        Self::new(interior, None)
    }

    pub fn interior(&self) -> &[S] {
        &self.interior
    }

    pub fn terminal(&self) -> Option<Terminal> {
        self.terminal
    }

    pub fn is_terminated(&self) -> bool {
        self.terminal.is_some()
    }

    /// Number of stored canonical moments, terminal included.
    pub fn depth(&self) -> usize {
        self.interior.len() + usize::from(self.terminal.is_some())
    }

    /// `p_1..p_N` with the terminal written as 0 or 1.
    pub fn values(&self) -> Vec<S> {
        let mut v = self.interior.clone();
        if let Some(t) = self.terminal {
            v.push(t.value());
        }
        v
    }

    /// One-based access.
    pub fn get(&self, k: usize) -> Option<S> {
        if k == 0 {
            return None;
        }
        if k <= self.interior.len() {
            Some(self.interior[k - 1].clone())
        } else if k == self.interior.len() + 1 {
            self.terminal.map(Terminal::value)
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> CanonicalSequence<f64> {
        CanonicalSequence {
            interior: self.interior.iter().map(Scalar::to_real).collect(),
            terminal: self.terminal,
        }
    }

    /// Replaces the last stored value (a padding coordinate) by a terminal 1.
    pub fn terminate_last(&self) -> Self {
        if self.terminal.is_some() || self.interior.is_empty() {
            return self.clone();
        }
        let mut interior = self.interior.clone();
        interior.pop();
        CanonicalSequence { interior, terminal: Some(Terminal::One) }
    }
}

/// `zeta_1..zeta_K`; `zeta_0 = 0` is implicit. A terminated sequence has
/// zeros beyond its stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaSequence<S> {
    pub values: Vec<S>,
    pub terminated: bool,
}

impl<S: Scalar> ZetaSequence<S> {
    /// One-based access; zero past the end of a terminated sequence.
    pub fn get(&self, k: usize) -> Option<S> {
        if k == 0 {
            return Some(S::zero());
        }
        match self.values.get(k - 1) {
            Some(v) => Some(v.clone()),
            None if self.terminated => Some(S::zero()),
            None => None,
        }
    }

    /// `zeta_1..zeta_count`, zero-padded when terminated.
    pub fn padded(&self, count: usize) -> Result<Vec<S>> {
        (1..=count)
            .map(|k| {
                self.get(k).ok_or(DesignError::InsufficientDepth {
                    needed: count,
                    available: self.values.len(),
                })
            })
            .collect()
    }
}

fn moment_slice<S: Scalar>(c: &[S], needed: usize) -> Result<()> {
    if c.len() <= needed {
        Err(DesignError::InsufficientMoments { needed, available: c.len().saturating_sub(1) })
    } else {
        Ok(())
    }
}

/// Hankel determinant over a raw moment slice: `|c_{i+j+n}|` or, when
/// `barred`, `|c_{i+j+n} - c_{i+j+n+1}|`, of size `k`. `H_0 = 1`.
pub fn hankel_slice<S: Scalar>(c: &[S], k: usize, n: usize, barred: bool) -> Result<S> {
    if k == 0 {
        return Ok(S::one());
    }
    moment_slice(c, 2 * k - 2 + n + usize::from(barred))?;
    let entry = |idx: usize| {
        if barred {
            c[idx].clone() - c[idx + 1].clone()
        } else {
            c[idx].clone()
        }
    };
    let rows = (0..k)
        .map(|i| (0..k).map(|j| entry(i + j + n)).collect())
        .collect();
    Ok(S::determinant(rows))
}

/// `H_k^(n)` or `Hbar_k^(n)` of a moment sequence.
pub fn hankel<S: Scalar>(c: &MomentSequence<S>, k: usize, n: usize, barred: bool) -> Result<S> {
    hankel_slice(&c.values, k, n, barred)
}

/// Extremal values `(c_k^-, c_k^+)` of the `k`-th moment given `c_0..c_{k-1}`.
///
/// The lower bound makes `H_{j+1}^(0)` (k = 2j) or `H_{j+1}^(1)` (k = 2j+1)
/// vanish; the upper bound makes `Hbar_j^(1)` or `Hbar_{j+1}^(0)` vanish.
/// Each determinant is affine in its corner entry, so the root is found from
/// two evaluations.
pub fn moment_bounds<S: Scalar>(c: &MomentSequence<S>, k: usize) -> Result<(S, S)> {
    if k == 0 {
        return Err(DesignError::InvalidSpec("moment bounds start at k = 1".into()));
    }
    moment_slice(&c.values, k - 1)?;
    let j = k / 2;
    let (lower, upper) = if k % 2 == 0 {
        ((j + 1, 0, false), (j, 1, true))
    } else {
        ((j + 1, 1, false), (j + 1, 0, true))
    };
    let root = |(size, shift, barred): (usize, usize, bool)| -> Result<S> {
        let mut v: Vec<S> = c.values[..k].to_vec();
        v.push(S::zero());
        let d0 = hankel_slice(&v, size, shift, barred)?;
        v[k] = S::one();
        let d1 = hankel_slice(&v, size, shift, barred)?;
        let slope = d1 - d0.clone();
        if slope.is_zero() {
            return Err(DesignError::BoundaryMomentPoint { index: k });
        }
        Ok(-d0 / slope)
    };
    let lo = root(lower)?;
    let hi = root(upper)?;
    let gap_tol = if S::EXACT { 0.0 } else { 1e-14 };
    if (hi.clone() - lo.clone()).near_zero(gap_tol) || hi < lo {
        return Err(DesignError::BoundaryMomentPoint { index: k });
    }
    Ok((lo, hi))
}

fn classify<S: Scalar>(p: S, k: usize) -> Result<std::result::Result<S, Terminal>> {
    let tol = if S::EXACT { 0.0 } else { TERMINAL_TOL };
    if p < -S::from_real(tol) || p > S::one() + S::from_real(tol) {
        return Err(DesignError::InvalidMomentSequence(format!(
            "p_{k} = {} outside [0, 1]",
            p.to_real()
        )));
    }
    if p.near_zero(tol) {
        Ok(Err(Terminal::Zero))
    } else if (S::one() - p.clone()).near_zero(tol) {
        Ok(Err(Terminal::One))
    } else {
        Ok(Ok(p))
    }
}

/// Canonical moments from Hankel determinant ratios:
/// `p_{2k-1} = H_k^(1) Hbar_{k-1}^(0) / (H_k^(0) Hbar_{k-1}^(1))` and
/// `p_{2k} = H_{k+1}^(0) Hbar_{k-1}^(1) / (H_k^(1) Hbar_k^(0))`.
///
/// Stops at the terminal index or when the moments run out.
pub fn moments_to_canonical<S: Scalar>(c: &MomentSequence<S>) -> Result<CanonicalSequence<S>> {
    let mut interior = Vec::new();
    for k in 1..=c.max_index() {
        let (num, den) = if k % 2 == 1 {
            let j = k.div_ceil(2);
            (
                hankel(c, j, 1, false)? * hankel(c, j - 1, 0, true)?,
                hankel(c, j, 0, false)? * hankel(c, j - 1, 1, true)?,
            )
        } else {
            let j = k / 2;
            (
                hankel(c, j + 1, 0, false)? * hankel(c, j - 1, 1, true)?,
                hankel(c, j, 1, false)? * hankel(c, j, 0, true)?,
            )
        };
        if den <= S::zero() {
            return Err(DesignError::InvalidMomentSequence(format!(
                "non-positive Hankel denominator at p_{k}"
            )));
        }
        match classify(num / den, k)? {
            Ok(p) => interior.push(p),
            Err(t) => return CanonicalSequence::new(interior, Some(t)),
        }
    }
    CanonicalSequence::new(interior, None)
}

/// Canonical moments straight from the definition
/// `p_k = (c_k - c_k^-) / (c_k^+ - c_k^-)`.
pub fn moments_to_canonical_by_bounds<S: Scalar>(
    c: &MomentSequence<S>,
) -> Result<CanonicalSequence<S>> {
    let mut interior = Vec::new();
    for k in 1..=c.max_index() {
        let (lo, hi) = moment_bounds(c, k)?;
        let p = (c.values[k].clone() - lo.clone()) / (hi - lo);
        match classify(p, k)? {
            Ok(p) => interior.push(p),
            Err(t) => return CanonicalSequence::new(interior, Some(t)),
        }
    }
    CanonicalSequence::new(interior, None)
}

/// `zeta_1 = p_1`, `zeta_k = (1 - p_{k-1}) p_k`.
pub fn canonical_to_zeta<S: Scalar>(p: &CanonicalSequence<S>) -> ZetaSequence<S> {
    let values = p.values();
    let mut out = Vec::with_capacity(values.len());
    let mut prev = S::zero();
    for v in values {
        out.push((S::one() - prev) * v.clone());
        prev = v;
    }
    ZetaSequence { values: out, terminated: p.is_terminated() }
}

/// Inverse of [`canonical_to_zeta`]: `p_1 = zeta_1`, `p_k = zeta_k / (1 - p_{k-1})`.
pub fn zeta_to_canonical<S: Scalar>(z: &ZetaSequence<S>) -> Result<CanonicalSequence<S>> {
    let tol = if S::EXACT { 0.0 } else { TERMINAL_TOL };
    let mut interior: Vec<S> = Vec::with_capacity(z.values.len());
    let mut prev = S::zero();
    for (i, zeta) in z.values.iter().enumerate() {
        let k = i + 1;
        let denom = S::one() - prev.clone();
        let p = if k == 1 { zeta.clone() } else { zeta.clone() / denom };
        if p < -S::from_real(tol) || p > S::one() + S::from_real(tol) {
            return Err(DesignError::InvalidZeta { index: k });
        }
        let terminal = if p.near_zero(tol) {
            Some(Terminal::Zero)
        } else if (S::one() - p.clone()).near_zero(tol) {
            Some(Terminal::One)
        } else {
            None
        };
        if let Some(t) = terminal {
            let rest_zero = z.values[k..].iter().all(|v| v.near_zero(tol));
            if !rest_zero {
                return Err(DesignError::InvalidZeta { index: k + 1 });
            }
            return CanonicalSequence::new(interior, Some(t));
        }
        interior.push(p.clone());
        prev = p;
    }
    CanonicalSequence::new(interior, None)
}

/// Canonical moments of a measure on `[0, 1]` from its recurrence
/// coefficients, found by the Stieltjes procedure on the atoms. Unlike the
/// route through ordinary moments this stays accurate in float mode.
pub fn measure_to_canonical<S: Scalar>(mu: &DesignMeasure<S>) -> Result<CanonicalSequence<S>> {
    if mu.domain() != Domain::UnitInterval {
        return Err(DesignError::InvalidMeasure("expected a measure on [0, 1]".into()));
    }
    let n = mu.len();
    let xs = mu.support();
    let ws = mu.weights();
    let inner = |a: &[S], b: &[S], xw: bool| -> S {
        (0..n)
            .map(|i| {
                let v = ws[i].clone() * a[i].clone() * b[i].clone();
                if xw { v * xs[i].clone() } else { v }
            })
            .fold(S::zero(), |acc, v| acc + v)
    };
    let mut prev = vec![S::zero(); n];
    let mut cur = vec![S::one(); n];
    let mut norm_prev = S::one();
    let mut interior = Vec::new();
    let mut p_prev = S::zero();
    let mut zeta_prev = S::zero();
    let mut push = |zeta: S, k: usize, interior: &mut Vec<S>| -> Result<Option<Terminal>> {
        let p = if k == 1 { zeta } else { zeta / (S::one() - p_prev.clone()) };
        match classify(p, k)? {
            Ok(p) => {
                p_prev = p.clone();
                interior.push(p);
                Ok(None)
            }
            Err(t) => Ok(Some(t)),
        }
    };
    for k in 0..n {
        let norm = inner(&cur, &cur, false);
        let alpha = inner(&cur, &cur, true) / norm.clone();
        if k > 0 {
            let beta = norm.clone() / norm_prev.clone();
            let zeta = beta.clone() / zeta_prev.clone();
            if let Some(t) = push(zeta.clone(), 2 * k, &mut interior)? {
                return CanonicalSequence::new(interior, Some(t));
            }
            zeta_prev = alpha.clone() - zeta;
            if let Some(t) = push(zeta_prev.clone(), 2 * k + 1, &mut interior)? {
                return CanonicalSequence::new(interior, Some(t));
            }
            let next: Vec<S> = (0..n)
                .map(|i| (xs[i].clone() - alpha.clone()) * cur[i].clone() - beta.clone() * prev[i].clone())
                .collect();
            prev = std::mem::replace(&mut cur, next);
        } else {
            zeta_prev = alpha.clone();
            if let Some(t) = push(alpha.clone(), 1, &mut interior)? {
                return CanonicalSequence::new(interior, Some(t));
            }
            let next: Vec<S> = (0..n).map(|i| xs[i].clone() - alpha.clone()).collect();
            prev = std::mem::replace(&mut cur, next);
        }
        norm_prev = norm;
    }
    CanonicalSequence::new(interior, Some(Terminal::Zero))
}

/// Three-term recurrence coefficients of the monic orthogonal polynomials,
/// `x P_k = P_{k+1} + alpha_k P_k + beta_k P_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence<S> {
    /// `alpha_0, alpha_1, ...`
    pub alpha: Vec<S>,
    /// `beta_1, beta_2, ...`
    pub beta: Vec<S>,
}

/// Recurrence coefficients from the first `count` zetas:
/// `alpha_0 = zeta_1`, `alpha_k = zeta_{2k} + zeta_{2k+1}`,
/// `beta_k = zeta_{2k-1} zeta_{2k}`. Entries needing zetas past `count` are
/// set to zero; they do not influence `c_0..c_count`.
pub fn recurrence_from_zeta<S: Scalar>(z: &ZetaSequence<S>, count: usize) -> Result<Recurrence<S>> {
    let zeta = z.padded(count)?;
    let at = |k: usize| if k == 0 || k > count { S::zero() } else { zeta[k - 1].clone() };
    let size = count / 2 + 1;
    let alpha = (0..size).map(|k| at(2 * k) + at(2 * k + 1)).collect();
    let beta = (1..=size).map(|k| at(2 * k - 1) * at(2 * k)).collect();
    Ok(Recurrence { alpha, beta })
}

/// Moments `c_0..c_max` of the measure with canonical moments `p`, read off
/// as the leading entry of powers of the recurrence operator.
pub fn canonical_to_moments<S: Scalar>(
    p: &CanonicalSequence<S>,
    max: usize,
) -> Result<MomentSequence<S>> {
    let rec = recurrence_from_zeta(&canonical_to_zeta(p), max)?;
    let n = rec.alpha.len() + 1;
    // Coordinates of x^k in the orthogonal basis; c_k is the P_0 coordinate.
    let mut coords = vec![S::zero(); n];
    coords[0] = S::one();
    let mut values = Vec::with_capacity(max + 1);
    values.push(S::one());
    for _ in 0..max {
        let mut next = vec![S::zero(); n];
        for j in 0..n {
            let mut v = S::zero();
            if j > 0 {
                v = v + coords[j - 1].clone();
            }
            if j < rec.alpha.len() {
                v = v + rec.alpha[j].clone() * coords[j].clone();
            }
            if j + 1 < n && j < rec.beta.len() {
                v = v + rec.beta[j].clone() * coords[j + 1].clone();
            }
            next[j] = v;
        }
        coords = next;
        values.push(coords[0].clone());
    }
    Ok(MomentSequence { domain: Domain::UnitInterval, values })
}

/// `H_m^(0) = prod_{k=1}^{m-1} (zeta_{2k-1} zeta_{2k})^{m-k}`.
pub fn hankel_product<S: Scalar>(p: &CanonicalSequence<S>, m: usize) -> Result<S> {
    if m <= 1 {
        return Ok(S::one());
    }
    let z = canonical_to_zeta(p).padded(2 * m - 2)?;
    Ok((1..m).fold(S::one(), |acc, k| {
        acc * powi(&(z[2 * k - 2].clone() * z[2 * k - 1].clone()), m - k)
    }))
}

/// The same product written in canonical moments:
/// `prod_j (1 - p_{2j})^{m-j-1} p_{2j}^{m-j} * prod_j ((1 - p_{2j-1}) p_{2j-1})^{m-j}`.
pub fn hankel_product_canonical<S: Scalar>(p: &CanonicalSequence<S>, m: usize) -> Result<S> {
    if m <= 1 {
        return Ok(S::one());
    }
    let need = 2 * m - 2;
    let at = |k: usize| -> Result<S> {
        match p.get(k) {
            Some(v) => Ok(v),
            None if p.is_terminated() => Ok(S::zero()),
            None => Err(DesignError::InsufficientDepth { needed: need, available: p.depth() }),
        }
    };
    let mut acc = S::one();
    for j in 1..m {
        let even = at(2 * j)?;
        let odd = at(2 * j - 1)?;
        acc = acc
            * powi(&(S::one() - even.clone()), m - j - 1)
            * powi(&even, m - j)
            * powi(&((S::one() - odd.clone()) * odd), m - j);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    #[test]
    fn stieltjes_path_agrees_with_hankel_path() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for _ in 0..200 {
            let mu = crate::check::random_rational_measure(&mut rng, 6);
            let direct = moments_to_canonical(&mu.moments(2 * mu.len() + 1)).unwrap();
            assert_eq!(measure_to_canonical(&mu).unwrap(), direct, "{mu:?}");
        }
        let two = DesignMeasure::new(Domain::UnitInterval, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(measure_to_canonical(&two).unwrap().values(), vec![0.5, 1.0]);
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn rat_moments(values: &[(i64, i64)]) -> MomentSequence<Rational> {
        MomentSequence::new(Domain::UnitInterval, values.iter().map(|&(n, d)| q(n, d)).collect())
            .unwrap()
    }

    #[test]
    fn hankel_examples() {
        let c = rat_moments(&[(1, 1), (1, 2), (1, 2)]);
        assert_eq!(hankel(&c, 1, 0, false).unwrap(), q(1, 1));
        assert_eq!(hankel(&c, 2, 0, false).unwrap(), q(1, 4));
        assert_eq!(hankel(&c, 1, 0, true).unwrap(), q(1, 2));
        assert_eq!(hankel(&c, 0, 5, true).unwrap(), q(1, 1));
        assert!(matches!(
            hankel(&c, 2, 1, false),
            Err(DesignError::InsufficientMoments { needed: 3, .. })
        ));
    }

    #[test]
    fn moment_bounds_examples() {
        let c = rat_moments(&[(1, 1)]);
        assert_eq!(moment_bounds(&c, 1).unwrap(), (q(0, 1), q(1, 1)));
        let c = rat_moments(&[(1, 1), (1, 2)]);
        assert_eq!(moment_bounds(&c, 2).unwrap(), (q(1, 4), q(1, 2)));
        let c = rat_moments(&[(1, 1), (1, 1)]);
        assert!(matches!(moment_bounds(&c, 2), Err(DesignError::BoundaryMomentPoint { index: 2 })));
    }

    /// Brute force: the largest and smallest c_2 over two-atom measures on a
    /// grid with mean 1/2 should approach the linear-solve bounds.
    #[test]
    fn moment_bounds_against_discretized_extremes() {
        let n = 200;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in i + 1..=n {
                let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                if a > 0.5 || b < 0.5 {
                    continue;
                }
                // weight on b that puts the mean at 1/2
                let w = (0.5 - a) / (b - a);
                let c2 = (1.0 - w) * a * a + w * b * b;
                lo = lo.min(c2);
                hi = hi.max(c2);
            }
        }
        let c = MomentSequence::new(Domain::UnitInterval, vec![1.0, 0.5]).unwrap();
        let (bl, bh) = moment_bounds(&c, 2).unwrap();
        assert!((lo - bl).abs() < 1e-12 && (hi - bh).abs() < 1e-12);

        // Third moment with c_1 = 1/2, c_2 = 1/3. The extremes are attained by
        // two-atom measures, one of them having an atom at an endpoint.
        let c = MomentSequence::new(Domain::UnitInterval, vec![1.0, 0.5, 1.0 / 3.0]).unwrap();
        let (bl, bh) = moment_bounds(&c, 3).unwrap();
        let mut lo3 = f64::INFINITY;
        let mut hi3 = f64::NEG_INFINITY;
        let n = 1000;
        for i in 0..=n {
            for j in i + 1..=n {
                let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                // two atoms matching c_1 and c_2 exactly: solve for weight and check
                let w = (0.5 - a) / (b - a);
                if !(0.0..=1.0).contains(&w) {
                    continue;
                }
                let c2 = (1.0 - w) * a * a + w * b * b;
                if (c2 - 1.0 / 3.0).abs() > 5e-4 {
                    continue;
                }
                let c3 = (1.0 - w) * a.powi(3) + w * b.powi(3);
                lo3 = lo3.min(c3);
                hi3 = hi3.max(c3);
            }
        }
        assert!((bl - lo3).abs() < 2e-3, "{bl} vs {lo3}");
        assert!((bh - hi3).abs() < 2e-3, "{bh} vs {hi3}");
    }

    #[test]
    fn moments_to_canonical_examples() {
        let p = moments_to_canonical(&rat_moments(&[(1, 1), (1, 2), (1, 2)])).unwrap();
        assert_eq!(p.values(), vec![q(1, 2), q(1, 1)]);
        assert_eq!(p.terminal(), Some(Terminal::One));

        let p = moments_to_canonical(&rat_moments(&[(1, 1), (1, 1)])).unwrap();
        assert_eq!(p.values(), vec![q(1, 1)]);
        assert!(p.interior().is_empty());
    }

    #[test]
    fn three_point_measure_canonical_moments() {
        let mu = DesignMeasure::new(
            Domain::UnitInterval,
            vec![q(0, 1), q(1, 2), q(1, 1)],
            vec![q(1, 3), q(1, 3), q(1, 3)],
        )
        .unwrap();
        let c = mu.moments(4);
        let by_ratio = moments_to_canonical(&c).unwrap();
        let by_bounds = moments_to_canonical_by_bounds(&c).unwrap();
        assert_eq!(by_ratio, by_bounds);
        // c_2 = 5/12 sits two thirds of the way from 1/4 to 1/2
        assert_eq!(by_ratio.values(), vec![q(1, 2), q(2, 3), q(1, 2), q(1, 1)]);
    }

    #[test]
    fn zeta_examples() {
        let p = CanonicalSequence::new(vec![q(1, 2); 4], None).unwrap();
        assert_eq!(canonical_to_zeta(&p).values, vec![q(1, 2), q(1, 4), q(1, 4), q(1, 4)]);
        let p = CanonicalSequence::new(vec![q(1, 2)], Some(Terminal::One)).unwrap();
        assert_eq!(canonical_to_zeta(&p).values, vec![q(1, 2), q(1, 2)]);
        let p = CanonicalSequence::<Rational>::new(vec![], Some(Terminal::One)).unwrap();
        assert_eq!(canonical_to_zeta(&p).values, vec![q(1, 1)]);
    }

    #[test]
    fn zeta_to_canonical_examples() {
        let z = ZetaSequence { values: vec![q(1, 2), q(1, 4), q(1, 4)], terminated: false };
        assert_eq!(zeta_to_canonical(&z).unwrap().values(), vec![q(1, 2); 3]);
        let z = ZetaSequence { values: vec![q(1, 2), q(1, 2)], terminated: false };
        let p = zeta_to_canonical(&z).unwrap();
        assert_eq!(p.values(), vec![q(1, 2), q(1, 1)]);
        assert!(p.is_terminated());
        let z = ZetaSequence { values: vec![q(1, 2), q(3, 4)], terminated: false };
        assert_eq!(zeta_to_canonical(&z), Err(DesignError::InvalidZeta { index: 2 }));
        let z = ZetaSequence { values: vec![q(1, 2), q(1, 2), q(1, 5)], terminated: false };
        assert!(zeta_to_canonical(&z).is_err());
    }

    #[test]
    fn canonical_to_moments_examples() {
        let p = CanonicalSequence::new(vec![q(1, 2)], Some(Terminal::One)).unwrap();
        assert_eq!(canonical_to_moments(&p, 3).unwrap().values, vec![q(1, 1), q(1, 2), q(1, 2), q(1, 2)]);
        let p = CanonicalSequence::<Rational>::new(vec![], Some(Terminal::One)).unwrap();
        assert_eq!(canonical_to_moments(&p, 2).unwrap().values, vec![q(1, 1); 3]);
        let p = CanonicalSequence::new(vec![q(1, 2)], None).unwrap();
        assert!(matches!(
            canonical_to_moments(&p, 2),
            Err(DesignError::InsufficientDepth { .. })
        ));
    }

    #[test]
    fn hankel_product_examples() {
        let p = CanonicalSequence::new(vec![q(1, 2)], Some(Terminal::One)).unwrap();
        assert_eq!(hankel_product(&p, 2).unwrap(), q(1, 4));
        assert_eq!(hankel_product(&p, 1).unwrap(), q(1, 1));
        let p = CanonicalSequence::new(vec![q(3, 7)], None).unwrap();
        assert!(hankel_product(&p, 2).is_err());
    }

    #[test]
    fn hankel_product_matches_determinant_depth_six() {
        let p = CanonicalSequence::new(
            vec![q(1, 3), q(5, 7), q(2, 9), q(1, 2), q(4, 5), q(3, 11)],
            None,
        )
        .unwrap();
        let c = canonical_to_moments(&p, 6).unwrap();
        let direct = hankel(&c, 4, 0, false).unwrap();
        assert_eq!(hankel_product(&p, 4).unwrap(), direct);
        assert_eq!(hankel_product_canonical(&p, 4).unwrap(), direct);
    }

    #[test]
    fn symmetric_measures_have_half_odd_canonical_moments() {
        let xi = DesignMeasure::new(
            Domain::SymmetricInterval,
            vec![-0.9, -0.3, 0.0, 0.3, 0.9],
            vec![0.15, 0.2, 0.3, 0.2, 0.15],
        )
        .unwrap();
        let shifted: Vec<f64> = xi.support().iter().map(|x| (x + 1.0) / 2.0).collect();
        let mu = DesignMeasure::new(Domain::UnitInterval, shifted, xi.weights().to_vec()).unwrap();
        let p = moments_to_canonical(&mu.moments(8)).unwrap();
        for k in (1..=p.depth()).step_by(2) {
            assert!((p.get(k).unwrap() - 0.5).abs() < 1e-10, "p_{k} = {:?}", p.get(k));
        }
    }

    fn arb_rational_canonical() -> impl Strategy<Value = CanonicalSequence<Rational>> {
        (prop::collection::vec(1i64..20, 1..7), prop::option::of(any::<bool>())).prop_map(
            |(nums, term)| {
                let interior = nums.into_iter().map(|n| q(n, 20)).collect();
                let terminal = term.map(|t| if t { Terminal::One } else { Terminal::Zero });
                CanonicalSequence::new(interior, terminal).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn canonical_moment_round_trip_exact(p in arb_rational_canonical()) {
            let c = canonical_to_moments(&p, p.depth()).unwrap();
            let back = moments_to_canonical(&c).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(&moments_to_canonical_by_bounds(&c).unwrap(), &p);
            let m = p.depth() / 2 + 1;
            prop_assert_eq!(hankel_product(&p, m).unwrap(), hankel(&c, m, 0, false).unwrap());
        }

        #[test]
        fn zeta_round_trip(p in arb_rational_canonical()) {
            prop_assert_eq!(zeta_to_canonical(&canonical_to_zeta(&p)).unwrap(), p);
        }
    }
}
