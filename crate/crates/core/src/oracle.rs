//! Slow reference computations.
//!
//! Everything here works from determinants of generalized moment matrices
//! or from explicit information matrices, never from the recurrences in
//! [`crate::toda`], so the two can be checked against each other.

use nalgebra::{DMatrix, DVector};

use crate::canonical::hankel_slice;
use crate::error::{DesignError, Result};
use crate::measure::{DesignMeasure, Domain, MomentSequence};
use crate::scalar::{powi, Scalar};
use crate::toda::{gen_moments, ModelSpec, PriorMultiset};

/// A generalized Hankel determinant `H_k^(T + extra)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenHankelSpec {
    pub t: PriorMultiset,
    pub k: usize,
    pub extra: Vec<f64>,
}

impl GenHankelSpec {
    pub fn new(t: PriorMultiset, k: usize) -> Self {
        GenHankelSpec { t, k, extra: Vec::new() }
    }

    pub fn with_extra(t: PriorMultiset, k: usize, extra: &[f64]) -> Self {
        GenHankelSpec { t, k, extra: extra.to_vec() }
    }
}

/// `|c_{i+j}^(T)|_{i,j<k}`.
pub fn gen_hankel<S: Scalar>(c: &MomentSequence<S>, spec: &GenHankelSpec) -> Result<S> {
    if spec.k == 0 {
        return Ok(S::one());
    }
    let t = spec.t.with(&spec.extra)?;
    let g = gen_moments(c, &t)?;
    hankel_slice(&g, spec.k, 0, false)
}

fn h<S: Scalar>(c: &MomentSequence<S>, t: &PriorMultiset, extra: &[f64], k: usize) -> Result<S> {
    gen_hankel(c, &GenHankelSpec::with_extra(t.clone(), k, extra))
}

fn ratio<S: Scalar>(num: S, den: S, what: &str) -> Result<S> {
    if den.near_zero(0.0) {
        return Err(DesignError::ZeroDenominator(what.to_string()));
    }
    Ok(num / den)
}

/// `zeta_n^(T, s)` from its determinant definition:
/// `zeta_{2k} = H_{k+1}^(T) H_{k-1}^(T+s) / (H_k^(T+s) H_k^(T))`,
/// `zeta_{2k+1} = H_{k+1}^(T+s) H_k^(T) / (H_{k+1}^(T) H_k^(T+s))`.
pub fn gen_zeta_det<S: Scalar>(
    c: &MomentSequence<S>,
    t: &PriorMultiset,
    s: f64,
    n: usize,
) -> Result<S> {
    if n == 0 {
        return Ok(S::zero());
    }
    let k = n / 2;
    let (num, den) = if n % 2 == 0 {
        (
            h(c, t, &[], k + 1)? * h(c, t, &[s], k - 1)?,
            h(c, t, &[s], k)? * h(c, t, &[], k)?,
        )
    } else {
        (
            h(c, t, &[s], k + 1)? * h(c, t, &[], k)?,
            h(c, t, &[], k + 1)? * h(c, t, &[s], k)?,
        )
    };
    ratio(num, den, &format!("zeta_{n}"))
}

/// Generalized canonical moment `p_n^(T)` in the form that satisfies
/// `zeta_n^(T, 0) = (1 - p_{n-1}^(T)) p_n^(T)`:
/// `p_{2k} = -H_{k+1}^(T) H_{k-1}^(T+{0,1}) / (H_k^(T+{0}) H_k^(T+{1}))`,
/// `p_{2k+1} = H_{k+1}^(T+{0}) H_k^(T+{1}) / (H_{k+1}^(T) H_k^(T+{0,1}))`.
pub fn gen_canonical_det<S: Scalar>(c: &MomentSequence<S>, t: &PriorMultiset, n: usize) -> Result<S> {
    gen_canonical_signed(c, t, n, 1.0, false)
}

/// The same ratios with the augmentation `-1` and a minus sign on both
/// parities. Kept to document that this variant does not satisfy the
/// `zeta` relation.
pub fn gen_canonical_det_alt<S: Scalar>(
    c: &MomentSequence<S>,
    t: &PriorMultiset,
    n: usize,
) -> Result<S> {
    gen_canonical_signed(c, t, n, -1.0, true)
}

fn gen_canonical_signed<S: Scalar>(
    c: &MomentSequence<S>,
    t: &PriorMultiset,
    n: usize,
    a: f64,
    odd_negative: bool,
) -> Result<S> {
    if n == 0 {
        return Err(DesignError::InvalidSpec("canonical moments start at 1".into()));
    }
    let k = n / 2;
    if n % 2 == 0 {
        let num = h(c, t, &[], k + 1)? * h(c, t, &[0.0, a], k - 1)?;
        let den = h(c, t, &[0.0], k)? * h(c, t, &[a], k)?;
        Ok(-ratio(num, den, &format!("p_{n}"))?)
    } else {
        let num = h(c, t, &[0.0], k + 1)? * h(c, t, &[a], k)?;
        let den = h(c, t, &[], k + 1)? * h(c, t, &[0.0, a], k)?;
        let v = ratio(num, den, &format!("p_{n}"))?;
        Ok(if odd_negative { -v } else { v })
    }
}

/// Regression vector `prod_j (x - beta_j)^{b_j} (1, x, ..., x^{m-1})`.
pub fn basis<S: Scalar>(x: &S, spec: &ModelSpec) -> Vec<S> {
    let mut scale = S::one();
    for (beta, &b) in spec.beta.iter().zip(&spec.b) {
        scale = scale * powi(&(x.clone() - S::from_real(*beta)), b);
    }
    let mut out = Vec::with_capacity(spec.m);
    let mut power = scale;
    for _ in 0..spec.m {
        out.push(power.clone());
        power = power * x.clone();
    }
    out
}

/// `sum_i w_i f(x_i) f(x_i)^T`.
pub fn info_matrix<S: Scalar>(mu: &DesignMeasure<S>, spec: &ModelSpec) -> Vec<Vec<S>> {
    let m = spec.m;
    let mut mat = vec![vec![S::zero(); m]; m];
    for (x, w) in mu.atoms() {
        let f = basis(x, spec);
        for i in 0..m {
            for j in 0..m {
                mat[i][j] = mat[i][j].clone() + w.clone() * f[i].clone() * f[j].clone();
            }
        }
    }
    mat
}

pub fn info_matrix_det<S: Scalar>(mu: &DesignMeasure<S>, spec: &ModelSpec) -> S {
    S::determinant(info_matrix(mu, spec))
}

/// Outcome of [`brute_force_design`].
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub measure: DesignMeasure<f64>,
    pub det: f64,
    /// Determinant after every weight-optimization pass.
    pub history: Vec<f64>,
}

const WEIGHT_TOL: f64 = 1e-12;
const MAX_WEIGHT_PASSES: usize = 200_000;

fn weighted_det(points: &[Vec<f64>], weights: &[f64]) -> f64 {
    let m = points[0].len();
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for (f, &w) in points.iter().zip(weights) {
        let v = DVector::from_column_slice(f);
        mat += w * &v * v.transpose();
    }
    mat.determinant()
}

/// Multiplicative weight iteration `w_i <- w_i f_i^T M^-1 f_i / m`.
fn optimize_weights(points: &[Vec<f64>], weights: &mut [f64]) -> Option<f64> {
    let m = points[0].len();
    let mut det = weighted_det(points, weights);
    for _ in 0..MAX_WEIGHT_PASSES {
        let mut mat = DMatrix::<f64>::zeros(m, m);
        for (f, &w) in points.iter().zip(weights.iter()) {
            let v = DVector::from_column_slice(f);
            mat += w * &v * v.transpose();
        }
        let inv = mat.try_inverse()?;
        for (f, w) in points.iter().zip(weights.iter_mut()) {
            let v = DVector::from_column_slice(f);
            *w *= (v.transpose() * &inv * &v)[(0, 0)] / m as f64;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let next = weighted_det(points, weights);
        let change = (next - det).abs() / det.abs().max(f64::MIN_POSITIVE);
        det = next;
        if change < WEIGHT_TOL {
            break;
        }
    }
    Some(det)
}

/// Exchange search for the D-optimal design on a uniform grid of `[0, 1]`.
///
/// Starts from `support_count` equispaced grid points, alternating weight
/// optimization with the best single-point exchange until no exchange
/// improves the determinant.
pub fn brute_force_design(
    spec: &ModelSpec,
    grid_size: usize,
    support_count: usize,
) -> Result<BruteForceResult> {
    spec.validate()?;
    if support_count < spec.m || grid_size < support_count || grid_size < 2 {
        return Err(DesignError::InvalidSpec(format!(
            "need grid_size >= support_count >= m, got {grid_size}, {support_count}, {}",
            spec.m
        )));
    }
    let grid: Vec<f64> = (0..grid_size).map(|g| g as f64 / (grid_size - 1) as f64).collect();
    let features: Vec<Vec<f64>> = grid.iter().map(|x| basis(x, spec)).collect();
    let mut idx: Vec<usize> = if support_count == 1 {
        vec![grid_size - 1]
    } else {
        (0..support_count)
            .map(|i| (i * (grid_size - 1) + (support_count - 1) / 2) / (support_count - 1))
            .collect()
    };
    idx.dedup();
    let mut weights = vec![1.0 / idx.len() as f64; idx.len()];
    let pts = |idx: &[usize]| idx.iter().map(|&g| features[g].clone()).collect::<Vec<_>>();
    if weighted_det(&pts(&idx), &weights) <= 0.0 {
        return Err(DesignError::SingularInformationMatrix);
    }
    let mut history = Vec::new();
    let mut det = optimize_weights(&pts(&idx), &mut weights)
        .ok_or(DesignError::SingularInformationMatrix)?;
    history.push(det);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..idx.len() {
            for g in 0..grid_size {
                if idx.contains(&g) {
                    continue;
                }
                let mut trial = idx.clone();
                trial[slot] = g;
                let d = weighted_det(&pts(&trial), &weights);
                if d > best.map_or(det, |b| b.2) {
                    best = Some((slot, g, d));
                }
            }
        }
        let Some((slot, g, d)) = best else { break };
        if d <= det * (1.0 + 1e-14) {
            break;
        }
        idx[slot] = g;
        let mut trial_weights = weights.clone();
        match optimize_weights(&pts(&idx), &mut trial_weights) {
            Some(next) if next >= d => {
                weights = trial_weights;
                det = next;
            }
            _ => det = d,
        }
        history.push(det);
    }
    let support: Vec<f64> = idx.iter().map(|&g| grid[g]).collect();
    let measure = DesignMeasure::normalized(Domain::UnitInterval, support, weights)?;
    Ok(BruteForceResult { det: info_matrix_det(&measure, spec), measure, history })
}

/// Worst-case standardized bias over `|psi| <= |x|^alpha`, found by
/// enumerating the sign of `psi` on every atom of the symmetric design `xi`:
/// `max r^T B^-1 r` with `B = (c_{i+j}^(T'))` and
/// `r = sum_i w_i (1, .., x_i^{m-1}) x_i^m psi(x_i) prod_j (x_i - beta_j)(x_i + beta_j)`.
pub fn robust_sup_oracle(
    xi: &DesignMeasure<f64>,
    m: usize,
    alpha: u32,
    beta: &[f64],
    b: &[usize],
) -> Result<f64> {
    let (bmat, feats) = robust_parts(xi, m, alpha, beta, b)?;
    let n = feats.len();
    if n > 20 {
        return Err(DesignError::InvalidSpec("too many atoms for sign enumeration".into()));
    }
    let mut best = 0.0_f64;
    for mask in 0u32..(1 << n) {
        let mut r = DVector::<f64>::zeros(m);
        for (i, f) in feats.iter().enumerate() {
            let sign = if mask & (1 << i) != 0 { -1.0 } else { 1.0 };
            r += sign * f;
        }
        best = best.max((r.transpose() * &bmat * &r)[(0, 0)]);
    }
    Ok(best)
}

/// `r^T B^-1 r` at `psi(x) = x^alpha` with the same `r`, `B` as
/// [`robust_sup_oracle`].
pub fn robust_quadratic_oracle(
    xi: &DesignMeasure<f64>,
    m: usize,
    alpha: u32,
    beta: &[f64],
    b: &[usize],
) -> Result<f64> {
    let (bmat, feats) = robust_parts(xi, m, alpha, beta, b)?;
    let mut r = DVector::<f64>::zeros(m);
    for ((x, _), f) in xi.atoms().zip(&feats) {
        let sign = if alpha % 2 == 1 && *x < 0.0 { -1.0 } else { 1.0 };
        r += sign * f;
    }
    Ok((r.transpose() * &bmat * &r)[(0, 0)])
}

/// `B^-1` and the per-atom contributions to `r` at `psi = |x|^alpha`.
fn robust_parts(
    xi: &DesignMeasure<f64>,
    m: usize,
    alpha: u32,
    beta: &[f64],
    b: &[usize],
) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
    let mut bmat = DMatrix::<f64>::zeros(m, m);
    let mut feats = Vec::new();
    for (&x, &w) in xi.support().iter().zip(xi.weights()) {
        let q: f64 = beta.iter().map(|bt| (x - bt) * (x + bt)).product();
        let weight: f64 = beta
            .iter()
            .zip(b)
            .map(|(&bt, &bj)| if bt == 0.0 { x.powi(2 * bj as i32) } else { ((x - bt) * (x + bt)).powi(2 * bj as i32) })
            .product();
        let v = DVector::from_fn(m, |i, _| x.powi(i as i32));
        bmat += w * weight * &v * v.transpose();
        feats.push(w * x.powi(m as i32) * x.abs().powi(alpha as i32) * q * v);
    }
    let inv = bmat.try_inverse().ok_or(DesignError::SingularInformationMatrix)?;
    Ok((inv, feats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{canonical_to_zeta, hankel, moments_to_canonical, CanonicalSequence};
    use crate::scalar::Rational;
    use crate::toda::multiset_from_model;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn sample_measure() -> DesignMeasure<Rational> {
        DesignMeasure::normalized(
            Domain::UnitInterval,
            vec![q(1, 7), q(2, 5), q(3, 4), q(9, 10), q(1, 20)],
            vec![q(1, 5), q(1, 3), q(1, 4), q(13, 60), q(1, 10)],
        )
        .unwrap()
    }

    fn set(entries: &[(f64, usize)]) -> PriorMultiset {
        PriorMultiset::from_entries(entries.iter().copied()).unwrap()
    }

    #[test]
    fn gen_hankel_reduces_to_plain_hankel() {
        let c = sample_measure().moments(10);
        for k in 1..=4 {
            assert_eq!(gen_hankel(&c, &GenHankelSpec::new(set(&[]), k)).unwrap(), hankel(&c, k, 0, false).unwrap());
            assert_eq!(
                gen_hankel(&c, &GenHankelSpec::new(set(&[(0.0, 1)]), k)).unwrap(),
                hankel(&c, k, 1, false).unwrap()
            );
        }
    }

    #[test]
    fn gen_hankel_two_elimination_orders() {
        // H_2^({2,2}) by explicit 2x2 expansion against the Bareiss path
        let c = sample_measure().moments(6);
        let g = gen_moments(&c, &set(&[(2.0, 2)])).unwrap();
        let expanded = g[0].clone() * g[2].clone() - g[1].clone() * g[1].clone();
        assert_eq!(gen_hankel(&c, &GenHankelSpec::new(set(&[(2.0, 2)]), 2)).unwrap(), expanded);
    }

    #[test]
    fn zeta_det_at_empty_stage_is_plain_zeta() {
        let c = sample_measure().moments(9);
        let p = moments_to_canonical(&c).unwrap();
        let z = canonical_to_zeta(&p);
        for n in 1..=z.values.len() {
            assert_eq!(gen_zeta_det(&c, &set(&[]), 0.0, n).unwrap(), z.values[n - 1]);
        }
        let t = set(&[(2.0, 1)]);
        let c0 = gen_moments(&c, &t).unwrap()[0].clone();
        let c0s = gen_moments(&c, &t.with(&[0.5]).unwrap()).unwrap()[0].clone();
        assert_eq!(gen_zeta_det(&c, &t, 0.5, 1).unwrap(), c0s / c0);
    }

    #[test]
    fn toda_relations_hold_on_determinant_tables() {
        let c = sample_measure().moments(14);
        let t = set(&[(2.0, 1)]);
        let (l1, l2) = (3.0, -1.0);
        let z = |t: &PriorMultiset, s: f64, n: usize| gen_zeta_det(&c, t, s, n).unwrap();
        let t1 = t.with(&[l1]).unwrap();
        let (rl1, rl2) = (Rational::from_real(l1), Rational::from_real(l2));
        for k in 0..3 {
            let lhs = z(&t1, l2, 2 * k) + z(&t1, l2, 2 * k + 1) + rl2.clone();
            let rhs = z(&t, l1, 2 * k + 1) + z(&t, l1, 2 * k + 2) + rl1.clone();
            assert_eq!(lhs, rhs);
            assert_eq!(
                z(&t1, l2, 2 * k + 1) * z(&t1, l2, 2 * k + 2),
                z(&t, l1, 2 * k + 2) * z(&t, l1, 2 * k + 3)
            );
            // shift between parameters, index aligned
            assert_eq!(
                z(&t, l1, 2 * k) + z(&t, l1, 2 * k + 1) + rl1.clone(),
                z(&t, l2, 2 * k) + z(&t, l2, 2 * k + 1) + rl2.clone()
            );
            assert_eq!(
                z(&t, l1, 2 * k + 1) * z(&t, l1, 2 * k + 2),
                z(&t, l2, 2 * k + 1) * z(&t, l2, 2 * k + 2)
            );
        }
    }

    #[test]
    fn shift_relation_with_offset_indices_fails() {
        let c = sample_measure().moments(12);
        let t = set(&[]);
        let z = |s: f64, n: usize| gen_zeta_det(&c, &t, s, n).unwrap();
        let lhs = z(3.0, 0) + z(3.0, 1) + q(3, 1);
        let rhs = z(-1.0, 1) + z(-1.0, 2) + q(-1, 1);
        assert_ne!(lhs, rhs);
    }

    #[test]
    fn generalized_canonical_moments_satisfy_zeta_relation() {
        let c = sample_measure().moments(14);
        for t in [set(&[]), set(&[(2.0, 2)]), set(&[(0.5, 2)])] {
            let p: Vec<Rational> = (1..=6).map(|n| gen_canonical_det(&c, &t, n).unwrap()).collect();
            assert_eq!(gen_zeta_det(&c, &t, 0.0, 1).unwrap(), p[0]);
            for n in 2..=6 {
                let z = gen_zeta_det(&c, &t, 0.0, n).unwrap();
                assert_eq!(z, (q(1, 1) - p[n - 2].clone()) * p[n - 1].clone(), "n = {n}");
            }
        }
        // the plain canonical moments are recovered at T = empty
        let plain = moments_to_canonical(&c).unwrap();
        for n in 1..=4 {
            assert_eq!(gen_canonical_det(&c, &set(&[]), n).unwrap(), plain.get(n).unwrap());
        }
        // the {-1}-augmented, doubly negated variant does not
        let alt = gen_canonical_det_alt(&c, &set(&[]), 1).unwrap();
        assert_ne!(alt, plain.get(1).unwrap());
    }

    #[test]
    fn info_matrix_examples() {
        let mu = DesignMeasure::new(Domain::UnitInterval, vec![q(0, 1), q(1, 1)], vec![q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(info_matrix_det(&mu, &ModelSpec::unconstrained(2)), q(1, 4));
        let mu = DesignMeasure::point_mass(Domain::UnitInterval, q(0, 1)).unwrap();
        assert_eq!(info_matrix_det(&mu, &ModelSpec::new(1, vec![2.0], vec![1]).unwrap()), q(4, 1));
    }

    #[test]
    fn info_matrix_equals_generalized_hankel() {
        let mu = sample_measure();
        for spec in [
            ModelSpec::new(3, vec![2.0], vec![1]).unwrap(),
            ModelSpec::new(2, vec![-1.0, 0.5], vec![1, 1]).unwrap(),
            ModelSpec::new(4, vec![3.0], vec![2]).unwrap(),
        ] {
            let t = multiset_from_model(&spec);
            let c = mu.moments(2 * spec.m - 2 + t.size());
            assert_eq!(info_matrix_det(&mu, &spec), gen_hankel(&c, &GenHankelSpec::new(t, spec.m)).unwrap());
        }
    }

    #[test]
    fn brute_force_classic_designs() {
        let r = brute_force_design(&ModelSpec::unconstrained(2), 101, 2).unwrap();
        assert_eq!(r.measure.support(), &[0.0, 1.0]);
        assert!((r.det - 0.25).abs() < 1e-12);
        // analytic maximum of p_1 (1 - p_1) p_2 over the canonical box
        let analytic = (0..=1000)
            .map(|i| {
                let p1 = i as f64 / 1000.0;
                p1 * (1.0 - p1)
            })
            .fold(0.0, f64::max);
        assert!((r.det - analytic).abs() < 1e-12);

        let r = brute_force_design(&ModelSpec::unconstrained(3), 201, 3).unwrap();
        for (x, e) in r.measure.support().iter().zip([0.0, 0.5, 1.0]) {
            assert!((x - e).abs() < 1e-3);
        }
        for w in r.measure.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-3);
        }
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn brute_force_with_prior_information() {
        let spec = ModelSpec::new(2, vec![2.0], vec![1]).unwrap();
        let r = brute_force_design(&spec, 201, 2).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-15)));
        // the weight (x - 2)^2 favours small x, so 0 is a support point
        assert_eq!(r.measure.support()[0], 0.0);
        assert!(r.det > 0.0);
    }

    #[test]
    fn canonical_sequences_from_oracle_measures_validate() {
        let c = sample_measure().moments(8);
        let p = moments_to_canonical(&c).unwrap();
        assert!(CanonicalSequence::new(p.interior().to_vec(), p.terminal()).is_ok());
    }

    #[test]
    fn robust_oracles_on_a_small_design() {
        let xi = DesignMeasure::new(Domain::SymmetricInterval, vec![-1.0, 0.0, 1.0], vec![0.25, 0.5, 0.25]).unwrap();
        // m = 1: r = sum w x psi(x), B = 1; the sup takes psi = sign(x)
        let sup = robust_sup_oracle(&xi, 1, 0, &[], &[]).unwrap();
        assert!((sup - 0.25).abs() < 1e-14);
        assert!(robust_quadratic_oracle(&xi, 1, 0, &[], &[]).unwrap().abs() < 1e-14);
    }
}
