//! Generalized moments and the Toda-stepping evaluation of `H_m^(T)`.
//!
//! For a multiset `T` the generalized moments are
//! `c_k^(T + {l}) = c_{k+1}^(T) - l c_k^(T)`, the moments of the signed measure
//! `prod_{t in T} (x - t) dmu`. The table `zeta^(T, s)` holds the LU factors of
//! that measure's Jacobi matrix shifted by `s`: odd entries are the pivots,
//! even entries the sub-diagonal of the unit lower factor. Two sweeps move
//! between tables: [`reparam_shift`] refactors at a new shift and
//! [`toda_step`] applies the Christoffel transform that appends the current
//! shift to `T`.

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_to_zeta, CanonicalSequence};
use crate::error::{DesignError, Result};
use crate::measure::MomentSequence;
use crate::scalar::{powi, Scalar};

/// Multiset of reals, kept in insertion order with multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorMultiset {
    entries: Vec<(f64, usize)>,
}

impl PriorMultiset {
    pub fn empty() -> Self {
        PriorMultiset::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (f64, usize)>) -> Result<Self> {
        let mut set = PriorMultiset::empty();
        for (value, mult) in entries {
            if mult == 0 {
                return Err(DesignError::InvalidSpec(format!("multiplicity of {value} is zero")));
            }
            set.insert(value, mult)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, value: f64, mult: usize) -> Result<()> {
        if !value.is_finite() {
            return Err(DesignError::InvalidSpec(format!("multiset value {value}")));
        }
        match self.entries.iter_mut().find(|(v, _)| *v == value) {
            Some(entry) => entry.1 += mult,
            None => self.entries.push((value, mult)),
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(f64, usize)] {
        &self.entries
    }

    pub fn multiplicity(&self, value: f64) -> usize {
        self.entries.iter().find(|(v, _)| *v == value).map_or(0, |e| e.1)
    }

    /// `|T|`, multiplicities counted.
    pub fn size(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every element repeated by multiplicity, ascending.
    pub fn sorted_elements(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .entries
            .iter()
            .flat_map(|&(value, mult)| std::iter::repeat_n(value, mult))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `T + {values}`.
    pub fn with(&self, values: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        for &v in values {
            out.insert(v, 1)?;
        }
        Ok(out)
    }
}

/// Polynomial regression of degree `m + S - 1` whose coefficients carry the
/// prior information that the regression function has a zero of order `b_j`
/// at `beta_j`, leaving `m` free parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m: usize,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub b: Vec<usize>,
}

impl ModelSpec {
    pub fn new(m: usize, beta: Vec<f64>, b: Vec<usize>) -> Result<Self> {
        let spec = ModelSpec { m, beta, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unconstrained(m: usize) -> Self {
        ModelSpec { m, beta: Vec::new(), b: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(DesignError::InvalidSpec("m must be at least 1".into()));
        }
        if self.beta.len() != self.b.len() {
            return Err(DesignError::InvalidSpec("beta and b differ in length".into()));
        }
        for (i, x) in self.beta.iter().enumerate() {
            if !x.is_finite() {
                return Err(DesignError::InvalidSpec(format!("beta_{i} is not finite")));
            }
            if self.beta[..i].contains(x) {
                return Err(DesignError::InvalidSpec(format!("beta value {x} repeated")));
            }
        }
        if self.b.contains(&0) {
            return Err(DesignError::InvalidSpec("every b_j must be positive".into()));
        }
        Ok(())
    }

    /// `S = sum b_j`.
    pub fn prior_count(&self) -> usize {
        self.b.iter().sum()
    }

    /// Degree of the regression polynomial, `m + S - 1`.
    pub fn degree(&self) -> usize {
        self.m + self.prior_count() - 1
    }
}

/// `T` with `m_T(beta_j) = 2 b_j`.
pub fn multiset_from_model(spec: &ModelSpec) -> PriorMultiset {
    PriorMultiset {
        entries: spec.beta.iter().zip(&spec.b).map(|(&v, &b)| (v, 2 * b)).collect(),
    }
}

/// Canonical depth the pipeline needs: `2m - 2 + |T| + 1`, the last index
/// being padding consumed by the sweeps.
pub fn required_depth(m: usize, t: &PriorMultiset) -> usize {
    2 * m - 2 + t.size() + 1
}

/// `c_0^(T)..c_K^(T)` with `K = max_index - |T|`.
pub fn gen_moments<S: Scalar>(c: &MomentSequence<S>, t: &PriorMultiset) -> Result<Vec<S>> {
    let size = t.size();
    if c.max_index() < size {
        return Err(DesignError::InsufficientMoments { needed: size, available: c.max_index() });
    }
    let mut cur = c.values.clone();
    for &(value, mult) in t.entries() {
        let l = S::from_real(value);
        for _ in 0..mult {
            cur = cur.windows(2).map(|w| w[1].clone() - l.clone() * w[0].clone()).collect();
        }
    }
    Ok(cur)
}

/// `c_0^(T + {s}) = zeta_1^(T, s) c_0^(T)`.
pub fn c0_propagate<S: Scalar>(c0: &S, zeta1: &S) -> S {
    zeta1.clone() * c0.clone()
}

/// `zeta^(T, s)` together with `c_0^(T)`.
///
/// A terminated table belongs to a finitely supported measure: it stores
/// the `2n - 1` entries of an `n x n` Jacobi factorization and every later
/// entry is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaTable<S> {
    pub stage: PriorMultiset,
    pub shift: f64,
    pub zetas: Vec<S>,
    pub c0: S,
    pub terminated: bool,
}

impl<S: Scalar> ZetaTable<S> {
    /// The table at `(empty, 0)`.
    pub fn from_canonical(p: &CanonicalSequence<S>) -> Self {
        let z = canonical_to_zeta(p);
        let mut table = ZetaTable {
            stage: PriorMultiset::empty(),
            shift: 0.0,
            zetas: z.values,
            c0: S::one(),
            terminated: z.terminated,
        };
        if table.terminated {
            table.trim();
        }
        table
    }

    /// One-based access; zero past the end of a terminated table.
    pub fn get(&self, k: usize) -> Option<S> {
        if k == 0 {
            return Some(S::zero());
        }
        match self.zetas.get(k - 1) {
            Some(v) => Some(v.clone()),
            None if self.terminated => Some(S::zero()),
            None => None,
        }
    }

    /// Number of entries that carry information.
    pub fn len(&self) -> usize {
        self.zetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zetas.is_empty()
    }

    /// Size of the Jacobi matrix of a terminated table: the smallest `n`
    /// with `zeta_{2n-1} zeta_{2n} = 0`.
    fn jacobi_size(&self) -> usize {
        let mut n = 1;
        loop {
            let beta = self.get(2 * n - 1).unwrap() * self.get(2 * n).unwrap();
            if beta.is_zero() {
                return n;
            }
            n += 1;
        }
    }

    fn trim(&mut self) {
        let keep = 2 * self.jacobi_size() - 1;
        self.zetas.resize(keep, S::zero());
    }

    /// `H_m^(T)` at shift 0 from the product formula
    /// `c_0^m prod_{j<m} (zeta_{2j-1} zeta_{2j})^{m-j}`.
    pub fn hankel_product(&self, m: usize) -> Result<S> {
        if self.shift != 0.0 {
            return Err(DesignError::InvalidSpec("product formula needs shift 0".into()));
        }
        let mut acc = powi(&self.c0, m);
        for j in 1..m {
            let pair = |k: usize| {
                self.get(k).ok_or(DesignError::InsufficientDepth {
                    needed: 2 * m - 2,
                    available: self.zetas.len(),
                })
            };
            acc = acc * powi(&(pair(2 * j - 1)? * pair(2 * j)?), m - j);
        }
        Ok(acc)
    }
}

fn divide<S: Scalar>(num: S, den: &S, stage: usize, index: usize) -> Result<S> {
    if num.is_zero() {
        return Ok(S::zero());
    }
    if den.is_degenerate() {
        return Err(DesignError::DegenerateStep { stage, index });
    }
    Ok(num / den.clone())
}

/// Runs the alternating sum/product sweep
/// `w_{2k+1} = sum_k - w_{2k}`, `w_{2k+2} = prod_k / w_{2k+1}` for
/// `len` outputs.
fn sweep<S: Scalar>(
    len: usize,
    stage: usize,
    sum: impl Fn(usize) -> S,
    prod: impl Fn(usize) -> S,
) -> Result<Vec<S>> {
    let mut out: Vec<S> = Vec::with_capacity(len);
    let mut prev = S::zero();
    for j in 1..=len {
        let k = (j - 1) / 2;
        let w = if j % 2 == 1 {
            sum(k) - prev
        } else {
            divide(prod(k), &prev, stage, j)?
        };
        out.push(w.clone());
        prev = w;
    }
    Ok(out)
}

fn check_len<S: Scalar>(table: &ZetaTable<S>) -> Result<()> {
    if !table.terminated && table.zetas.is_empty() {
        return Err(DesignError::InsufficientDepth { needed: 1, available: 0 });
    }
    Ok(())
}

fn output_len<S: Scalar>(table: &ZetaTable<S>) -> usize {
    if table.terminated {
        2 * table.jacobi_size() - 1
    } else {
        table.zetas.len() - 1
    }
}

/// Refactors the table at a new shift `l1` (stage unchanged), using
/// `w_{2k} + w_{2k+1} + l1 = z_{2k} + z_{2k+1} + l2` and
/// `w_{2k+1} w_{2k+2} = z_{2k+1} z_{2k+2}`.
///
/// An unterminated table loses its last entry so that every reachable table
/// has the same length bookkeeping as a Toda step.
pub fn reparam_shift<S: Scalar>(table: &ZetaTable<S>, l1: f64) -> Result<ZetaTable<S>> {
    check_len(table)?;
    let z = |k: usize| table.get(k).unwrap_or_else(S::zero);
    let shift = S::from_real(table.shift) - S::from_real(l1);
    let zetas = sweep(
        output_len(table),
        table.stage.size(),
        |k| z(2 * k) + z(2 * k + 1) + shift.clone(),
        |k| z(2 * k + 1) * z(2 * k + 2),
    )?;
    let mut out = ZetaTable {
        stage: table.stage.clone(),
        shift: l1,
        zetas,
        c0: table.c0.clone(),
        terminated: table.terminated,
    };
    if out.terminated {
        out.trim();
    }
    Ok(out)
}

/// Christoffel step: from `zeta^(T, l1)` to `zeta^(T + {l1}, l2)` via
/// `w_{2k} + w_{2k+1} + l2 = z_{2k+1} + z_{2k+2} + l1` and
/// `w_{2k+1} w_{2k+2} = z_{2k+2} z_{2k+3}`.
pub fn toda_step<S: Scalar>(table: &ZetaTable<S>, l2: f64) -> Result<ZetaTable<S>> {
    check_len(table)?;
    let z = |k: usize| table.get(k).unwrap_or_else(S::zero);
    let shift = S::from_real(table.shift) - S::from_real(l2);
    let zetas = sweep(
        output_len(table),
        table.stage.size() + 1,
        |k| z(2 * k + 1) + z(2 * k + 2) + shift.clone(),
        |k| z(2 * k + 2) * z(2 * k + 3),
    )?;
    let mut stage = table.stage.clone();
    stage.insert(table.shift, 1)?;
    let mut out = ZetaTable {
        stage,
        shift: l2,
        c0: c0_propagate(&table.c0, &z(1)),
        zetas,
        terminated: table.terminated,
    };
    if out.terminated {
        out.trim();
    }
    Ok(out)
}

/// Walks from `(empty, 0)` to `(T, s)`: shift to the smallest element of
/// `T`, then one Toda step per element in ascending order, each step's new
/// shift being the next element (or `s` after the last one).
pub fn stage_table<S: Scalar>(
    p: &CanonicalSequence<S>,
    t: &PriorMultiset,
    s: f64,
) -> Result<ZetaTable<S>> {
    let elements = t.sorted_elements();
    let mut table = ZetaTable::from_canonical(p);
    let first = elements.first().copied().unwrap_or(s);
    if first != table.shift {
        table = reparam_shift(&table, first)?;
    }
    for (i, _) in elements.iter().enumerate() {
        let next = elements.get(i + 1).copied().unwrap_or(s);
        table = toda_step(&table, next)?;
    }
    Ok(table)
}

/// `H_m^(T)` for the model's multiset `T`, evaluated from canonical moments.
pub fn evaluate_objective<S: Scalar>(p: &CanonicalSequence<S>, spec: &ModelSpec) -> Result<S> {
    spec.validate()?;
    evaluate_with_multiset(p, spec.m, &multiset_from_model(spec))
}

/// `H_m^(T)` for an arbitrary multiset.
pub fn evaluate_with_multiset<S: Scalar>(
    p: &CanonicalSequence<S>,
    m: usize,
    t: &PriorMultiset,
) -> Result<S> {
    let needed = required_depth(m, t);
    if !p.is_terminated() && p.depth() < needed {
        return Err(DesignError::InsufficientDepth { needed, available: p.depth() });
    }
    stage_table(p, t, 0.0)?.hankel_product(m)
}
