//! Finitely supported design measures and their ordinary moments.

use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::scalar::{powi, Scalar};

/// Atoms closer than this are merged on construction (float mode).
pub const MERGE_TOL: f64 = 1e-10;
/// Tolerance on the total mass and on symmetry checks (float mode).
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `[0, 1]`
    #[serde(rename = "unit")]
    UnitInterval,
    /// `[-1, 1]`
    #[serde(rename = "symmetric")]
    SymmetricInterval,
}

impl Domain {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Domain::UnitInterval => (0.0, 1.0),
            Domain::SymmetricInterval => (-1.0, 1.0),
        }
    }
}

/// A probability measure with finitely many atoms.
///
/// Support points are sorted ascending, pairwise distinct and inside the
/// closed domain; weights are strictly positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMeasure<S> {
    domain: Domain,
    support: Vec<S>,
    weights: Vec<S>,
}

impl<S: Scalar> DesignMeasure<S> {
    pub fn new(domain: Domain, support: Vec<S>, weights: Vec<S>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(DesignError::InvalidMeasure(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if support.is_empty() {
            return Err(DesignError::InvalidMeasure("empty support".into()));
        }
        let (lo, hi) = domain.bounds();
        let (lo, hi) = (S::from_real(lo), S::from_real(hi));
        let mut atoms: Vec<(S, S)> = support.into_iter().zip(weights).collect();
        for (x, w) in &atoms {
            if *x < lo || *x > hi {
                return Err(DesignError::InvalidMeasure(format!(
                    "support point {} outside {:?}",
                    x.to_real(),
                    domain
                )));
            }
            if *w <= S::zero() {
                return Err(DesignError::InvalidMeasure(format!(
                    "non-positive weight {}",
                    w.to_real()
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("ordered support"));

        let mut merged: Vec<(S, S)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some((px, pw)) if (x.clone() - px.clone()).near_zero(MERGE_TOL) => {
                    *pw = pw.clone() + w;
                }
                _ => merged.push((x, w)),
            }
        }
        let total = merged.iter().fold(S::zero(), |acc, (_, w)| acc + w.clone());
        if !(total - S::one()).near_zero(MASS_TOL) {
            return Err(DesignError::InvalidMeasure("weights do not sum to 1".into()));
        }
        let (support, weights) = merged.into_iter().unzip();
        Ok(DesignMeasure { domain, support, weights })
    }

    /// Rescales positive weights to unit mass before validating.
    pub fn normalized(domain: Domain, support: Vec<S>, weights: Vec<S>) -> Result<Self> {
        let total = weights.iter().fold(S::zero(), |acc, w| acc + w.clone());
        if total <= S::zero() {
            return Err(DesignError::InvalidMeasure("total mass is not positive".into()));
        }
        let weights = weights.into_iter().map(|w| w / total.clone()).collect();
        Self::new(domain, support, weights)
    }

    pub fn point_mass(domain: Domain, x: S) -> Result<Self> {
        Self::new(domain, vec![x], vec![S::one()])
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn support(&self) -> &[S] {
        &self.support
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&S, &S)> {
        self.support.iter().zip(&self.weights)
    }

    /// Ordinary moments `c_0..=c_max`.
    pub fn moments(&self, max: usize) -> MomentSequence<S> {
        let mut values = vec![S::zero(); max + 1];
        for (x, w) in self.atoms() {
            let mut power = w.clone();
            for v in values.iter_mut() {
                *v = v.clone() + power.clone();
                power = power * x.clone();
            }
        }
        MomentSequence { domain: self.domain, values }
    }

    /// Integral of a function against the measure.
    pub fn integrate(&self, f: impl Fn(&S) -> S) -> S {
        self.atoms().fold(S::zero(), |acc, (x, w)| acc + w.clone() * f(x))
    }

    /// Converts to a float measure.
    pub fn to_f64(&self) -> DesignMeasure<f64> {
        DesignMeasure {
            domain: self.domain,
            support: self.support.iter().map(Scalar::to_real).collect(),
            weights: self.weights.iter().map(Scalar::to_real).collect(),
        }
    }

    /// Maps a symmetric measure on `[-1, 1]` to its image on `[0, 1]` under
    /// `x -> x^2`, merging the atoms `±x`.
    pub fn desymmetrize(&self) -> Result<DesignMeasure<S>> {
        if self.domain != Domain::SymmetricInterval {
            return Err(DesignError::InvalidMeasure("expected a measure on [-1, 1]".into()));
        }
        let n = self.len();
        for i in 0..n {
            let j = n - 1 - i;
            let mirrored = (self.support[i].clone() + self.support[j].clone()).near_zero(MASS_TOL);
            let same_mass = (self.weights[i].clone() - self.weights[j].clone()).near_zero(MASS_TOL);
            if !mirrored || !same_mass {
                return Err(DesignError::AsymmetricInput);
            }
        }
        let support = self.support.iter().map(|x| powi(x, 2)).collect();
        DesignMeasure::new(Domain::UnitInterval, support, self.weights.clone())
    }
}

impl DesignMeasure<f64> {
    /// Symmetric measure on `[-1, 1]` with `xi([-x, x]) = mu([0, x^2])`.
    pub fn symmetrize(&self) -> Result<DesignMeasure<f64>> {
        if self.domain != Domain::UnitInterval {
            return Err(DesignError::InvalidMeasure("expected a measure on [0, 1]".into()));
        }
        let mut support = Vec::with_capacity(2 * self.len());
        let mut weights = Vec::with_capacity(2 * self.len());
        for (&t, &w) in self.atoms() {
            if t == 0.0 {
                support.push(0.0);
                weights.push(w);
            } else {
                let r = t.sqrt();
                support.extend([-r, r]);
                weights.extend([w / 2.0, w / 2.0]);
            }
        }
        DesignMeasure::new(Domain::SymmetricInterval, support, weights)
    }
}

/// Ordinary moments `c_0..c_K` of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence<S> {
    pub domain: Domain,
    pub values: Vec<S>,
}

impl<S: Scalar> MomentSequence<S> {
    /// Wraps raw moments; `c_0` must be one.
    pub fn new(domain: Domain, values: Vec<S>) -> Result<Self> {
        match values.first() {
            Some(c0) if (c0.clone() - S::one()).near_zero(MASS_TOL) => {
                Ok(MomentSequence { domain, values })
            }
            _ => Err(DesignError::InvalidMomentSequence("c_0 must equal 1".into())),
        }
    }

    /// Highest available moment index.
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> Result<&S> {
        self.values.get(k).ok_or(DesignError::InsufficientMoments {
            needed: k,
            available: self.max_index(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    domain: Domain,
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl Serialize for DesignMeasure<f64> {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        MeasureRepr {
            domain: self.domain,
            support: self.support.clone(),
            weights: self.weights.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DesignMeasure<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MeasureRepr::deserialize(d)?;
        DesignMeasure::new(repr.domain, repr.support, repr.weights).map_err(serde::de::Error::custom)
    }
}
