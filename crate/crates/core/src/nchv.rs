//! Noncontextual hidden-variable model of the four spin observables.
//!
//! An ontic state fixes a ±1 value for each of `Z1`, `Z2`, `X1`, `X2`. The
//! value of a product of commuting observables is the product of the values,
//! and re-measuring anything returns the same value. Preparations are
//! modelled as constraints on product values, and predictions are read off by
//! exhaustive enumeration of the sixteen assignments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{joint_measure, JointOutcome, OutcomeValue};
use crate::presets::{observable, state, Obs};
use crate::scalar::Scalar;

/// One of the four elementary observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Z1,
    Z2,
    X1,
    X2,
}

impl Symbol {
    pub fn slot(self) -> u8 {
        match self {
            Symbol::Z1 | Symbol::X1 => 1,
            Symbol::Z2 | Symbol::X2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Symbol::Z1 => "Z1",
            Symbol::Z2 => "Z2",
            Symbol::X1 => "X1",
            Symbol::X2 => "X2",
        }
    }
}

/// Product of one or two elementary observables on distinct slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductSpec {
    factors: Vec<Symbol>,
}

impl ProductSpec {
    pub fn new(factors: Vec<Symbol>) -> Result<Self> {
        match factors.as_slice() {
            [] => Err(Error::InvalidProduct("empty product".into())),
            [_] => Ok(ProductSpec { factors }),
            [a, b] if a.slot() != b.slot() => Ok(ProductSpec { factors }),
            [a, b] => Err(Error::InvalidProduct(format!(
                "{}·{} act on the same slot and do not commute",
                a.name(),
                b.name()
            ))),
            _ => Err(Error::InvalidProduct("at most one factor per slot".into())),
        }
    }

    pub fn single(s: Symbol) -> Self {
        ProductSpec { factors: vec![s] }
    }

    pub fn pair(a: Symbol, b: Symbol) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn factors(&self) -> &[Symbol] {
        &self.factors
    }
}

impl fmt::Display for ProductSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.factors.iter().map(|s| s.name()).collect();
        f.write_str(&names.join(""))
    }
}

impl FromStr for ProductSpec {
    type Err = Error;

    /// Parses `Z1`, `Z1X2`, `Z1*X2` and the like.
    fn from_str(s: &str) -> Result<Self> {
        let cleaned: Vec<char> =
            s.chars().filter(|c| !matches!(c, '*' | '·' | ' ')).collect();
        if cleaned.is_empty() || !cleaned.len().is_multiple_of(2) {
            return Err(Error::InvalidProduct(format!("cannot parse `{s}`")));
        }
        let factors = cleaned
            .chunks(2)
            .map(|pair| match (pair[0].to_ascii_uppercase(), pair[1]) {
                ('Z', '1') => Ok(Symbol::Z1),
                ('Z', '2') => Ok(Symbol::Z2),
                ('X', '1') => Ok(Symbol::X1),
                ('X', '2') => Ok(Symbol::X2),
                _ => Err(Error::InvalidProduct(format!("unknown factor in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }
}

/// Definite values for the four elementary observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ValueAssignment {
    pub z1: OutcomeValue,
    pub z2: OutcomeValue,
    pub x1: OutcomeValue,
    pub x2: OutcomeValue,
}

impl ValueAssignment {
    pub fn new(z1: OutcomeValue, z2: OutcomeValue, x1: OutcomeValue, x2: OutcomeValue) -> Self {
        ValueAssignment { z1, z2, x1, x2 }
    }

    /// All sixteen assignments in canonical order: lexicographic in
    /// `(z1, z2, x1, x2)` with `+1` before `−1`.
    pub fn all() -> Vec<ValueAssignment> {
        let vals = OutcomeValue::BOTH;
        let mut out = Vec::with_capacity(16);
        for z1 in vals {
            for z2 in vals {
                for x1 in vals {
                    for x2 in vals {
                        out.push(ValueAssignment::new(z1, z2, x1, x2));
                    }
                }
            }
        }
        out
    }

    pub fn get(&self, s: Symbol) -> OutcomeValue {
        match s {
            Symbol::Z1 => self.z1,
            Symbol::Z2 => self.z2,
            Symbol::X1 => self.x1,
            Symbol::X2 => self.x2,
        }
    }
}

impl fmt::Display for ValueAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(z1={}, z2={}, x1={}, x2={})",
            self.z1, self.z2, self.x1, self.x2
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub spec: ProductSpec,
    pub required: OutcomeValue,
}

impl Constraint {
    pub fn new(spec: ProductSpec, required: OutcomeValue) -> Self {
        Constraint { spec, required }
    }

    pub fn holds(&self, a: &ValueAssignment) -> bool {
        val(a, &self.spec) == self.required
    }
}

/// Value of a product under an assignment: the product of its factors' values.
pub fn val(assignment: &ValueAssignment, spec: &ProductSpec) -> OutcomeValue {
    spec.factors
        .iter()
        .map(|&s| assignment.get(s))
        .fold(OutcomeValue::Plus, |acc, v| acc * v)
}

/// Every assignment meeting all constraints, in canonical order.
pub fn enumerate(constraints: &[Constraint]) -> Vec<ValueAssignment> {
    ValueAssignment::all()
        .into_iter()
        .filter(|a| constraints.iter().all(|c| c.holds(a)))
        .collect()
}

/// How the hidden-variable prediction is weighted.
///
/// The model itself only fixes which pairs can occur. Uniform weights over the
/// satisfying assignments are a modelling choice and must be asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    SetOnly,
    UniformModelChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairPrediction {
    pub outcomes: BTreeSet<JointOutcome>,
    /// Present only under [`Weighting::UniformModelChoice`].
    pub weights: Option<BTreeMap<JointOutcome, f64>>,
    pub assignments: Vec<ValueAssignment>,
}

pub fn predict_pair(
    constraints: &[Constraint],
    first: &ProductSpec,
    second: &ProductSpec,
    weighting: Weighting,
) -> Result<PairPrediction> {
    let assignments = enumerate(constraints);
    if assignments.is_empty() {
        return Err(Error::Unsatisfiable);
    }
    let pairs: Vec<JointOutcome> = assignments
        .iter()
        .map(|a| JointOutcome::new(val(a, first), val(a, second)))
        .collect();
    let weights = match weighting {
        Weighting::SetOnly => None,
        Weighting::UniformModelChoice => {
            let w = 1.0 / pairs.len() as f64;
            let mut m = BTreeMap::new();
            for p in &pairs {
                *m.entry(*p).or_insert(0.0) += w;
            }
            Some(m)
        }
    };
    Ok(PairPrediction { outcomes: pairs.into_iter().collect(), weights, assignments })
}

/// Measures each spec in turn on a fixed ontic state.
pub fn hv_sequential(assignment: &ValueAssignment, specs: &[ProductSpec]) -> Vec<OutcomeValue> {
    specs.iter().map(|s| val(assignment, s)).collect()
}

/// Preparation fixing `Z1Z2` and `X1X2` to the given values.
pub fn product_preparation(zz: OutcomeValue, xx: OutcomeValue) -> Vec<Constraint> {
    vec![
        Constraint::new(ProductSpec { factors: vec![Symbol::Z1, Symbol::Z2] }, zz),
        Constraint::new(ProductSpec { factors: vec![Symbol::X1, Symbol::X2] }, xx),
    ]
}

pub fn mixed_pair() -> (ProductSpec, ProductSpec) {
    (
        ProductSpec { factors: vec![Symbol::Z1, Symbol::X2] },
        ProductSpec { factors: vec![Symbol::X1, Symbol::Z2] },
    )
}

/// Quantum versus hidden-variable predictions for `(Z1X2, X1Z2)` on the
/// simultaneous `(+1, +1)` eigenstate of `(Z1Z2, X1X2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContrastReport<T: Scalar> {
    pub qm: BTreeMap<JointOutcome, T>,
    pub nchv: BTreeSet<JointOutcome>,
    pub intersection: BTreeSet<JointOutcome>,
    pub union: BTreeSet<JointOutcome>,
    pub disjoint: bool,
}

pub fn qm_nchv_contrast<T: Scalar>() -> Result<ContrastReport<T>> {
    let phi = state::<T>("phi+")?;
    let dist = joint_measure(&phi, &observable(Obs::Z1X2), &observable(Obs::X1Z2))?;
    let qm: BTreeMap<JointOutcome, T> = dist.marginal(|&j| j);
    let (first, second) = mixed_pair();
    let nchv = predict_pair(
        &product_preparation(OutcomeValue::Plus, OutcomeValue::Plus),
        &first,
        &second,
        Weighting::SetOnly,
    )?
    .outcomes;
    let qm_set: BTreeSet<JointOutcome> = qm.keys().copied().collect();
    let intersection: BTreeSet<_> = qm_set.intersection(&nchv).copied().collect();
    let union: BTreeSet<_> = qm_set.union(&nchv).copied().collect();
    Ok(ContrastReport { disjoint: intersection.is_empty(), qm, nchv, intersection, union })
}
