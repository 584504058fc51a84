//! Projective measurement with Lüders collapse.
//!
//! A single observable is measured through its two spectral projectors; a
//! commuting pair is measured jointly through the four products of their
//! projectors. Sequences of such steps collapse the state between steps.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{commutator, product, spectral_projectors, Observable, StateVector};
use crate::linalg::{norm, Matrix};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// A ±1 measurement result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeValue {
    Plus,
    Minus,
}

impl OutcomeValue {
    pub const BOTH: [OutcomeValue; 2] = [OutcomeValue::Plus, OutcomeValue::Minus];

    pub fn value(self) -> i8 {
        match self {
            OutcomeValue::Plus => 1,
            OutcomeValue::Minus => -1,
        }
    }

    pub fn from_sign(v: i64) -> Option<Self> {
        match v {
            1 => Some(OutcomeValue::Plus),
            -1 => Some(OutcomeValue::Minus),
            _ => None,
        }
    }

    pub fn is_plus(self) -> bool {
        self == OutcomeValue::Plus
    }
}

impl Mul for OutcomeValue {
    type Output = OutcomeValue;

    fn mul(self, rhs: Self) -> Self {
        if self == rhs {
            OutcomeValue::Plus
        } else {
            OutcomeValue::Minus
        }
    }
}

impl fmt::Display for OutcomeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

impl Serialize for OutcomeValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

/// Result of measuring a commuting pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointOutcome {
    pub first: OutcomeValue,
    pub second: OutcomeValue,
}

impl JointOutcome {
    pub fn new(first: OutcomeValue, second: OutcomeValue) -> Self {
        JointOutcome { first, second }
    }

    pub fn from_signs(first: i64, second: i64) -> Option<Self> {
        Some(JointOutcome::new(OutcomeValue::from_sign(first)?, OutcomeValue::from_sign(second)?))
    }

    /// All four pairs, `(+,+)` first.
    pub fn all() -> [JointOutcome; 4] {
        use OutcomeValue::*;
        [
            JointOutcome::new(Plus, Plus),
            JointOutcome::new(Plus, Minus),
            JointOutcome::new(Minus, Plus),
            JointOutcome::new(Minus, Minus),
        ]
    }

    pub fn product(self) -> OutcomeValue {
        self.first * self.second
    }
}

impl fmt::Display for JointOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.first.value(), self.second.value())
    }
}

/// Serialized as its display form so it can key JSON objects.
impl Serialize for JointOutcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Outcome of one step of a measurement sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum StepOutcome {
    Single(OutcomeValue),
    Joint(JointOutcome),
}

impl From<OutcomeValue> for StepOutcome {
    fn from(v: OutcomeValue) -> Self {
        StepOutcome::Single(v)
    }
}

impl From<JointOutcome> for StepOutcome {
    fn from(v: JointOutcome) -> Self {
        StepOutcome::Joint(v)
    }
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOutcome::Single(v) => v.fmt(f),
            StepOutcome::Joint(j) => j.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeEntry<K, T: Scalar> {
    pub outcome: K,
    pub probability: T,
    pub post_state: StateVector<T>,
}

/// Outcome probabilities with their Lüders post-measurement states.
///
/// Entries with probability below the scalar tolerance are dropped, and the
/// remaining probabilities sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution<K, T: Scalar> {
    entries: Vec<OutcomeEntry<K, T>>,
}

impl<K: Clone + PartialEq, T: Scalar> OutcomeDistribution<K, T> {
    pub fn from_entries(entries: Vec<OutcomeEntry<K, T>>) -> Result<Self> {
        let tol = T::tolerance();
        let mut kept = Vec::with_capacity(entries.len());
        let mut total = T::zero();
        for e in entries {
            // negated so that NaN is rejected too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            let rejected = !(e.probability >= -tol);
            if rejected {
                return Err(Error::InvalidDistribution(format!(
                    "negative probability {}",
                    e.probability
                )));
            }
            if (e.post_state.norm() - T::one()).abs() > tol {
                return Err(Error::InvalidDistribution("post-state not normalized".into()));
            }
            total += e.probability;
            if e.probability >= tol {
                kept.push(e);
            }
        }
        if (total - T::one()).abs() > tol * T::of(4.0) {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(OutcomeDistribution { entries: kept })
    }

    pub fn entries(&self) -> &[OutcomeEntry<K, T>] {
        &self.entries
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &K> {
        self.entries.iter().map(|e| &e.outcome)
    }

    /// Probability of `outcome`; zero when it was pruned.
    pub fn probability(&self, outcome: &K) -> T {
        self.entries
            .iter()
            .find(|e| &e.outcome == outcome)
            .map(|e| e.probability)
            .unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, e| acc + e.probability)
    }

    pub fn map_outcomes<J: Clone + PartialEq>(&self, f: impl Fn(&K) -> J) -> OutcomeDistribution<J, T> {
        OutcomeDistribution {
            entries: self
                .entries
                .iter()
                .map(|e| OutcomeEntry {
                    outcome: f(&e.outcome),
                    probability: e.probability,
                    post_state: e.post_state.clone(),
                })
                .collect(),
        }
    }

    /// Probabilities aggregated by `f`, post-states discarded.
    pub fn marginal<J: Ord>(&self, f: impl Fn(&K) -> J) -> BTreeMap<J, T> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(f(&e.outcome)).or_insert_with(T::zero) += e.probability;
        }
        out
    }
}

/// Applies `projector` to `s` and returns `(probability, renormalized state)`.
pub(crate) fn project<T: Scalar>(
    s: &StateVector<T>,
    projector: &Matrix<T>,
) -> Result<(T, Option<StateVector<T>>)> {
    let v = projector.mul_vec(s.amplitudes())?;
    let n = norm(&v);
    let p = n * n;
    if p < T::tolerance() {
        return Ok((p, None));
    }
    Ok((p, Some(StateVector::normalized(v, s.labels().to_vec())?)))
}

fn from_projectors<K: Clone + PartialEq, T: Scalar>(
    s: &StateVector<T>,
    projectors: Vec<(K, Matrix<T>)>,
) -> Result<OutcomeDistribution<K, T>> {
    let mut entries = Vec::new();
    for (outcome, proj) in projectors {
        if let (p, Some(post_state)) = project(s, &proj)? {
            entries.push(OutcomeEntry { outcome, probability: p, post_state });
        }
    }
    OutcomeDistribution::from_entries(entries)
}

fn check_dims<T: Scalar>(s: &StateVector<T>, o: &Observable<T>) -> Result<()> {
    if s.dim() == o.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: o.dim(), found: s.dim() })
    }
}

/// Measures a ±1-valued observable.
pub fn measure<T: Scalar>(
    s: &StateVector<T>,
    o: &Observable<T>,
) -> Result<OutcomeDistribution<OutcomeValue, T>> {
    check_dims(s, o)?;
    let p = spectral_projectors(o)?;
    from_projectors(
        s,
        vec![(OutcomeValue::Plus, p.plus), (OutcomeValue::Minus, p.minus)],
    )
}

/// Measures a commuting pair jointly through products of their projectors.
pub fn joint_measure<T: Scalar>(
    s: &StateVector<T>,
    a: &Observable<T>,
    b: &Observable<T>,
) -> Result<OutcomeDistribution<JointOutcome, T>> {
    check_dims(s, a)?;
    check_dims(s, b)?;
    let c = commutator(a, b)?.frobenius_norm();
    if c > T::tolerance() {
        return Err(Error::NonCommuting(c.as_f64()));
    }
    let pa = spectral_projectors(a)?;
    let pb = spectral_projectors(b)?;
    let mut projectors = Vec::with_capacity(4);
    for j in JointOutcome::all() {
        let m = pa.get(j.first.is_plus()).matmul(pb.get(j.second.is_plus()))?;
        projectors.push((j, m));
    }
    from_projectors(s, projectors)
}

/// Draws one outcome by inverse CDF on the stream's next uniform.
pub fn sample<K: Clone + PartialEq, T: Scalar>(
    dist: &OutcomeDistribution<K, T>,
    rng: &mut RngStream,
) -> (K, StateVector<T>) {
    let u: T = rng.next_uniform();
    let mut cumulative = T::zero();
    for e in dist.entries() {
        cumulative += e.probability;
        if u < cumulative {
            return (e.outcome.clone(), e.post_state.clone());
        }
    }
    // rounding left u above the last cumulative sum
    let last = dist.entries().last().expect("a valid distribution has at least one entry");
    (last.outcome.clone(), last.post_state.clone())
}

/// One act of measurement: a single observable or a commuting pair.
#[derive(Clone, Debug, PartialEq)]
pub enum Step<T: Scalar> {
    Single(Observable<T>),
    Pair(Observable<T>, Observable<T>),
}

impl<T: Scalar> Step<T> {
    pub fn distribution(&self, s: &StateVector<T>) -> Result<OutcomeDistribution<StepOutcome, T>> {
        match self {
            Step::Single(o) => Ok(measure(s, o)?.map_outcomes(|&v| StepOutcome::Single(v))),
            Step::Pair(a, b) => {
                Ok(joint_measure(s, a, b)?.map_outcomes(|&j| StepOutcome::Joint(j)))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Step::Single(o) | Step::Pair(o, _) => o.dim(),
        }
    }

    /// Every outcome this step can in principle produce.
    pub fn possible_outcomes(&self) -> Vec<StepOutcome> {
        match self {
            Step::Single(_) => OutcomeValue::BOTH.into_iter().map(StepOutcome::Single).collect(),
            Step::Pair(..) => JointOutcome::all().into_iter().map(StepOutcome::Joint).collect(),
        }
    }

    pub fn accepts(&self, outcome: &StepOutcome) -> bool {
        matches!(
            (self, outcome),
            (Step::Single(_), StepOutcome::Single(_)) | (Step::Pair(..), StepOutcome::Joint(_))
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialRecord<T: Scalar> {
    pub outcomes: Vec<StepOutcome>,
    pub final_state: StateVector<T>,
}

/// Runs `steps` in order, sampling each and collapsing before the next.
pub fn sequential_measure<T: Scalar>(
    s: &StateVector<T>,
    steps: &[Step<T>],
    rng: &mut RngStream,
) -> Result<SequentialRecord<T>> {
    let mut state = s.clone();
    let mut outcomes = Vec::with_capacity(steps.len());
    for step in steps {
        let dist = step.distribution(&state)?;
        let (outcome, post) = sample(&dist, rng);
        outcomes.push(outcome);
        state = post;
    }
    Ok(SequentialRecord { outcomes, final_state: state })
}

/// Compares the product of jointly measured values with a direct
/// measurement of the product observable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport<T: Scalar> {
    pub from_joint: BTreeMap<OutcomeValue, T>,
    pub from_product: BTreeMap<OutcomeValue, T>,
    pub max_deviation: T,
    pub consistent: bool,
}

pub fn functional_consistency_check<T: Scalar>(
    s: &StateVector<T>,
    a: &Observable<T>,
    b: &Observable<T>,
) -> Result<ConsistencyReport<T>> {
    let joint = joint_measure(s, a, b)?;
    let from_joint = joint.marginal(|j| j.product());
    let from_product = measure(s, &product(a, b)?)?.marginal(|&v| v);
    let max_deviation = OutcomeValue::BOTH
        .iter()
        .map(|v| {
            let p = from_joint.get(v).copied().unwrap_or_else(T::zero);
            let q = from_product.get(v).copied().unwrap_or_else(T::zero);
            (p - q).abs()
        })
        .fold(T::zero(), T::max);
    Ok(ConsistencyReport {
        from_joint,
        from_product,
        max_deviation,
        consistent: max_deviation <= T::tolerance(),
    })
}
