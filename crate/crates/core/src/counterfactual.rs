//! Branch enumeration over measurement timelines.
//!
//! A timeline is an initial ensemble of pure states followed by an ordered
//! list of projective measurements. Enumerating it gives every outcome
//! history with its probability (Lüders collapse between events). Given a
//! partial record of outcomes, any event's outcome is then classified as
//! forced, possible or impossible.
//!
//! Counterfactual questions are asked by modifying the timeline (inserting,
//! removing or replacing a measurement) and re-classifying. The only matching
//! policy holds fixed the recorded outcomes of events strictly before the
//! modification; outcomes recorded later are re-derived, never assumed.
//!
//! The engine only computes conditional outcome probabilities. Whether an
//! unmeasured observable "has a value" is an interpretive question it does
//! not answer.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::apparatus::{self, CombinerUnitary, ModeLabel, Path, Region, Spin};
use crate::error::{Error, Result};
use crate::hilbert::{spin_labels, StateVector};
use crate::measurement::{JointOutcome, OutcomeValue, Step, StepOutcome};
use crate::presets::{observable, spin_observable, Obs};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineEvent<T: Scalar> {
    pub label: String,
    pub step: Step<T>,
}

impl<T: Scalar> TimelineEvent<T> {
    pub fn new(label: impl Into<String>, step: Step<T>) -> Self {
        TimelineEvent { label: label.into(), step }
    }

    pub fn single(label: impl Into<String>, o: crate::hilbert::Observable<T>) -> Self {
        Self::new(label, Step::Single(o))
    }
}

/// Weighted list of pure states standing in for a mixed preparation.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T: Scalar> {
    members: Vec<(T, StateVector<T>)>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(members: Vec<(T, StateVector<T>)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::InvalidTimeline("empty ensemble".into()));
        };
        let dim = first.dim();
        let mut total = T::zero();
        for (w, s) in &members {
            if *w < T::zero() || !w.is_finite() {
                return Err(Error::InvalidTimeline(format!("bad ensemble weight {w}")));
            }
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
            }
            total += *w;
        }
        if (total - T::one()).abs() > T::tolerance() {
            return Err(Error::InvalidTimeline(format!("ensemble weights sum to {total}")));
        }
        Ok(Ensemble { members })
    }

    pub fn pure(s: StateVector<T>) -> Self {
        Ensemble { members: vec![(T::one(), s)] }
    }

    /// `{|z+⟩: ½, |z−⟩: ½}`.
    pub fn maximally_mixed_spin() -> Self {
        let half = T::of(0.5);
        Ensemble {
            members: (0..2)
                .map(|i| (half, StateVector::basis(spin_labels(), i).expect("dim 2")))
                .collect(),
        }
    }

    pub fn members(&self) -> &[(T, StateVector<T>)] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].1.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timeline<T: Scalar> {
    initial: Ensemble<T>,
    events: Vec<TimelineEvent<T>>,
}

impl<T: Scalar> Timeline<T> {
    /// Events are in time order; labels must be unique and non-empty.
    pub fn new(initial: Ensemble<T>, events: Vec<TimelineEvent<T>>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if e.label.is_empty() {
                return Err(Error::InvalidTimeline("empty time tag".into()));
            }
            if events[..i].iter().any(|p| p.label == e.label) {
                return Err(Error::InvalidTimeline(format!("duplicate time tag `{}`", e.label)));
            }
            if e.step.dim() != initial.dim() {
                return Err(Error::DimensionMismatch { expected: initial.dim(), found: e.step.dim() });
            }
        }
        Ok(Timeline { initial, events })
    }

    pub fn initial(&self) -> &Ensemble<T> {
        &self.initial
    }

    pub fn events(&self) -> &[TimelineEvent<T>] {
        &self.events
    }

    pub fn index_of(&self, tag: &str) -> Result<usize> {
        self.events
            .iter()
            .position(|e| e.label == tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn labels(&self) -> Vec<String> {
        self.events.iter().map(|e| e.label.clone()).collect()
    }
}

/// Observed outcomes keyed by time tag.
pub type Record = BTreeMap<String, StepOutcome>;

/// One outcome history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Branch<T: Scalar> {
    pub ensemble_member: usize,
    pub outcomes: Vec<StepOutcome>,
    pub probability: T,
}

/// Every positive-probability history of `tl`.
pub fn enumerate_branches<T: Scalar>(tl: &Timeline<T>) -> Result<Vec<Branch<T>>> {
    let mut out = Vec::new();
    for (member, (weight, state)) in tl.initial.members.iter().enumerate() {
        if *weight < T::tolerance() {
            continue;
        }
        descend(tl, member, state, *weight, &mut Vec::new(), &mut out)?;
    }
    Ok(out)
}

fn descend<T: Scalar>(
    tl: &Timeline<T>,
    member: usize,
    state: &StateVector<T>,
    probability: T,
    prefix: &mut Vec<StepOutcome>,
    out: &mut Vec<Branch<T>>,
) -> Result<()> {
    let Some(event) = tl.events.get(prefix.len()) else {
        out.push(Branch { ensemble_member: member, outcomes: prefix.clone(), probability });
        return Ok(());
    };
    for entry in event.step.distribution(state)?.entries() {
        let p = probability * entry.probability;
        if p < T::tolerance() {
            continue;
        }
        prefix.push(entry.outcome);
        descend(tl, member, &entry.post_state, p, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

fn check_record<T: Scalar>(tl: &Timeline<T>, record: &Record) -> Result<Vec<(usize, StepOutcome)>> {
    record
        .iter()
        .map(|(tag, v)| {
            let i = tl.index_of(tag)?;
            if !tl.events[i].step.accepts(v) {
                return Err(Error::OutcomeKindMismatch { tag: tag.clone(), value: v.to_string() });
            }
            Ok((i, *v))
        })
        .collect()
}

/// Branches consistent with `record`, renormalized.
pub fn condition<T: Scalar>(
    tl: &Timeline<T>,
    branches: &[Branch<T>],
    record: &Record,
) -> Result<Vec<Branch<T>>> {
    let fixed = check_record(tl, record)?;
    let kept: Vec<&Branch<T>> = branches
        .iter()
        .filter(|b| fixed.iter().all(|(i, v)| b.outcomes[*i] == *v))
        .collect();
    let total = kept.iter().fold(T::zero(), |acc, b| acc + b.probability);
    if total < T::tolerance() {
        return Err(Error::ImpossibleRecord);
    }
    Ok(kept
        .into_iter()
        .map(|b| Branch { probability: b.probability / total, ..b.clone() })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Forced,
    Possible,
    Impossible,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification<T: Scalar> {
    pub status: Status,
    pub probability: T,
}

impl<T: Scalar> Classification<T> {
    /// Snaps to `Forced`/`Impossible` within tolerance.
    pub fn from_probability(p: T) -> Self {
        let tol = T::tolerance();
        if (p - T::one()).abs() <= tol {
            Classification { status: Status::Forced, probability: T::one() }
        } else if p <= tol {
            Classification { status: Status::Impossible, probability: T::zero() }
        } else {
            Classification { status: Status::Possible, probability: p }
        }
    }
}

/// Conditional distribution of the outcome at `tag` given `record`.
pub fn conditional_distribution<T: Scalar>(
    tl: &Timeline<T>,
    record: &Record,
    tag: &str,
) -> Result<BTreeMap<StepOutcome, T>> {
    let index = tl.index_of(tag)?;
    let branches = condition(tl, &enumerate_branches(tl)?, record)?;
    let mut dist: BTreeMap<StepOutcome, T> =
        tl.events[index].step.possible_outcomes().into_iter().map(|o| (o, T::zero())).collect();
    for b in &branches {
        *dist.entry(b.outcomes[index]).or_insert_with(T::zero) += b.probability;
    }
    Ok(dist)
}

pub fn classify<T: Scalar>(
    tl: &Timeline<T>,
    record: &Record,
    query_tag: &str,
    query_value: StepOutcome,
) -> Result<Classification<T>> {
    let index = tl.index_of(query_tag)?;
    if !tl.events[index].step.accepts(&query_value) {
        return Err(Error::OutcomeKindMismatch {
            tag: query_tag.to_string(),
            value: query_value.to_string(),
        });
    }
    let dist = conditional_distribution(tl, record, query_tag)?;
    Ok(Classification::from_probability(dist.get(&query_value).copied().unwrap_or_else(T::zero)))
}

/// Counterfactual change to a timeline.
#[derive(Clone, Debug, PartialEq)]
pub enum Modification<T: Scalar> {
    /// Leave the timeline as it was.
    None,
    /// Insert `event` immediately before the event tagged `before`.
    Insert { before: String, event: TimelineEvent<T> },
    Remove { at: String },
    /// Swap the measurement at `at` for `event` (which may carry a new tag).
    Replace { at: String, event: TimelineEvent<T> },
}

impl<T: Scalar> Modification<T> {
    pub fn describe(&self) -> String {
        match self {
            Modification::None => "none".into(),
            Modification::Insert { before, event } => {
                format!("insert {} before {before}", event.label)
            }
            Modification::Remove { at } => format!("remove {at}"),
            Modification::Replace { at, event } if event.label == *at => {
                format!("replace the measurement at {at}")
            }
            Modification::Replace { at, event } => format!("replace {at} by {}", event.label),
        }
    }
}

/// Which recorded outcomes survive a modification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum MatchingPolicy {
    /// Keep the outcomes of events strictly before the first modified position.
    #[default]
    HoldPriorOutcomes,
}

/// Applies `m`; returns the new timeline, the first modified index and the
/// index of the new event if one was added.
pub fn modify<T: Scalar>(
    base: &Timeline<T>,
    m: &Modification<T>,
) -> Result<(Timeline<T>, usize, Option<usize>)> {
    let mut events = base.events.clone();
    let (point, new_event) = match m {
        Modification::None => (events.len(), None),
        Modification::Insert { before, event } => {
            let i = base.index_of(before)?;
            if base.index_of(&event.label).is_ok() {
                return Err(Error::InvalidTimeline(format!(
                    "inserted tag `{}` already exists",
                    event.label
                )));
            }
            events.insert(i, event.clone());
            (i, Some(i))
        }
        Modification::Remove { at } => {
            let i = base.index_of(at)?;
            events.remove(i);
            (i, None)
        }
        Modification::Replace { at, event } => {
            let i = base.index_of(at)?;
            if event.label != *at && base.index_of(&event.label).is_ok() {
                return Err(Error::InvalidTimeline(format!(
                    "replacement tag `{}` already exists",
                    event.label
                )));
            }
            events[i] = event.clone();
            (i, Some(i))
        }
    };
    Ok((Timeline::new(base.initial.clone(), events)?, point, new_event))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeClass<T: Scalar> {
    pub outcome: StepOutcome,
    pub classification: Classification<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventReport<T: Scalar> {
    pub label: String,
    /// Introduced or changed by the modification.
    pub modified: bool,
    /// Recorded outcome held fixed by the policy.
    pub held: Option<StepOutcome>,
    /// Recorded outcome that the policy does not hold fixed.
    pub recorded: Option<StepOutcome>,
    pub recorded_status: Option<Classification<T>>,
    pub outcomes: Vec<OutcomeClass<T>>,
}

/// How a later event depends on the modified event's outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dependence<T: Scalar> {
    pub label: String,
    pub given_label: String,
    pub given: StepOutcome,
    pub given_probability: T,
    pub outcomes: Vec<OutcomeClass<T>>,
    pub forced: Option<StepOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterfactualReport<T: Scalar> {
    pub modification: String,
    pub policy: MatchingPolicy,
    pub timeline: Vec<String>,
    pub held_record: Record,
    pub events: Vec<EventReport<T>>,
    pub dependences: Vec<Dependence<T>>,
    /// Later events whose outcome is forced equal to the modified event's, in
    /// every branch of the latter.
    pub forced_equal_to_modified: Vec<String>,
    /// Recorded outcomes not held by the policy that come out merely possible.
    pub later_records_not_forced: Vec<String>,
    /// True when some later recorded outcome is not forced, so the record
    /// cannot be carried over to the counterfactual timeline.
    pub record_not_transferable: bool,
    pub note: &'static str,
}

pub const VALUE_NOTE: &str = "classifications are conditional outcome probabilities; \
whether an unmeasured observable has a value is not modelled";

fn classes<T: Scalar>(dist: &BTreeMap<StepOutcome, T>) -> Vec<OutcomeClass<T>> {
    dist.iter()
        .map(|(&outcome, &p)| OutcomeClass {
            outcome,
            classification: Classification::from_probability(p),
        })
        .collect()
}

pub fn counterfactual_report<T: Scalar>(
    base: &Timeline<T>,
    record: &Record,
    modification: &Modification<T>,
    policy: MatchingPolicy,
) -> Result<CounterfactualReport<T>> {
    check_record(base, record)?;
    let (tl, point, new_event) = modify(base, modification)?;
    let MatchingPolicy::HoldPriorOutcomes = policy;

    let mut held = Record::new();
    for (i, e) in tl.events.iter().enumerate().take(point) {
        if let Some(v) = record.get(&e.label) {
            debug_assert!(base.index_of(&e.label).ok() == Some(i));
            held.insert(e.label.clone(), *v);
        }
    }

    let branches = condition(&tl, &enumerate_branches(&tl)?, &held)?;
    let marginal = |index: usize, bs: &[Branch<T>]| {
        let mut d: BTreeMap<StepOutcome, T> = tl.events[index]
            .step
            .possible_outcomes()
            .into_iter()
            .map(|o| (o, T::zero()))
            .collect();
        for b in bs {
            *d.entry(b.outcomes[index]).or_insert_with(T::zero) += b.probability;
        }
        d
    };

    let mut events = Vec::with_capacity(tl.events.len());
    let mut later_records_not_forced = Vec::new();
    for (i, e) in tl.events.iter().enumerate() {
        let dist = marginal(i, &branches);
        let held_value = held.get(&e.label).copied();
        let modified = Some(i) == new_event;
        let recorded = if held_value.is_none() && !modified {
            record.get(&e.label).copied().filter(|v| e.step.accepts(v))
        } else {
            None
        };
        let recorded_status = recorded.map(|v| {
            Classification::from_probability(dist.get(&v).copied().unwrap_or_else(T::zero))
        });
        if let Some(c) = recorded_status {
            if c.status != Status::Forced {
                later_records_not_forced.push(e.label.clone());
            }
        }
        events.push(EventReport {
            label: e.label.clone(),
            modified,
            held: held_value,
            recorded,
            recorded_status,
            outcomes: classes(&dist),
        });
    }

    let mut dependences = Vec::new();
    let mut forced_equal_to_modified = Vec::new();
    if let Some(m) = new_event {
        let m_dist = marginal(m, &branches);
        for later in m + 1..tl.events.len() {
            let mut all_equal = true;
            for (&given, &p) in m_dist.iter().filter(|(_, &p)| p > T::tolerance()) {
                let sub: Vec<Branch<T>> = branches
                    .iter()
                    .filter(|b| b.outcomes[m] == given)
                    .map(|b| Branch { probability: b.probability / p, ..b.clone() })
                    .collect();
                let dist = marginal(later, &sub);
                let forced = dist
                    .iter()
                    .find(|(_, &q)| (q - T::one()).abs() <= T::tolerance())
                    .map(|(&o, _)| o);
                all_equal &= forced == Some(given);
                dependences.push(Dependence {
                    label: tl.events[later].label.clone(),
                    given_label: tl.events[m].label.clone(),
                    given,
                    given_probability: p,
                    outcomes: classes(&dist),
                    forced,
                });
            }
            if all_equal {
                forced_equal_to_modified.push(tl.events[later].label.clone());
            }
        }
    }

    Ok(CounterfactualReport {
        modification: modification.describe(),
        policy,
        timeline: tl.labels(),
        held_record: held,
        events,
        dependences,
        forced_equal_to_modified,
        record_not_transferable: !later_records_not_forced.is_empty(),
        later_records_not_forced,
        note: VALUE_NOTE,
    })
}

/// Spin measured along x at `t1` and along z at `t2`, both giving `+1`, on
/// a preparation that defaults to the maximally mixed ensemble.
pub fn preset_fig3<T: Scalar>() -> (Timeline<T>, Record) {
    preset_fig3_with(Ensemble::maximally_mixed_spin())
}

pub fn preset_fig3_with<T: Scalar>(initial: Ensemble<T>) -> (Timeline<T>, Record) {
    let x = spin_observable::<T>("X").expect("X");
    let z = spin_observable::<T>("Z").expect("Z");
    let tl = Timeline::new(
        initial,
        vec![TimelineEvent::single("t1", x), TimelineEvent::single("t2", z)],
    )
    .expect("two distinct tags on a spin");
    let record = Record::from([
        ("t1".to_string(), StepOutcome::Single(OutcomeValue::Plus)),
        ("t2".to_string(), StepOutcome::Single(OutcomeValue::Plus)),
    ]);
    (tl, record)
}

/// A repeat of the x measurement at an intermediate time `t`.
pub fn insert_intermediate_x<T: Scalar>() -> Modification<T> {
    Modification::Insert {
        before: "t2".into(),
        event: TimelineEvent::single("t", spin_observable::<T>("X").expect("X")),
    }
}

/// z measured at `t1` instead of x.
pub fn replace_first_with_z<T: Scalar>() -> Modification<T> {
    Modification::Replace {
        at: "t1".into(),
        event: TimelineEvent::single("t1", spin_observable::<T>("Z").expect("Z")),
    }
}

/// One fine-grained outcome of the inserted pre-combiner detectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FineRoute<T: Scalar> {
    pub mode: String,
    pub probability: T,
    pub routed_to: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RetrodictionCase<T: Scalar> {
    pub input: String,
    /// `⟨(I + Z1Z2)/2⟩`.
    pub p_bc1: T,
    pub recorded: Region,
    pub before_insertion: Classification<T>,
    pub after_insertion: Classification<T>,
    pub fine_routes: Vec<FineRoute<T>>,
    /// Input lies entirely in one eigenspace of `Z1Z2`.
    pub single_subspace: bool,
    pub forced_after_insertion: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RetrodictionReport<T: Scalar> {
    pub cases: Vec<RetrodictionCase<T>>,
    /// `forced_after_insertion ⇔ single_subspace` for every case.
    pub boundary_holds: bool,
}

fn joint_mode(j: JointOutcome) -> ModeLabel {
    let path = if j.first.is_plus() { Path::Up } else { Path::Down };
    let spin = if j.second.is_plus() { Spin::Plus } else { Spin::Minus };
    ModeLabel::PathSpin(path, spin)
}

/// Stage-2 detection recorded at `t2`; the counterfactual inserts
/// Stern-Gerlach detectors at `t1`, before the combiners.
///
/// The recorded region is BC1 unless BC1 cannot fire on this input.
pub fn retrodiction_case<T: Scalar>(
    input: &str,
    s: &StateVector<T>,
    combiner: &CombinerUnitary<T>,
) -> Result<RetrodictionCase<T>> {
    let bc = apparatus::measured_observable(combiner)?;
    let base = Timeline::new(Ensemble::pure(s.clone()), vec![TimelineEvent::single("t2", bc)])?;
    let p_bc1 = apparatus::stage2_distribution(s, combiner)?
        .probability(&Region::Combiner(apparatus::Combiner::Bc1));
    let recorded_value =
        if p_bc1 > T::tolerance() { OutcomeValue::Plus } else { OutcomeValue::Minus };
    let recorded = if recorded_value.is_plus() {
        Region::Combiner(apparatus::Combiner::Bc1)
    } else {
        Region::Combiner(apparatus::Combiner::Bc2)
    };
    let record = Record::from([("t2".to_string(), StepOutcome::Single(recorded_value))]);

    let before = classify(&base, &record, "t2", StepOutcome::Single(recorded_value))?;
    let insertion = Modification::Insert {
        before: "t2".into(),
        event: TimelineEvent::new(
            "t1",
            Step::Pair(observable::<T>(Obs::Z1), observable::<T>(Obs::Z2)),
        ),
    };
    let report = counterfactual_report(&base, &record, &insertion, MatchingPolicy::HoldPriorOutcomes)?;
    let t2 = report.events.iter().find(|e| e.label == "t2").expect("t2 survives insertion");
    let after = t2.recorded_status.expect("t2 is recorded and not held");
    let t1 = report.events.iter().find(|e| e.label == "t1").expect("inserted");

    let mut fine_routes = Vec::new();
    for oc in &t1.outcomes {
        let StepOutcome::Joint(j) = oc.outcome else { continue };
        if oc.classification.status == Status::Impossible {
            continue;
        }
        let mode = joint_mode(j);
        let routes = apparatus::routing(combiner, mode)?;
        let (&routed_to, _) = routes
            .iter()
            .find(|(_, &p)| (p - T::one()).abs() <= T::tolerance())
            .ok_or_else(|| Error::InvalidCombiner(format!("mode {mode} splits across combiners")))?;
        fine_routes.push(FineRoute {
            mode: mode.to_string(),
            probability: oc.classification.probability,
            routed_to,
        });
    }

    let tol = T::tolerance();
    let single_subspace = p_bc1 <= tol || (p_bc1 - T::one()).abs() <= tol;
    Ok(RetrodictionCase {
        input: input.to_string(),
        p_bc1,
        recorded,
        before_insertion: before,
        forced_after_insertion: after.status == Status::Forced,
        after_insertion: after,
        fine_routes,
        single_subspace,
    })
}

/// Named inputs for the retrodiction demonstration.
pub fn retrodiction_inputs<T: Scalar>() -> Vec<(String, StateVector<T>)> {
    let labels = crate::hilbert::path_spin_labels();
    vec![
        ("phi+".into(), crate::presets::state("phi+").expect("preset")),
        (
            "(|u,+>+|u,->)/sqrt2".into(),
            StateVector::from_real(&[1.0, 1.0, 0.0, 0.0], labels).expect("normalizable"),
        ),
        ("u+".into(), crate::presets::state("u+").expect("preset")),
    ]
}

pub fn apparatus_retrodiction_demo<T: Scalar>() -> Result<RetrodictionReport<T>> {
    retrodiction_report(&retrodiction_inputs())
}

pub fn retrodiction_report<T: Scalar>(
    inputs: &[(String, StateVector<T>)],
) -> Result<RetrodictionReport<T>> {
    let combiner = apparatus::combiner_unitary();
    let cases = inputs
        .iter()
        .map(|(name, s)| retrodiction_case(name, s, &combiner))
        .collect::<Result<Vec<_>>>()?;
    let boundary_holds = cases.iter().all(|c| c.forced_after_insertion == c.single_subspace);
    Ok(RetrodictionReport { cases, boundary_holds })
}
