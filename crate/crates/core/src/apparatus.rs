//! Mode-level model of the two-stage path/spin apparatus.
//!
//! Stage 1 puts a detector in each Stern-Gerlach outlet, so a detection
//! reveals both the path (`Z1`) and the spin (`Z2`). Stage 2 routes the
//! `(u,+)` and `(d,-)` outlets into beam combiner BC1 and the `(u,-)` and
//! `(d,+)` outlets into BC2, and only asks which combiner fired. Each combiner
//! has two outlet ports and a detector region covers both of them.
//!
//! The combiner is fixed on two input superpositions,
//! `(|u,+⟩+|d,-⟩)/√2 → |BC1a⟩` and `(|u,-⟩+|d,+⟩)/√2 → |BC2a⟩`, and completed
//! with the orthogonal combinations `(|u,+⟩−|d,-⟩)/√2 → |BC1b⟩` and
//! `(|u,-⟩−|d,+⟩)/√2 → |BC2b⟩`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{apply, path_spin_labels, Observable, StateVector, UnitaryMap};
use crate::linalg::{inner, Matrix, C};
use crate::measurement::{
    measure, project, sample, OutcomeDistribution, OutcomeEntry, OutcomeValue,
};
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Path {
    Up,
    Down,
}

impl Path {
    /// `Z1` eigenvalue: up is `+1`.
    pub fn value(self) -> OutcomeValue {
        match self {
            Path::Up => OutcomeValue::Plus,
            Path::Down => OutcomeValue::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub fn value(self) -> OutcomeValue {
        match self {
            Spin::Plus => OutcomeValue::Plus,
            Spin::Minus => OutcomeValue::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outlet {
    Bc1a,
    Bc1b,
    Bc2a,
    Bc2b,
}

impl Outlet {
    pub const ALL: [Outlet; 4] = [Outlet::Bc1a, Outlet::Bc1b, Outlet::Bc2a, Outlet::Bc2b];

    pub fn combiner(self) -> Combiner {
        match self {
            Outlet::Bc1a | Outlet::Bc1b => Combiner::Bc1,
            Outlet::Bc2a | Outlet::Bc2b => Combiner::Bc2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Combiner {
    Bc1,
    Bc2,
}

/// A mode of the apparatus: either a Stern-Gerlach outlet or a combiner port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeLabel {
    PathSpin(Path, Spin),
    Outlet(Outlet),
}

impl ModeLabel {
    pub const PATH_SPIN: [ModeLabel; 4] = [
        ModeLabel::PathSpin(Path::Up, Spin::Plus),
        ModeLabel::PathSpin(Path::Up, Spin::Minus),
        ModeLabel::PathSpin(Path::Down, Spin::Plus),
        ModeLabel::PathSpin(Path::Down, Spin::Minus),
    ];
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::PathSpin(p, s) => write!(
                f,
                "{},{}",
                if *p == Path::Up { "u" } else { "d" },
                if *s == Spin::Plus { "+" } else { "-" }
            ),
            ModeLabel::Outlet(o) => f.write_str(match o {
                Outlet::Bc1a => "BC1a",
                Outlet::Bc1b => "BC1b",
                Outlet::Bc2a => "BC2a",
                Outlet::Bc2b => "BC2b",
            }),
        }
    }
}

pub fn outlet_labels() -> Vec<String> {
    Outlet::ALL.iter().map(|&o| ModeLabel::Outlet(o).to_string()).collect()
}

/// Where a detection happens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    /// Stage-1 detector behind one Stern-Gerlach outlet.
    Detector(Path, Spin),
    /// Stage-2 detector covering both ports of one combiner.
    Combiner(Combiner),
}

impl Region {
    pub const STAGE1: [Region; 4] = [
        Region::Detector(Path::Up, Spin::Plus),
        Region::Detector(Path::Up, Spin::Minus),
        Region::Detector(Path::Down, Spin::Plus),
        Region::Detector(Path::Down, Spin::Minus),
    ];
    pub const STAGE2: [Region; 2] = [Region::Combiner(Combiner::Bc1), Region::Combiner(Combiner::Bc2)];

    pub fn name(self) -> String {
        match self {
            Region::Detector(p, s) => format!("D_{}", ModeLabel::PathSpin(p, s)).replace(',', ""),
            Region::Combiner(Combiner::Bc1) => "BC1".into(),
            Region::Combiner(Combiner::Bc2) => "BC2".into(),
        }
    }

    /// Modes covered by this detector region.
    pub fn modes(self) -> Vec<ModeLabel> {
        match self {
            Region::Detector(p, s) => vec![ModeLabel::PathSpin(p, s)],
            Region::Combiner(c) => Outlet::ALL
                .into_iter()
                .filter(|o| o.combiner() == c)
                .map(ModeLabel::Outlet)
                .collect(),
        }
    }

    /// Value of `Z1Z2` this detection reports.
    pub fn product_value(self) -> OutcomeValue {
        match self {
            Region::Detector(p, s) => p.value() * s.value(),
            Region::Combiner(Combiner::Bc1) => OutcomeValue::Plus,
            Region::Combiner(Combiner::Bc2) => OutcomeValue::Minus,
        }
    }

    fn projector<T: Scalar>(self) -> Matrix<T> {
        let labels: Vec<ModeLabel> = match self {
            Region::Detector(..) => ModeLabel::PATH_SPIN.to_vec(),
            Region::Combiner(_) => Outlet::ALL.iter().map(|&o| ModeLabel::Outlet(o)).collect(),
        };
        let covered = self.modes();
        let diag: Vec<C<T>> = labels
            .iter()
            .map(|l| if covered.contains(l) { C::one() } else { C::zero() })
            .collect();
        Matrix::diag(&diag)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

fn sqrt_half<T: Scalar>() -> T {
    T::FRAC_1_SQRT_2()
}

/// The two input superpositions whose images are fixed: BC1a's and BC2a's.
fn fixed_inputs<T: Scalar>() -> [Vec<C<T>>; 2] {
    let h = Complex::new(sqrt_half::<T>(), T::zero());
    let z = C::zero();
    [vec![h, z, z, h], vec![z, h, h, z]]
}

/// The orthogonal complement of [`fixed_inputs`], in BC1b, BC2b order.
fn complement_inputs<T: Scalar>() -> [Vec<C<T>>; 2] {
    let h = Complex::new(sqrt_half::<T>(), T::zero());
    let z = C::zero();
    [vec![h, z, z, -h], vec![z, h, -h, z]]
}

/// Unitary from the path ⊗ spin modes to the four combiner ports.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinerUnitary<T: Scalar> {
    map: UnitaryMap<T>,
}

impl<T: Scalar> CombinerUnitary<T> {
    /// Validates unitarity and that the BC1a and BC2a rows send the fixed
    /// superpositions to those ports (up to a phase).
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        let map = UnitaryMap::new(matrix, path_spin_labels(), outlet_labels())?;
        let c = CombinerUnitary { map };
        let defect = c.routing_defect();
        if defect > T::tolerance() {
            return Err(Error::InvalidCombiner(format!("fixed rows deviate by {defect}")));
        }
        Ok(c)
    }

    /// `max(1 − |⟨BC1a|U|in₁⟩|, 1 − |⟨BC2a|U|in₂⟩|)`.
    pub fn routing_defect(&self) -> T {
        routing_defect(self.map.matrix())
    }

    pub fn map(&self) -> &UnitaryMap<T> {
        &self.map
    }

    pub fn matrix(&self) -> &Matrix<T> {
        self.map.matrix()
    }
}

/// See [`CombinerUnitary::routing_defect`]; usable on unvalidated matrices.
pub fn routing_defect<T: Scalar>(m: &Matrix<T>) -> T {
    if m.dim() != 4 {
        return T::infinity();
    }
    let [in1, in2] = fixed_inputs::<T>();
    let row_amp = |row: usize, input: &[C<T>]| {
        m.row(row).iter().zip(input).fold(C::<T>::zero(), |acc, (&a, &b)| acc + a * b).norm()
    };
    (T::one() - row_amp(0, &in1)).abs().max((T::one() - row_amp(2, &in2)).abs())
}

/// The documented real completion.
pub fn combiner_unitary<T: Scalar>() -> CombinerUnitary<T> {
    let [f1, f2] = fixed_inputs::<T>();
    let [c1, c2] = complement_inputs::<T>();
    // row k of U is ⟨out_k| U, i.e. the conjugate of the input sent to out_k
    let rows = [f1, c1, f2, c2].map(|v| v.iter().map(|z| z.conj()).collect::<Vec<_>>());
    CombinerUnitary::new(Matrix::from_rows(rows.to_vec()).expect("4x4 literal"))
        .expect("documented completion is unitary")
}

/// Family of completions to draw from in [`random_completion`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompletionFamily {
    /// Each combiner only receives its own two routed Stern-Gerlach outlets;
    /// the free parameters are the phases of the four rows.
    Routed,
    /// The two completing rows are an arbitrary orthonormal basis of the
    /// complement of the fixed rows, mixing the two combiners' inputs.
    Unrestricted,
}

fn random_phase<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> C<T> {
    let theta = T::of(rng.random::<f64>() * std::f64::consts::TAU);
    Complex::from_polar(T::one(), theta)
}

/// Haar-random 2x2 unitary via Gram-Schmidt on a complex Gaussian matrix.
fn random_unitary_2<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> [[C<T>; 2]; 2] {
    let mut g = || {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(T::of(re), T::of(im))
    };
    let a = [g(), g()];
    let b = [g(), g()];
    let na = crate::linalg::norm(&a);
    let a = [a[0] / na, a[1] / na];
    let overlap = inner(&a, &b);
    let b = [b[0] - a[0] * overlap, b[1] - a[1] * overlap];
    let nb = crate::linalg::norm(&b);
    [a, [b[0] / nb, b[1] / nb]]
}

/// Random completion of the two fixed rows within `family`.
pub fn random_completion<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    family: CompletionFamily,
) -> CombinerUnitary<T> {
    let [f1, f2] = fixed_inputs::<T>();
    let [c1, c2] = complement_inputs::<T>();
    let scale = |v: &[C<T>], k: C<T>| v.iter().map(|&z| z * k).collect::<Vec<_>>();
    let (p1, p2) = (random_phase::<T, R>(rng), random_phase::<T, R>(rng));
    let (r1, r3) = (scale(&f1, p1), scale(&f2, p2));
    let (r2, r4) = match family {
        CompletionFamily::Routed => {
            (scale(&c1, random_phase::<T, R>(rng)), scale(&c2, random_phase::<T, R>(rng)))
        }
        CompletionFamily::Unrestricted => {
            let v = random_unitary_2::<T, R>(rng);
            let mix = |w: [C<T>; 2]| -> Vec<C<T>> {
                c1.iter().zip(&c2).map(|(&a, &b)| w[0] * a + w[1] * b).collect()
            };
            (mix(v[0]), mix(v[1]))
        }
    };
    let rows = [r1, r2, r3, r4].map(|v| v.iter().map(|z| z.conj()).collect::<Vec<_>>());
    CombinerUnitary::new(Matrix::from_rows(rows.to_vec()).expect("4x4"))
        .expect("completion of an orthonormal pair is unitary")
}

/// Effects `(E_BC1, E_BC2)` of the stage-2 detectors in path ⊗ spin labels.
pub fn region_povm<T: Scalar>(combiner: &CombinerUnitary<T>) -> (Matrix<T>, Matrix<T>) {
    let u = combiner.matrix();
    let ud = u.adjoint();
    let effect = |r: Region| {
        ud.matmul(&r.projector::<T>()).and_then(|m| m.matmul(u)).expect("4x4 products")
    };
    (effect(Region::Combiner(Combiner::Bc1)), effect(Region::Combiner(Combiner::Bc2)))
}

pub fn stage2_povm<T: Scalar>() -> (Matrix<T>, Matrix<T>) {
    region_povm(&combiner_unitary())
}

/// `E_BC1 − E_BC2`: the ±1 observable the stage-2 apparatus measures.
pub fn measured_observable<T: Scalar>(combiner: &CombinerUnitary<T>) -> Result<Observable<T>> {
    let (e1, e2) = region_povm(combiner);
    Observable::new(e1.sub(&e2)?)
}

fn check_path_spin<T: Scalar>(s: &StateVector<T>) -> Result<()> {
    if s.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: s.dim() });
    }
    if s.labels() != path_spin_labels().as_slice() {
        return Err(Error::InvalidLabels(format!(
            "apparatus input must use path-spin labels, got {:?}",
            s.labels()
        )));
    }
    Ok(())
}

/// Fine-grained detection: one detector per Stern-Gerlach outlet; the
/// post-state is the detected mode.
pub fn stage1_distribution<T: Scalar>(s: &StateVector<T>) -> Result<OutcomeDistribution<Region, T>> {
    check_path_spin(s)?;
    let mut entries = Vec::new();
    for r in Region::STAGE1 {
        if let (p, Some(post_state)) = project(s, &r.projector())? {
            entries.push(OutcomeEntry { outcome: r, probability: p, post_state });
        }
    }
    OutcomeDistribution::from_entries(entries)
}

/// Coarse-grained detection behind the combiners.
///
/// Post-states are the Lüders projections onto the fired combiner's two
/// ports, mapped back through `U†` into path ⊗ spin labels.
pub fn stage2_distribution<T: Scalar>(
    s: &StateVector<T>,
    combiner: &CombinerUnitary<T>,
) -> Result<OutcomeDistribution<Region, T>> {
    check_path_spin(s)?;
    let out = apply(combiner.map(), s)?;
    let back = combiner.map().inverse();
    let mut entries = Vec::new();
    for r in Region::STAGE2 {
        if let (p, Some(post)) = project(&out, &r.projector())? {
            entries.push(OutcomeEntry {
                outcome: r,
                probability: p,
                post_state: apply(&back, &post)?,
            });
        }
    }
    OutcomeDistribution::from_entries(entries)
}

/// Per-region counts from a seeded run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunStatistics {
    pub stage: u8,
    pub trials: u64,
    pub counts: BTreeMap<Region, u64>,
    pub follow_up: Option<BTreeMap<(Region, OutcomeValue), u64>>,
}

impl RunStatistics {
    fn empty(stage: u8, regions: &[Region], follow_up: bool) -> Self {
        RunStatistics {
            stage,
            trials: 0,
            counts: regions.iter().map(|&r| (r, 0)).collect(),
            follow_up: follow_up.then(|| {
                regions
                    .iter()
                    .flat_map(|&r| OutcomeValue::BOTH.map(|v| ((r, v), 0)))
                    .collect()
            }),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        if let (Some(a), Some(b)) = (self.follow_up.as_mut(), other.follow_up) {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
        }
        self
    }

    pub fn count(&self, r: Region) -> u64 {
        self.counts.get(&r).copied().unwrap_or(0)
    }

    pub fn frequency(&self, r: Region) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.count(r) as f64 / self.trials as f64
        }
    }

    /// Counts of the reported `Z1Z2` value.
    pub fn product_counts(&self) -> BTreeMap<OutcomeValue, u64> {
        let mut out: BTreeMap<OutcomeValue, u64> = OutcomeValue::BOTH.map(|v| (v, 0)).into();
        for (r, c) in &self.counts {
            *out.entry(r.product_value()).or_insert(0) += c;
        }
        out
    }

    /// Follow-up counts summed over regions.
    pub fn follow_up_totals(&self) -> Option<BTreeMap<OutcomeValue, u64>> {
        self.follow_up.as_ref().map(|f| {
            let mut out: BTreeMap<OutcomeValue, u64> = OutcomeValue::BOTH.map(|v| (v, 0)).into();
            for ((_, v), c) in f {
                *out.entry(*v).or_insert(0) += c;
            }
            out
        })
    }

    /// Checks the bookkeeping invariants: counts and follow-up counts sum to
    /// the number of trials.
    pub fn is_consistent(&self) -> bool {
        let total: u64 = self.counts.values().sum();
        let follow_ok = self.follow_up.as_ref().is_none_or(|f| f.values().sum::<u64>() == self.trials);
        total == self.trials && follow_ok
    }
}

fn check_follow_up<T: Scalar>(follow_up: Option<&Observable<T>>) -> Result<()> {
    if let Some(o) = follow_up {
        if o.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: o.dim() });
        }
        let d = o.matrix().involution_defect();
        if d > T::tolerance() {
            return Err(Error::NotInvolution(d.as_f64()));
        }
    }
    Ok(())
}

/// Samples `trials` detections from `dist`; trial `i` draws from substream `i`
/// of `rng`, so the tallies do not depend on scheduling.
fn run<T: Scalar>(
    stage: u8,
    regions: &[Region],
    dist: &OutcomeDistribution<Region, T>,
    trials: u64,
    rng: &RngStream,
    follow_up: Option<&Observable<T>>,
) -> Result<RunStatistics> {
    let follow_dists: Option<BTreeMap<Region, OutcomeDistribution<OutcomeValue, T>>> = follow_up
        .map(|o| {
            dist.entries()
                .iter()
                .map(|e| Ok((e.outcome, measure(&e.post_state, o)?)))
                .collect::<Result<_>>()
        })
        .transpose()?;
    let empty = RunStatistics::empty(stage, regions, follow_up.is_some());
    let stats = (0..trials)
        .into_par_iter()
        .fold(
            || empty.clone(),
            |mut acc, i| {
                let mut sub = rng.substream(i);
                let (region, _) = sample(dist, &mut sub);
                acc.trials += 1;
                *acc.counts.entry(region).or_insert(0) += 1;
                if let (Some(fd), Some(f)) = (follow_dists.as_ref(), acc.follow_up.as_mut()) {
                    let (v, _) = sample(&fd[&region], &mut sub);
                    *f.entry((region, v)).or_insert(0) += 1;
                }
                acc
            },
        )
        .reduce(|| empty.clone(), RunStatistics::merge);
    Ok(stats)
}

pub fn run_stage1<T: Scalar>(
    s: &StateVector<T>,
    trials: u64,
    rng: &RngStream,
    follow_up: Option<&Observable<T>>,
) -> Result<RunStatistics> {
    check_follow_up(follow_up)?;
    let dist = stage1_distribution(s)?;
    run(1, &Region::STAGE1, &dist, trials, rng, follow_up)
}

pub fn run_stage2<T: Scalar>(
    s: &StateVector<T>,
    trials: u64,
    rng: &RngStream,
    follow_up: Option<&Observable<T>>,
) -> Result<RunStatistics> {
    run_stage2_with(&combiner_unitary(), s, trials, rng, follow_up)
}

pub fn run_stage2_with<T: Scalar>(
    combiner: &CombinerUnitary<T>,
    s: &StateVector<T>,
    trials: u64,
    rng: &RngStream,
    follow_up: Option<&Observable<T>>,
) -> Result<RunStatistics> {
    check_follow_up(follow_up)?;
    let dist = stage2_distribution(s, combiner)?;
    run(2, &Region::STAGE2, &dist, trials, rng, follow_up)
}

/// Analytic view of one stage followed by an optional follow-up measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageAnalysis<T: Scalar> {
    pub regions: BTreeMap<Region, T>,
    pub product: BTreeMap<OutcomeValue, T>,
    pub follow_up: BTreeMap<OutcomeValue, T>,
    /// `P(region, follow-up value)`.
    pub joint: Vec<(Region, OutcomeValue, T)>,
}

fn analyse<T: Scalar>(
    dist: &OutcomeDistribution<Region, T>,
    follow_up: &Observable<T>,
) -> Result<StageAnalysis<T>> {
    let mut follow = BTreeMap::new();
    let mut joint = Vec::new();
    for e in dist.entries() {
        let f = measure(&e.post_state, follow_up)?;
        for fe in f.entries() {
            let p = e.probability * fe.probability;
            *follow.entry(fe.outcome).or_insert_with(T::zero) += p;
            joint.push((e.outcome, fe.outcome, p));
        }
    }
    Ok(StageAnalysis {
        regions: dist.marginal(|&r| r),
        product: dist.marginal(|r| r.product_value()),
        follow_up: follow,
        joint,
    })
}

pub fn analyse_stage1<T: Scalar>(
    s: &StateVector<T>,
    follow_up: &Observable<T>,
) -> Result<StageAnalysis<T>> {
    check_follow_up(Some(follow_up))?;
    analyse(&stage1_distribution(s)?, follow_up)
}

pub fn analyse_stage2<T: Scalar>(
    s: &StateVector<T>,
    follow_up: &Observable<T>,
) -> Result<StageAnalysis<T>> {
    check_follow_up(Some(follow_up))?;
    analyse(&stage2_distribution(s, &combiner_unitary())?, follow_up)
}

fn max_abs_diff<T: Scalar>(a: &BTreeMap<OutcomeValue, T>, b: &BTreeMap<OutcomeValue, T>) -> T {
    OutcomeValue::BOTH
        .iter()
        .map(|v| {
            let x = a.get(v).copied().unwrap_or_else(T::zero);
            let y = b.get(v).copied().unwrap_or_else(T::zero);
            (x - y).abs()
        })
        .fold(T::zero(), T::max)
}

pub const IDEALIZATION_NOTE: &str = "stage-1 detectors are treated as non-destructive: the \
follow-up measurement acts on the collapsed Stern-Gerlach mode";

#[derive(Clone, Debug, PartialEq)]
pub struct StageContrast<T: Scalar> {
    pub stage1: StageAnalysis<T>,
    pub stage2: StageAnalysis<T>,
    pub sampled: Option<(RunStatistics, RunStatistics)>,
    /// Analytic product distributions agree, and sampled product frequencies
    /// sit within 4σ of them when sampling was requested.
    pub products_agree: bool,
    /// Total-variation distance between the two follow-up distributions.
    pub follow_up_distance: T,
    pub follow_up_differs: bool,
    pub note: &'static str,
}

/// Four-sigma binomial acceptance band used by sampled checks.
pub fn within_four_sigma(count: u64, trials: u64, p: f64) -> bool {
    if trials == 0 {
        return true;
    }
    let n = trials as f64;
    let freq = count as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    (freq - p).abs() <= 4.0 * sigma + 1e-12
}

/// Runs both stages on the same preparation and compares what the follow-up
/// sees.
pub fn stage_contrast<T: Scalar>(
    s: &StateVector<T>,
    follow_up: &Observable<T>,
    trials: u64,
    rng: &RngStream,
) -> Result<StageContrast<T>> {
    let stage1 = analyse_stage1(s, follow_up)?;
    let stage2 = analyse_stage2(s, follow_up)?;
    let mut products_agree = max_abs_diff(&stage1.product, &stage2.product) <= T::tolerance();
    let sampled = if trials > 0 {
        let r1 = run_stage1(s, trials, rng, Some(follow_up))?;
        let r2 = run_stage2(s, trials, rng, Some(follow_up))?;
        for r in [&r1, &r2] {
            for (v, c) in r.product_counts() {
                let p = stage1.product.get(&v).copied().unwrap_or_else(T::zero).as_f64();
                products_agree &= within_four_sigma(c, trials, p);
            }
        }
        Some((r1, r2))
    } else {
        None
    };
    let follow_up_distance = max_abs_diff(&stage1.follow_up, &stage2.follow_up);
    Ok(StageContrast {
        stage1,
        stage2,
        sampled,
        products_agree,
        follow_up_differs: follow_up_distance > T::tolerance(),
        follow_up_distance,
        note: IDEALIZATION_NOTE,
    })
}

/// Region a single Stern-Gerlach mode is routed to, with its probability.
pub fn routing<T: Scalar>(
    combiner: &CombinerUnitary<T>,
    mode: ModeLabel,
) -> Result<BTreeMap<Region, T>> {
    let s = StateVector::basis_labeled(path_spin_labels(), &mode.to_string())?;
    Ok(stage2_distribution(&s, combiner)?.marginal(|&r| r))
}

pub fn detector_names() -> Vec<String> {
    Region::STAGE1.iter().map(|r| r.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, spectral_projectors};
    use crate::presets::{observable, state, Obs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;
    const BC1: Region = Region::Combiner(Combiner::Bc1);
    const BC2: Region = Region::Combiner(Combiner::Bc2);

    #[test]
    fn region_names() {
        assert_eq!(detector_names(), vec!["D_u+", "D_u-", "D_d+", "D_d-"]);
        assert_eq!(BC1.name(), "BC1");
        assert_eq!(BC2.modes(), vec![ModeLabel::Outlet(Outlet::Bc2a), ModeLabel::Outlet(Outlet::Bc2b)]);
    }

    #[test]
    fn combiner_sends_fixed_inputs_to_a_ports() {
        let u = combiner_unitary::<f64>();
        let out = apply(u.map(), &state("phi+").unwrap()).unwrap();
        assert!((out.amplitude_of("BC1a").unwrap().norm() - 1.0).abs() < TOL);
        let s = StateVector::<f64>::from_real(&[0.0, 1.0, 1.0, 0.0], path_spin_labels()).unwrap();
        let out = apply(u.map(), &s).unwrap();
        assert!((out.amplitude_of("BC2a").unwrap().norm() - 1.0).abs() < TOL);
        assert!(u.matrix().unitarity_defect() < TOL);
    }

    #[test]
    fn combiner_on_single_mode() {
        // oracle: |u,+⟩ = (in₁ + c₁)/√2, so it lands on (|BC1a⟩ + |BC1b⟩)/√2
        let out = apply(combiner_unitary::<f64>().map(), &state("u+").unwrap()).unwrap();
        let h = 0.5f64.sqrt();
        for (label, expected) in [("BC1a", h), ("BC1b", h), ("BC2a", 0.0), ("BC2b", 0.0)] {
            let a = out.amplitude_of(label).unwrap();
            assert!((a.re - expected).abs() < TOL && a.im.abs() < TOL, "{label}");
        }
        let d = stage2_distribution(&state::<f64>("u+").unwrap(), &combiner_unitary()).unwrap();
        assert!((d.probability(&BC1) - 1.0).abs() < TOL);
    }

    #[test]
    fn corrupted_combiner_is_rejected() {
        let m = combiner_unitary::<f64>().matrix().clone();
        let mut swapped = Matrix::zeros(4);
        for (i, src) in [1, 0, 2, 3].into_iter().enumerate() {
            for j in 0..4 {
                swapped[(i, j)] = m[(src, j)];
            }
        }
        let m = swapped;
        // still unitary, but row BC1a no longer targets the fixed superposition
        assert!(matches!(CombinerUnitary::new(m), Err(Error::InvalidCombiner(_))));
        let mut m = combiner_unitary::<f64>().matrix().clone();
        m[(0, 0)] = Complex::new(1.0, 0.0);
        assert!(matches!(CombinerUnitary::new(m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn stage2_povm_is_the_product_projector_pair() {
        let (e1, e2) = stage2_povm::<f64>();
        let p = spectral_projectors(&observable::<f64>(Obs::Z1Z2)).unwrap();
        assert!(e1.approx_eq(&p.plus, TOL));
        assert!(e2.approx_eq(&p.minus, TOL));
        assert!(e1.add(&e2).unwrap().approx_eq(&Matrix::identity(4), TOL));
        assert!(e1.matmul(&e2).unwrap().is_zero_within(TOL));
        let o = measured_observable(&combiner_unitary::<f64>()).unwrap();
        assert!(o.matrix().approx_eq(observable::<f64>(Obs::Z1Z2).matrix(), TOL));
    }

    #[test]
    fn routed_completions_share_the_povm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (e1, _) = stage2_povm::<f64>();
        for _ in 0..20 {
            let c = random_completion::<f64, _>(&mut rng, CompletionFamily::Routed);
            let (f1, _) = region_povm(&c);
            assert!(f1.approx_eq(&e1, TOL));
        }
    }

    #[test]
    fn unrestricted_completions_change_the_povm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (e1, _) = stage2_povm::<f64>();
        let changed = (0..20)
            .filter(|_| {
                let c = random_completion::<f64, _>(&mut rng, CompletionFamily::Unrestricted);
                assert!(c.routing_defect() < TOL);
                !region_povm(&c).0.approx_eq(&e1, 1e-6)
            })
            .count();
        assert_eq!(changed, 20);
    }

    #[test]
    fn stage1_examples() {
        let rng = RngStream::new(0);
        let r = run_stage1(&state::<f64>("u+").unwrap(), 1000, &rng, None).unwrap();
        assert_eq!(r.count(Region::Detector(Path::Up, Spin::Plus)), 1000);
        assert!(r.is_consistent());

        let n = 100_000;
        let r = run_stage1(&state::<f64>("phi+").unwrap(), n, &rng, None).unwrap();
        for (region, p) in [
            (Region::Detector(Path::Up, Spin::Plus), 0.5),
            (Region::Detector(Path::Down, Spin::Minus), 0.5),
        ] {
            assert!(within_four_sigma(r.count(region), n, p));
        }
        assert_eq!(r.count(Region::Detector(Path::Up, Spin::Minus)), 0);
        assert_eq!(r.count(Region::Detector(Path::Down, Spin::Plus)), 0);

        let r = run_stage1(&state::<f64>("singlet").unwrap(), n, &rng, None).unwrap();
        assert!(within_four_sigma(r.count(Region::Detector(Path::Up, Spin::Minus)), n, 0.5));
        assert!(within_four_sigma(r.count(Region::Detector(Path::Down, Spin::Plus)), n, 0.5));
    }

    #[test]
    fn stage2_examples() {
        let rng = RngStream::new(3);
        let x1x2 = observable::<f64>(Obs::X1X2);
        let r = run_stage2(&state::<f64>("phi+").unwrap(), 5000, &rng, Some(&x1x2)).unwrap();
        assert_eq!(r.count(BC1), 5000);
        assert_eq!(r.follow_up.as_ref().unwrap()[&(BC1, OutcomeValue::Plus)], 5000);
        assert!(r.is_consistent());

        let r = run_stage2(&state::<f64>("u+").unwrap(), 500, &rng, None).unwrap();
        assert_eq!(r.count(BC1), 500);
        let s = StateVector::<f64>::from_real(&[0.0, 1.0, 1.0, 0.0], path_spin_labels()).unwrap();
        let r = run_stage2(&s, 500, &rng, None).unwrap();
        assert_eq!(r.count(BC2), 500);
    }

    #[test]
    fn stage2_rejects_bad_inputs() {
        let rng = RngStream::new(0);
        let z = state::<f64>("z+").unwrap();
        assert!(matches!(run_stage2(&z, 1, &rng, None), Err(Error::DimensionMismatch { .. })));
        let bad = Observable::new(Matrix::<f64>::identity(4).scale_real(2.0)).unwrap();
        assert!(matches!(
            run_stage2(&state("phi+").unwrap(), 1, &rng, Some(&bad)),
            Err(Error::NotInvolution(_))
        ));
        let relabeled = state::<f64>("phi+").unwrap().relabeled(outlet_labels()).unwrap();
        assert!(matches!(stage1_distribution(&relabeled), Err(Error::InvalidLabels(_))));
    }

    #[test]
    fn region_probability_matches_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half_sum = |o: &Observable<f64>| {
            Observable::new(Matrix::identity(4).add(o.matrix()).unwrap().scale_real(0.5)).unwrap()
        };
        let p_plus = half_sum(&observable(Obs::Z1Z2));
        for _ in 0..50 {
            let s = StateVector::<f64>::random(path_spin_labels(), &mut rng);
            let d = stage2_distribution(&s, &combiner_unitary()).unwrap();
            let e = expectation(&s, &p_plus).unwrap();
            assert!((d.probability(&BC1) - e).abs() < TOL);
        }
    }

    #[test]
    fn coherence_is_retained_through_the_combiner() {
        let phi = state::<f64>("phi+").unwrap();
        let d = stage2_distribution(&phi, &combiner_unitary()).unwrap();
        assert!((d.entries()[0].post_state.fidelity(&phi) - 1.0).abs() < TOL);
        let d1 = stage1_distribution(&phi).unwrap();
        for e in d1.entries() {
            let nonzero = e.post_state.amplitudes().iter().filter(|a| a.norm() > TOL).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn contrast_on_phi_plus() {
        let c = stage_contrast(
            &state::<f64>("phi+").unwrap(),
            &observable(Obs::X1X2),
            100_000,
            &RngStream::new(0),
        )
        .unwrap();
        assert!(c.products_agree);
        assert!((c.stage1.follow_up[&OutcomeValue::Plus] - 0.5).abs() < TOL);
        assert!((c.stage2.follow_up[&OutcomeValue::Plus] - 1.0).abs() < TOL);
        assert!((c.stage1.product[&OutcomeValue::Plus] - 1.0).abs() < TOL);
        assert!(c.follow_up_differs);
        let (r1, r2) = c.sampled.unwrap();
        let f1 = r1.follow_up_totals().unwrap();
        assert!(within_four_sigma(f1[&OutcomeValue::Plus], 100_000, 0.5));
        assert_eq!(r2.follow_up_totals().unwrap()[&OutcomeValue::Plus], 100_000);
    }

    #[test]
    fn contrast_on_a_single_mode() {
        let c = stage_contrast(
            &state::<f64>("u+").unwrap(),
            &observable(Obs::X1X2),
            0,
            &RngStream::new(0),
        )
        .unwrap();
        assert!(!c.follow_up_differs);
        assert!(c.sampled.is_none());
    }

    #[test]
    fn runs_are_deterministic() {
        let s = state::<f64>("x+u").unwrap();
        let x = observable::<f64>(Obs::X2);
        let a = run_stage2(&s, 2000, &RngStream::new(8), Some(&x)).unwrap();
        let b = run_stage2(&s, 2000, &RngStream::new(8), Some(&x)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn routing_of_fine_modes() {
        let c = combiner_unitary::<f64>();
        for m in ModeLabel::PATH_SPIN {
            let r = routing(&c, m).unwrap();
            assert_eq!(r.len(), 1);
            let ModeLabel::PathSpin(p, s) = m else { unreachable!() };
            let expected = if (p.value() * s.value()).is_plus() { BC1 } else { BC2 };
            assert!((r[&expected] - 1.0).abs() < TOL);
        }
    }
}
