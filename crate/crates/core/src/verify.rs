//! Analytic self-check suite.
//!
//! Every module's algebraic invariants, evaluated exactly (no sampling) on
//! fixed inputs and on deterministically seeded random states. The combiner
//! matrix is injectable so a corrupted optical element can be diagnosed.

use serde::Serialize;

use crate::apparatus::{
    self, region_povm, stage1_distribution, stage2_distribution, CombinerUnitary, CompletionFamily,
    Region,
};
use crate::counterfactual::{
    self, counterfactual_report, enumerate_branches, Ensemble, MatchingPolicy, Modification, Status,
    Timeline, TimelineEvent,
};
use crate::hilbert::{
    apply, commutator, expectation, path_spin_labels, product, spectral_projectors, Observable,
    StateVector,
};
use crate::linalg::{norm, Matrix};
use crate::measurement::{
    functional_consistency_check, joint_measure, measure, JointOutcome, OutcomeValue, StepOutcome,
};
use crate::nchv::{self, ProductSpec, Symbol, ValueAssignment};
use crate::presets::{observable, state, Obs};
use crate::rng::RngStream;
use crate::scalar::Scalar;

const TOL: f64 = 1e-12;
/// Seed of the random states used by the suite; fixed so runs are identical.
pub const VERIFY_SEED: u64 = 0x6b_736c_6162;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.failures() == 0
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    /// Records one check; errors count as failures.
    fn check(
        &mut self,
        module: &'static str,
        name: &'static str,
        f: impl FnOnce() -> crate::Result<(bool, String)>,
    ) {
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { module, name, passed, detail });
    }
}

fn random_states(n: usize, stream: u64) -> Vec<StateVector<f64>> {
    let mut rng = RngStream::at(VERIFY_SEED, stream, 0);
    (0..n).map(|_| StateVector::random(path_spin_labels(), &mut rng)).collect()
}

fn all_observables() -> Vec<(Obs, Observable<f64>)> {
    Obs::ALL.iter().map(|&o| (o, observable(o))).collect()
}

fn max_over<I: IntoIterator<Item = crate::Result<f64>>>(it: I) -> crate::Result<f64> {
    it.into_iter().try_fold(0.0_f64, |m, x| Ok(m.max(x?)))
}

fn defect_detail(d: f64) -> (bool, String) {
    (d <= TOL, format!("max defect {d:.3e}"))
}

/// Runs the suite with the default combiner.
pub fn run_all() -> VerifyReport {
    run_with_combiner(apparatus::combiner_unitary::<f64>().matrix().clone())
}

/// Runs the suite against an arbitrary combiner matrix.
pub fn run_with_combiner(combiner_matrix: Matrix<f64>) -> VerifyReport {
    let mut s = Suite { checks: Vec::new() };
    hilbert_checks(&mut s);
    measurement_checks(&mut s);
    nchv_checks(&mut s);
    apparatus_checks(&mut s, &combiner_matrix);
    counterfactual_checks(&mut s, &combiner_matrix);
    VerifyReport { checks: s.checks }
}

fn hilbert_checks(s: &mut Suite) {
    s.check("hilbert", "spectral projectors resolve identity", || {
        let d = max_over(all_observables().iter().map(|(_, o)| Ok(spectral_projectors(o)?.defect())))?;
        Ok(defect_detail(d))
    });
    s.check("hilbert", "commutator antisymmetry", || {
        let obs = all_observables();
        let mut d = 0.0_f64;
        for (_, a) in &obs {
            for (_, b) in &obs {
                d = d.max(commutator(a, b)?.add(&commutator(b, a)?)?.frobenius_norm());
            }
        }
        Ok(defect_detail(d))
    });
    s.check("hilbert", "expectation is real on 100 random states", || {
        let states = random_states(100, 1);
        let mut d = 0.0_f64;
        for st in &states {
            for (_, o) in all_observables() {
                let v = o.act(st)?;
                d = d.max(crate::linalg::inner(st.amplitudes(), &v).im.abs());
                expectation(st, &o)?;
            }
        }
        Ok(defect_detail(d))
    });
    s.check("hilbert", "product observables are involutions", || {
        let d = [Obs::Z1Z2, Obs::X1X2, Obs::Z1X2, Obs::X1Z2]
            .iter()
            .map(|&o| observable::<f64>(o).matrix().involution_defect())
            .fold(0.0, f64::max);
        Ok(defect_detail(d))
    });
    s.check("hilbert", "product pairs commute", || {
        let a = commutator(&observable::<f64>(Obs::Z1Z2), &observable(Obs::X1X2))?.frobenius_norm();
        let b = commutator(&observable::<f64>(Obs::Z1X2), &observable(Obs::X1Z2))?.frobenius_norm();
        Ok((a <= TOL && b <= TOL, format!("|[Z1Z2,X1X2]| = {a:.3e}, |[Z1X2,X1Z2]| = {b:.3e}")))
    });
    s.check("hilbert", "single-particle pairs do not commute", || {
        let a = commutator(&observable::<f64>(Obs::Z1), &observable(Obs::X1))?.frobenius_norm();
        let b = commutator(&observable::<f64>(Obs::Z2), &observable(Obs::X2))?.frobenius_norm();
        Ok((a > 3.9 && b > 3.9, format!("|[Z1,X1]| = {a:.6}, |[Z2,X2]| = {b:.6}")))
    });
    s.check("hilbert", "product of the mixed pairs equals Y1Y2", || {
        let zx = product(&observable::<f64>(Obs::Z1X2), &observable(Obs::X1Z2))?;
        let yy = observable::<f64>(Obs::Y1Y2);
        let d = zx.matrix().distance(yy.matrix())?;
        Ok((d <= TOL, format!("|Z1X2·X1Z2 - Y1Y2| = {d:.3e}")))
    });
}

fn measurement_checks(s: &mut Suite) {
    s.check("measurement", "distributions normalized on 200 random pairs", || {
        let states = random_states(200, 2);
        let obs = all_observables();
        let d = max_over(states.iter().enumerate().map(|(i, st)| {
            let (_, o) = &obs[i % obs.len()];
            Ok((measure(st, o)?.total() - 1.0).abs())
        }))?;
        Ok(defect_detail(d))
    });
    s.check("measurement", "immediate repetition is deterministic", || {
        let states = random_states(20, 3);
        let mut d = 0.0_f64;
        for st in &states {
            for (_, o) in all_observables() {
                for e in measure(st, &o)?.entries() {
                    let again = measure(&e.post_state, &o)?;
                    d = d.max((again.probability(&e.outcome) - 1.0).abs());
                }
            }
        }
        Ok(defect_detail(d))
    });
    s.check("measurement", "joint marginals match single measurements", || {
        let states = random_states(50, 4);
        let pairs = commuting_pairs();
        let mut d = 0.0_f64;
        for st in &states {
            for (a, b) in &pairs {
                let j = joint_measure(st, a, b)?.marginal(|j| j.first);
                let m = measure(st, a)?;
                for v in OutcomeValue::BOTH {
                    d = d.max((j.get(&v).copied().unwrap_or(0.0) - m.probability(&v)).abs());
                }
            }
        }
        Ok(defect_detail(d))
    });
    s.check("measurement", "functional consistency on 50 random states", || {
        let states = random_states(50, 5);
        let pairs = commuting_pairs();
        let d = max_over(states.iter().flat_map(|st| {
            pairs.iter().map(move |(a, b)| Ok(functional_consistency_check(st, a, b)?.max_deviation))
        }))?;
        Ok((d <= TOL, format!("{} pairs, max deviation {d:.3e}", pairs.len())))
    });
    s.check("measurement", "singlet has Z1Z2 = X1X2 = -1", || {
        let sg = state::<f64>("singlet")?;
        let a = expectation(&sg, &observable(Obs::Z1Z2))?;
        let b = expectation(&sg, &observable(Obs::X1X2))?;
        let d = (a + 1.0).abs().max((b + 1.0).abs());
        Ok((d <= TOL, format!("<Z1Z2> = {a:.12}, <X1X2> = {b:.12}")))
    });
    s.check("measurement", "phi+ is the (+1,+1) eigenstate of (Z1Z2, X1X2)", || {
        let phi = state::<f64>("phi+")?;
        let d = max_over([Obs::Z1Z2, Obs::X1X2].iter().map(|&o| {
            let v = observable::<f64>(o).act(&phi)?;
            let r: Vec<_> = v.iter().zip(phi.amplitudes()).map(|(x, y)| x - y).collect();
            Ok(norm(&r))
        }))?;
        Ok(defect_detail(d))
    });
    s.check("measurement", "phi+ gives (Z1X2, X1Z2) = (1,-1) or (-1,1) equally", || {
        let phi = state::<f64>("phi+")?;
        let dist = joint_measure(&phi, &observable(Obs::Z1X2), &observable(Obs::X1Z2))?;
        let expected = [((1, -1), 0.5), ((-1, 1), 0.5), ((1, 1), 0.0), ((-1, -1), 0.0)];
        let d = expected
            .iter()
            .map(|&((a, b), p)| {
                (dist.probability(&JointOutcome::from_signs(a, b).expect("±1")) - p).abs()
            })
            .fold(0.0, f64::max);
        Ok(defect_detail(d))
    });
}

fn commuting_pairs() -> Vec<(Observable<f64>, Observable<f64>)> {
    let obs: Vec<_> = Obs::SCENARIO.iter().map(|&o| observable::<f64>(o)).collect();
    let mut out = Vec::new();
    for (i, a) in obs.iter().enumerate() {
        for b in &obs[i + 1..] {
            if commutator(a, b).map(|c| c.frobenius_norm() <= TOL).unwrap_or(false) {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

fn cross_slot_specs() -> Vec<(Symbol, Symbol)> {
    let mut out = Vec::new();
    for a in [Symbol::Z1, Symbol::X1] {
        for b in [Symbol::Z2, Symbol::X2] {
            out.push((a, b));
            out.push((b, a));
        }
    }
    out
}

fn nchv_checks(s: &mut Suite) {
    s.check("nchv", "product rule on all assignments", || {
        let mut bad = 0;
        let mut total = 0;
        for a in ValueAssignment::all() {
            for (x, y) in cross_slot_specs() {
                let lhs = nchv::val(&a, &ProductSpec::pair(x, y)?);
                let rhs = nchv::val(&a, &ProductSpec::single(x)) * nchv::val(&a, &ProductSpec::single(y));
                total += 1;
                bad += usize::from(lhs != rhs);
            }
        }
        Ok((bad == 0, format!("{total} cases, {bad} violations")))
    });
    s.check("nchv", "parity identity on all assignments", || {
        let spec = |t: &str| t.parse::<ProductSpec>();
        let (zx, xz, zz, xx) = (spec("Z1X2")?, spec("X1Z2")?, spec("Z1Z2")?, spec("X1X2")?);
        let bad = ValueAssignment::all()
            .iter()
            .filter(|a| {
                nchv::val(a, &zx) * nchv::val(a, &xz) != nchv::val(a, &zz) * nchv::val(a, &xx)
            })
            .count();
        Ok((bad == 0, format!("16 assignments, {bad} violations")))
    });
    s.check("nchv", "(+1,+1) preparation admits four assignments", || {
        let n = nchv::enumerate(&nchv::product_preparation(OutcomeValue::Plus, OutcomeValue::Plus)).len();
        Ok((n == 4, format!("{n} assignments")))
    });
    s.check("nchv", "quantum and hidden-variable outcome sets are disjoint", || {
        let c = nchv::qm_nchv_contrast::<f64>()?;
        let fmt = |it: Vec<String>| it.join(" ");
        Ok((
            c.disjoint && c.nchv.len() == 2 && c.qm.len() == 2,
            format!(
                "qm {{{}}} vs nchv {{{}}}",
                fmt(c.qm.keys().map(|j| j.to_string()).collect()),
                fmt(c.nchv.iter().map(|j| j.to_string()).collect())
            ),
        ))
    });
}

fn apparatus_checks(s: &mut Suite, m: &Matrix<f64>) {
    s.check("apparatus", "combiner is unitary", || {
        let d = m.unitarity_defect();
        Ok((d <= TOL, format!("|U†U - I| = {d:.3e}")))
    });
    s.check("apparatus", "each product subspace reaches one combiner", || {
        let d = apparatus::routing_defect(m);
        Ok((d <= TOL, format!("cross-routing weight {d:.3e}")))
    });
    let combiner = CombinerUnitary::new(m.clone());
    let combiner = combiner.as_ref();
    s.check("apparatus", "region effects equal the Z1Z2 spectral projectors", || {
        let c = combiner.map_err(Clone::clone)?;
        let (e1, e2) = region_povm(c);
        let p = spectral_projectors(&observable::<f64>(Obs::Z1Z2))?;
        Ok(defect_detail(e1.distance(&p.plus)?.max(e2.distance(&p.minus)?)))
    });
    s.check("apparatus", "norm preserved through the combiner on 100 random states", || {
        let c = combiner.map_err(Clone::clone)?;
        let d = max_over(
            random_states(100, 6)
                .iter()
                .map(|st| Ok((apply(c.map(), st)?.norm() - 1.0).abs())),
        )?;
        Ok(defect_detail(d))
    });
    s.check("apparatus", "phi+ exits at BC1a", || {
        let c = combiner.map_err(Clone::clone)?;
        let out = apply(c.map(), &state("phi+")?)?;
        let a = out.amplitude_of("BC1a").map(|z| z.norm()).unwrap_or(0.0);
        Ok(((a - 1.0).abs() <= TOL, format!("|<BC1a|U|phi+>| = {a:.12}")))
    });
    s.check("apparatus", "P(BC1) equals <(I+Z1Z2)/2> on 50 random states", || {
        let c = combiner.map_err(Clone::clone)?;
        let zz = observable::<f64>(Obs::Z1Z2);
        let d = max_over(random_states(50, 7).iter().map(|st| {
            let p = stage2_distribution(st, c)?.probability(&Region::Combiner(apparatus::Combiner::Bc1));
            Ok((p - 0.5 * (1.0 + expectation(st, &zz)?)).abs())
        }))?;
        Ok(defect_detail(d))
    });
    s.check("apparatus", "stage products agree on 50 random states", || {
        let c = combiner.map_err(Clone::clone)?;
        let d = max_over(random_states(50, 8).iter().map(|st| {
            let p1 = stage1_distribution(st)?.marginal(|r| r.product_value());
            let p2 = stage2_distribution(st, c)?.marginal(|r| r.product_value());
            Ok(OutcomeValue::BOTH
                .iter()
                .map(|v| (p1.get(v).copied().unwrap_or(0.0) - p2.get(v).copied().unwrap_or(0.0)).abs())
                .fold(0.0, f64::max))
        }))?;
        Ok(defect_detail(d))
    });
    s.check("apparatus", "stage 2 keeps phi+ coherent", || {
        let c = combiner.map_err(Clone::clone)?;
        let phi = state::<f64>("phi+")?;
        let d2 = stage2_distribution(&phi, c)?;
        let f = d2.entries().iter().map(|e| e.post_state.fidelity(&phi)).fold(1.0, f64::min);
        let d1 = stage1_distribution(&phi)?;
        let basis_modes = d1.entries().iter().all(|e| {
            e.post_state.amplitudes().iter().filter(|z| z.norm() > TOL).count() == 1
        });
        Ok(((f - 1.0).abs() <= TOL && basis_modes, format!("stage-2 fidelity {f:.12}")))
    });
    s.check("apparatus", "20 routed completions give the same region effects", || {
        let reference = region_povm(&apparatus::combiner_unitary::<f64>());
        let mut rng = RngStream::at(VERIFY_SEED, 9, 0);
        let mut d = 0.0_f64;
        for _ in 0..20 {
            let u = apparatus::random_completion::<f64, _>(&mut rng, CompletionFamily::Routed);
            let (e1, e2) = region_povm(&u);
            d = d.max(e1.distance(&reference.0)?).max(e2.distance(&reference.1)?);
        }
        Ok(defect_detail(d))
    });
}

fn counterfactual_checks(s: &mut Suite, m: &Matrix<f64>) {
    s.check("counterfactual", "branch probabilities sum to one", || {
        let (fig3, _) = counterfactual::preset_fig3::<f64>();
        let mut timelines = vec![fig3];
        for st in random_states(10, 10) {
            timelines.push(Timeline::new(
                Ensemble::pure(st),
                vec![
                    TimelineEvent::single("t1", observable(Obs::Z1)),
                    TimelineEvent::new(
                        "t2",
                        crate::measurement::Step::Pair(observable(Obs::Z1X2), observable(Obs::X1Z2)),
                    ),
                    TimelineEvent::single("t3", observable(Obs::X1X2)),
                ],
            )?);
        }
        let d = max_over(timelines.iter().map(|tl| {
            let total: f64 = enumerate_branches(tl)?.iter().map(|b| b.probability).sum();
            Ok((total - 1.0).abs())
        }))?;
        Ok(defect_detail(d))
    });
    s.check("counterfactual", "repeated measurement is forced", || {
        let mut worst = 0.0_f64;
        for (i, st) in random_states(10, 11).into_iter().enumerate() {
            let o = observable::<f64>(Obs::SCENARIO[i % Obs::SCENARIO.len()]);
            let base = Timeline::new(Ensemble::pure(st), vec![TimelineEvent::single("t1", o.clone())])?;
            let tl = Timeline::new(
                base.initial().clone(),
                vec![TimelineEvent::single("t1", o.clone()), TimelineEvent::single("t", o)],
            )?;
            for b in enumerate_branches(&base)? {
                let rec = counterfactual::Record::from([("t1".to_string(), b.outcomes[0])]);
                let c = counterfactual::classify(&tl, &rec, "t", b.outcomes[0])?;
                worst = worst.max((c.probability - 1.0).abs());
            }
        }
        Ok(defect_detail(worst))
    });
    s.check("counterfactual", "x repeat forced while recorded z becomes possible", || {
        let (base, record) = counterfactual::preset_fig3::<f64>();
        let r = counterfactual_report(
            &base,
            &record,
            &counterfactual::insert_intermediate_x(),
            MatchingPolicy::HoldPriorOutcomes,
        )?;
        let t = &r.events[1];
        let forced = t.outcomes.iter().any(|o| {
            o.outcome == StepOutcome::Single(OutcomeValue::Plus)
                && o.classification.status == Status::Forced
        });
        let t2 = r.events[2].recorded_status.ok_or(crate::Error::ImpossibleRecord)?;
        let ok = forced && t2.status == Status::Possible && (t2.probability - 0.5).abs() <= TOL;
        Ok((ok, format!("P(z=+1 at t2) = {:.12}", t2.probability)))
    });
    s.check("counterfactual", "replacing x by z forces agreement at t2", || {
        let (base, record) = counterfactual::preset_fig3::<f64>();
        let r = counterfactual_report(
            &base,
            &record,
            &counterfactual::replace_first_with_z(),
            MatchingPolicy::HoldPriorOutcomes,
        )?;
        Ok((
            r.forced_equal_to_modified == ["t2"],
            format!("forced equal: {:?}", r.forced_equal_to_modified),
        ))
    });
    s.check("counterfactual", "retrodiction forced exactly on product eigenstates", || {
        let c = CombinerUnitary::new(m.clone())?;
        let mut inputs = counterfactual::retrodiction_inputs::<f64>();
        inputs.extend(random_states(50, 12).into_iter().enumerate().map(|(i, st)| (format!("random-{i}"), st)));
        let cases = inputs
            .iter()
            .map(|(n, st)| counterfactual::retrodiction_case(n, st, &c))
            .collect::<crate::Result<Vec<_>>>()?;
        let bad = cases.iter().filter(|c| c.forced_after_insertion != c.single_subspace).count();
        Ok((bad == 0, format!("{} inputs, {bad} violations", cases.len())))
    });
    s.check("counterfactual", "empty modification keeps the record forced", || {
        let (base, record) = counterfactual::preset_fig3::<f64>();
        let r = counterfactual_report(&base, &record, &Modification::None, MatchingPolicy::HoldPriorOutcomes)?;
        let forced = r
            .events
            .iter()
            .filter(|e| {
                e.held.is_some_and(|h| {
                    e.outcomes.iter().any(|o| o.outcome == h && o.classification.status == Status::Forced)
                })
            })
            .count();
        Ok((forced == r.events.len(), format!("{forced} of {} recorded outcomes forced", r.events.len())))
    });
}

/// Scalar-generic spot check used by the `f32` path: the default combiner
/// still yields Z1Z2 spectral projectors at the scalar's tolerance.
pub fn combiner_povm_defect<T: Scalar>() -> crate::Result<T> {
    let (e1, e2) = apparatus::stage2_povm::<T>();
    let p = spectral_projectors(&observable::<T>(Obs::Z1Z2))?;
    Ok(e1.distance(&p.plus)?.max(e2.distance(&p.minus)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn default_suite_passes() {
        let r = run_all();
        for c in &r.checks {
            assert!(c.passed, "{}: {} ({})", c.module, c.name, c.detail);
        }
        assert!(r.checks.len() > 25);
    }

    #[test]
    fn suite_is_deterministic() {
        assert_eq!(run_all(), run_all());
    }

    #[test]
    fn corrupted_combiner_fails() {
        let mut m = apparatus::combiner_unitary::<f64>().matrix().clone();
        m[(0, 0)] = Complex::new(1.0, 0.0);
        let r = run_with_combiner(m);
        let unitary = r.checks.iter().find(|c| c.name == "combiner is unitary").unwrap();
        assert!(!unitary.passed);
        assert!(r.failures() > 1);
        // checks that do not involve the combiner are unaffected
        assert!(r.checks.iter().filter(|c| c.module == "nchv").all(|c| c.passed));
    }

    #[test]
    fn single_precision_povm() {
        assert!(combiner_povm_defect::<f32>().unwrap() <= f32::tolerance());
    }
}
