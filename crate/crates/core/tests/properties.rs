use kslab::apparatus::{self, CompletionFamily, Region};
use kslab::counterfactual::{
    self, classify, enumerate_branches, Ensemble, Record, Status, Timeline, TimelineEvent,
};
use kslab::hilbert::{
    apply, commutator, expectation, path_spin_labels, spectral_projectors, spin_labels, Observable,
    StateVector,
};
use kslab::measurement::{joint_measure, measure, sample, OutcomeValue, Step};
use kslab::nchv::{self, ProductSpec, Symbol, ValueAssignment};
use kslab::presets::{observable, state, Obs};
use kslab::{Matrix64, RngStream, StateVector32, StateVector64};
use num_complex::Complex;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn amplitudes(dim: usize) -> impl Strategy<Value = Vec<Complex<f64>>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex::new(a, b)).collect())
}

fn path_spin_state() -> impl Strategy<Value = StateVector64> {
    amplitudes(4).prop_map(|a| StateVector::normalized(a, path_spin_labels()).unwrap())
}

fn spin_state() -> impl Strategy<Value = StateVector64> {
    amplitudes(2).prop_map(|a| StateVector::normalized(a, spin_labels()).unwrap())
}

fn any_obs() -> impl Strategy<Value = Obs> {
    prop::sample::select(Obs::ALL.to_vec())
}

fn scenario_obs() -> impl Strategy<Value = Obs> {
    prop::sample::select(Obs::SCENARIO.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn expectation_is_real(s in path_spin_state(), o in any_obs()) {
        let o = observable::<f64>(o);
        let v = o.act(&s).unwrap();
        let im = kslab::linalg::inner(s.amplitudes(), &v).im;
        prop_assert!(im.abs() < TOL);
        let e = expectation(&s, &o).unwrap();
        prop_assert!(e.abs() <= 1.0 + TOL);
    }

    #[test]
    fn combiner_preserves_norm(s in path_spin_state(), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let c = apparatus::random_completion::<f64, _>(&mut rng, CompletionFamily::Routed);
        let out = apply(c.map(), &s).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn distributions_are_normalized(s in path_spin_state(), o in any_obs()) {
        let d = measure(&s, &observable(o)).unwrap();
        prop_assert!((d.total() - 1.0).abs() < TOL);
    }

    #[test]
    fn repeat_measurement_is_certain(s in path_spin_state(), o in any_obs()) {
        let o = observable::<f64>(o);
        for e in measure(&s, &o).unwrap().entries() {
            let again = measure(&e.post_state, &o).unwrap();
            prop_assert!((again.probability(&e.outcome) - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn joint_marginals(s in path_spin_state(), a in scenario_obs(), b in scenario_obs()) {
        let (a, b) = (observable::<f64>(a), observable::<f64>(b));
        prop_assume!(commutator(&a, &b).unwrap().frobenius_norm() < TOL);
        let j = joint_measure(&s, &a, &b).unwrap();
        let first = j.marginal(|j| j.first);
        let second = j.marginal(|j| j.second);
        let ma = measure(&s, &a).unwrap();
        let mb = measure(&s, &b).unwrap();
        for v in OutcomeValue::BOTH {
            prop_assert!((first.get(&v).copied().unwrap_or(0.0) - ma.probability(&v)).abs() < TOL);
            prop_assert!((second.get(&v).copied().unwrap_or(0.0) - mb.probability(&v)).abs() < TOL);
        }
    }

    #[test]
    fn region_probability_is_product_expectation(s in path_spin_state()) {
        let p = apparatus::stage2_distribution(&s, &apparatus::combiner_unitary())
            .unwrap()
            .probability(&Region::Combiner(apparatus::Combiner::Bc1));
        let zz = expectation(&s, &observable(Obs::Z1Z2)).unwrap();
        prop_assert!((p - 0.5 * (1.0 + zz)).abs() < TOL);
    }

    #[test]
    fn branch_sums_on_random_timelines(
        s in path_spin_state(),
        obs in prop::collection::vec(scenario_obs(), 1..4),
    ) {
        let events = obs
            .iter()
            .enumerate()
            .map(|(i, &o)| TimelineEvent::single(format!("t{i}"), observable(o)))
            .collect();
        let tl = Timeline::new(Ensemble::pure(s), events).unwrap();
        let total: f64 = enumerate_branches(&tl).unwrap().iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < TOL);
    }

    #[test]
    fn mixed_ensemble_branch_sums(a in spin_state(), b in spin_state(), w in 0.0f64..1.0) {
        let tl = Timeline::new(
            Ensemble::new(vec![(w, a), (1.0 - w, b)]).unwrap(),
            vec![
                TimelineEvent::single("t1", kslab::presets::spin_observable("X").unwrap()),
                TimelineEvent::single("t2", kslab::presets::spin_observable("Y").unwrap()),
                TimelineEvent::single("t3", kslab::presets::spin_observable("Z").unwrap()),
            ],
        )
        .unwrap();
        let total: f64 = enumerate_branches(&tl).unwrap().iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < TOL);
    }

    #[test]
    fn inserted_repeat_is_forced(s in path_spin_state(), o in any_obs(), later in scenario_obs()) {
        let o = observable::<f64>(o);
        let base = Timeline::new(
            Ensemble::pure(s),
            vec![TimelineEvent::single("t1", o.clone()), TimelineEvent::single("t2", observable(later))],
        )
        .unwrap();
        for b in enumerate_branches(&base).unwrap() {
            let record = Record::from([("t1".to_string(), b.outcomes[0])]);
            let r = counterfactual::counterfactual_report(
                &base,
                &record,
                &counterfactual::Modification::Insert {
                    before: "t2".into(),
                    event: TimelineEvent::single("t", o.clone()),
                },
                counterfactual::MatchingPolicy::HoldPriorOutcomes,
            )
            .unwrap();
            let t = r.events.iter().find(|e| e.label == "t").unwrap();
            let c = t.outcomes.iter().find(|c| c.outcome == b.outcomes[0]).unwrap();
            prop_assert_eq!(c.classification.status, Status::Forced);
        }
    }

    #[test]
    fn retrodiction_boundary(s in path_spin_state()) {
        let c = counterfactual::retrodiction_case("random", &s, &apparatus::combiner_unitary()).unwrap();
        prop_assert_eq!(c.forced_after_insertion, c.single_subspace);
    }

    #[test]
    fn substreams_ignore_scheduling(seed in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        let base = RngStream::new(seed);
        let mut a = base.substream(i);
        let _ = base.substream(j).next_u64();
        let mut b = RngStream::new(seed).substream(i);
        prop_assert_eq!(a.next_u64(), b.next_u64());
    }
}

#[test]
fn projector_algebra_for_every_preset_observable() {
    for o in Obs::ALL {
        let p = spectral_projectors(&observable::<f64>(o)).unwrap();
        let id = Matrix64::identity(4);
        assert!(p.plus.add(&p.minus).unwrap().approx_eq(&id, TOL), "{o}");
        assert!(p.plus.matmul(&p.plus).unwrap().approx_eq(&p.plus, TOL), "{o}");
        assert!(p.plus.matmul(&p.minus).unwrap().is_zero_within(TOL), "{o}");
    }
}

#[test]
fn product_rule_is_exhaustive() {
    let syms = [Symbol::Z1, Symbol::X1, Symbol::Z2, Symbol::X2];
    let mut checked = 0;
    for a in ValueAssignment::all() {
        for &x in &syms {
            for &y in &syms {
                let Ok(spec) = ProductSpec::pair(x, y) else { continue };
                let lhs = nchv::val(&a, &spec).value();
                let rhs = nchv::val(&a, &ProductSpec::single(x)).value()
                    * nchv::val(&a, &ProductSpec::single(y)).value();
                assert_eq!(lhs, rhs);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 16 * 8);
}

#[test]
fn sampling_converges_within_four_sigma() {
    let n = 100_000u64;
    let states: [(&str, Obs); 3] = [("phi+", Obs::X1), ("x+u", Obs::Z1), ("singlet", Obs::Z2)];
    for (name, o) in states {
        let s = state::<f64>(name).unwrap();
        let d = measure(&s, &observable(o)).unwrap();
        let mut rng = RngStream::new(0);
        let plus = (0..n).filter(|_| sample(&d, &mut rng).0 == OutcomeValue::Plus).count() as f64;
        let p = d.probability(&OutcomeValue::Plus);
        let f = plus / n as f64;
        assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{name}: {f} vs {p}");
    }
}

#[test]
fn seeded_runs_are_reproducible() {
    let s = state::<f64>("phi+").unwrap();
    let rng = RngStream::new(17);
    let x = observable(Obs::X1X2);
    let a = apparatus::run_stage1(&s, 2_000, &rng, Some(&x)).unwrap();
    let b = apparatus::run_stage1(&s, 2_000, &rng, Some(&x)).unwrap();
    assert_eq!(a, b);
    assert!(a.is_consistent());
}

#[test]
fn single_precision_instantiation() {
    let phi: StateVector32 = state("phi+").unwrap();
    let zz: Observable<f32> = observable(Obs::Z1Z2);
    assert!((expectation(&phi, &zz).unwrap() - 1.0).abs() < 1e-5);
    let d = joint_measure(&phi, &observable(Obs::Z1X2), &observable(Obs::X1Z2)).unwrap();
    assert_eq!(d.entries().len(), 2);
    let (tl, record) = counterfactual::preset_fig3::<f32>();
    let c = classify(&tl, &record, "t2", record["t2"]).unwrap();
    assert_eq!(c.status, Status::Forced);
    let step = Step::Pair(observable::<f32>(Obs::Z1), observable(Obs::Z2));
    assert_eq!(step.distribution(&phi).unwrap().entries().len(), 2);
}
