//! One function per subcommand, each producing an [`Emission`].

use std::collections::BTreeMap;
use std::path::Path;

use kslab::apparatus::{self, Region, RunStatistics};
use kslab::counterfactual::{
    self, counterfactual_report, CounterfactualReport, Ensemble, MatchingPolicy, RetrodictionReport,
    Status,
};
use kslab::hilbert::{commutator, Observable};
use kslab::measurement::{joint_measure, sample, JointOutcome, OutcomeValue};
use kslab::nchv;
use kslab::presets::{observable, state, Obs};
use kslab::verify;
use kslab::{Matrix64, RngStream};
use num_complex::Complex;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    ApparatusParams, CounterfactualParams, CounterfactualScenario, KsParams, Model, VerifyParams,
};
use crate::emit::{prob, Emission, Row};
use crate::error::{CliError, CliResult};
use crate::state_spec::parse_state;

const ANCHOR_COMMUTATORS: &str = "commutation of single-particle and product observables";
const ANCHOR_KS: &str = "joint (Z1X2, X1Z2) outcomes on the (+1,+1) eigenstate of (Z1Z2, X1X2)";
const ANCHOR_STAGE1: &str = "Stern-Gerlach analysers with a detector behind every outlet";
const ANCHOR_STAGE2: &str = "beam combiners with one detector region per combiner";
const ANCHOR_SPIN_XZ: &str = "counterfactual intermediate measurement on a spin";
const ANCHOR_RETRODICTION: &str = "retrodiction through the beam combiners";
const ANCHOR_VERIFY: &str = "analytic invariant suite";

/// Pairs shown by `commutators`.
pub const COMMUTATOR_PAIRS: [(Obs, Obs); 6] = [
    (Obs::Z1, Obs::X1),
    (Obs::Z2, Obs::X2),
    (Obs::Z1, Obs::X2),
    (Obs::X1, Obs::Z2),
    (Obs::Z1Z2, Obs::X1X2),
    (Obs::Z1X2, Obs::X1Z2),
];

fn value_label(v: OutcomeValue) -> &'static str {
    if v.is_plus() {
        "+1"
    } else {
        "-1"
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Forced => "Forced",
        Status::Possible => "Possible",
        Status::Impossible => "Impossible",
    }
}

pub fn commutators() -> CliResult<Emission> {
    let mut e = Emission::new("commutators", ANCHOR_COMMUTATORS, json!({}));
    let mut table = Vec::new();
    e.text.push(format!("{:<18} {:>10}  verdict", "pair", "|[A,B]|"));
    for (a, b) in COMMUTATOR_PAIRS {
        let n = commutator(&observable::<f64>(a), &observable(b))?.frobenius_norm();
        let commute = n <= 1e-12;
        let verdict = if commute { "commute" } else { "do not commute" };
        let pair = format!("[{a},{b}]");
        e.text.push(format!("{pair:<18} {n:>10.6}  {verdict}"));
        e.rows.push(Row::new(format!("{pair} {verdict}")).probability(n));
        table.push(json!({ "a": a.name(), "b": b.name(), "norm": n, "commute": commute }));
    }
    e.analytic = json!({ "commutators": table });
    Ok(e)
}

/// Trials and seed after the global flags have been applied.
fn sampling(trials: Option<u64>, seed: Option<u64>) -> (u64, u64) {
    (trials.unwrap_or(0), seed.unwrap_or(0))
}

pub fn ks_predict(p: &KsParams) -> CliResult<Emission> {
    let (trials, seed) = sampling(p.trials, p.seed);
    let mut e = Emission::new("ks-predict", ANCHOR_KS, p);
    let contrast = nchv::qm_nchv_contrast::<f64>()?;
    let mut analytic = serde_json::Map::new();

    if p.model != Model::Nchv {
        let phi = state::<f64>("phi+")?;
        let dist = joint_measure(&phi, &observable(Obs::Z1X2), &observable(Obs::X1Z2))?;
        let all: BTreeMap<String, f64> = JointOutcome::all()
            .iter()
            .map(|j| (j.to_string(), dist.probability(j)))
            .collect();
        analytic.insert("qm".into(), json!(all));
        e.text.push("quantum prediction, state phi+:".into());
        let counts = (trials > 0).then(|| {
            let rng = RngStream::new(seed);
            let mut c: BTreeMap<JointOutcome, u64> = BTreeMap::new();
            for i in 0..trials {
                *c.entry(sample(&dist, &mut rng.substream(i)).0).or_insert(0) += 1;
            }
            c
        });
        for j in JointOutcome::all() {
            let mut row = Row::new(format!("qm {j}")).probability(dist.probability(&j));
            let mut line = format!("  {:<8} {}", j.to_string(), prob(dist.probability(&j)));
            if let Some(c) = &counts {
                let n = c.get(&j).copied().unwrap_or(0);
                row = row.sampled(n, trials);
                line.push_str(&format!("  {n:>8}  {}", prob(n as f64 / trials as f64)));
            }
            e.text.push(line);
            e.rows.push(row);
        }
        if let Some(c) = counts {
            let counts: BTreeMap<String, u64> = JointOutcome::all()
                .iter()
                .map(|j| (j.to_string(), c.get(j).copied().unwrap_or(0)))
                .collect();
            e.sampled = Some(json!({ "trials": trials, "seed": seed, "qm_counts": counts }));
        }
    }

    if p.model != Model::Qm {
        let (first, second) = nchv::mixed_pair();
        let pred = nchv::predict_pair(
            &nchv::product_preparation(OutcomeValue::Plus, OutcomeValue::Plus),
            &first,
            &second,
            nchv::Weighting::SetOnly,
        )?;
        let set: Vec<String> = pred.outcomes.iter().map(|j| j.to_string()).collect();
        analytic.insert(
            "nchv".into(),
            json!({ "outcomes": set, "assignments": pred.assignments }),
        );
        e.text.push(format!(
            "noncontextual prediction ({} satisfying assignments): {{{}}}",
            pred.assignments.len(),
            set.join(", ")
        ));
        e.rows.extend(pred.outcomes.iter().map(|j| Row::new(format!("nchv {j}"))));
    }

    if p.model == Model::Both {
        let inter: Vec<String> = contrast.intersection.iter().map(|j| j.to_string()).collect();
        analytic.insert("intersection".into(), json!(inter));
        analytic.insert("disjoint".into(), json!(contrast.disjoint));
        e.text.push(format!("disjoint: {}", contrast.disjoint));
        e.rows.push(Row::new(format!("disjoint {}", contrast.disjoint)));
    }
    e.analytic = Value::Object(analytic);
    Ok(e)
}

fn region_map(regions: &BTreeMap<Region, f64>) -> Value {
    json!(regions.iter().map(|(r, p)| (r.name(), *p)).collect::<BTreeMap<_, _>>())
}

fn value_map<T: Serialize + Copy>(m: &BTreeMap<OutcomeValue, T>) -> Value {
    json!(m.iter().map(|(v, x)| (value_label(*v), *x)).collect::<BTreeMap<_, _>>())
}

fn parse_follow_up(text: &str) -> CliResult<(Obs, Observable<f64>)> {
    let o: Obs = text.parse().map_err(|e: kslab::Error| CliError::Parse(e.to_string()))?;
    Ok((o, observable(o)))
}

pub fn apparatus_cmd(p: &ApparatusParams) -> CliResult<Emission> {
    let (trials, seed) = sampling(p.trials, p.seed);
    if !(1..=2).contains(&p.stage) {
        return Err(CliError::Validation(format!("stage must be 1 or 2, got {}", p.stage)));
    }
    let parsed = parse_state(&p.input)?;
    let s = parsed.state;
    let follow = p.follow_up.as_deref().map(parse_follow_up).transpose()?;
    let (name, anchor) = if p.stage == 1 {
        ("apparatus-stage1", ANCHOR_STAGE1)
    } else {
        ("apparatus-stage2", ANCHOR_STAGE2)
    };
    let mut e = Emission::new(name, anchor, p);
    e.warnings.extend(parsed.warning);
    let combiner = apparatus::combiner_unitary::<f64>();
    let dist = if p.stage == 1 {
        apparatus::stage1_distribution(&s)?
    } else {
        apparatus::stage2_distribution(&s, &combiner)?
    };
    let regions_list: &[Region] = if p.stage == 1 { &Region::STAGE1 } else { &Region::STAGE2 };
    let regions: BTreeMap<Region, f64> =
        regions_list.iter().map(|&r| (r, dist.probability(&r))).collect();
    let product = dist.marginal(|r| r.product_value());

    let mut analytic = json!({
        "regions": region_map(&regions),
        "product": value_map(&product),
    });
    if p.stage == 1 {
        analytic["note"] = json!(apparatus::IDEALIZATION_NOTE);
    }

    let stats: Option<RunStatistics> = (trials > 0)
        .then(|| {
            let rng = RngStream::new(seed);
            let f = follow.as_ref().map(|(_, o)| o);
            if p.stage == 1 {
                apparatus::run_stage1(&s, trials, &rng, f)
            } else {
                apparatus::run_stage2(&s, trials, &rng, f)
            }
        })
        .transpose()?;

    e.text.push(format!("input: {}", p.input));
    e.text.push(format!("{:<8} {:>10} {:>10} {:>10}", "region", "prob", "count", "freq"));
    for (&r, &pr) in &regions {
        let mut row = Row::new(r.name()).probability(pr);
        let mut line = format!("{:<8} {:>10}", r.name(), prob(pr));
        if let Some(st) = &stats {
            row = row.sampled(st.count(r), trials);
            line.push_str(&format!(" {:>10} {:>10}", st.count(r), prob(st.frequency(r))));
        }
        e.rows.push(row);
        e.text.push(line);
    }
    for v in OutcomeValue::BOTH {
        let pv = product.get(&v).copied().unwrap_or(0.0);
        let mut row = Row::new(format!("product {}", value_label(v))).probability(pv);
        let mut line = format!("{:<8} {:>10}", format!("Z1Z2={}", value_label(v)), prob(pv));
        if let Some(st) = &stats {
            let n = st.product_counts().get(&v).copied().unwrap_or(0);
            row = row.sampled(n, trials);
            line.push_str(&format!(" {n:>10} {:>10}", prob(n as f64 / trials as f64)));
        }
        e.rows.push(row);
        e.text.push(line);
    }

    if let Some((fo, fobs)) = &follow {
        let a = if p.stage == 1 {
            apparatus::analyse_stage1(&s, fobs)?
        } else {
            apparatus::analyse_stage2(&s, fobs)?
        };
        let mut joint: BTreeMap<String, BTreeMap<&str, f64>> = BTreeMap::new();
        for &(r, v, pr) in &a.joint {
            *joint.entry(r.name()).or_default().entry(value_label(v)).or_insert(0.0) += pr;
        }
        analytic["follow_up"] = json!({
            "observable": fo.name(),
            "distribution": value_map(&a.follow_up),
            "by_region": joint,
        });
        e.text.push(format!("follow-up {fo}:"));
        let totals = stats.as_ref().and_then(|st| st.follow_up_totals());
        for v in OutcomeValue::BOTH {
            let pv = a.follow_up.get(&v).copied().unwrap_or(0.0);
            let mut row = Row::new(format!("{fo} {}", value_label(v))).probability(pv);
            let mut line = format!("  {:<6} {:>10}", value_label(v), prob(pv));
            if let Some(t) = &totals {
                let n = t.get(&v).copied().unwrap_or(0);
                row = row.sampled(n, trials);
                line.push_str(&format!(" {n:>10} {:>10}", prob(n as f64 / trials as f64)));
            }
            e.rows.push(row);
            e.text.push(line);
        }
    }
    if p.stage == 1 {
        e.text.push(format!("note: {}", apparatus::IDEALIZATION_NOTE));
    }

    if let Some(st) = &stats {
        let counts: BTreeMap<String, u64> = st.counts.iter().map(|(r, n)| (r.name(), *n)).collect();
        let mut sampled = json!({
            "trials": st.trials,
            "seed": seed,
            "counts": counts,
            "product_counts": value_map(&st.product_counts()),
        });
        if let Some(fu) = &st.follow_up {
            let mut table: BTreeMap<String, BTreeMap<&str, u64>> = BTreeMap::new();
            for (&(r, v), &n) in fu {
                table.entry(r.name()).or_default().insert(value_label(v), n);
            }
            sampled["follow_up"] = json!(table);
        }
        e.sampled = Some(sampled);
    }
    e.analytic = analytic;
    Ok(e)
}

fn report_lines(title: &str, r: &CounterfactualReport<f64>, e: &mut Emission) {
    e.text.push(format!("{title}: {}", r.modification));
    let held: Vec<String> = r.held_record.iter().map(|(k, v)| format!("{k}={v}")).collect();
    e.text.push(format!("  held record: {{{}}}", held.join(", ")));
    for ev in &r.events {
        let mut tags = Vec::new();
        if ev.modified {
            tags.push("modified".to_string());
        }
        if let Some(h) = ev.held {
            tags.push(format!("held {h}"));
        }
        if let (Some(v), Some(c)) = (ev.recorded, ev.recorded_status) {
            tags.push(format!("recorded {v}: {} {}", status_name(c.status), prob(c.probability)));
        }
        e.text.push(format!("  {} [{}]", ev.label, tags.join("; ")));
        for oc in &ev.outcomes {
            let c = oc.classification;
            e.text.push(format!(
                "    {:<4} {:<10} {}",
                oc.outcome.to_string(),
                status_name(c.status),
                prob(c.probability)
            ));
            e.rows.push(
                Row::new(format!("{title} {} {} {}", ev.label, oc.outcome, status_name(c.status)))
                    .probability(c.probability),
            );
        }
    }
    for d in &r.dependences {
        let forced = d.forced.map(|o| format!("forced {o}")).unwrap_or_else(|| "not forced".into());
        e.text.push(format!("  given {}={}: {} {forced}", d.given_label, d.given, d.label));
    }
    if !r.forced_equal_to_modified.is_empty() {
        e.text.push(format!(
            "  forced equal to the modified outcome in every branch: {}",
            r.forced_equal_to_modified.join(", ")
        ));
    }
    if r.record_not_transferable {
        e.text.push(format!(
            "  recorded outcome(s) not forced on this timeline: {}",
            r.later_records_not_forced.join(", ")
        ));
    }
}

fn spin_xz(p: &CounterfactualParams) -> CliResult<Emission> {
    let mut e = Emission::new("counterfactual-spin-xz", ANCHOR_SPIN_XZ, p);
    let (initial, initial_desc) = match &p.input {
        None => (Ensemble::maximally_mixed_spin(), json!({ "z+": 0.5, "z-": 0.5 })),
        Some(text) => {
            let parsed = parse_state(text)?;
            if parsed.state.dim() != 2 {
                return Err(CliError::Validation(
                    "spin-xz needs a two-component spin state".into(),
                ));
            }
            e.warnings.extend(parsed.warning);
            (Ensemble::pure(parsed.state), json!({ text.as_str(): 1.0 }))
        }
    };
    let (base, record) = counterfactual::preset_fig3_with(initial);
    let policy = MatchingPolicy::HoldPriorOutcomes;
    let insert = counterfactual_report(&base, &record, &counterfactual::insert_intermediate_x(), policy)?;
    let replace = counterfactual_report(&base, &record, &counterfactual::replace_first_with_z(), policy)?;
    e.text.push("timeline: x at t1, z at t2; record t1=+1, t2=+1".into());
    report_lines("insert-x", &insert, &mut e);
    report_lines("replace-with-z", &replace, &mut e);
    e.text.push(format!("note: {}", counterfactual::VALUE_NOTE));
    e.analytic = json!({
        "initial": initial_desc,
        "record": record,
        "policy": policy,
        "reports": { "insert-x": insert, "replace-with-z": replace },
        "note": counterfactual::VALUE_NOTE,
    });
    Ok(e)
}

fn retrodiction(p: &CounterfactualParams) -> CliResult<Emission> {
    let mut e = Emission::new("counterfactual-apparatus-retrodiction", ANCHOR_RETRODICTION, p);
    let report: RetrodictionReport<f64> = match &p.input {
        None => counterfactual::apparatus_retrodiction_demo()?,
        Some(text) => {
            let parsed = parse_state(text)?;
            e.warnings.extend(parsed.warning);
            counterfactual::retrodiction_report(&[(text.clone(), parsed.state)])?
        }
    };
    e.text.push("record: detection behind a combiner at t2; counterfactual: detectors at t1".into());
    for c in &report.cases {
        e.text.push(format!("input {} (P(BC1) = {})", c.input, prob(c.p_bc1)));
        for (when, cl) in [("before", c.before_insertion), ("after", c.after_insertion)] {
            e.text.push(format!(
                "  {} {when} insertion: {} {}",
                c.recorded.name(),
                status_name(cl.status),
                prob(cl.probability)
            ));
            e.rows.push(
                Row::new(format!("{} {} {when} {}", c.input, c.recorded.name(), status_name(cl.status)))
                    .probability(cl.probability),
            );
        }
        for f in &c.fine_routes {
            e.text.push(format!("    {} {} -> {}", f.mode, prob(f.probability), f.routed_to.name()));
        }
    }
    e.text.push(format!("forced after insertion exactly on Z1Z2 eigenstates: {}", report.boundary_holds));
    e.text.push(format!("note: {}", counterfactual::VALUE_NOTE));
    let mut analytic = serde_json::to_value(&report).expect("report serializes");
    analytic["note"] = json!(counterfactual::VALUE_NOTE);
    e.analytic = analytic;
    Ok(e)
}

pub fn counterfactual_cmd(p: &CounterfactualParams) -> CliResult<Emission> {
    match p.scenario {
        CounterfactualScenario::SpinXz => spin_xz(p),
        CounterfactualScenario::ApparatusRetrodiction => retrodiction(p),
    }
}

/// Reads a 4x4 matrix whose entries are numbers or `[re, im]` pairs.
pub fn read_matrix(path: &Path) -> CliResult<Matrix64> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|err| CliError::Parse(format!("{}: {err}", path.display())))?;
    let rows = v
        .as_array()
        .ok_or_else(|| CliError::Parse("combiner file must hold an array of rows".into()))?;
    let entry = |x: &Value| -> CliResult<Complex<f64>> {
        match x {
            Value::Number(n) => Ok(Complex::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
            Value::Array(p) if p.len() == 2 => match (p[0].as_f64(), p[1].as_f64()) {
                (Some(re), Some(im)) => Ok(Complex::new(re, im)),
                _ => Err(CliError::Parse(format!("bad matrix entry {x}"))),
            },
            _ => Err(CliError::Parse(format!("bad matrix entry {x}"))),
        }
    };
    let rows = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| CliError::Parse("each row must be an array".into()))?
                .iter()
                .map(entry)
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(CliError::Validation("combiner matrix must be 4x4".into()));
    }
    Ok(Matrix64::from_rows(rows)?)
}

pub fn verify_cmd(p: &VerifyParams) -> CliResult<Emission> {
    let report = match &p.combiner_file {
        None => verify::run_all(),
        Some(path) => verify::run_with_combiner(read_matrix(path)?),
    };
    let mut e = Emission::new("verify", ANCHOR_VERIFY, p);
    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        e.text.push(format!("{verdict} {:<15} {} ({})", c.module, c.name, c.detail));
        e.rows.push(Row::new(format!("{verdict} {}: {}", c.module, c.name)));
    }
    e.failures = report.failures();
    e.text.push(format!("{} checks, {} failed", report.checks.len(), e.failures));
    e.analytic = json!({
        "checks": report.checks,
        "total": report.checks.len(),
        "failed": e.failures,
    });
    Ok(e)
}
