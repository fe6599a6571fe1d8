//! Runs the analyses of a loaded scenario and writes its artifacts.

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use erps::audit::{
    audit, estimator_form_check, functional_equation_check, FCandidate, GCandidate, Verdict,
};
use erps::estimation::{error_field, estimator, ErrorModel, XiDistribution};
use erps::preparation::{BipartitePreparation, Preparation};
use erps::sampler::{
    factorizability_statistic, sample_bipartite, sample_shots, write_shots_csv, ComponentStats,
    Estimate, XiMode,
};
use erps::uncertainty::{
    analyze, c_functional, covariance_qp, mean_estimator, mean_position, ms_error_p, ms_error_q,
    schrodinger_robertson, variances, RELATION_TOL,
};

use crate::scenario::{Built, Loaded};

/// Standard errors tolerated between sampled and quadrature moments.
const MC_SIGMAS: f64 = 5.0;

/// Leakage floor below which a lambda model cannot be told apart from the standard one.
const LAMBDA_DETECTABLE: f64 = 1e-6;

pub struct Outcome {
    pub name: String,
    pub dir: PathBuf,
    pub violations: Vec<String>,
}

#[derive(Default)]
struct Artifacts {
    report: Vec<(String, String)>,
    /// `(record, subject, key, value)`.
    rows: Vec<[String; 4]>,
    plots: Vec<(String, String, Vec<(f64, f64)>)>,
    sweep: Vec<[String; 7]>,
    shots: Vec<(String, Vec<u8>)>,
    violations: Vec<String>,
}

impl Artifacts {
    fn put(&mut self, record: &str, subject: &str, key: &str, value: impl Display) {
        let value = value.to_string();
        let full = if subject.is_empty() {
            key.to_string()
        } else {
            format!("{subject}.{key}")
        };
        self.report.push((full, value.clone()));
        self.rows
            .push([record.into(), subject.into(), key.into(), value]);
    }

    fn fail(&mut self, subject: &str, what: impl Display) {
        if subject.is_empty() {
            self.violations.push(what.to_string());
        } else {
            self.violations.push(format!("{subject}: {what}"));
        }
    }
}

pub fn execute(loaded: &Loaded, out_root: &Path) -> io::Result<Outcome> {
    let mut art = Artifacts::default();
    let s = &loaded.scenario;
    art.put("scenario", "", "scenario", &s.name);
    art.put("scenario", "", "hbar", s.hbar);
    art.put("scenario", "", "model", loaded.model);
    art.put("scenario", "", "xi", loaded.xi.kind.name());

    match &loaded.built {
        Built::Single(prep) => {
            art.put("scenario", "", "arity", 1);
            single_system(&mut art, loaded, prep, "");
            if let Some(mc) = &s.analyses.monte_carlo {
                monte_carlo_single(&mut art, loaded, prep, mc.shots, mc.seed, mc.dump_shots)?;
            }
        }
        Built::Product(prep) => {
            art.put("scenario", "", "arity", 2);
            let (a, b) = prep.factors().expect("built as a product");
            single_system(&mut art, loaded, a, "s1");
            single_system(&mut art, loaded, b, "s2");
            bipartite(&mut art, loaded, prep)?;
        }
    }
    art.put("scenario", "", "violations", art.violations.len());

    let dir = out_root.join(&s.name);
    write_all(&art, &dir)?;
    Ok(Outcome {
        name: s.name.clone(),
        dir,
        violations: art.violations,
    })
}

fn single_system(art: &mut Artifacts, loaded: &Loaded, prep: &Preparation, subject: &str) {
    let (model, xi) = (&loaded.model, &loaded.xi);
    let a = &loaded.scenario.analyses;
    let hbar = prep.hbar();
    let q = prep.grid().nodes();
    let series = |f: &[f64]| q.iter().copied().zip(f.iter().copied()).collect::<Vec<_>>();
    let tag = |name: &str| {
        if subject.is_empty() {
            name.to_string()
        } else {
            format!("{subject}_{name}")
        }
    };
    art.plots.push((tag("S"), "S".into(), series(prep.action().values())));
    art.plots.push((tag("rho"), "rho".into(), series(prep.density().values())));
    art.plots.push((tag("p_bar"), "p_bar".into(), series(estimator(prep).values())));
    for (name, x) in [("eps_xi_plus", hbar), ("eps_xi_minus", -hbar)] {
        let eps = error_field(prep, model, x);
        art.plots.push((tag(name), "eps".into(), series(eps.values())));
    }

    if a.uncertainty {
        match analyze(prep, model, xi) {
            Ok(r) => {
                // Scenario-wide keys are already in the header.
                for (k, v) in r.entries() {
                    if matches!(k, "model" | "xi" | "hbar") {
                        continue;
                    }
                    art.put("uncertainty", subject, k, v);
                }
                for v in r.violations() {
                    art.fail(subject, v);
                }
            }
            Err(e) => art.fail(subject, format!("uncertainty: {e}")),
        }
    }
    if a.schrodinger_robertson {
        match schrodinger_robertson(prep, model, xi) {
            Ok(sr) => {
                art.put("schrodinger_robertson", subject, "sr_lhs", sr.lhs);
                art.put("schrodinger_robertson", subject, "sr_rhs", sr.rhs_full);
                art.put("schrodinger_robertson", subject, "sr_slack", sr.slack());
                art.put("schrodinger_robertson", subject, "sr_cov_qp", sr.cov_qp);
                art.put("schrodinger_robertson", subject, "sr_commutator_im", sr.commutator_im);
                art.put("schrodinger_robertson", subject, "sr_robertson_slack", sr.robertson_leg.slack());
                art.put("schrodinger_robertson", subject, "sr_covariance_slack", sr.covariance_leg.slack());
                if !sr.holds() {
                    art.fail(subject, format!("schrodinger_robertson: slack {}", sr.slack()));
                }
            }
            Err(e) => art.fail(subject, format!("schrodinger_robertson: {e}")),
        }
    }
    if let Some(sweep) = &a.lambda_sweep {
        lambda_sweep(art, prep, xi, sweep, subject);
    }
}

fn lambda_sweep(art: &mut Artifacts, prep: &Preparation, xi: &XiDistribution, sweep: &[f64], subject: &str) {
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    for &lambda in sweep {
        let model = ErrorModel::LambdaModified { lambda };
        let c = c_functional(prep, lambda);
        let e_p2 = ms_error_p(prep, &model, xi);
        let slack = match analyze(prep, &model, xi) {
            Ok(r) => r.modified_hk().slack(),
            Err(e) => {
                art.fail(subject, format!("lambda_sweep at {lambda}: {e}"));
                f64::NAN
            }
        };
        if lambda == 0.0 && c != 0.0 {
            art.fail(subject, format!("lambda_sweep: C(0) = {c}"));
        }
        if lambda > 0.0 && !(c > 0.0) {
            art.fail(subject, format!("lambda_sweep: C({lambda}) = {c}"));
        }
        if lambda >= 0.0 && !(slack >= -RELATION_TOL) {
            art.fail(subject, format!("lambda_sweep: modified HK slack {slack} at {lambda}"));
        }
        rows.push((lambda, c, e_p2, slack));
    }
    let mut nonneg: Vec<_> = rows.iter().filter(|r| r.0 >= 0.0).collect();
    nonneg.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in nonneg.windows(2) {
        if w[1].0 > w[0].0 && !(w[1].1 > w[0].1) {
            art.fail(subject, format!("lambda_sweep: C not increasing between {} and {}", w[0].0, w[1].0));
        }
    }
    for (lambda, c, e_p2, slack) in rows {
        art.sweep.push([
            subject.to_string(),
            lambda.to_string(),
            c.to_string(),
            e_p2.to_string(),
            slack.to_string(),
            String::new(),
            String::new(),
        ]);
    }
}

fn expected_moments(prep: &Preparation, model: &ErrorModel, xi: &XiDistribution) -> Option<[f64; 5]> {
    let v = variances(prep, model, xi).ok()?;
    Some([
        mean_position(prep),
        ms_error_q(prep),
        mean_estimator(prep),
        v.sigma_p2,
        covariance_qp(prep),
    ])
}

fn put_moments(
    art: &mut Artifacts,
    record: &str,
    subject: &str,
    m: &ComponentStats,
    expected: Option<[f64; 5]>,
) {
    let est = [m.mean_q, m.var_q, m.mean_p, m.var_p, m.cov_qp];
    let names = ["mean_q", "var_q", "mean_p", "var_p", "cov_qp"];
    for (k, (name, e)) in names.iter().zip(est).enumerate() {
        put_estimate(art, record, subject, name, e, expected.map(|x| x[k]));
    }
}

fn put_estimate(
    art: &mut Artifacts,
    record: &str,
    subject: &str,
    name: &str,
    e: Estimate,
    expected: Option<f64>,
) {
    art.put(record, subject, name, e.value);
    art.put(record, subject, &format!("{name}_se"), e.std_error);
    if let Some(x) = expected {
        art.put(record, subject, &format!("{name}_expected"), x);
        art.put(record, subject, &format!("{name}_z"), e.z(x));
        if !e.within(x, MC_SIGMAS) {
            art.fail(subject, format!("{record}: {name} is {:.2} standard errors from {x}", e.z(x)));
        }
    }
}

fn monte_carlo_single(
    art: &mut Artifacts,
    loaded: &Loaded,
    prep: &Preparation,
    shots: usize,
    seed: u64,
    dump: bool,
) -> io::Result<()> {
    match sample_shots(prep, &loaded.model, &loaded.xi, shots, seed) {
        Ok(stats) => {
            art.put("monte_carlo", "mc", "shots", shots);
            art.put("monte_carlo", "mc", "seed", seed);
            let expected = expected_moments(prep, &loaded.model, &loaded.xi);
            put_moments(art, "monte_carlo", "mc", &stats.components[0], expected);
            if dump {
                let mut buf = Vec::new();
                write_shots_csv(&stats, &mut buf).map_err(io::Error::other)?;
                art.shots.push(("shots.csv".into(), buf));
            }
        }
        Err(e) => art.fail("mc", e),
    }
    Ok(())
}

fn bipartite(art: &mut Artifacts, loaded: &Loaded, prep: &BipartitePreparation) -> io::Result<()> {
    let a = &loaded.scenario.analyses;
    let model = &loaded.model;
    let hbar = prep.hbar();
    let max_rho = prep.density().max();
    let expected_verdict = |lambda: f64| {
        if lambda == 0.0 {
            Some(Verdict::Independent)
        } else if lambda.abs() * max_rho > LAMBDA_DETECTABLE {
            Some(Verdict::Violated)
        } else {
            None
        }
    };

    if a.independence_audit {
        match audit(prep, model, &[hbar, -hbar]) {
            Ok(r) => {
                for (k, v) in r.entries() {
                    art.put("independence_audit", "audit", k, v);
                }
                if let Some(v) = expected_verdict(model.lambda()) {
                    if r.verdict != v {
                        art.fail("audit", format!("verdict {} but expected {}", r.verdict.name(), v.name()));
                    }
                }
            }
            Err(e) => art.fail("audit", e),
        }
        if let Some(sweep) = &a.lambda_sweep {
            for &lambda in sweep {
                let m = ErrorModel::LambdaModified { lambda };
                match audit(prep, &m, &[hbar, -hbar]) {
                    Ok(r) => {
                        art.sweep.push([
                            "joint".into(),
                            lambda.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            r.verdict.name().into(),
                            r.normalized_leakage.to_string(),
                        ]);
                        if let Some(v) = expected_verdict(lambda) {
                            if r.verdict != v {
                                art.fail("audit", format!("lambda {lambda}: verdict {}", r.verdict.name()));
                            }
                        }
                    }
                    Err(e) => art.fail("audit", e),
                }
            }
        }
    }

    if a.functional_checks {
        let gamma = model.strength(hbar, hbar);
        for (g, should_pass) in [
            (GCandidate::GammaLog(gamma), true),
            (GCandidate::Linear, false),
            (GCandidate::Square, false),
            (GCandidate::Sqrt, false),
        ] {
            match functional_equation_check(g, prep) {
                Ok(c) => {
                    let key = format!("G.{}", g.name());
                    art.put("functional_checks", "functional", &format!("{key}.residual"), c.residual);
                    art.put("functional_checks", "functional", &format!("{key}.pass"), c.pass);
                    if c.pass != should_pass {
                        art.fail("functional", format!("{key}: pass = {}", c.pass));
                    }
                }
                Err(e) => art.fail("functional", e),
            }
        }
        let preps = std::slice::from_ref(prep);
        for (f, should_pass) in [
            (FCandidate::Partial, true),
            (FCandidate::Identity, false),
            (FCandidate::PositionWeighted, false),
            (FCandidate::CrossDerivative, false),
        ] {
            match estimator_form_check(f, preps) {
                Ok(c) => {
                    let key = format!("F.{}", f.name());
                    art.put("functional_checks", "functional", &format!("{key}.locality"), c.locality[0]);
                    art.put(
                        "functional_checks",
                        "functional",
                        &format!("{key}.classical_deviation"),
                        c.classical_deviation,
                    );
                    art.put("functional_checks", "functional", &format!("{key}.pass"), c.pass);
                    if c.pass != should_pass {
                        art.fail("functional", format!("{key}: pass = {}", c.pass));
                    }
                }
                Err(e) => art.fail("functional", e),
            }
        }
    }

    if let Some(mc) = &a.monte_carlo {
        let (f1, f2) = prep.factors().expect("product");
        // Factor-level moments only describe components whose errors do not couple.
        let comparable = model.lambda() == 0.0;
        let expected = [f1, f2].map(|f| {
            if comparable {
                expected_moments(f, model, &loaded.xi)
            } else {
                None
            }
        });
        for (mode, offset) in [(XiMode::Shared, 0u64), (XiMode::Separable, 1)] {
            let seed = mc.seed.wrapping_add(offset);
            let record = format!("mc_{}", mode.name());
            match sample_bipartite(prep, model, &loaded.xi, mode, mc.shots, seed) {
                Ok(stats) => {
                    art.put(&record, &record, "shots", mc.shots);
                    art.put(&record, &record, "seed", seed);
                    for j in 0..2 {
                        put_moments(art, &record, &format!("{record}.s{}", j + 1), &stats.components[j], expected[j]);
                    }
                    let cov = stats.cov_p12.expect("bipartite");
                    art.put(&record, &record, "cov_p12", cov.value);
                    art.put(&record, &record, "cov_p12_se", cov.std_error);
                    match factorizability_statistic(&stats) {
                        Ok(f) => {
                            art.put(&record, &record, "factorizability", f.statistic);
                            art.put(&record, &record, "factorizability_se", f.std_error);
                            art.put(&record, &record, "factorizability_z", f.z());
                        }
                        Err(e) => art.put(&record, &record, "factorizability", format!("unavailable ({e})")),
                    }
                    if mc.dump_shots {
                        let mut buf = Vec::new();
                        write_shots_csv(&stats, &mut buf).map_err(io::Error::other)?;
                        art.shots.push((format!("shots_{}.csv", mode.name()), buf));
                    }
                }
                Err(e) => art.fail(&record, e),
            }
        }
    }
    Ok(())
}

fn write_all(art: &Artifacts, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir.join("plot"))?;
    let mut report = String::new();
    for (k, v) in &art.report {
        report.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(dir.join("report.txt"), report)?;

    let scenario = &art.report[0].1;
    let mut w = csv::Writer::from_path(dir.join("corpus.csv"))?;
    w.write_record(["scenario", "record", "subject", "key", "value"])?;
    for row in &art.rows {
        w.write_record([scenario, &row[0], &row[1], &row[2], &row[3]])?;
    }
    w.flush()?;

    for (file, column, data) in &art.plots {
        let mut text = format!("# q {column}\n");
        for (q, v) in data {
            text.push_str(&format!("{q} {v}\n"));
        }
        fs::write(dir.join("plot").join(format!("{file}.dat")), text)?;
    }

    if !art.sweep.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("lambda_sweep.csv"))?;
        w.write_record([
            "subject",
            "lambda",
            "C",
            "E_p2",
            "modified_hk_slack",
            "audit_verdict",
            "normalized_leakage",
        ])?;
        for row in &art.sweep {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    for (name, bytes) in &art.shots {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}
