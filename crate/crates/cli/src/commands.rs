//! Subcommand implementations. Each writes its files under the output
//! directory and returns the text summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use seqrb::density::{subdensity, AnalysisSchedule};
use seqrb::design::{no_difference_feasible_from, BoundaryKind, DesignPlan};
use seqrb::estimate::EstimateReport;
use seqrb::forward::{estimator_study, operating_characteristics, simulate_trial, Scenario};
use seqrb::methods::{Estimator, Registry};
use seqrb::record::TrialRecord;

use crate::config::{scenario_label, RunConfig};
use crate::error::CliError;
use crate::plot;

pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
}

impl Output {
    fn new(text: String) -> Self {
        Self {
            text,
            warnings: Vec::new(),
        }
    }
}

pub fn f4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "NA".into()
    }
}

fn opt4(x: Option<f64>) -> String {
    x.map(f4).unwrap_or_default()
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn zero_replicates(n: u64, what: &str, out: &mut Output) {
    if n == 0 {
        out.warnings.push(format!(
            "0 replicates requested; the {what} summary is empty"
        ));
    }
}

fn design_name(plan: &DesignPlan) -> &'static str {
    match plan.boundary.kind {
        BoundaryKind::TwoArmTriangular => "two-arm triangular",
        BoundaryKind::PairwiseDoubleTriangular => "pairwise double triangular",
    }
}

pub fn design_check(cfg: &RunConfig) -> Result<Output, CliError> {
    let plan = cfg.design.plan();
    plan.validate()?;
    let b = plan.boundary;
    let info: Vec<f64> = (1..=plan.planned_interims)
        .map(|k| k as f64 * plan.v_increment_nominal)
        .collect();
    // Crossing the inner edge rules out superiority in either design.
    let sched =
        AnalysisSchedule::from_boundaries(info, |v| -b.intercept + b.slope_in * v, |v| b.upper(v))?;
    let alt = cfg.design.alternative();
    let null = subdensity(&sched, 0.0)?;
    let power = subdensity(&sched, alt)?;

    let mut t = String::new();
    let line = |t: &mut String, k: &str, v: String| writeln!(t, "{k:<18}{v}").unwrap();
    line(&mut t, "design", design_name(&plan).into());
    line(&mut t, "intercept", f4(b.intercept));
    line(&mut t, "outer slope", f4(b.slope_out));
    line(&mut t, "inner slope", f4(b.slope_in));
    line(
        &mut t,
        "interims",
        format!(
            "{} planned, {} maximum",
            plan.planned_interims, plan.max_interims
        ),
    );
    line(
        &mut t,
        "information step",
        format!(
            "{} per interim ({} responses per arm)",
            f4(plan.v_increment_nominal),
            plan.per_arm_increment
        ),
    );
    line(
        &mut t,
        "patient cap",
        plan.max_total_patients
            .map_or("none".into(), |c| c.to_string()),
    );
    line(&mut t, "type I error", f4(null.total_upper()));
    line(
        &mut t,
        "power",
        format!("{} at log-odds ratio {}", f4(power.total_upper()), f4(alt)),
    );
    line(
        &mut t,
        "expected V",
        format!(
            "{} at 0, {} at {}",
            f4(null.expected_information()),
            f4(power.expected_information()),
            f4(alt)
        ),
    );
    let nod = match b.kind {
        BoundaryKind::TwoArmTriangular => "not part of a two-arm design".to_string(),
        BoundaryKind::PairwiseDoubleTriangular => {
            match no_difference_feasible_from(&b, plan.v_increment_nominal)
                .filter(|&k| k <= plan.max_interims)
            {
                Some(k) => format!(
                    "feasible from interim {k} (region opens at V = {})",
                    f4(b.intercept / b.slope_in)
                ),
                None => "never feasible".into(),
            }
        }
    };
    line(&mut t, "no-difference", nod);
    write_file(&cfg.out.join("design_check.txt"), t.as_bytes())?;
    Ok(Output::new(t))
}

fn outcome_row(label: &str, r: u64, sim: &seqrb::forward::SimulatedTrial) -> Vec<String> {
    let elim = sim
        .eliminated
        .iter()
        .map(|(t, k)| format!("T{t}@{k}"))
        .collect::<Vec<_>>()
        .join(" ");
    vec![
        label.to_string(),
        (r + 1).to_string(),
        sim.outcome.label(),
        sim.record.terminal_interim().to_string(),
        sim.total_patients.to_string(),
        elim,
    ]
}

pub fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let reps = cfg.simulate.replicates;
    let mut out = Output::new(String::new());
    zero_replicates(reps, "simulation", &mut out);
    let mut rows = Vec::new();
    for (i, s) in cfg.scenario_list().iter().enumerate() {
        let label = scenario_label(i, s);
        let sc = cfg.scenario(i, s, reps)?;
        let sims = (0..reps)
            .into_par_iter()
            .map(|r| simulate_trial(&sc, r))
            .collect::<Result<Vec<_>, _>>()?;
        let dir = cfg
            .out
            .join("records")
            .join(format!("scenario_{:02}", i + 1));
        for (r, sim) in sims.iter().enumerate() {
            let stem = dir.join(format!("replicate_{:06}", r + 1));
            write_file(
                &stem.with_extension("json"),
                sim.record.to_json().as_bytes(),
            )?;
            write_file(&stem.with_extension("csv"), sim.record.to_csv().as_bytes())?;
            rows.push(outcome_row(&label, r as u64, sim));
        }
        writeln!(
            out.text,
            "{label}: {} trials written to {}",
            sims.len(),
            dir.display()
        )
        .unwrap();
    }
    let header = [
        "scenario",
        "replicate",
        "outcome",
        "last_interim",
        "total_patients",
        "eliminated",
    ]
    .map(String::from);
    write_file(&cfg.out.join("simulate.csv"), &csv_bytes(&header, &rows)?)?;
    Ok(out)
}

pub fn oc(cfg: &RunConfig) -> Result<Output, CliError> {
    let reps = cfg.oc.replicates;
    let mut out = Output::new(String::new());
    zero_replicates(reps, "operating characteristics", &mut out);
    let list = cfg.scenario_list();
    let scenarios = list
        .iter()
        .enumerate()
        .map(|(i, s)| cfg.scenario(i, s, reps))
        .collect::<Result<Vec<Scenario>, _>>()?;
    let arms = scenarios.iter().map(Scenario::arms).max().unwrap_or(0);
    let mut header = vec!["scenario".to_string()];
    header.extend((1..=arms).map(|a| format!("p_{a}")));
    header.push("expected_n".into());
    header.extend((1..=arms).map(|a| format!("win_{a}")));
    header.extend((1..=arms).map(|a| format!("elim_{a}")));
    header.extend(["nod", "still", "nod_targets", "replicates"].map(String::from));
    let mut rows = Vec::new();
    if reps > 0 {
        for (i, sc) in scenarios.iter().enumerate() {
            let oc = operating_characteristics(sc)?;
            let pad = |v: &[f64]| {
                (0..arms)
                    .map(|a| v.get(a).map_or(String::new(), |&x| f4(x)))
                    .collect::<Vec<_>>()
            };
            let mut row = vec![scenario_label(i, &list[i])];
            row.extend(pad(&sc.mean_probabilities()));
            row.push(format!("{:.1}", oc.expected_n));
            row.extend(pad(&oc.win));
            row.extend(pad(&oc.elim));
            row.push(f4(oc.nod));
            row.push(f4(oc.still));
            row.push(
                oc.nod_targets
                    .iter()
                    .map(|t| format!("T{t}"))
                    .collect::<Vec<_>>()
                    .join("+"),
            );
            row.push(oc.replicates.to_string());
            rows.push(row);
        }
    }
    out.text = table_text(&header, &rows);
    write_file(&cfg.out.join("oc.csv"), &csv_bytes(&header, &rows)?)?;
    write_file(&cfg.out.join("oc.txt"), out.text.as_bytes())?;
    Ok(out)
}

/// Methods named in the config, dropping two-arm-only ones for wider designs.
fn methods_for<'a>(
    registry: &'a Registry,
    cfg: &RunConfig,
    two_arm: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<&'a dyn Estimator>, CliError> {
    let all = registry.select(&cfg.analysis.methods)?;
    Ok(all
        .into_iter()
        .filter(|m| {
            let keep = two_arm || m.multi_arm();
            if !keep {
                warnings.push(format!(
                    "{} skipped: it only handles two-arm trials",
                    m.name()
                ));
            }
            keep
        })
        .collect())
}

pub fn study(cfg: &RunConfig) -> Result<Output, CliError> {
    let reps = cfg.study.replicates;
    let mut out = Output::new(String::new());
    zero_replicates(reps, "study", &mut out);
    let registry = Registry::default();
    let options = cfg.analysis_options();
    let header = [
        "scenario",
        "method",
        "comparison",
        "true_theta",
        "used",
        "excluded",
        "estimate",
        "bias",
        "sd",
        "se",
        "theta_l",
        "theta_u",
        "coverage",
    ]
    .map(String::from);
    let mut rows = Vec::new();
    if reps > 0 {
        for (i, s) in cfg.scenario_list().iter().enumerate() {
            let sc = cfg.scenario(i, s, reps)?;
            let methods = methods_for(&registry, cfg, sc.arms() == 2, &mut out.warnings)?;
            for r in estimator_study(&sc, &methods, &options)? {
                rows.push(vec![
                    scenario_label(i, s),
                    r.method.clone(),
                    format!("T{} vs T{}", r.first, r.second),
                    f4(r.true_theta),
                    r.used.to_string(),
                    r.excluded.to_string(),
                    f4(r.mean_estimate),
                    f4(r.bias()),
                    f4(r.sd_estimate),
                    opt4(r.mean_se),
                    f4(r.mean_ci_low),
                    f4(r.mean_ci_high),
                    f4(r.coverage),
                ]);
            }
        }
    }
    out.warnings.dedup();
    out.text = table_text(&header, &rows);
    write_file(&cfg.out.join("study.csv"), &csv_bytes(&header, &rows)?)?;
    write_file(&cfg.out.join("study.txt"), out.text.as_bytes())?;
    Ok(out)
}

pub fn read_record(path: &Path) -> Result<TrialRecord, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    TrialRecord::from_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn analyze(cfg: &RunConfig, record: Option<PathBuf>) -> Result<Output, CliError> {
    let path = record
        .or_else(|| cfg.analysis.record.clone())
        .ok_or_else(|| CliError::Validation("no record given".into()))?;
    let rec = read_record(&path)?;
    let registry = Registry::default();
    let mut out = Output::new(String::new());
    let methods = methods_for(&registry, cfg, rec.is_two_arm(), &mut out.warnings)?;
    let options = cfg.analysis_options();
    let mut reports: Vec<EstimateReport> = Vec::new();
    for m in methods {
        reports.extend(m.analyze(&rec, &options)?);
    }
    let header = [
        "method",
        "comparison",
        "estimate",
        "se",
        "theta_l",
        "theta_u",
        "p_value",
        "proportion_complete",
        "warnings",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                format!("T{} vs T{}", r.first, r.second),
                f4(r.theta_hat),
                opt4(r.se),
                f4(r.ci_low),
                f4(r.ci_high),
                opt4(r.p_value),
                opt4(r.diagnostics.get("proportion_complete").copied()),
                r.warnings.join("; "),
            ]
        })
        .collect();
    for r in &reports {
        for w in &r.warnings {
            let w = format!("{} T{} vs T{}: {w}", r.method, r.first, r.second);
            if !out.warnings.contains(&w) {
                out.warnings.push(w);
            }
        }
    }
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    out.text = table_text(
        &header[..header.len() - 1],
        &rows
            .iter()
            .map(|r| r[..r.len() - 1].to_vec())
            .collect::<Vec<_>>(),
    );
    write_file(&cfg.out.join("analysis.json"), json.as_bytes())?;
    write_file(&cfg.out.join("analysis.csv"), &csv_bytes(&header, &rows)?)?;
    write_file(&cfg.out.join("analysis.txt"), out.text.as_bytes())?;
    Ok(out)
}

pub fn plot_cmd(cfg: &RunConfig, extra: &[PathBuf]) -> Result<Output, CliError> {
    let plan = cfg.design.plan();
    plan.validate()?;
    let mut out = Output::new(String::new());
    let path = cfg.out.join("boundaries.svg");
    write_file(&path, plot::boundary_svg(&plan).as_bytes())?;
    writeln!(out.text, "boundary diagram written to {}", path.display()).unwrap();
    let mut sets = Vec::new();
    for p in cfg.plot.reports.iter().chain(extra) {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        let reports: Vec<EstimateReport> = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        sets.push(reports);
    }
    if sets.is_empty() {
        out.warnings
            .push("no analysis reports given; only the boundary diagram was drawn".into());
    } else {
        let points = plot::comparison_points(&sets)?;
        let path = cfg.out.join("estimates.svg");
        let svg = plot::estimates_svg(&points, plan.boundary.mean_slope());
        write_file(&path, svg.as_bytes())?;
        writeln!(
            out.text,
            "estimator comparison written to {}",
            path.display()
        )
        .unwrap();
    }
    Ok(out)
}

/// Fixed-width rendering of a CSV table for the terminal.
fn table_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut t = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let cells: Vec<String> = r
            .iter()
            .zip(&width)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        writeln!(t, "{}", cells.join("  ").trim_end()).unwrap();
    }
    t
}
