//! Implementations of the four subcommands.

use std::path::Path;

use serde::Serialize;

use skywatch_core::config::PipelineConfig;
use skywatch_core::detection::{first_crossing, trace_statistics, write_trace_csv, Rule};
use skywatch_core::error::{CoreError, Result};
use skywatch_core::evaluation::{
    evaluate_suite, trace_loaded_cases, verify_zero_false_alarms, write_range_chart,
    write_report_json, write_summary_csv, write_trace_chart,
};
use skywatch_core::image::GrayImage;
use skywatch_core::oracle::{
    check_concavity, check_convexity, check_greedy_containment, simulate_pfa, value_iteration,
    PfaEstimate,
};
use skywatch_core::simulator::{
    list_pgm_files, load_suite, save_suite, standard_suite, ScenarioCategory,
};

use crate::exit;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))
}

/// Writes the standard 15-case suite under `out`.
pub fn simulate(config: &PipelineConfig, out: &Path) -> Result<u8> {
    let seed = config.suite.master_seed;
    let scenarios = standard_suite(seed);
    ensure_dir(out)?;
    let manifest = save_suite(out, seed, &scenarios)?;
    println!(
        "wrote {} cases (master seed {seed}) to {}",
        manifest.cases.len(),
        out.display()
    );
    Ok(exit::OK)
}

#[derive(Serialize)]
struct DecisionRecord {
    rule: Rule,
    frame: u32,
    pixel_xy: [usize; 2],
    statistic: f64,
    threshold: f64,
}

/// Runs the configured rules over one frame directory; writes the trace
/// CSV always and `decisions.json` only when something fired.
pub fn detect(config: &PipelineConfig, sequence: &Path, out: &Path) -> Result<u8> {
    let tm = config.transition_model()?;
    let se = config.structuring_element()?;
    let paths = list_pgm_files(sequence)?;
    if paths.is_empty() {
        return Err(CoreError::Format {
            path: sequence.to_path_buf(),
            reason: "no .pgm frames found".to_string(),
        });
    }
    let width = GrayImage::read_pgm(&paths[0])?.width();
    let frames = paths.iter().map(|p| GrayImage::read_pgm(p));
    let records = trace_statistics(frames, &tm, &se)?;

    ensure_dir(out)?;
    write_trace_csv(&out.join("trace.csv"), &records)?;

    let decisions: Vec<DecisionRecord> = config
        .active_rules()
        .into_iter()
        .filter_map(|rule| {
            first_crossing(&records, rule, config.thresholds.get(rule), width).map(|d| {
                DecisionRecord {
                    rule,
                    frame: d.frame,
                    pixel_xy: d.pixel_xy,
                    statistic: d.statistic,
                    threshold: d.threshold,
                }
            })
        })
        .collect();

    for d in &decisions {
        println!(
            "{}: declared at frame {} pixel ({}, {}) statistic {:.6}",
            d.rule, d.frame, d.pixel_xy[0], d.pixel_xy[1], d.statistic
        );
    }
    if decisions.is_empty() {
        println!("no rule crossed its threshold over {} frames", records.len());
        return Ok(exit::NO_DETECTION);
    }
    let path = out.join("decisions.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&decisions).map_err(CoreError::Json)?,
    )
    .map_err(|e| CoreError::io(&path, e))?;
    Ok(exit::OK)
}

/// Scores a suite directory: ZFA threshold search, detection ranges,
/// summary statistics, and the optional charts.
pub fn evaluate(config: &PipelineConfig, suite: &Path, out: &Path) -> Result<u8> {
    let tm = config.transition_model()?;
    let se = config.structuring_element()?;
    let (_, cases) = load_suite(suite)?;
    let traces = trace_loaded_cases(&cases, &tm, &se)?;
    let rules = config.active_rules();
    let report = evaluate_suite(&traces, &rules, config.suite.localization_radius_px)?;

    ensure_dir(out)?;
    write_report_json(&out.join("report.json"), &report)?;
    write_summary_csv(&out.join("summary.csv"), &report)?;
    if config.output.emit_svg {
        write_range_chart(&out.join("ranges.svg"), &report)?;
        // One trace chart for the hardest regime present.
        if let Some(case) = traces
            .iter()
            .find(|t| t.category == ScenarioCategory::BlobClutter)
            .or(traces.first())
        {
            write_trace_chart(&out.join(format!("trace-{}.svg", case.name)), case)?;
        }
    }

    for rr in &report.rules {
        match (rr.mean_detection_range_m, rr.standard_error_m) {
            (Some(mean), Some(se)) => println!(
                "{}: threshold {:.9}, detected {}/{} cases, mean range {:.1} m (se {:.1} m)",
                rr.rule,
                rr.zfa_threshold,
                rr.detected_cases,
                rr.detected_cases + rr.missed_cases,
                mean,
                se
            ),
            _ => println!(
                "{}: threshold {:.9}, no detections ({} misses)",
                rr.rule, rr.zfa_threshold, rr.missed_cases
            ),
        }
    }
    if !verify_zero_false_alarms(&report, &traces) {
        eprintln!("replay found a false alarm at the reported thresholds");
        return Ok(exit::CHECK_VIOLATION);
    }
    Ok(exit::OK)
}

#[derive(Serialize)]
struct OracleReport {
    converged: bool,
    sweeps: usize,
    final_delta: f64,
    grid_points: usize,
    vertex_containment_ok: bool,
    convexity_violations: usize,
    containment_violations: usize,
    concavity_violations: usize,
    concavity_tolerance: f64,
    pfa: PfaEstimate,
    pfa_bound: f64,
    pfa_ok: bool,
}

/// Solves the configured small instance and runs every structural check.
pub fn oracle(config: &PipelineConfig, out: &Path) -> Result<u8> {
    let grid = config.oracle_grid()?;
    let tm = config.transition_model()?;
    let obs = config.observation_model()?;
    let cm = config.cost_model(config.oracle.pixels_wide, config.oracle.pixels_high)?;
    let options = config.value_iteration_options();

    let sol = value_iteration(grid, &tm, &obs, &cm, options)?;
    ensure_dir(out)?;
    if config.output.emit_value_table {
        sol.write_table_csv(&out.join("value_table.csv"))?;
    }

    if !sol.converged {
        let path = out.join("oracle_report.json");
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&serde_json::json!({
                "converged": false,
                "sweeps": sol.sweeps,
                "final_delta": sol.final_delta,
            }))
            .map_err(CoreError::Json)?,
        )
        .map_err(|e| CoreError::io(&path, e))?;
        eprintln!(
            "value iteration did not converge in {} sweeps (last delta {:.3e})",
            sol.sweeps, sol.final_delta
        );
        return Ok(exit::NO_CONVERGENCE);
    }

    let regions = sol.stopping_regions(&cm);
    let vertex_containment_ok = regions
        .iter()
        .enumerate()
        .all(|(i, region)| region.contains(&sol.grid.vertex(i)));
    let convexity_violations: usize = regions
        .iter()
        .map(|r| check_convexity(r, &sol.grid, config.oracle.convexity_samples).len())
        .sum();
    let containment_violations = check_greedy_containment(&sol, &cm).len();
    let concavity_tolerance = 2.0 / sol.grid.resolution() as f64;
    let concavity_violations = check_concavity(
        &sol,
        config.oracle.concavity_pairs,
        concavity_tolerance,
        config.oracle.concavity_seed,
    )
    .len();
    let pfa = simulate_pfa(
        &tm,
        &obs,
        &cm,
        config.oracle.pfa_trials,
        config.oracle.pfa_seed,
        config.oracle.pfa_step_cap,
    )?;
    let pfa_bound = cm.pfa_bound();
    let pfa_ok = pfa.false_alarm_rate <= pfa_bound + 3.0 * pfa.standard_error;

    let report = OracleReport {
        converged: true,
        sweeps: sol.sweeps,
        final_delta: sol.final_delta,
        grid_points: sol.grid.len(),
        vertex_containment_ok,
        convexity_violations,
        containment_violations,
        concavity_violations,
        concavity_tolerance,
        pfa,
        pfa_bound,
        pfa_ok,
    };
    let path = out.join("oracle_report.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&report).map_err(CoreError::Json)?,
    )
    .map_err(|e| CoreError::io(&path, e))?;

    println!(
        "solved {} grid points in {} sweeps; convexity violations {}, containment violations {}, concavity violations {}",
        report.grid_points, report.sweeps, convexity_violations, containment_violations,
        concavity_violations
    );
    println!(
        "empirical PFA {:.4} (se {:.4}) against bound {:.4}",
        pfa.false_alarm_rate, pfa.standard_error, pfa_bound
    );

    let all_ok = vertex_containment_ok
        && convexity_violations == 0
        && containment_violations == 0
        && concavity_violations == 0
        && pfa_ok;
    if all_ok {
        Ok(exit::OK)
    } else {
        eprintln!("one or more structural checks reported violations");
        Ok(exit::CHECK_VIOLATION)
    }
}
