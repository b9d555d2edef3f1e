//! End-to-end tests of the binary: exit codes, CSV shapes, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use celload::scenario_io::{save_scenario, ScenarioFile, SCENARIO_VERSION};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_celload")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("celload-cli-{}-{name}", std::process::id()));
    p
}

/// Two symmetric cells (serving gain 1, cross gain 1/3, unit noise) at the
/// given per-user demand.
fn toy_scenario(demand: f64, path: &Path) {
    let file = ScenarioFile {
        version: SCENARIO_VERSION,
        cells: 2,
        users: vec![vec![0], vec![1]],
        gains: vec![vec![1.0, 1.0 / 3.0], vec![1.0 / 3.0, 1.0]],
        noise_power: 1.0,
        demands: vec![demand, demand],
        power_cap: None,
        resource_units: None,
        resource_bandwidth_hz: None,
        solver: None,
    };
    save_scenario(path, &file).unwrap();
}

fn single_cell_scenario(g: f64, noise: f64, demand: f64, path: &Path) {
    let file = ScenarioFile {
        version: SCENARIO_VERSION,
        cells: 1,
        users: vec![vec![0]],
        gains: vec![vec![g]],
        noise_power: noise,
        demands: vec![demand],
        power_cap: None,
        resource_units: None,
        resource_bandwidth_hz: None,
        solver: None,
    };
    save_scenario(path, &file).unwrap();
}

#[test]
fn check_reports_satisfiable_toy() {
    let scenario = tmp("check-sat.json");
    toy_scenario(2.0, &scenario);
    let out = run(&["check", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("verdict: satisfiable"), "{text}");
    assert!(text.contains("rho = 0.666666666666"), "{text}");
    std::fs::remove_file(scenario).ok();
}

#[test]
fn check_reports_unsatisfiable_with_exit_two() {
    let scenario = tmp("check-unsat.json");
    toy_scenario(3.2, &scenario);
    let out = run(&["check", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).contains("verdict: unsatisfiable"));
    std::fs::remove_file(scenario).ok();
}

#[test]
fn optimize_toy_converges_and_reports_energy() {
    let scenario = tmp("opt-ok.json");
    toy_scenario(1.0, &scenario);
    let csv = tmp("opt-ok.csv");
    let out = run(&[
        "optimize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--tol-outer",
        "1e-9",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let q = 3.0 * (std::f64::consts::E - 1.0) / (4.0 - std::f64::consts::E);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "cell,power,load,energy");
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], i.to_string());
        let p: f64 = fields[1].parse().unwrap();
        assert!((p - q).abs() / q < 1e-6, "power {p} vs q {q}");
        assert_eq!(fields[2], "1");
    }
    std::fs::remove_file(scenario).ok();
    std::fs::remove_file(csv).ok();
}

#[test]
fn optimize_infeasible_demands_exit_two_and_no_output_file() {
    let scenario = tmp("opt-infeasible.json");
    toy_scenario(2.0, &scenario);
    let csv = tmp("opt-infeasible.csv");
    let out = run(&[
        "optimize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("not implementable"),
        "stderr: {}",
        stderr(&out)
    );
    assert!(!csv.exists(), "failed run must not leave partial output");
    std::fs::remove_file(scenario).ok();
}

#[test]
fn sweep_load_single_cell_matches_closed_form() {
    let g = 1.9;
    let noise = 0.8;
    let scenario = tmp("sweep-load.json");
    single_cell_scenario(g, noise, 1.0, &scenario);
    let csv = tmp("sweep-load.csv");
    let out = run(&[
        "sweep-load",
        "--scenario",
        scenario.to_str().unwrap(),
        "--phi",
        "0.25,0.5,0.75,1.0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "param,total_energy,feasible,iterations"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let phi: f64 = fields[0].parse().unwrap();
        let energy: f64 = fields[1].parse().unwrap();
        assert_eq!(fields[2], "true");
        let want = phi * noise * ((1.0 / phi).exp() - 1.0) / g;
        assert!(
            (energy - want).abs() / want < 1e-8,
            "phi={phi}: {energy} vs {want}"
        );
    }
    std::fs::remove_file(scenario).ok();
    std::fs::remove_file(csv).ok();
}

#[test]
fn sweep_demand_flags_unsatisfiable_rows() {
    let scenario = tmp("sweep-demand.json");
    toy_scenario(1.0, &scenario);
    let out = run(&[
        "sweep-demand",
        "--scenario",
        scenario.to_str().unwrap(),
        "--xi",
        "0.5,1.0,3.5",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("3.5,,false"), "{text}");
    std::fs::remove_file(scenario).ok();
}

#[test]
fn solve_power_capped_reports_pinned_cells() {
    let scenario = tmp("solve-power-cap.json");
    single_cell_scenario(1.0, 1.0, 1.0, &scenario);
    let out = run(&[
        "solve-power",
        "--scenario",
        scenario.to_str().unwrap(),
        "--p-cap",
        "1.0",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("pinned at their power cap: [0]"), "{text}");
    std::fs::remove_file(scenario).ok();
}

#[test]
fn solve_power_unimplementable_target_exit_two() {
    let scenario = tmp("solve-power-bad.json");
    toy_scenario(2.0, &scenario);
    let out = run(&[
        "solve-power",
        "--scenario",
        scenario.to_str().unwrap(),
        "--phi",
        "1.0",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("not implementable"));
    std::fs::remove_file(scenario).ok();
}

#[test]
fn solve_load_writes_per_cell_loads() {
    let scenario = tmp("solve-load.json");
    // p * g / noise = e^2 - 1 gives load 1/2 at unit demand.
    single_cell_scenario(1.0, 1.0, 1.0, &scenario);
    let csv = tmp("solve-load.csv");
    let p = std::f64::consts::E.powi(2) - 1.0;
    let out = run(&[
        "solve-load",
        "--scenario",
        scenario.to_str().unwrap(),
        "--power",
        &p.to_string(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().nth(1).unwrap();
    let load: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((load - 0.5).abs() < 1e-9, "load {load}");
    std::fs::remove_file(scenario).ok();
    std::fs::remove_file(csv).ok();
}

#[test]
fn baseline_toy_matches_symmetric_optimum() {
    let scenario = tmp("baseline.json");
    toy_scenario(1.0, &scenario);
    let out = run(&["baseline", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let beta_line = text.lines().next().unwrap();
    let beta: f64 = beta_line
        .split("beta = ")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let q = 3.0 * (std::f64::consts::E - 1.0) / (4.0 - std::f64::consts::E);
    assert!((beta - q).abs() < 1e-6, "beta {beta} vs q {q}");
    std::fs::remove_file(scenario).ok();
}

#[test]
fn trace_writes_decreasing_distances() {
    let scenario = tmp("trace.json");
    toy_scenario(1.0, &scenario);
    let csv = tmp("trace.csv");
    let out = run(&[
        "trace",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let distances: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(distances.len() >= 2);
    for w in distances.windows(2) {
        assert!(w[1] < w[0], "distances rose: {distances:?}");
    }
    std::fs::remove_file(scenario).ok();
    std::fs::remove_file(csv).ok();
}

#[test]
fn region_runs_are_seed_deterministic() {
    let scenario = tmp("region.json");
    toy_scenario(0.9, &scenario);
    let a = tmp("region-a.csv");
    let b = tmp("region-b.csv");
    let c = tmp("region-c.csv");
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = run(&[
            "region",
            "--scenario",
            scenario.to_str().unwrap(),
            "--samples",
            "50",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    let bytes_c = std::fs::read(&c).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must give identical output");
    assert_ne!(bytes_a, bytes_c, "different seed must change the samples");
    assert!(bytes_a.starts_with(b"p1,p2,x1,x2\n"));
    for p in [scenario, a, b, c] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn generate_is_deterministic_and_loadable() {
    let a = tmp("gen-a.json");
    let b = tmp("gen-b.json");
    for path in [&a, &b] {
        let out = run(&[
            "generate",
            "--cells",
            "9",
            "--users-per-cell",
            "2",
            "--demand",
            "0.02",
            "--seed",
            "42",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let out = run(&["check", "--scenario", a.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "generated scenario must check out");
    assert!(stdout(&out).contains("satisfiable"));
    std::fs::remove_file(a).ok();
    std::fs::remove_file(b).ok();
}

#[test]
fn input_errors_exit_one() {
    // Missing scenario file.
    let out = run(&["check", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(exit_code(&out), 1);

    // Unknown flag.
    let scenario = tmp("badflag.json");
    toy_scenario(1.0, &scenario);
    let out = run(&[
        "check",
        "--scenario",
        scenario.to_str().unwrap(),
        "--frobnicate",
    ]);
    assert_eq!(exit_code(&out), 1);

    // Malformed scenario contents.
    let bad = tmp("malformed.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = run(&["check", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);

    // Scenario violating an invariant (zero demand), with coordinates in the
    // message.
    let zero = tmp("zero-demand.json");
    let file = ScenarioFile {
        version: SCENARIO_VERSION,
        cells: 2,
        users: vec![vec![0], vec![1]],
        gains: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        noise_power: 1.0,
        demands: vec![1.0, 0.0],
        power_cap: None,
        resource_units: None,
        resource_bandwidth_hz: None,
        solver: None,
    };
    save_scenario(&zero, &file).unwrap();
    let out = run(&["check", "--scenario", zero.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        stderr(&out).contains("demand[1]"),
        "stderr: {}",
        stderr(&out)
    );

    std::fs::remove_file(scenario).ok();
    std::fs::remove_file(bad).ok();
    std::fs::remove_file(zero).ok();
}

#[test]
fn rate_unit_bits_converts_by_ln2() {
    let scenario = tmp("rate-unit.json");
    single_cell_scenario(1.0, 1.0, 1.0, &scenario);
    let csv_bits = tmp("rate-unit-bits.csv");
    let csv_nats = tmp("rate-unit-nats.csv");
    let xi_bits = 0.75;
    let xi_nats = xi_bits * std::f64::consts::LN_2;
    let out = run(&[
        "sweep-demand",
        "--scenario",
        scenario.to_str().unwrap(),
        "--xi",
        &xi_bits.to_string(),
        "--rate-unit",
        "bits",
        "--out",
        csv_bits.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let out = run(&[
        "sweep-demand",
        "--scenario",
        scenario.to_str().unwrap(),
        "--xi",
        &xi_nats.to_string(),
        "--out",
        csv_nats.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(
        std::fs::read(&csv_bits).unwrap(),
        std::fs::read(&csv_nats).unwrap(),
        "bit-denominated demands must solve identically to their nat equivalent"
    );
    for p in [scenario, csv_bits, csv_nats] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    for sub in [
        "check",
        "solve-load",
        "solve-power",
        "optimize",
        "baseline",
        "sweep-demand",
        "sweep-load",
        "trace",
        "region",
        "generate",
    ] {
        assert!(stdout(&out).contains(sub), "missing subcommand {sub}");
    }
}
