//! End-to-end: scenario text in, passing report out.

use sage_reliability::{parse_scenario, run_scenario, ScenarioReport};

#[test]
fn parsed_scenario_runs_green() {
    let text = "\
# worked anchor values
eps = 0.1
alpha = 0.8
eps_retry = 0.05
s_engage = 1.0
p_recovered = 0.7
n_steps = 20
c_base = 1.0
c_mch = 1.0
";
    let params = parse_scenario(text).unwrap();
    let report = run_scenario(&params, 200_000, 2024).unwrap();
    assert!(report.all_passed(), "failing checks: {:#?}", report.checks);
    assert!((report.eps_prime - 0.024).abs() < 1e-12);
    assert!((report.cost_ratio - 1.2).abs() < 1e-12);

    // The report survives a JSON round trip unchanged.
    let json = serde_json::to_string_pretty(&report).unwrap();
    let back: ScenarioReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn harsher_scenario_still_passes_its_checks() {
    let params = parse_scenario("eps=0.4\nalpha=0.5\neps_retry=0.3\ns_engage=0.6\n").unwrap();
    let report = run_scenario(&params, 100_000, 11).unwrap();
    assert!(report.all_passed(), "failing checks: {:#?}", report.checks);
    assert!(report.eps_prime < 0.4);
}
