use lieflow::verify::{run_suite, Status, Suite};
use lieflow::ExecMode;

/// Properties that miss their tolerance at the default discretization. Each
/// entry carries a regression ceiling as a multiple of the tolerance.
const KNOWN_SHORTFALLS: [(&str, f64); 1] = [("sphere-drift", 2.0)];

fn assert_suite(suite: Suite) {
    let report = run_suite(suite, ExecMode::Parallel).unwrap();
    let mut unexpected = Vec::new();
    for p in &report.properties {
        println!("{:?} {} {:.3e} < {:.1e}: {}", p.status, p.name, p.measured, p.tolerance, p.detail);
        if p.status != Status::Fail {
            continue;
        }
        match KNOWN_SHORTFALLS.iter().find(|(n, _)| *n == p.name) {
            Some((_, ceiling)) => assert!(
                p.measured < ceiling * p.tolerance,
                "{} regressed beyond {ceiling}x its tolerance: {:.3e}",
                p.name,
                p.measured
            ),
            None => unexpected.push(p.name.clone()),
        }
    }
    assert!(unexpected.is_empty(), "failed properties: {unexpected:?}");
}

#[test]
fn geometry_suite_passes() {
    assert_suite(Suite::Geometry);
}

#[test]
fn fields_suite_passes() {
    assert_suite(Suite::Fields);
}

#[test]
fn fields_suite_flags_shallow_rank() {
    let report = run_suite(Suite::Fields, ExecMode::Sequential).unwrap();
    let p = report.properties.iter().find(|p| p.name == "rank-gh2-n2-depth1").unwrap();
    assert_eq!(p.status, Status::ExpectedInsufficientDepth);
    assert_eq!(p.measured, 2.0);
}

#[test]
fn approximation_suite_passes() {
    assert_suite(Suite::Approximation);
}

#[test]
fn dynamics_suite_passes() {
    assert_suite(Suite::Dynamics);
}

#[test]
fn sequential_and_parallel_reports_agree() {
    let a = run_suite(Suite::Fields, ExecMode::Sequential).unwrap();
    let b = run_suite(Suite::Fields, ExecMode::Parallel).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
