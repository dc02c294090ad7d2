use conewave::selftest::{run_selftest, Status, ALL_CONES};

#[test]
fn acceptance_criteria() {
    let cones: Vec<String> = ALL_CONES.iter().map(|s| s.to_string()).collect();
    let report = run_selftest(&cones, &[]).unwrap();
    for c in &report.criteria {
        println!("{}", c.line());
        for (k, v) in &c.metrics {
            println!("    {k} = {v:.6e}");
        }
    }
    assert_eq!(report.criteria.len(), 10);
    let failed: Vec<u32> = report.criteria.iter().filter(|c| c.status == Status::Fail).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
