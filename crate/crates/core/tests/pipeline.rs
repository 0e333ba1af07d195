//! Catalogue entries run through the property suite at reduced sample sizes.

use lmlab::catalogue;
use lmlab::lagrangian::Reversibility;
use lmlab::checks::{run_property, CheckConfig, CheckContext, Status};
use lmlab::report::AnalysisReport;
use lmlab::LabError;

fn small() -> CheckConfig {
    CheckConfig {
        samples: Some(642),
        pairs: 2000,
        chords: 2000,
        validity_samples: 1000,
        dual_samples: 5000,
        round_trips: 100,
        dual_points: 5,
        support_trials: 200,
        growth_trials: 100,
        family_points: 3,
        borsuk_vectors: 2,
        ..CheckConfig::default()
    }
}

fn report(name: &str, property: &str) -> AnalysisReport {
    let ctx = CheckContext::new(catalogue::get(name).unwrap(), small());
    let outcomes = run_property(&ctx, property).unwrap();
    AnalysisReport::assemble("check", &ctx, outcomes, true)
}

#[test]
fn every_name_resolves() {
    for name in catalogue::NAMES {
        let e = catalogue::get(name).unwrap();
        assert_eq!(&e.name, name);
        assert!(e.dimension() >= 2);
    }
    assert!(matches!(catalogue::get("nope"), Err(LabError::UnknownName(_))));
}

#[test]
fn minkowski2_passes_everything() {
    let r = report("minkowski2", "all");
    assert_eq!(r.exit_code(), 0, "{:#?}", r.summary);
    assert_eq!(r.outcome("cones").unwrap().matches_expected, Some(true));
    assert_eq!(r.outcome("borsuk").unwrap().verdict, "TRIVIAL_SOLUTIONS");
}

#[test]
fn beem2_skips_the_three_dimensional_solvers() {
    let r = report("beem2", "all");
    assert_eq!(r.exit_code(), 0, "{:#?}", r.summary);
    assert_eq!(r.outcome("borsuk").unwrap().status, Status::Skipped);
}

#[test]
fn negative_controls_fail_as_expected() {
    let randers = report("randers4", "validity");
    let v = randers.outcome("validity").unwrap();
    assert_eq!((v.status, v.verdict.as_str()), (Status::Fail, "DOMAIN_WITNESS"));
    assert_eq!(v.matches_expected, Some(true));

    let hopf = report("hopf4", "euler");
    let e = hopf.outcome("euler").unwrap();
    assert_eq!(e.verdict, "NON_FINSLER");
    assert_eq!(e.matches_expected, Some(true));
    assert!(e.details["min_quadratic"].as_f64().unwrap() > 0.0);
    assert_eq!(hopf.exit_code(), 1);
}

#[test]
fn odd_perturbation_is_irreversible_but_valid() {
    let e = catalogue::get("odd_perturbed").unwrap();
    assert_eq!(e.spec().unwrap().reversibility(), Reversibility::No);
    let r = report("odd_perturbed", "validity");
    assert_eq!(r.outcome("validity").unwrap().status, Status::Pass);
    let b = report("odd_perturbed", "borsuk");
    assert_eq!(b.outcome("borsuk").unwrap().verdict, "SOLUTIONS_VERIFIED");
}

#[test]
fn parameters_above_the_threshold_fail_validity() {
    let params = [("alpha".to_string(), 5.0)].into_iter().collect();
    let entry = catalogue::get("beem3").unwrap().with_parameters(&params).unwrap();
    let ctx = CheckContext::new(entry, small());
    let v = &run_property(&ctx, "validity").unwrap()[0];
    assert_eq!(v.status, Status::Fail);
    assert_eq!(v.verdict, "SIGNATURE_WITNESS");
}

#[test]
fn unknown_parameter_is_rejected() {
    let params = [("gamma".to_string(), 1.0)].into_iter().collect();
    assert!(matches!(
        catalogue::get("beem3").unwrap().with_parameters(&params),
        Err(LabError::UnboundParameter(_))
    ));
}
