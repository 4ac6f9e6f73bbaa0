//! The external-model protocol, exercised with the bundled shell scorer.

use std::path::PathBuf;

use atdev::gradients::{GradientOptions, GradientTable};
use atdev::model::predict_checked;
use atdev::simgen::{generate, CaseId, SimSpec};
use atdev::{AnalyticModel, Error, ExternalModel, ModelId, Predictor};

fn scorer(mode: &str, p: usize) -> ExternalModel {
    let script: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", "echo_scorer.sh"]
        .iter()
        .collect();
    ExternalModel::new(vec!["sh".into(), script.to_string_lossy().into_owned(), mode.into()], p).unwrap()
}

#[test]
fn scorer_reproduces_the_in_process_model_at_any_batch_size() {
    let d = generate(&SimSpec::new(CaseId::Interaction622, 257, 1)).unwrap().without_response();
    let x = d.to_matrix();
    let expect = predict_checked(&AnalyticModel::catalog(ModelId::Case622).unwrap(), x.view()).unwrap();
    for batch in [1, 7, 100, 10_000] {
        let got = predict_checked(&scorer("case622", 3).with_batch_size(batch), x.view()).unwrap();
        assert!(got.iter().zip(&expect).all(|(a, b)| a.to_bits() == b.to_bits()), "batch {batch}");
    }
}

#[test]
fn sum_scorer_matches_additive_model() {
    let d = generate(&SimSpec::new(CaseId::Indep61, 300, 2)).unwrap().without_response();
    let x = d.to_matrix();
    let m = AnalyticModel::additive_linear(&[1.0; 5]).unwrap();
    let expect = m.predict(x.view()).unwrap();
    let got = scorer("sum", 5).predict(x.view()).unwrap();
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn finite_difference_gradients_through_the_protocol() {
    let d = generate(&SimSpec::new(CaseId::Interaction622, 400, 3)).unwrap().without_response();
    let ext = scorer("case622", 3).with_batch_size(10_000);
    assert!(!ext.has_analytic_gradient());
    let fd = GradientTable::compute(&ext, &d, GradientOptions::default()).unwrap();
    let exact = GradientTable::compute(&AnalyticModel::catalog(ModelId::Case622).unwrap(), &d, GradientOptions::default()).unwrap();
    for j in 0..3 {
        for (a, b) in fd.values(j).iter().zip(exact.values(j)) {
            assert!((a - b).abs() < 1e-6, "x{}: {a} vs {b}", j + 1);
        }
    }
}

#[test]
fn protocol_violations_are_reported() {
    let d = generate(&SimSpec::new(CaseId::Additive621, 20, 4)).unwrap().without_response();
    let x = d.to_matrix();
    assert!(matches!(scorer("short", 3).predict(x.view()), Err(Error::Protocol(_))));
    match scorer("fail", 3).predict(x.view()) {
        Err(e) => assert!(e.to_string().contains("scorer failed on purpose"), "{e}"),
        Ok(_) => panic!("failing scorer accepted"),
    }
    let nan = predict_checked(&scorer("nan", 3), x.view());
    assert!(matches!(nan, Err(Error::NonFinite { row: 0, .. })), "{nan:?}");
    assert!(matches!(scorer("sum", 4).predict(x.view()), Err(Error::WidthMismatch { .. })));
    let missing = ExternalModel::new(vec!["/nonexistent/scorer".into()], 3).unwrap();
    assert!(matches!(missing.predict(x.view()), Err(Error::Spawn { .. })));
}
