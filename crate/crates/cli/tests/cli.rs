use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use atdev::export::{
    self, BarData, CurveDocument, HeatMapData, HistogramDocument, ImportanceDocument, MatrixDocument,
    OverlayBundle, ScatterDocument, SimulationDocument,
};
use atdev::model::{FitReport, MlpModel};
use atdev::MatrixKind;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::TempDir;

fn atdev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atdev"))
        .args(args)
        .env_remove("ATDEV_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn ok(o: Output) -> Output {
    assert_eq!(
        code(&o),
        0,
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scorer() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/echo_scorer.sh");
    s(&p.canonicalize().unwrap()).to_string()
}

/// Simulated data in a fresh temp dir; returns (dir, csv path).
fn simulated(case: &str, n: usize, extra: &[&str]) -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let n = n.to_string();
    let mut args = vec!["simulate", "--case", case, "--n", &n, "--seed", "11", "-o", s(&out)];
    args.extend_from_slice(extra);
    ok(atdev(&args));
    (tmp, out.join("data.csv"))
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

/// Loads a document and checks that re-serializing it reproduces the file.
fn round_trip<T: DeserializeOwned + Serialize>(path: &Path) -> T {
    let text = fs::read_to_string(path).unwrap();
    let doc: T = export::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(export::to_json(&doc).unwrap(), text, "{} does not round-trip", path.display());
    doc
}

#[test]
fn usage_errors_exit_1() {
    let (tmp, data) = simulated("additive_621", 200, &[]);
    let out = tmp.path().join("o");
    assert_eq!(code(&atdev(&["frobnicate"])), 1);
    assert_eq!(code(&atdev(&["effects", "--bins", "many"])), 1);
    assert_eq!(code(&atdev(&["simulate", "--case", "nope", "-o", s(&out)])), 1);
    let base = ["effects", "--data", s(&data), "-o", s(&out)];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        code(&atdev(&a))
    };
    assert_eq!(with(&[]), 1, "no model source");
    assert_eq!(with(&["--analytic", "case_621", "--external", "sh x"]), 1);
    assert_eq!(with(&["--analytic", "case_621", "--bins", "1"]), 1);
    assert_eq!(with(&["--analytic", "case_621", "--fd-step", "-1"]), 1);
    assert_eq!(with(&["--analytic", "no_such_model"]), 1);
    assert!(!out.exists());
    assert_eq!(code(&atdev(&["--help"])), 0);
}

#[test]
fn data_and_model_errors_exit_2() {
    let (tmp, data) = simulated("additive_621", 200, &[]);
    let out = tmp.path().join("o");
    let missing = tmp.path().join("missing.csv");
    let o = atdev(&["effects", "--data", s(&missing), "--analytic", "case_621", "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
    let weights = tmp.path().join("w.json");
    let o = atdev(&["effects", "--data", s(&data), "--mlp", s(&weights), "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    // Arity mismatch: a five-input model on three columns.
    let o = atdev(&["effects", "--data", s(&data), "--analytic", "case_623", "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    let o = atdev(&["effects", "--data", s(&bad), "--analytic", "additive_linear", "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));
    let sc = format!("sh {} fail", scorer());
    let o = atdev(&["effects", "--data", s(&data), "--external", &sc, "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists(), "failed runs leave no output directory");
}

#[test]
fn non_finite_predictions_exit_3() {
    let (tmp, data) = simulated("additive_621", 200, &[]);
    let out = tmp.path().join("o");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let sc = format!("sh {} nan", scorer());
    let o = atdev(&["importance", "--data", s(&data), "--external", &sc, "-o", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let left: Vec<_> = files(&out).into_keys().collect();
    assert_eq!(left, vec![PathBuf::from("keep.txt")]);
}

#[test]
fn runs_are_deterministic() {
    let (tmp, data) = simulated("complex_623", 1500, &[]);
    let again = tmp.path().join("sim2");
    ok(atdev(&["simulate", "--case", "complex_623", "--n", "1500", "--seed", "11", "-o", s(&again)]));
    assert_eq!(files(data.parent().unwrap()), files(&again));

    let runs: Vec<_> = (0..2)
        .map(|i| {
            let out = tmp.path().join(format!("run{i}"));
            for cmd in ["effects", "heatmap", "importance"] {
                ok(atdev(&[cmd, "--data", s(&data), "--analytic", "case_623", "--bins", "15", "-o", s(&out)]));
            }
            ok(atdev(&[
                "matrix", "--kind", "le", "--data", s(&data), "--analytic", "case_623", "--bins", "15", "--seed",
                "3", "--scatter-cap", "100", "-o", s(&out),
            ]));
            files(&out)
        })
        .collect();
    assert!(runs[0].len() > 100);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn every_document_round_trips() {
    let (tmp, data) = simulated("interaction_622", 800, &[]);
    let sim: SimulationDocument = round_trip(&data.with_file_name("simulation.json"));
    assert_eq!(sim.spec.n, 800);
    assert!(sim.theoretical_r2 > 0.0 && sim.theoretical_r2 < 1.0);
    let corr_csv = fs::read(data.with_file_name("correlation.csv")).unwrap();
    assert_eq!(export::read_correlation_csv(&corr_csv[..]).unwrap(), sim.correlation);

    let out = tmp.path().join("o");
    let common = ["--data", s(&data), "--analytic", "case_622", "--bins", "10", "-o", s(&out)];
    for cmd in ["effects", "heatmap", "importance"] {
        let mut a = vec![cmd];
        a.extend_from_slice(&common);
        ok(atdev(&a));
    }
    let mut a = vec!["matrix", "--kind", "le"];
    a.extend_from_slice(&common);
    ok(atdev(&a));

    for (rel, _) in files(&out) {
        let path = out.join(&rel);
        let name = rel.file_name().unwrap().to_str().unwrap();
        if rel.starts_with("curves") {
            if name.ends_with(".csv") {
                continue;
            }
            let doc: CurveDocument = round_trip(&path);
            let csv = fs::read(path.with_extension("csv")).unwrap();
            let back = export::read_curves_csv(&csv[..], doc.curve.centered).unwrap();
            assert_eq!(back, vec![doc.curve], "{}", rel.display());
        } else if rel.starts_with("overlays") {
            let b: OverlayBundle = round_trip(&path);
            assert!(b.curves.iter().all(|c| c.grid == b.curves[0].grid));
        } else {
            match name {
                "matrix.json" => {
                    let m: MatrixDocument = round_trip(&path);
                    assert_eq!(m.matrix.kind, MatrixKind::LE);
                }
                "scatter.json" => drop(round_trip::<ScatterDocument>(&path)),
                "histograms.json" => drop(round_trip::<HistogramDocument>(&path)),
                "importance.json" => drop(round_trip::<ImportanceDocument>(&path)),
                "heatmap_importance.json" | "heatmap_correlation.json" => drop(round_trip::<HeatMapData>(&path)),
                "bars_v_plus.json" | "bars_dgsm.json" => drop(round_trip::<BarData>(&path)),
                "matrix.csv" | "importance.csv" => {}
                other => panic!("unexpected output {other}"),
            }
        }
    }
}

#[test]
fn two_variable_matrix_has_four_cells() {
    let (tmp, data) = simulated(
        "bivariate_normal",
        500,
        &["--model", "multiplicative", "--rho", "0.5"],
    );
    let out = tmp.path().join("m");
    ok(atdev(&["matrix", "--data", s(&data), "--analytic", "multiplicative", "--bins", "8", "-o", s(&out)]));
    let m: MatrixDocument = round_trip(&out.join("matrix.json"));
    assert_eq!(m.matrix.p(), 2);
    let cells = (0..2).flat_map(|k| (0..2).map(move |j| (k, j))).filter(|&(k, j)| m.matrix.cell(k, j).is_some());
    assert_eq!(cells.count(), 4);
}

#[test]
fn le_scatter_is_capped_and_shared() {
    let (tmp, data) = simulated("le_71_indep", 900, &[]);
    let out = tmp.path().join("m");
    ok(atdev(&[
        "matrix", "--kind", "le", "--data", s(&data), "--analytic", "case_623", "--bins", "10",
        "--scatter-cap", "50", "--hist-bins", "7", "-o", s(&out),
    ]));
    let sc: ScatterDocument = round_trip(&out.join("scatter.json"));
    assert_eq!(sc.cells.len(), 25);
    for c in &sc.cells {
        assert_eq!(c.total_points, 900);
        assert_eq!(c.x.len(), 50);
        assert_eq!(c.x, sc.cells[c.j].x, "same rows in every cell");
    }
    let h: HistogramDocument = round_trip(&out.join("histograms.json"));
    assert_eq!(h.histograms.len(), 5);
    assert!(h.histograms.iter().all(|h| h.counts.len() == 7 && h.counts.iter().sum::<usize>() == 900));
}

#[test]
fn flags_override_config_and_environment() {
    let (tmp, data) = simulated("additive_621", 600, &[]);
    let cfg = tmp.path().join("run.json");
    let from_cfg = tmp.path().join("from_cfg");
    fs::write(
        &cfg,
        serde_json::json!({
            "dataset": data,
            "analytic": {"id": "case_621"},
            "bins": 5,
            "centered": false,
            "dependence": "local_linear",
            "output_dir": from_cfg,
        })
        .to_string(),
    )
    .unwrap();
    ok(atdev(&["importance", "--config", s(&cfg)]));
    let doc: ImportanceDocument = round_trip(&from_cfg.join("importance.json"));
    assert_eq!(doc.meta.bins, 5);
    assert!(!doc.meta.centered);
    assert_eq!(doc.meta.dependence_method, "local_linear");

    let from_env = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_atdev"))
        .args(["importance", "--config", s(&cfg), "--bins", "7"])
        .env("ATDEV_OUTPUT_DIR", &from_env)
        .output()
        .unwrap();
    ok(o);
    let doc: ImportanceDocument = round_trip(&from_env.join("importance.json"));
    assert_eq!(doc.meta.bins, 7);

    let from_flag = tmp.path().join("from_flag");
    let o = Command::new(env!("CARGO_BIN_EXE_atdev"))
        .args(["importance", "--config", s(&cfg), "-o", s(&from_flag), "--force-fd", "--fd-step", "0.001"])
        .env("ATDEV_OUTPUT_DIR", &from_env)
        .output()
        .unwrap();
    ok(o);
    let doc: ImportanceDocument = round_trip(&from_flag.join("importance.json"));
    assert_eq!(doc.meta.gradient_method, "central_fd");

    // A model flag replaces the configured model instead of adding a second one.
    let ext = tmp.path().join("ext");
    let sc = format!("sh {} sum", scorer());
    ok(atdev(&["importance", "--config", s(&cfg), "--external", &sc, "-o", s(&ext)]));
    let doc: ImportanceDocument = round_trip(&ext.join("importance.json"));
    assert_eq!(doc.meta.gradient_method, "central_fd");
    for j in 0..3 {
        assert!((doc.report.dgsm[j] - 1.0).abs() < 1e-6, "sum scorer has unit slopes");
    }
}

#[test]
fn network_pipeline() {
    let (tmp, data) = simulated("additive_621", 1000, &[]);
    let fit = tmp.path().join("fit");
    ok(atdev(&["fit-mlp", "--data", s(&data), "--epochs", "5", "--hidden", "8", "--seed", "4", "-o", s(&fit)]));
    let model: MlpModel = round_trip(&fit.join("mlp.json"));
    assert_eq!((model.inputs, model.hidden), (3, 8));
    let report: FitReport = round_trip(&fit.join("fit_report.json"));
    assert!(report.epochs_run <= 5);
    let out = tmp.path().join("eff");
    ok(atdev(&["effects", "--data", s(&data), "--mlp", s(&fit.join("mlp.json")), "--bins", "10", "-o", s(&out)]));
    let c: CurveDocument = round_trip(&out.join("curves/x1/atdev.json"));
    assert_eq!(c.meta.gradient_method, "analytic");
    assert!(c.curve.centered);
}

#[test]
fn case3_heatmaps_show_the_asymmetry() {
    let (tmp, data) = simulated("complex_623", 20_000, &[]);
    let out = tmp.path().join("h");
    ok(atdev(&["heatmap", "--data", s(&data), "--analytic", "case_623", "--bins", "40", "-o", s(&out)]));
    let imp: HeatMapData = round_trip(&out.join("heatmap_importance.json"));
    let corr: HeatMapData = round_trip(&out.join("heatmap_correlation.json"));
    for k in 0..5 {
        for j in 0..5 {
            assert_eq!(corr.values[k][j], corr.values[j][k]);
            assert!(imp.values[k][j] >= 0.0);
            assert!((0.0..=1.0).contains(&imp.brightness[k][j]));
        }
    }
    assert!(imp.values[1][3] > 10.0 * imp.values[3][1]);
    assert!(imp.values[2][4] > 10.0 * imp.values[4][2]);
    let max = imp.values.iter().flatten().copied().fold(0.0, f64::max);
    assert!(imp.brightness.iter().flatten().any(|&b| b == 1.0) && max > 0.0);
}

#[test]
fn null_model_heatmap_is_zero_and_dgsm_ranks_le_case() {
    let (tmp, data) = simulated("le_71_indep", 20_000, &[]);
    let cfg = tmp.path().join("null.json");
    fs::write(
        &cfg,
        r#"{"analytic": {"id": "custom", "p": 5, "terms": [{"coef": 2.0, "powers": []}]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("null");
    ok(atdev(&["heatmap", "--config", s(&cfg), "--data", s(&data), "--bins", "20", "-o", s(&out)]));
    let imp: HeatMapData = round_trip(&out.join("heatmap_importance.json"));
    assert!(imp.values.iter().flatten().all(|&v| v == 0.0));
    assert!(imp.brightness.iter().flatten().all(|&v| v == 0.0));

    let out = tmp.path().join("le");
    ok(atdev(&["heatmap", "--data", s(&data), "--analytic", "case_623", "--bins", "20", "-o", s(&out)]));
    let bars: BarData = round_trip(&out.join("bars_dgsm.json"));
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| bars.values[b].total_cmp(&bars.values[a]));
    assert_eq!(order, vec![2, 1, 0, 3, 4]);
    assert_eq!(bars.standard_errors.as_ref().map(Vec::len), Some(5));
}

#[test]
fn svg_flag_follows_the_feature() {
    let (tmp, data) = simulated("additive_621", 300, &[]);
    let out = tmp.path().join("svg");
    let o = atdev(&["heatmap", "--data", s(&data), "--analytic", "case_621", "--svg", "-o", s(&out)]);
    if cfg!(feature = "svg") {
        ok(o);
        let text = fs::read_to_string(out.join("heatmap_importance.svg")).unwrap();
        assert!(text.starts_with("<svg"));
    } else {
        assert_eq!(code(&o), 1);
        assert!(!out.exists());
    }
}
