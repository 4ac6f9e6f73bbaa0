use std::collections::HashSet;
use std::path::PathBuf;

use atdev::data::BinScheme;
use atdev::effects::{self, column_bins, column_dependence, EffectMatrix, MatrixKind};
use atdev::export::{
    self, BarData, CurveDocument, HeatMapData, Histogram, HistogramDocument, ImportanceDocument,
    MatrixDocument, OverlayBundle, RunMeta, ScatterCell, ScatterDocument, SimulationDocument,
};
use atdev::gradients::DerivativeMethod;
use atdev::model::{fit_mlp, FitReport, MlpConfig, MlpModel};
use atdev::simgen::{generate, theoretical_r2, SimSpec};
use atdev::{
    center, corr_matrix, CurveKind, Dataset, DependenceModel, EffectCurve, Error,
    GradientTable, ImportanceReport, Predictor, Result,
};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::stage::Stage;

pub fn simulate(spec: &SimSpec, out: PathBuf) -> Result<Vec<PathBuf>> {
    let r2 = theoretical_r2(spec)?;
    let d = generate(spec)?;
    let correlation = corr_matrix(&d.without_response())?;
    let mut stage = Stage::new(&out)?;
    stage.write_with("data.csv", |f| {
        d.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io("data.csv", e))
    })?;
    stage.write_with("correlation.csv", |f| export::write_correlation_csv(f, &correlation))?;
    stage.write_json(
        "simulation.json",
        &SimulationDocument {
            spec: *spec,
            theoretical_r2: r2,
            correlation,
        },
    )?;
    stage.commit()
}

pub fn fit(cfg: &RunConfig, mlp: &MlpConfig, valid_fraction: f64, out: PathBuf) -> Result<Vec<PathBuf>> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {valid_fraction}"
        )));
    }
    let d = cfg.load_dataset()?;
    if d.response().is_none() {
        return Err(Error::InvalidDataset("training data has no response column".into()));
    }
    if d.n() < 2 {
        return Err(Error::InvalidDataset(format!("{} rows are too few to split", d.n())));
    }
    let n_valid = ((d.n() as f64 * valid_fraction).round() as usize).clamp(1, d.n() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = index::sample(&mut rng, d.n(), d.n()).into_vec();
    let (valid_rows, train_rows) = order.split_at_mut(n_valid);
    valid_rows.sort_unstable();
    train_rows.sort_unstable();
    let train = d.select_rows(train_rows)?;
    let valid = d.select_rows(valid_rows)?;
    let (model, report): (MlpModel, FitReport) = fit_mlp(&train, &valid, mlp)?;
    let mut stage = Stage::new(&out)?;
    stage.write_json("mlp.json", &model)?;
    stage.write_json("fit_report.json", &report)?;
    stage.commit()
}

/// Loaded data, model and the shared per-row derivative table.
pub struct Session {
    pub cfg: RunConfig,
    pub data: Dataset,
    pub model: Box<dyn Predictor>,
    pub table: GradientTable,
    pub bins: Vec<BinScheme>,
    stems: Vec<String>,
}

impl Session {
    pub fn open(cfg: &RunConfig) -> Result<Self> {
        let full = cfg.load_dataset()?;
        let data = full.without_response();
        let model = cfg.load_model(data.p())?;
        let table = GradientTable::compute(model.as_ref(), &data, cfg.gradient_options())?;
        let bins = column_bins(&data, cfg.bins)?;
        Ok(Session {
            cfg: cfg.clone(),
            stems: file_stems(data.names()),
            data: full,
            model,
            table,
            bins,
        })
    }

    fn x(&self) -> Dataset {
        self.data.without_response()
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            bins: self.cfg.bins,
            gradient_method: match self.table.method() {
                DerivativeMethod::Analytic => "analytic",
                DerivativeMethod::CentralFd => "central_fd",
            }
            .into(),
            dependence_method: self.cfg.dependence.as_str().into(),
            centered: self.cfg.centered,
        }
    }

    fn dependence(&self) -> Result<Vec<DependenceModel>> {
        column_dependence(&self.x(), self.cfg.dependence, self.cfg.dependence_bins)
    }

    fn finish(&self, c: EffectCurve) -> EffectCurve {
        if self.cfg.centered {
            center(&c)
        } else {
            c
        }
    }

    fn atdev_matrix(&self) -> Result<EffectMatrix> {
        EffectMatrix::from_table(&self.table, &self.x(), MatrixKind::ATDEV, &self.dependence()?, &self.bins)
    }
}

/// Filesystem-safe, unique stems for variable names.
fn file_stems(names: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let mut s: String = n
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                .collect();
            if s.is_empty() || !seen.insert(s.clone()) {
                s = format!("{s}_{}", j + 1);
                seen.insert(s.clone());
            }
            s
        })
        .collect()
}

fn kind_stem(kind: CurveKind) -> String {
    kind.as_str().to_ascii_lowercase()
}

fn curve_stem(s: &Session, c: &EffectCurve) -> String {
    match c.k {
        Some(k) => format!("{}_{}", kind_stem(c.kind), s.stems[k]),
        None => kind_stem(c.kind),
    }
}

pub fn effects(s: &Session, out: PathBuf) -> Result<Vec<PathBuf>> {
    let x = s.x();
    let deps = s.dependence()?;
    let pred = atdev::model::predict_checked(s.model.as_ref(), x.to_matrix().view())?;
    let meta = s.meta();
    let mut stage = Stage::new(&out)?;
    for j in 0..x.p() {
        let bins = &s.bins[j];
        let pd = s.finish(effects::pdp(s.model.as_ref(), &x, j, bins)?);
        let marginal = s.finish(effects::marginal_from_values(&pred, j, bins));
        let ale = s.finish(effects::ale_from(&s.table, j, bins));
        let atdev = s.finish(effects::atdev_from(&s.table, &x, j, &deps[j], bins)?);
        let mut curves = vec![pd.clone(), marginal.clone(), ale.clone(), atdev.clone()];
        curves.push(s.finish(effects::le_from(&s.table, j, j, bins)));
        for k in (0..x.p()).filter(|&k| k != j) {
            curves.push(s.finish(effects::ace_from(&s.table, &x, k, j, &deps[j], bins)?));
        }
        if s.data.response().is_some() {
            let r = s.finish(effects::marginal_response(&s.data, j, bins)?);
            stage.write_json(
                format!("curves/{}/marginal_response.json", s.stems[j]),
                &CurveDocument {
                    name: format!("{} marginal_response", x.names()[j]),
                    meta: meta.clone(),
                    curve: r.clone(),
                },
            )?;
            stage.write_with(format!("curves/{}/marginal_response.csv", s.stems[j]), |f| {
                export::write_curves_csv(f, std::slice::from_ref(&r))
            })?;
        }
        for c in &curves {
            let stem = curve_stem(s, c);
            let dir = format!("curves/{}", s.stems[j]);
            stage.write_json(
                format!("{dir}/{stem}.json"),
                &CurveDocument {
                    name: format!("{} {stem}", x.names()[j]),
                    meta: meta.clone(),
                    curve: c.clone(),
                },
            )?;
            stage.write_with(format!("{dir}/{stem}.csv"), |f| {
                export::write_curves_csv(f, std::slice::from_ref(c))
            })?;
        }
        let bundles = [
            ("atdev_marginal", vec![atdev, marginal.clone()]),
            ("pd_marginal_ale", vec![pd, marginal, ale]),
        ];
        for (group, curves) in bundles {
            let b = OverlayBundle {
                name: x.names()[j].clone(),
                j,
                group: group.into(),
                meta: meta.clone(),
                curves,
            };
            stage.write_json(format!("overlays/{}_{group}.json", s.stems[j]), &b)?;
            if s.cfg.svg {
                write_svg(&mut stage, format!("overlays/{}_{group}.svg", s.stems[j]), || {
                    crate::svg::overlay(&b)
                })?;
            }
        }
    }
    stage.commit()
}

pub fn matrix(s: &Session, kind: MatrixKind, scatter_cap: usize, hist_bins: usize, out: PathBuf) -> Result<Vec<PathBuf>> {
    let x = s.x();
    let em = match kind {
        MatrixKind::ATDEV => s.atdev_matrix()?,
        MatrixKind::LE => EffectMatrix::from_table(&s.table, &x, kind, &[], &s.bins)?,
    };
    let mut stage = Stage::new(&out)?;
    let cells: Vec<EffectCurve> = (0..em.p())
        .flat_map(|k| (0..em.p()).map(move |j| (k, j)))
        .filter_map(|(k, j)| em.cell(k, j).cloned())
        .collect();
    stage.write_with("matrix.csv", |f| export::write_curves_csv(f, &cells))?;
    let doc = MatrixDocument {
        meta: s.meta(),
        matrix: em,
    };
    stage.write_json("matrix.json", &doc)?;
    if kind == MatrixKind::LE {
        let n = x.n();
        let cap = scatter_cap.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.seed);
        let mut rows = index::sample(&mut rng, n, cap).into_vec();
        rows.sort_unstable();
        let mut scatter = Vec::with_capacity(x.p() * x.p());
        for k in 0..x.p() {
            let g = s.table.values(k);
            for j in 0..x.p() {
                let xj = x.column(j);
                scatter.push(ScatterCell {
                    k,
                    j,
                    total_points: n,
                    x: rows.iter().map(|&r| xj[r]).collect(),
                    derivative: rows.iter().map(|&r| g[r]).collect(),
                });
            }
        }
        stage.write_json(
            "scatter.json",
            &ScatterDocument {
                cap: scatter_cap,
                seed: s.cfg.seed,
                cells: scatter,
            },
        )?;
        let histograms = (0..x.p())
            .map(|k| Histogram::equal_width(k, s.table.values(k), hist_bins))
            .collect();
        stage.write_json(
            "histograms.json",
            &HistogramDocument {
                names: x.names().to_vec(),
                histograms,
            },
        )?;
    }
    if s.cfg.svg {
        write_svg(&mut stage, "matrix.svg", || crate::svg::matrix(&doc.matrix))?;
    }
    stage.commit()
}

pub fn heatmap(s: &Session, out: PathBuf) -> Result<Vec<PathBuf>> {
    let report = ImportanceReport::new(&s.atdev_matrix()?, &s.table)?;
    let corr = corr_matrix(&s.x())?;
    let importance = HeatMapData::importance(&report);
    let correlation = HeatMapData::correlation(&corr);
    let v_plus = BarData {
        label: "v_plus".into(),
        names: report.names.clone(),
        values: report.v_plus.clone(),
        standard_errors: None,
    };
    let dgsm = BarData {
        label: "dgsm".into(),
        names: report.names.clone(),
        values: report.dgsm.clone(),
        standard_errors: Some(report.dgsm_se.clone()),
    };
    let mut stage = Stage::new(&out)?;
    stage.write_json("heatmap_importance.json", &importance)?;
    stage.write_json("heatmap_correlation.json", &correlation)?;
    stage.write_json("bars_v_plus.json", &v_plus)?;
    stage.write_json("bars_dgsm.json", &dgsm)?;
    if s.cfg.svg {
        write_svg(&mut stage, "heatmap_importance.svg", || crate::svg::heatmap(&importance))?;
        write_svg(&mut stage, "heatmap_correlation.svg", || crate::svg::heatmap(&correlation))?;
        write_svg(&mut stage, "bars_v_plus.svg", || crate::svg::bars(&v_plus))?;
        write_svg(&mut stage, "bars_dgsm.svg", || crate::svg::bars(&dgsm))?;
    }
    stage.commit()
}

pub fn importance(s: &Session, out: PathBuf) -> Result<Vec<PathBuf>> {
    let report = ImportanceReport::new(&s.atdev_matrix()?, &s.table)?;
    let mut stage = Stage::new(&out)?;
    stage.write_with("importance.csv", |f| export::write_importance_csv(f, &report))?;
    stage.write_json(
        "importance.json",
        &ImportanceDocument {
            meta: s.meta(),
            report,
        },
    )?;
    stage.commit()
}

#[cfg(feature = "svg")]
fn write_svg(stage: &mut Stage, rel: impl AsRef<std::path::Path>, render: impl FnOnce() -> String) -> Result<()> {
    let rel = rel.as_ref().to_path_buf();
    let p = stage.path(&rel)?;
    std::fs::write(&p, render()).map_err(|e| Error::io(rel, e))
}

#[cfg(not(feature = "svg"))]
fn write_svg(_: &mut Stage, _: impl AsRef<std::path::Path>, _: impl FnOnce() -> String) -> Result<()> {
    Err(Error::InvalidArgument("this build has no SVG support".into()))
}
