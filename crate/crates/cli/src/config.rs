//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use atdev::dependence::DependenceMethod;
use atdev::gradients::GradientOptions;
use atdev::model::{AnalyticSpec, MlpModel, ModelId};
use atdev::{export, AnalyticModel, Dataset, Error, ExternalModel, Predictor, ResponseColumn, Result};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "ATDEV_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// `auto` (a column named `y` if present), `none`, `last`, or a column name.
    pub response: String,
    pub analytic: Option<AnalyticSpec>,
    pub mlp_weights: Option<PathBuf>,
    pub external_command: Option<String>,
    pub bins: usize,
    pub fd_step: Option<f64>,
    pub force_fd: bool,
    pub dependence: DependenceMethod,
    pub dependence_bins: usize,
    pub output_dir: Option<PathBuf>,
    pub centered: bool,
    pub seed: u64,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            response: "auto".into(),
            analytic: None,
            mlp_weights: None,
            external_command: None,
            bins: 100,
            fd_step: None,
            force_fd: false,
            dependence: DependenceMethod::Linear,
            dependence_bins: 10,
            output_dir: None,
            centered: true,
            seed: 0,
            svg: false,
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn model_sources(&self) -> usize {
        usize::from(self.analytic.is_some())
            + usize::from(self.mlp_weights.is_some())
            + usize::from(self.external_command.is_some())
    }

    pub fn clear_model(&mut self) {
        self.analytic = None;
        self.mlp_weights = None;
        self.external_command = None;
    }

    pub fn validate(&self, needs_model: bool) -> Result<()> {
        if self.bins < 2 {
            return Err(usage(format!("bins must be at least 2, got {}", self.bins)));
        }
        if self.dependence_bins < 1 {
            return Err(usage("dependence_bins must be at least 1"));
        }
        if let Some(h) = self.fd_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(usage(format!("fd_step must be positive and finite, got {h}")));
            }
        }
        if needs_model && self.model_sources() != 1 {
            return Err(usage(format!(
                "exactly one model source is required (analytic, mlp_weights or external_command), found {}",
                self.model_sources()
            )));
        }
        if self.svg && !cfg!(feature = "svg") {
            return Err(usage("this build has no SVG support (rebuild with --features svg)"));
        }
        Ok(())
    }

    /// Flag, then environment, then config file, then `atdev-out`.
    pub fn resolve_output_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("atdev-out"))
    }

    pub fn gradient_options(&self) -> GradientOptions {
        GradientOptions {
            force_fd: self.force_fd,
            step: self.fd_step,
        }
    }

    fn response_column(&self, header: &[String]) -> ResponseColumn {
        match self.response.as_str() {
            "auto" if header.iter().any(|h| h == "y") => ResponseColumn::Named("y".into()),
            "auto" | "none" => ResponseColumn::None,
            "last" => ResponseColumn::Last,
            name => ResponseColumn::Named(name.to_string()),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self
            .dataset
            .as_ref()
            .ok_or_else(|| usage("no dataset given (--data or \"dataset\" in the config)"))?;
        let header = read_header(path)?;
        Dataset::load_csv(path, &self.response_column(&header))
    }

    pub fn load_model(&self, p: usize) -> Result<Box<dyn Predictor>> {
        let model: Box<dyn Predictor> = if let Some(spec) = &self.analytic {
            Box::new(AnalyticModel::from_spec(spec)?)
        } else if let Some(path) = &self.mlp_weights {
            Box::new(load_mlp(path)?)
        } else if let Some(cmd) = &self.external_command {
            Box::new(ExternalModel::from_command_line(cmd, p)?)
        } else {
            return Err(usage("no model source"));
        };
        if model.arity() != p {
            return Err(Error::WidthMismatch {
                expected: model.arity(),
                found: p,
            });
        }
        Ok(model)
    }
}

fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidDataset(format!("{}: {other:?}", path.display())),
    })?;
    let h = r
        .headers()
        .map_err(|e| Error::InvalidDataset(format!("{}: {e}", path.display())))?;
    Ok(h.iter().map(|s| s.trim().to_string()).collect())
}

pub fn load_mlp(path: &Path) -> Result<MlpModel> {
    let m: MlpModel = export::read_json(path)?;
    m.validate()?;
    Ok(m)
}

/// `id` plus optional comma-separated coefficients, as given on the command line.
pub fn analytic_from_flags(id: &str, coeffs: Option<&str>) -> Result<AnalyticSpec> {
    let id = ModelId::parse(id).map_err(|_| usage(format!("unknown analytic model '{id}'")))?;
    let coefficients = coeffs
        .map(|s| {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad coefficient '{t}'")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .transpose()?;
    Ok(AnalyticSpec {
        id,
        coefficients,
        p: None,
        terms: None,
    })
}
