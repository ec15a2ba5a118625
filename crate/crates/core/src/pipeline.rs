//! End-to-end analysis: decomposition, coordinates, PCA and outlier
//! detection for every part, serialized as JSON bundles and SVG biplots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pca::{biplot_geometry, fit_pca, Biplot, BiplotForm, Part, PcaMethod, PcaModel, PcaOptions, TableSample};
use crate::robust::{detect_outliers, McdOptions, OutlierReport, DEFAULT_QUANTILE};
use crate::svg::render_biplot_svg;
use crate::table::{clr_independence, clr_interaction, decompose, table_pivot_system, ClrTable, TableCoordinateSystem};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub part: Part,
    pub method: PcaMethod,
    pub alpha: f64,
    pub quantile_level: f64,
    pub seed: u64,
    pub kappa: f64,
    pub biplot_form: BiplotForm,
    pub out_dir: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            part: Part::Whole,
            method: PcaMethod::Robust,
            alpha: 0.75,
            quantile_level: DEFAULT_QUANTILE,
            seed: 0,
            kappa: 1.0,
            biplot_form: BiplotForm::Covariance,
            out_dir: None,
            svg: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0.5, 1], got {}", self.alpha)));
        }
        if !(self.quantile_level > 0.5 && self.quantile_level < 1.0) {
            return Err(Error::Config(format!(
                "quantile level must lie in (0.5, 1), got {}",
                self.quantile_level
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    fn mcd(&self) -> McdOptions {
        McdOptions::new(self.alpha, self.seed)
    }

    fn pca(&self, method: PcaMethod) -> PcaOptions {
        PcaOptions {
            method,
            mcd: self.mcd(),
        }
    }
}

/// The default `(1, 1)` pivot system for the sample's shape.
pub fn default_system(sample: &TableSample) -> Result<TableCoordinateSystem> {
    let (i, j) = sample.shape();
    table_pivot_system(i, j, 1, 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposedTable {
    pub sample_id: String,
    pub independence: Vec<Vec<f64>>,
    pub interaction: Vec<Vec<f64>>,
    pub clr_independence: ClrTable,
    pub clr_interaction: ClrTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub row_levels: Vec<String>,
    pub col_levels: Vec<String>,
    pub kappa: f64,
    pub tables: Vec<DecomposedTable>,
    pub version: &'static str,
}

fn grid(t: &crate::table::CompositionalTable) -> Vec<Vec<f64>> {
    t.cells().row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Independence and interaction tables of every sample, closed to `kappa`.
pub fn decomposition_report(sample: &TableSample, kappa: f64) -> Result<DecompositionReport> {
    let tables = sample
        .tables
        .iter()
        .zip(sample.sample_ids())
        .map(|(t, id)| {
            let d = decompose(t);
            Ok(DecomposedTable {
                sample_id: id,
                independence: grid(&d.independence.close(kappa)?),
                interaction: grid(&d.interaction.close(kappa)?),
                clr_independence: clr_independence(t),
                clr_interaction: clr_interaction(t),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionReport {
        row_levels: sample.row_levels().to_vec(),
        col_levels: sample.col_levels().to_vec(),
        kappa,
        tables,
        version: VERSION,
    })
}

/// Coordinates of the sample's part as CSV, one row per table.
pub fn coordinates_csv(sample: &TableSample, sys: &TableCoordinateSystem) -> Result<String> {
    let z = sample.coordinates(sys)?;
    let names = sample.part.system(sys).names();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample_id".to_owned()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (r, id) in sample.sample_ids().into_iter().enumerate() {
        let mut rec = vec![id];
        rec.extend(z.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// PCA model, outlier report and biplot of one part.
#[derive(Debug, Clone)]
pub struct PartAnalysis {
    pub part: Part,
    pub model: PcaModel,
    pub outliers: Option<OutlierReport>,
    /// Why outlier detection was skipped, if it was.
    pub outlier_note: Option<String>,
    pub biplot: Biplot,
}

impl PartAnalysis {
    pub fn summary_line(&self) -> String {
        let n = self.model.scores.nrows();
        match (&self.outliers, &self.outlier_note) {
            (Some(r), _) => format!(
                "{}: {} of {} samples flagged as outlying (robust distance > {:.4}, chi-squared {} df at {})",
                self.part,
                r.count(),
                n,
                r.cutoff,
                r.df,
                r.quantile_level
            ),
            (None, note) => format!(
                "{}: outlier detection skipped ({})",
                self.part,
                note.as_deref().unwrap_or("unavailable")
            ),
        }
    }
}

pub fn analyze_part(
    sample: &TableSample,
    sys: &TableCoordinateSystem,
    part: Part,
    method: PcaMethod,
    config: &AnalysisConfig,
) -> Result<PartAnalysis> {
    let sample = sample.with_part(part);
    let model = fit_pca(&sample, sys, &config.pca(method)).map_err(|e| e.at("pca"))?;
    let (i, j) = sample.shape();
    let p = part.dim(i, j);
    let (outliers, outlier_note) = if sample.len() > p {
        let z = sample.coordinates(sys)?;
        let report = detect_outliers(&z, &config.mcd(), config.quantile_level).map_err(|e| e.at("outliers"))?;
        (Some(report), None)
    } else {
        (
            None,
            Some(format!("{} samples do not exceed the {p} coordinate dimensions", sample.len())),
        )
    };
    let biplot = biplot_geometry(&model, 2.min(model.dim()), config.biplot_form).map_err(|e| e.at("biplot"))?;
    Ok(PartAnalysis {
        part,
        model,
        outliers,
        outlier_note,
        biplot,
    })
}

#[derive(Debug, Clone)]
pub struct AnalysisBundle {
    pub config: AnalysisConfig,
    pub decomposition: DecompositionReport,
    pub parts: Vec<PartAnalysis>,
}

impl AnalysisBundle {
    pub fn part(&self, part: Part) -> Option<&PartAnalysis> {
        self.parts.iter().find(|a| a.part == part)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for a in &self.parts {
            let _ = writeln!(s, "{}", a.summary_line());
        }
        s
    }
}

/// Decomposes every table and analyses all three parts with the configured
/// method.
pub fn run_pipeline(config: &AnalysisConfig, sample: &TableSample) -> Result<AnalysisBundle> {
    config.validate()?;
    let sys = default_system(sample).map_err(|e| e.at("coordinates"))?;
    let decomposition = decomposition_report(sample, config.kappa).map_err(|e| e.at("decompose"))?;
    let parts = Part::ALL
        .iter()
        .map(|&part| analyze_part(sample, &sys, part, config.method, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisBundle {
        config: config.clone(),
        decomposition,
        parts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeJson {
    #[serde(rename = "I")]
    pub rows: usize,
    #[serde(rename = "J")]
    pub cols: usize,
    pub row_levels: Vec<String>,
    pub col_levels: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutliersJson {
    pub cutoff: Option<f64>,
    pub distances: Vec<f64>,
    pub flags: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Serialized form of one part's analysis.
#[derive(Debug, Clone, Serialize)]
pub struct BundleJson {
    pub shape: ShapeJson,
    pub part: Part,
    pub method: PcaMethod,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
    pub loadings_clr: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    pub outliers: OutliersJson,
    pub seed: u64,
    pub version: &'static str,
    pub cell_labels: Vec<String>,
    pub sample_ids: Vec<String>,
}

pub fn bundle_json(analysis: &PartAnalysis, row_levels: &[String], col_levels: &[String]) -> BundleJson {
    let m = &analysis.model;
    let rows = |mat: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        mat.row_iter().map(|r| r.iter().copied().collect()).collect()
    };
    let outliers = match &analysis.outliers {
        Some(r) => OutliersJson {
            cutoff: r.cutoff.is_finite().then_some(r.cutoff),
            distances: r.distances.clone(),
            flags: r.flags.clone(),
            skipped: None,
        },
        None => OutliersJson {
            cutoff: None,
            distances: Vec::new(),
            flags: Vec::new(),
            skipped: analysis.outlier_note.clone(),
        },
    };
    BundleJson {
        shape: ShapeJson {
            rows: m.shape.0,
            cols: m.shape.1,
            row_levels: row_levels.to_vec(),
            col_levels: col_levels.to_vec(),
        },
        part: m.part,
        method: m.method,
        eigenvalues: m.eigenvalues.clone(),
        explained: m.explained.clone(),
        loadings_clr: rows(&m.loadings_clr),
        scores: rows(&m.scores),
        outliers,
        seed: m.seed,
        version: VERSION,
        cell_labels: m.cell_labels.clone(),
        sample_ids: m.sample_ids.clone(),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `decomposition.json`, `summary.txt`, and for every part
/// `bundle_<part>.json` and `biplot_<part>.svg` into `dir`. Returns the
/// written paths in order.
pub fn write_bundle(bundle: &AnalysisBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, bytes).map_err(|e| e.at("write"))?;
        written.push(path);
        Ok(())
    };
    put("decomposition.json".into(), to_json(&bundle.decomposition)?.as_bytes())?;
    let (rows, cols) = (&bundle.decomposition.row_levels, &bundle.decomposition.col_levels);
    for a in &bundle.parts {
        put(format!("bundle_{}.json", a.part), to_json(&bundle_json(a, rows, cols))?.as_bytes())?;
        if a.biplot.explained.len() == 2 {
            put(format!("biplot_{}.svg", a.part), render_biplot_svg(&a.biplot)?.as_bytes())?;
        }
    }
    put("summary.txt".into(), bundle.summary().as_bytes())?;
    Ok(written)
}
