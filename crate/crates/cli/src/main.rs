use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coda_tables::io::write_atomic;
use coda_tables::pipeline::{
    analyze_part, bundle_json, coordinates_csv, decomposition_report, default_system, to_json, write_bundle,
};
use coda_tables::{
    detect_outliers, generate, ingest_csv, write_long, AnalysisConfig, CompositionalTable, CsvFormat,
    CsvSchema, Error, GeneratorSpec, McdOptions, TableSample,
};

#[derive(Parser)]
#[command(name = "coda-tables", version, about = "Robust PCA and decomposition of compositional tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Independence and interaction tables of every sample
    Decompose(Common),
    /// Pivot coordinates of the selected part
    Coords(Common),
    /// PCA of the selected part as a JSON bundle
    Pca(Common),
    /// Robust Mahalanobis outlier detection on the selected part
    Outliers(Common),
    /// SVG biplot of the selected part
    Biplot(Common),
    /// Full analysis of all three parts
    Pipeline(Common),
    /// Generate a synthetic sample with planted outliers
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "long")]
    format: String,
    #[arg(long, default_value = "whole")]
    part: String,
    #[arg(long, default_value = "robust")]
    method: String,
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,
    #[arg(long, default_value_t = 0.975)]
    quantile: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Biplot scaling: covariance or form
    #[arg(long, default_value = "covariance")]
    form: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Standard deviation of every pivot coordinate
    #[arg(long, default_value_t = 0.5)]
    sd: f64,
    #[arg(long, default_value_t = 0.0)]
    contamination: f64,
    /// Length of the shift applied to contaminated samples along the first coordinate
    #[arg(long, default_value_t = 10.0)]
    shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<AnalysisConfig, Error> {
        let config = AnalysisConfig {
            part: self.part.parse()?,
            method: self.method.parse()?,
            alpha: self.alpha,
            quantile_level: self.quantile,
            seed: self.seed,
            kappa: self.kappa,
            biplot_form: self.form.parse()?,
            out_dir: self.out_dir.clone(),
            svg: self.svg.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    fn sample(&self) -> Result<TableSample, Error> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Config("--input is required".into()))?;
        let format: CsvFormat = self.format.parse()?;
        ingest_csv(input, &CsvSchema::new(format))
    }
}

/// Writes to `out_dir/name` when an output directory is set, else stdout.
fn emit(out_dir: Option<&Path>, name: &str, text: &str) -> Result<(), Error> {
    match out_dir {
        Some(dir) => {
            let path = dir.join(name);
            write_atomic(&path, text.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Decompose(c) => {
            let config = c.config()?;
            let sample = c.sample()?;
            let report = decomposition_report(&sample, config.kappa)?;
            emit(c.out_dir.as_deref(), "decomposition.json", &to_json(&report)?)
        }
        Command::Coords(c) => {
            let config = c.config()?;
            let sample = c.sample()?.with_part(config.part);
            let sys = default_system(&sample)?;
            let csv = coordinates_csv(&sample, &sys)?;
            emit(c.out_dir.as_deref(), &format!("coords_{}.csv", config.part), &csv)
        }
        Command::Pca(c) => {
            let config = c.config()?;
            let sample = c.sample()?;
            let sys = default_system(&sample)?;
            let a = analyze_part(&sample, &sys, config.part, config.method, &config)?;
            let json = to_json(&bundle_json(&a, sample.row_levels(), sample.col_levels()))?;
            emit(c.out_dir.as_deref(), &format!("bundle_{}.json", config.part), &json)
        }
        Command::Outliers(c) => {
            let config = c.config()?;
            let sample = c.sample()?.with_part(config.part);
            let sys = default_system(&sample)?;
            let z = sample.coordinates(&sys)?;
            let report = detect_outliers(&z, &McdOptions::new(config.alpha, config.seed), config.quantile_level)?;
            let mut text = String::from("sample_id,distance,outlier\n");
            for ((id, d), f) in sample.sample_ids().iter().zip(&report.distances).zip(&report.flags) {
                text.push_str(&format!("{id},{d},{f}\n"));
            }
            eprintln!(
                "{}: {} of {} samples flagged (cutoff {:.4})",
                config.part,
                report.count(),
                sample.len(),
                report.cutoff
            );
            emit(c.out_dir.as_deref(), &format!("outliers_{}.csv", config.part), &text)
        }
        Command::Biplot(c) => {
            let config = c.config()?;
            let svg_path = config
                .svg
                .clone()
                .or_else(|| config.out_dir.as_ref().map(|d| d.join(format!("biplot_{}.svg", config.part))))
                .ok_or_else(|| Error::Config("--svg or --out-dir is required".into()))?;
            let sample = c.sample()?;
            let sys = default_system(&sample)?;
            let a = analyze_part(&sample, &sys, config.part, config.method, &config)?;
            coda_tables::emit_biplot_svg(&a.biplot, &svg_path)?;
            eprintln!("wrote {}", svg_path.display());
            Ok(())
        }
        Command::Pipeline(c) => {
            let config = c.config()?;
            let dir = config
                .out_dir
                .clone()
                .ok_or_else(|| Error::Config("--out-dir is required".into()))?;
            let sample = c.sample()?;
            let bundle = coda_tables::run_pipeline(&config, &sample)?;
            for path in write_bundle(&bundle, &dir)? {
                eprintln!("wrote {}", path.display());
            }
            if let Some(svg) = &config.svg {
                if let Some(a) = bundle.part(config.part) {
                    coda_tables::emit_biplot_svg(&a.biplot, svg)?;
                }
            }
            print!("{}", bundle.summary());
            Ok(())
        }
        Command::Simulate(s) => simulate(&s),
    }
}

fn simulate(s: &SimulateArgs) -> Result<(), Error> {
    let dir = s
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("--out-dir is required".into()))?;
    let rows: Vec<String> = (1..=s.rows).map(|i| format!("R{i}")).collect();
    let cols: Vec<String> = (1..=s.cols).map(|j| format!("C{j}")).collect();
    let base = CompositionalTable::with_labels(nalgebra_ones(s.rows, s.cols), rows, cols)?;
    let mut spec = GeneratorSpec::isotropic(base, s.n, s.sd, s.seed);
    spec.contamination = s.contamination;
    if spec.contamination_shift.is_empty() {
        return Err(Error::InvalidSpec("tables need at least one coordinate".into()));
    }
    spec.contamination_shift[0] = s.shift;
    let g = generate(&spec)?;

    let mut csv = Vec::new();
    write_long(&g.sample, &mut csv)?;
    write_atomic(dir.join("sample.csv"), &csv)?;
    let mut truth = String::from("sample_id,outlier\n");
    for (id, o) in g.sample.sample_ids().iter().zip(&g.outliers) {
        truth.push_str(&format!("{id},{o}\n"));
    }
    write_atomic(dir.join("truth.csv"), truth.as_bytes())?;
    eprintln!("wrote {} and {}", dir.join("sample.csv").display(), dir.join("truth.csv").display());
    Ok(())
}

fn nalgebra_ones(i: usize, j: usize) -> coda_tables::nalgebra::DMatrix<f64> {
    coda_tables::nalgebra::DMatrix::from_element(i, j, 1.0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
