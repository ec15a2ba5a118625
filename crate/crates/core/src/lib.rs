//! Compositional tables: Aitchison geometry, pivot coordinates, the
//! independence/interaction decomposition, and classical or MCD-based robust
//! PCA with loadings back-transformed to clr space.
//!
//! ```
//! use coda_tables::{decompose, CompositionalTable};
//!
//! let t = CompositionalTable::from_rows(&[
//!     vec![129.0, 90.0, 66.0, 37.0],
//!     vec![111.0, 85.0, 68.0, 19.0],
//! ])
//! .unwrap();
//! let d = decompose(&t);
//! let back = d.independence.perturb(&d.interaction).unwrap();
//! assert!(back.distance(&t).unwrap() < 1e-10);
//! ```

pub mod error;
pub mod io;
pub mod pca;
pub mod pipeline;
pub mod robust;
pub mod simplex;
pub mod svg;
pub mod synth;
pub mod table;

pub use nalgebra;

pub use error::{Error, ErrorKind, Result};
pub use io::{ingest_csv, read_csv, write_long, write_wide, CsvFormat, CsvSchema, LongRecord};
pub use pca::{
    biplot_geometry, compare_runs, fit_pca, Biplot, BiplotForm, Comparison, Part, PcaMethod, PcaModel,
    PcaOptions, TableSample,
};
pub use pipeline::{run_pipeline, AnalysisBundle, AnalysisConfig};
pub use robust::{
    classical_estimate, detect_outliers, mahalanobis_distances, mcd_estimate, McdOptions, OutlierReport,
    ScatterEstimate, SubsetSearch,
};
pub use simplex::{from_coords, pivot_system, to_coords, ClrVector, Composition, CoordinateSystem, IlrVector};
pub use svg::emit_biplot_svg;
pub use synth::{generate, GeneratedSample, GeneratorSpec};
pub use table::{
    clr_independence, clr_interaction, coords_independence, coords_interaction, decompose,
    proportionality_check, table_coords, table_pivot_system, CompositionalTable, TableCoordinateSystem,
    TableDecomposition,
};
