//! On-disk formats: the RDMB matrix bundle, MNIST-style IDX files, and
//! JSON/CSV reports.

mod bundle;
mod idx;
mod report;

pub use bundle::{read_bundle, write_bundle, MatrixBundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use idx::{read_idx, read_idx_dataset, IdxTensor, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use report::{write_report, write_report_to, ReportFormat, CSV_HEADER};
