//! Data files, synthetic designs and result documents.

pub mod csv;
pub mod generate;
pub mod report;

pub use self::csv::{load_csv, read_assignment, write_assignment, write_dataset, LoadedDataset};
pub use generate::{generate, Design, Generated, GeneratorSpec};
