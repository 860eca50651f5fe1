//! LOB record ingestion, validation and synthetic generation.

mod csv_io;
mod record;
mod synthetic;

pub use csv_io::{csv_header, parse_csv, read_csv, to_csv_string, write_csv};
pub use record::{validate_series, LobRecord, SeriesViolation, Side, Violation};
pub use synthetic::{
    generate_synthetic, AnomalyKind, AnomalySpec, LabeledSeries, SyntheticConfig,
};
