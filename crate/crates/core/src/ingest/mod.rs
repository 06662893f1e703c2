//! Parsing, cleaning and joining of demographic and election tables.

mod assemble;
mod clean;
mod dataset_io;
mod election;
mod fetch;
mod table;

pub use assemble::{assemble_dataset, decompose};
pub use clean::{
    clean_features, CleaningOptions, CleaningReport, ColumnDropReason, CountyDropReason, DroppedColumn,
    DroppedCounty, FeatureTable, DEFAULT_MOE_PATTERN,
};
pub use dataset_io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use election::{election_from_raw, parse_election, parse_election_reader, ElectionTable, DEM_COLUMN, REP_COLUMN};
#[cfg(feature = "http")]
pub use fetch::HttpTransport;
pub use fetch::{AcsClient, Transport};
pub use table::{parse_number, parse_reader, parse_table, ParseOptions, RawRow, RawTable, SourceId, LABEL_COLUMNS};
