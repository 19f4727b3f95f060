//! Scenario files, event streams, plot data and reports.

pub mod bundled;
pub mod config;
pub mod events;
pub mod plot;
pub mod report;

pub use bundled::{bundled, bundled_names, BUNDLED};
pub use config::Scenario;
pub use events::{read_events, Event, EventReader, EventWriter, Header, PhotonEvent, RecordKind};
pub use report::{HomSummary, Rates, Report, SweepPoint, SweepSummary, ValueSigma};
