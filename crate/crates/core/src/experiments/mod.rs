pub mod ensemble;
pub mod memory;
pub mod oracle;
pub mod precession;

pub use ensemble::{run_ensemble, EnsembleSummary};
pub use memory::{memory_time_single, MemoryTimeRecord, StopKind, StopRule};
pub use oracle::{exact_hitting_time_oracle, CheckCadence};
pub use precession::record_precession;
