//! Time-aware evaluation: chronological splitting, quarantine/labeling
//! protocol mechanics, the monthly loop, and the metrics it reports.

pub mod metrics;
pub mod protocol;
pub mod run;
pub mod split;

pub use metrics::{aut, aut_defined, f1, prf, Prf};
pub use protocol::{select_top_uncertain, ProtocolConfig};
pub use run::{run_monthly_eval, EvalReport, MonthRecord};
pub use split::{split_timeline, SplitConfig, TimelineSplit};
