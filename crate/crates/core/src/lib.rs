//! Root-cause analysis for data-driven systems that pass on one dataset and
//! fail on another. Profiles that hold on the passing data but not on the
//! failing data are paired with repair transformations, and a black-box
//! oracle is queried on repaired datasets until a minimal set of causes
//! brings the malfunction score under the threshold.

pub mod engine;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod profiles;
pub mod stats;
pub mod synth;
pub mod tabular;
pub mod transforms;

pub use engine::{
    decision_tree_explain, explain, explain_greedy, explain_group_testing, make_minimal, Algorithm, EngineConfig,
    Explanation, LabeledDataset,
};
pub use error::{Error, Result};
pub use oracle::{BuiltinOracle, Oracle, Scorer};
pub use profiles::{Profile, ProfileKind};
pub use tabular::{Column, ColumnData, ColumnType, Dataset};
pub use transforms::{PvtTriplet, TransformKind};
