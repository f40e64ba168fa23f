pub mod compare;
pub mod estimate;
pub mod selftest;
pub mod simulate;
pub mod train;

use serde::{Deserialize, Serialize};

/// Stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_checksum: String,
}

impl From<&crate::spec::Experiment> for Provenance {
    fn from(e: &crate::spec::Experiment) -> Self {
        Provenance { seed: e.seed, config_checksum: e.config_checksum.clone() }
    }
}
