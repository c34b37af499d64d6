//! Experiment defaults and run manifests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULTS_TOML: &str = include_str!("defaults.toml");

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Defaults {
    pub version: u32,
    pub radical_census: RadicalCensusDefaults,
    pub first_wave_dist: SampledDefaults,
    pub witness: WitnessDefaults,
    pub series: SeriesDefaults,
    pub exponent_fit: FitDefaults,
    pub phi: PhiDefaults,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct RadicalCensusDefaults {
    pub max_depth: usize,
    pub brute_depth: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct SampledDefaults {
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct WitnessDefaults {
    pub budget: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct SeriesDefaults {
    pub n: usize,
    pub exact_limit: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct FitDefaults {
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct PhiDefaults {
    pub n: usize,
}

impl Defaults {
    pub fn load() -> Self {
        toml::from_str(DEFAULTS_TOML).expect("embedded defaults parse")
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub defaults: Defaults,
    /// SHA-256 of the output bytes, hex encoded.
    pub output_digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(
        command: &str,
        parameters: serde_json::Value,
        seed: Option<u64>,
        output: &[u8],
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            defaults: Defaults::load(),
            output_digest: digest(output),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let d = Defaults::load();
        assert_eq!((d.exponent_fit.n_min, d.exponent_fit.n_max), (2000, 10000));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
