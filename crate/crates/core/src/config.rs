//! Tape, substrate and noise catalogs.
//!
//! Defaults are compiled in from `config/*.json`. Setting
//! `TAPESLICER_CONFIG_DIR` points the loader at a directory whose
//! `tapes.json`, `substrates.json` and `noise.json` (any subset) replace the
//! built-in files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{validate_substrate_ordering, SubstrateSpec, TapeSpec};
use crate::simulator::NoiseModel;

pub const CONFIG_DIR_ENV: &str = "TAPESLICER_CONFIG_DIR";
pub const DEFAULT_TAPE: &str = "copper-6.35";
pub const DEFAULT_SUBSTRATE: &str = "acrylic";

const TAPES_JSON: &str = include_str!("../config/tapes.json");
const SUBSTRATES_JSON: &str = include_str!("../config/substrates.json");
const NOISE_JSON: &str = include_str!("../config/noise.json");

#[derive(Deserialize)]
struct TapeFile {
    tapes: Vec<TapeSpec>,
}

#[derive(Deserialize)]
struct SubstrateFile {
    substrates: Vec<SubstrateSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseFile {
    pub calibration_version: String,
    pub model: NoiseModel,
}

#[derive(Clone, Debug, Serialize)]
pub struct Catalog {
    pub tapes: Vec<TapeSpec>,
    pub substrates: Vec<SubstrateSpec>,
    pub noise: NoiseFile,
    /// Raw JSON texts, used to hash the configuration.
    #[serde(skip)]
    sources: [String; 3],
}

fn parse<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::from_texts(TAPES_JSON.into(), SUBSTRATES_JSON.into(), NOISE_JSON.into())
            .expect("built-in catalogs are valid")
    }

    fn from_texts(tapes: String, substrates: String, noise: String) -> Result<Self> {
        let t: TapeFile = parse("tapes.json", &tapes)?;
        let s: SubstrateFile = parse("substrates.json", &substrates)?;
        let n: NoiseFile = parse("noise.json", &noise)?;
        for tape in &t.tapes {
            tape.validate()?;
        }
        for sub in &s.substrates {
            sub.validate()?;
        }
        validate_substrate_ordering(&s.substrates)?;
        n.model.validate()?;
        Ok(Catalog {
            tapes: t.tapes,
            substrates: s.substrates,
            noise: n,
            sources: [tapes, substrates, noise],
        })
    }

    /// Built-in catalogs with any files present in `dir` substituted.
    pub fn load(dir: Option<&Path>) -> Result<Self> {
        let read = |name: &str, fallback: &str| -> Result<String> {
            match dir.map(|d| d.join(name)) {
                Some(p) if p.exists() => std::fs::read_to_string(&p)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display()))),
                _ => Ok(fallback.to_string()),
            }
        };
        Self::from_texts(
            read("tapes.json", TAPES_JSON)?,
            read("substrates.json", SUBSTRATES_JSON)?,
            read("noise.json", NOISE_JSON)?,
        )
    }

    /// Honors `TAPESLICER_CONFIG_DIR`.
    pub fn from_env() -> Result<Self> {
        let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
        Self::load(dir.as_deref())
    }

    pub fn tape(&self, name: &str) -> Result<&TapeSpec> {
        self.tapes
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown tape {name:?}")))
    }

    pub fn substrate(&self, name: &str) -> Result<&SubstrateSpec> {
        self.substrates
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown substrate {name:?}")))
    }

    pub fn default_noise(&self) -> &NoiseModel {
        &self.noise.model
    }

    /// SHA-256 over the catalog texts with whitespace-insensitive canonical
    /// JSON.
    pub fn config_hash(&self) -> String {
        let mut buf = String::new();
        for src in &self.sources {
            let v: serde_json::Value = serde_json::from_str(src).expect("validated on load");
            buf.push_str(&serde_json::to_string(&v).expect("serializable"));
            buf.push('\n');
        }
        crate::planner::sha256_hex(buf.as_bytes())
    }
}
