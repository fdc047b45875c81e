//! Resolved per-verb settings: defaults, then a JSON config file, then flags.

use std::path::Path;

use aliquot_core::beta::{BetaJConfig, BetaOptions, MainTermMode, DEFAULT_BLOCKS_PER_CHUNK, DEFAULT_BLOCK_SIZE, DEFAULT_E, DEFAULT_K2, DEFAULT_MAX_S_NODES};
use aliquot_core::lambda::DEFAULT_BETA_N;
use aliquot_core::means::MeanClass;
use aliquot_core::alpha::AlphaParams;
use aliquot_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Parses a nonnegative integer, also in scientific notation (`1e6`, `2.5E3`).
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let t = s.trim().replace('_', "");
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = t.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= 9_007_199_254_740_992.0) {
        return Err(format!("not a nonnegative integer: {s:?}"));
    }
    Ok(f as u64)
}

pub fn parse_u32(s: &str) -> std::result::Result<u32, String> {
    let v = parse_count(s)?;
    u32::try_from(v).map_err(|_| format!("{s:?} is too large"))
}

pub fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    let v = parse_count(s)?;
    usize::try_from(v).map_err(|_| format!("{s:?} is too large"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSettings {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u32,
    #[serde(rename = "M")]
    pub m: u32,
}

impl Default for AlphaSettings {
    fn default() -> Self {
        let p = AlphaParams::default();
        Self { n: p.n, l: p.l, m: p.m }
    }
}

impl AlphaSettings {
    pub fn params(&self) -> Result<AlphaParams> {
        AlphaParams::new(self.n, self.l, self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSettings {
    /// Common cutoff for every `j`.
    #[serde(rename = "N_j")]
    pub n_j: u64,
    /// `e_j` for `j = 1, 2, ...`; its length is `J`.
    pub e: Vec<f64>,
    pub k2: u32,
    pub mode: MainTermMode,
    pub block_size: u64,
    pub blocks_per_chunk: u64,
    pub max_s_nodes: u64,
}

impl Default for BetaSettings {
    fn default() -> Self {
        Self {
            n_j: DEFAULT_BETA_N,
            e: DEFAULT_E.to_vec(),
            k2: DEFAULT_K2,
            mode: MainTermMode::Factorized,
            block_size: DEFAULT_BLOCK_SIZE,
            blocks_per_chunk: DEFAULT_BLOCKS_PER_CHUNK,
            max_s_nodes: DEFAULT_MAX_S_NODES,
        }
    }
}

impl BetaSettings {
    pub fn configs(&self) -> Result<Vec<BetaJConfig>> {
        if self.e.is_empty() {
            return Err(Error::Parameter("beta needs at least one e_j".into()));
        }
        self.e
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let c = BetaJConfig {
                    j: i as u32 + 1,
                    n_j: self.n_j,
                    e,
                    k2: self.k2,
                    mode: self.mode,
                };
                c.validate()?;
                Ok(c)
            })
            .collect()
    }

    pub fn options(&self, workers: usize, checkpoint_dir: Option<&Path>, stop_after_chunks: Option<usize>) -> Result<BetaOptions> {
        if self.block_size == 0 || self.blocks_per_chunk == 0 {
            return Err(Error::Parameter("block_size and blocks_per_chunk must be positive".into()));
        }
        Ok(BetaOptions {
            workers,
            checkpoint_dir: checkpoint_dir.map(Path::to_path_buf),
            stop_after_chunks,
            block_size: self.block_size,
            blocks_per_chunk: self.blocks_per_chunk,
            max_s_nodes: self.max_s_nodes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LambdaSettings {
    pub alpha: AlphaSettings,
    pub beta: BetaSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeansSettings {
    pub classes: Vec<MeanClass>,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
}

impl Default for MeansSettings {
    fn default() -> Self {
        Self {
            classes: MeanClass::ALL.to_vec(),
            n: vec![100, 10_000, 1_000_000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSettings {
    pub start: Option<String>,
    pub max_steps: usize,
    pub effort: u64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            start: None,
            max_steps: 100,
            effort: aliquot_core::Effort::default().rho_iterations,
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Reads a config file. A full report is accepted too: its `config` member is used.
fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parameter(format!("config {} is not valid JSON: {e}", path.display())))?;
    match value {
        Value::Object(mut obj) => match obj.remove("config") {
            Some(inner) if obj.contains_key("schema_version") => Ok(inner),
            Some(inner) => {
                obj.insert("config".into(), inner);
                Ok(Value::Object(obj))
            }
            None => Ok(Value::Object(obj)),
        },
        _ => Err(Error::Parameter(format!("config {} must be a JSON object", path.display()))),
    }
}

/// Defaults, overlaid by the config file, overlaid by flag values.
pub fn resolve<T>(config: Option<&Path>, flags: Map<String, Value>) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default())?;
    if let Some(path) = config {
        merge(&mut value, read_config(path)?);
    }
    merge(&mut value, Value::Object(flags));
    serde_json::from_value(value).map_err(|e| Error::Parameter(format!("invalid configuration: {e}")))
}

/// Builds a flag overlay, skipping unset values.
#[derive(Default)]
pub struct Overlay(Map<String, Value>);

impl Overlay {
    pub fn set<V: Serialize>(mut self, key: &str, v: Option<V>) -> Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), serde_json::to_value(v).expect("flag values serialize"));
        }
        self
    }

    pub fn nested(mut self, key: &str, inner: Overlay) -> Self {
        if !inner.0.is_empty() {
            self.0.insert(key.to_string(), Value::Object(inner.0));
        }
        self
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("2.5E3"), Ok(2500));
        assert_eq!(parse_count("1_000"), Ok(1000));
        assert_eq!(parse_count("18446744073709551615"), Ok(u64::MAX));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("abc").is_err());
        assert!(parse_u32("1e10").is_err());
    }

    #[test]
    fn layering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"N": 5000, "L": 20}"#).unwrap();
        let s: AlphaSettings = resolve(Some(&path), Overlay::default().set("L", Some(30u32)).into_map()).unwrap();
        assert_eq!(s, AlphaSettings { n: 5000, l: 30, m: 15 });

        std::fs::write(&path, r#"{"schema_version": 1, "config": {"alpha": {"N": 7000}}, "result": {}}"#).unwrap();
        let s: LambdaSettings = resolve(Some(&path), Map::new()).unwrap();
        assert_eq!(s.alpha.n, 7000);
        assert_eq!(s.beta, BetaSettings::default());

        std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        let r: Result<AlphaSettings> = resolve(Some(&path), Map::new());
        assert!(r.unwrap_err().is_parameter_error());
    }

    #[test]
    fn beta_configs() {
        let s = BetaSettings::default();
        let c = s.configs().unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c[0].e, 1.0);
        let bad = BetaSettings {
            e: vec![0.5],
            n_j: 7,
            ..BetaSettings::default()
        };
        assert!(bad.configs().is_err());
    }
}
