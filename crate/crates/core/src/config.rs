//! JSON project configuration. Every field is optional and defaults to the
//! reference relay; unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ber::{CommsConfig, Decision, Pulse};
use crate::plant::{default_params, default_post_filter_spec, default_weight_spec, FilterSpec, RelayParams};
use crate::sim::{Canceler, SimConfig};
use crate::synth::DEFAULT_TOL;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaySection {
    pub sample_period: f64,
    pub fsfh_ratio: usize,
    pub delay: f64,
    pub coupling_gain: f64,
    pub carrier_hz: f64,
    pub weight: FilterSpec,
    pub anti_alias: FilterSpec,
    pub post_filter: FilterSpec,
}

impl Default for RelaySection {
    fn default() -> Self {
        let p = default_params();
        Self {
            sample_period: p.sample_period,
            fsfh_ratio: p.fsfh_ratio,
            delay: p.delay,
            coupling_gain: p.coupling_gain,
            carrier_hz: p.carrier_hz,
            weight: default_weight_spec(),
            anti_alias: FilterSpec::Identity,
            post_filter: default_post_filter_spec(),
        }
    }
}

impl RelaySection {
    pub fn to_params(&self) -> Result<RelayParams> {
        let p = RelayParams {
            sample_period: self.sample_period,
            fsfh_ratio: self.fsfh_ratio,
            delay: self.delay,
            coupling_gain: self.coupling_gain,
            carrier_hz: self.carrier_hz,
            weight: self.weight.realize()?,
            anti_alias: self.anti_alias.realize()?,
            post_filter: self.post_filter.realize()?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Power in dBm; `null` in JSON disables the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dbm(pub f64);

impl Serialize for Dbm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            s.serialize_none()
        } else {
            s.serialize_some(&self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Dbm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Dbm(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub relay_gain_db: f64,
    pub beta: f64,
    pub noise_rs_dbm: Dbm,
    pub noise_t_dbm: Dbm,
    pub signal_dbm: Dbm,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::reference(default_params(), Canceler::None);
        Self {
            relay_gain_db: s.relay_gain_db,
            beta: s.beta,
            noise_rs_dbm: Dbm(s.noise_rs_dbm),
            noise_t_dbm: Dbm(s.noise_t_dbm),
            signal_dbm: Dbm(s.signal_dbm),
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseName {
    #[default]
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionName {
    #[default]
    IntegrateAndDump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommsSection {
    pub symbol_period: f64,
    pub n_symbols: usize,
    pub pulse: PulseName,
    pub decision: DecisionName,
}

impl Default for CommsSection {
    fn default() -> Self {
        let c = CommsConfig::reference();
        Self {
            symbol_period: c.symbol_period,
            n_symbols: c.n_symbols,
            pulse: PulseName::Rectangular,
            decision: DecisionName::IntegrateAndDump,
        }
    }
}

impl CommsSection {
    pub fn to_comms(&self) -> CommsConfig {
        CommsConfig {
            symbol_period: self.symbol_period,
            n_symbols: self.n_symbols,
            pulse: match self.pulse {
                PulseName::Rectangular => Pulse::Rectangular,
            },
            decision: match self.decision {
                DecisionName::IntegrateAndDump => Decision::IntegrateAndDump,
            },
        }
    }
}

/// `"auto"` or an explicit increasing list.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BetaGrid {
    #[default]
    Auto,
    List(Vec<f64>),
}

impl Serialize for BetaGrid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BetaGrid::Auto => s.serialize_str("auto"),
            BetaGrid::List(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for BetaGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            List(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == "auto" => Ok(BetaGrid::Auto),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "expected \"auto\" or a list of numbers, got \"{s}\""
            ))),
            Raw::List(v) => Ok(BetaGrid::List(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub betas: BetaGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub tol: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub relay: RelaySection,
    pub sim: SimSection,
    pub comms: CommsSection,
    pub sweep: SweepSection,
    pub design: DesignSection,
    pub output_dir: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            relay: RelaySection::default(),
            sim: SimSection::default(),
            comms: CommsSection::default(),
            sweep: SweepSection::default(),
            design: DesignSection::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Parse failure with the JSON path and line/column of the offending value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}, column {}: {} (at '{}')",
            self.line, self.column, self.message, self.path
        )
    }
}

/// Deserialize JSON, reporting the failing path and position.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> std::result::Result<T, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ParseError {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, ParseError> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<RelayParams> {
        self.relay.to_params()
    }

    pub fn comms_config(&self) -> Result<CommsConfig> {
        let cc = self.comms.to_comms();
        cc.validate(&self.params()?)?;
        Ok(cc)
    }

    pub fn sim_config(&self, canceler: Canceler) -> Result<SimConfig> {
        let cfg = SimConfig {
            params: self.params()?,
            relay_gain_db: self.sim.relay_gain_db,
            beta: self.sim.beta,
            noise_rs_dbm: self.sim.noise_rs_dbm.0,
            noise_t_dbm: self.sim.noise_t_dbm.0,
            signal_dbm: self.sim.signal_dbm.0,
            seed: self.sim.seed,
            canceler,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every section.
    pub fn validate(&self) -> Result<()> {
        self.comms_config()?;
        self.sim_config(Canceler::None)?;
        if !(self.design.tol > 0.0 && self.design.tol.is_finite()) {
            return Err(Error::Config(format!("design.tol must be positive, got {}", self.design.tol)));
        }
        if let BetaGrid::List(b) = &self.sweep.betas {
            if b.is_empty() || b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config("sweep.betas must be positive numbers".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_reference() {
        let c = ProjectConfig::from_json("{}").unwrap();
        assert_eq!(c, ProjectConfig::default());
        c.validate().unwrap();
        assert_eq!(c.params().unwrap(), default_params());
    }

    #[test]
    fn round_trip() {
        let mut c = ProjectConfig::default();
        c.sim.noise_rs_dbm = Dbm(f64::NEG_INFINITY);
        c.sweep.betas = BetaGrid::List(vec![1e-4, 2e-4]);
        let back = ProjectConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = ProjectConfig::from_json("{\n  \"relay\": {\"alpha\": 0.1}\n}").unwrap_err();
        assert_eq!(err.path, "relay.alpha");
        assert_eq!(err.line, 2);
        assert!(err.message.contains("unknown field"));
    }

    #[test]
    fn malformed_reports_position() {
        let err = ProjectConfig::from_json("{\"sim\": {\"beta\": }}").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.column > 0);
    }

    #[test]
    fn beta_grid_forms() {
        let c = ProjectConfig::from_json(r#"{"sweep": {"betas": "auto"}}"#).unwrap();
        assert_eq!(c.sweep.betas, BetaGrid::Auto);
        let c = ProjectConfig::from_json(r#"{"sweep": {"betas": [0.1, 0.2]}}"#).unwrap();
        assert_eq!(c.sweep.betas, BetaGrid::List(vec![0.1, 0.2]));
        assert!(ProjectConfig::from_json(r#"{"sweep": {"betas": "many"}}"#).is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let c = ProjectConfig::from_json(r#"{"relay": {"delay": 1.03}}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Representability { .. })));
        let c = ProjectConfig::from_json(r#"{"comms": {"symbol_period": 1.5}}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
