//! Experiment descriptions and the builtin preset catalogue.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aqm::{QdiscConfig, QdiscKind};
use crate::cca::CcaKind;
use crate::error::Error;
use crate::netpath::{JitterModel, LinkConfig};
use crate::packet::FlowId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Senders on the client side; data crosses the uplink queue.
    #[default]
    #[serde(alias = "up")]
    Upload,
    /// Senders on the server side; data crosses the downlink queue.
    #[serde(alias = "down")]
    Download,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Upload, Direction::Download];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upload => "upload",
            Direction::Download => "download",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Direction::Upload => "up",
            Direction::Download => "down",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "upload" | "up" => Some(Direction::Upload),
            "download" | "down" => Some(Direction::Download),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub flow_id: FlowId,
    pub cca: CcaKind,
    #[serde(default)]
    pub start_offset_s: f64,
}

fn default_duration() -> f64 {
    120.0
}

fn default_sampling_period() -> f64 {
    0.1
}

fn default_goodput_window() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub direction: Direction,
    /// Seconds.
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub qdisc: QdiscConfig,
    pub flows: Vec<FlowConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Seconds between metric samples.
    #[serde(default = "default_sampling_period")]
    pub sampling_period: f64,
    /// Seconds of trailing history behind each goodput sample.
    #[serde(default = "default_goodput_window")]
    pub goodput_window: f64,
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self, Error> {
        let cfg: ScenarioConfig =
            serde_json::from_str(s).map_err(|e| Error::Validation(vec![format!("scenario: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), Error> {
        let mut errs = Vec::new();
        if self.name.trim().is_empty() {
            errs.push("name must not be empty".to_string());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            errs.push(format!("duration must be > 0 (got {})", self.duration));
        }
        if !(self.sampling_period > 0.0 && self.sampling_period.is_finite()) {
            errs.push(format!("sampling_period must be > 0 (got {})", self.sampling_period));
        } else if self.sampling_period < 1e-3 {
            errs.push("sampling_period must be at least 1 ms".to_string());
        }
        if !(self.goodput_window > 0.0 && self.goodput_window.is_finite()) {
            errs.push(format!("goodput_window must be > 0 (got {})", self.goodput_window));
        }
        if self.flows.is_empty() {
            errs.push("at least one flow is required".to_string());
        }
        let mut seen = BTreeSet::new();
        for f in &self.flows {
            if !seen.insert(f.flow_id) {
                errs.push(format!("duplicate flow_id {}", f.flow_id));
            }
            if !(f.start_offset_s >= 0.0 && f.start_offset_s.is_finite()) {
                errs.push(format!("flow {}: start_offset_s must be >= 0", f.flow_id));
            } else if self.duration > 0.0 && f.start_offset_s >= self.duration {
                errs.push(format!("flow {}: start_offset_s must be before the end of the run", f.flow_id));
            }
        }
        errs.extend(self.link.validate());
        errs.extend(self.qdisc.validate());
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.duration)
    }

    pub fn sampling_period(&self) -> Duration {
        Duration::from_secs_f64(self.sampling_period)
    }

    pub fn goodput_window(&self) -> Duration {
        Duration::from_secs_f64(self.goodput_window)
    }

    /// Number of sampling instants in the run.
    pub fn sample_count(&self) -> u64 {
        (self.duration / self.sampling_period + 1e-9).floor() as u64
    }

    /// File stem used for logs: `<name>-seed<N>`.
    pub fn file_stem(&self) -> String {
        let safe: String = self
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        format!("{safe}-seed{}", self.seed)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Jitter applied to competition presets so that seeds produce distinct
/// interleavings.
const COMPETITION_JITTER_MS: f64 = 1.0;

/// CUBIC (flow 1) against `cca` (flow 2), both starting at t=0.
pub fn competition(cca: CcaKind, aqm: QdiscKind, direction: Direction, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: competition_name(cca, aqm, direction),
        direction,
        duration: default_duration(),
        link: LinkConfig {
            jitter: JitterModel::Uniform {
                max_ms: COMPETITION_JITTER_MS,
            },
            ..LinkConfig::default()
        },
        qdisc: QdiscConfig::of_kind(aqm),
        flows: vec![
            FlowConfig {
                flow_id: 1,
                cca: CcaKind::Cubic,
                start_offset_s: 0.0,
            },
            FlowConfig {
                flow_id: 2,
                cca,
                start_offset_s: 0.0,
            },
        ],
        seed,
        sampling_period: default_sampling_period(),
        goodput_window: default_goodput_window(),
    }
}

pub fn competition_name(cca: CcaKind, aqm: QdiscKind, direction: Direction) -> String {
    format!("cubic-vs-{}-{}-{}", cca.as_str(), aqm.as_str(), direction.short())
}

/// One BBRv3 flow alone on a clean 10 Mbps path.
pub fn bbr3_solo(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: "bbr3-solo".into(),
        direction: Direction::Upload,
        duration: default_duration(),
        link: LinkConfig::default(),
        qdisc: QdiscConfig::of_kind(QdiscKind::Pfifo),
        flows: vec![FlowConfig {
            flow_id: 1,
            cca: CcaKind::Bbr3,
            start_offset_s: 0.0,
        }],
        seed,
        sampling_period: default_sampling_period(),
        goodput_window: default_goodput_window(),
    }
}

const ALIASES: &[(&str, CcaKind, QdiscKind, Direction, &str)] = &[
    ("fig1a", CcaKind::Bbr3, QdiscKind::Cake, Direction::Upload, "CUBIC vs BBRv3 upload over CAKE"),
    ("fig5a", CcaKind::Bbr3, QdiscKind::Pfifo, Direction::Upload, "CUBIC vs BBRv3 upload, PFIFO"),
    ("fig5b", CcaKind::Bbr3, QdiscKind::FqCodel, Direction::Upload, "CUBIC vs BBRv3 upload, FQ-CoDel"),
    ("fig5c", CcaKind::Bbr3, QdiscKind::Cake, Direction::Upload, "CUBIC vs BBRv3 upload, CAKE"),
    ("fig6a", CcaKind::Bbr3, QdiscKind::Pfifo, Direction::Download, "CUBIC vs BBRv3 download, PFIFO"),
    ("fig6b", CcaKind::Bbr3, QdiscKind::FqCodel, Direction::Download, "CUBIC vs BBRv3 download, FQ-CoDel"),
    ("fig6c", CcaKind::Bbr3, QdiscKind::Cake, Direction::Download, "CUBIC vs BBRv3 download, CAKE"),
    ("fig7a", CcaKind::Bbr1, QdiscKind::Pfifo, Direction::Upload, "CUBIC vs BBRv1 upload, PFIFO"),
    ("fig7b", CcaKind::Bbr2, QdiscKind::Pfifo, Direction::Upload, "CUBIC vs BBRv2 upload, PFIFO"),
    ("fig7c", CcaKind::Bbr3, QdiscKind::Pfifo, Direction::Upload, "CUBIC vs BBRv3 upload, PFIFO"),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub description: String,
}

/// Every builtin preset name with a one-line description.
pub fn presets() -> Vec<PresetInfo> {
    let mut out = Vec::new();
    for cca in [CcaKind::Bbr1, CcaKind::Bbr2, CcaKind::Bbr3, CcaKind::Cubic] {
        for aqm in QdiscKind::ALL {
            for dir in Direction::ALL {
                out.push(PresetInfo {
                    name: competition_name(cca, aqm, dir),
                    description: format!("CUBIC vs {} {} over {}", cca, dir, aqm),
                });
            }
        }
    }
    for (alias, cca, aqm, dir, desc) in ALIASES {
        out.push(PresetInfo {
            name: (*alias).to_string(),
            description: format!("{desc} (alias of {})", competition_name(*cca, *aqm, *dir)),
        });
    }
    out.push(PresetInfo {
        name: "bbr3-solo".into(),
        description: "single BBRv3 flow on an empty 10 Mbps path".into(),
    });
    out
}

/// Looks up a builtin preset, with `seed` applied.
pub fn preset(name: &str, seed: u64) -> Result<ScenarioConfig, Error> {
    if name == "bbr3-solo" {
        return Ok(bbr3_solo(seed));
    }
    if let Some((_, cca, aqm, dir, _)) = ALIASES.iter().find(|a| a.0 == name) {
        let mut cfg = competition(*cca, *aqm, *dir, seed);
        cfg.name = name.to_string();
        return Ok(cfg);
    }
    let parse = || -> Option<ScenarioConfig> {
        let rest = name.strip_prefix("cubic-vs-")?;
        let (cca, rest) = rest.split_once('-')?;
        let (aqm, dir) = rest.rsplit_once('-')?;
        Some(competition(
            CcaKind::parse(cca)?,
            QdiscKind::parse(aqm)?,
            Direction::parse(dir)?,
            seed,
        ))
    };
    parse()
        .filter(|c| c.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves() {
        for p in presets() {
            let cfg = preset(&p.name, 7).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.seed, 7);
        }
    }

    #[test]
    fn competition_preset_shape() {
        let cfg = preset("cubic-vs-bbr3-pfifo-up", 1).unwrap();
        assert_eq!(cfg.flows.len(), 2);
        assert_eq!(cfg.qdisc.kind, QdiscKind::Pfifo);
        assert_eq!(cfg.qdisc.pfifo_limit, 50);
        assert_eq!(cfg.link.rate_bps, 10e6);
        assert_eq!(cfg.duration, 120.0);
        assert_eq!(cfg.sample_count(), 1200);
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(preset("cubic-vs-bbr9-pfifo-up", 1), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut cfg = preset("fig5a", 1).unwrap();
        cfg.duration = 0.0;
        cfg.flows[1].flow_id = 1;
        cfg.link.rate_bps = -1.0;
        let Err(Error::Validation(errs)) = cfg.validate() else { panic!() };
        assert!(errs.len() >= 3, "{errs:?}");
    }

    #[test]
    fn json_round_trip() {
        let cfg = preset("fig6b", 3).unwrap();
        let back = ScenarioConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"name":"x","flows":[{"flow_id":1,"cca":"bbr2"}],"qdisc":{"kind":"cake"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.duration, 120.0);
        assert_eq!(cfg.sampling_period, 0.1);
        assert_eq!(cfg.direction, Direction::Upload);
    }
}
