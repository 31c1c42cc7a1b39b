use super::ExperimentConfig;
use crate::error::{Error, Result};

/// A config shipped inside the binary.
#[derive(Debug, Clone, Copy)]
pub struct BundledScenario {
    pub name: &'static str,
    pub toml: &'static str,
}

impl BundledScenario {
    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(self.toml)
    }
}

macro_rules! scenario {
    ($name:literal) => {
        BundledScenario {
            name: $name,
            toml: include_str!(concat!("../../configs/", $name, ".toml")),
        }
    };
}

pub const BUNDLED: &[BundledScenario] = &[
    scenario!("fig7-D2L2"),
    scenario!("fig7-D2L3"),
    scenario!("fig7-D2L4"),
    scenario!("fig7-D4L2"),
    scenario!("fig7-D4L3"),
    scenario!("fig7-D4L4"),
    scenario!("fig8-transient"),
    scenario!("fig9-mec"),
    scenario!("fig10-multihop"),
    scenario!("lowerbound-chain"),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|s| s.name)
}

/// Parsed bundled config by name.
pub fn bundled(name: &str) -> Result<ExperimentConfig> {
    BUNDLED
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            Error::Config(vec![format!(
                "unknown scenario `{name}` (bundled: {})",
                bundled_names().collect::<Vec<_>>().join(", ")
            )])
        })?
        .config()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_config_validates() {
        for s in BUNDLED {
            let cfg = s.config().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert_eq!(cfg.scenario, s.name);
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
    }

    #[test]
    fn unknown_name() {
        assert!(bundled("fig99").is_err());
    }
}
