//! Named parameter sets of the standard regimes.

use crate::config::{parse_config, ConfigDoc, RunConfig};
use crate::error::{Error, Result};

const PRESETS: &[(&str, &str)] = &[
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

/// TOML text of a preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| {
            let known: Vec<_> = preset_names().collect();
            Error::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
        })
}

pub fn preset_doc(name: &str) -> Result<ConfigDoc> {
    ConfigDoc::parse(preset_text(name)?)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    parse_config(preset_text(name)?)
}
