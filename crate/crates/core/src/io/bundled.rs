//! Scenarios shipped with the library, one per published result.

use super::Scenario;
use crate::error::{Error, Result};

pub const BUNDLED: &[(&str, &str)] = &[
    ("nir_resonant", include_str!("../../scenarios/nir_resonant.toml")),
    ("nir_offres", include_str!("../../scenarios/nir_offres.toml")),
    ("telecom_resonant", include_str!("../../scenarios/telecom_resonant.toml")),
    ("telecom_offres", include_str!("../../scenarios/telecom_offres.toml")),
    ("seed_power_sweep", include_str!("../../scenarios/seed_power_sweep.toml")),
    ("excitation_power_sweep", include_str!("../../scenarios/excitation_power_sweep.toml")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("<scenario>", format!("no bundled scenario named {name:?}")))?;
    Scenario::from_toml(text)
}
