//! Shipped chip profiles, one per vendor and die revision.
//!
//! The files under `profiles/` are compiled in. A directory named by
//! `PUDSIM_PROFILE_DIR` is searched first, so a profile can be edited
//! without rebuilding.

use std::path::{Path, PathBuf};

use crate::disturbance::ChipProfile;
use crate::error::{Result, SimError};

pub const PROFILE_DIR_ENV: &str = "PUDSIM_PROFILE_DIR";

/// Profile used when none is named.
pub const DEFAULT_PROFILE: &str = "hynix-8gb-a";

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../profiles/", $name, ".kv")))),*]
    };
}

const SHIPPED: &[(&str, &str)] = shipped!(
    "hynix-4gb-a",
    "hynix-8gb-a",
    "hynix-16gb-c",
    "hynix-8gb-d",
    "micron-4gb-b",
    "micron-16gb-e",
    "micron-16gb-f",
    "micron-8gb-r",
    "samsung-16gb-a",
    "samsung-16gb-b",
    "samsung-4gb-c",
    "samsung-16gb-c",
    "samsung-4gb-e",
    "nanya-8gb-c",
);

/// Names of the compiled-in profiles, in table order.
pub fn shipped_names() -> Vec<&'static str> {
    SHIPPED.iter().map(|(n, _)| *n).collect()
}

/// A compiled-in profile by name.
pub fn shipped(name: &str) -> Result<ChipProfile> {
    let (_, text) = SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SimError::Config(format!("no shipped profile named `{name}`")))?;
    ChipProfile::from_kv(text)
}

pub fn all_shipped() -> Result<Vec<ChipProfile>> {
    SHIPPED.iter().map(|(_, t)| ChipProfile::from_kv(t)).collect()
}

pub fn default_profile() -> ChipProfile {
    shipped(DEFAULT_PROFILE).expect("default profile parses")
}

/// Resolves a profile from a path, the override directory, or the shipped set.
pub fn load_profile(spec: &str) -> Result<ChipProfile> {
    let path = Path::new(spec);
    if path.extension().is_some() || spec.contains(std::path::MAIN_SEPARATOR) {
        return ChipProfile::load(path);
    }
    if let Some(dir) = std::env::var_os(PROFILE_DIR_ENV) {
        let candidate: PathBuf = Path::new(&dir).join(format!("{spec}.kv"));
        if candidate.exists() {
            log::debug!("profile `{spec}` from {}", candidate.display());
            return ChipProfile::load(&candidate);
        }
    }
    shipped(spec)
}
