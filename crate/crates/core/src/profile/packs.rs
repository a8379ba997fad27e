use super::SystemConfig;
use crate::error::{Error, Result};

/// Names of the packs compiled into the library.
pub const BUILTIN_PACKS: [&str; 4] = ["tx2-gpu", "tx2-cpu", "pi-gpu", "pi-cpu"];

fn pack_source(name: &str) -> Option<&'static str> {
    match name {
        "tx2-gpu" => Some(include_str!("../../profiles/tx2-gpu.toml")),
        "tx2-cpu" => Some(include_str!("../../profiles/tx2-cpu.toml")),
        "pi-gpu" => Some(include_str!("../../profiles/pi-gpu.toml")),
        "pi-cpu" => Some(include_str!("../../profiles/pi-cpu.toml")),
        _ => None,
    }
}

pub fn builtin_pack(name: &str) -> Result<SystemConfig> {
    let text = pack_source(name).ok_or_else(|| {
        Error::config(format!(
            "unknown profile pack `{name}`; builtin packs are {}",
            BUILTIN_PACKS.join(", ")
        ))
    })?;
    SystemConfig::from_toml_str(text)
}
