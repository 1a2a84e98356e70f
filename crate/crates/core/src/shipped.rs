//! Data files shipped with the repository, embedded for tests, benches and
//! defaults.

use crate::knobspace::{HardwareProfile, KnobCatalog};
use crate::metrics::MetricSchema;

pub const MYSQL266_CATALOG: &str = include_str!("../../../catalogs/mysql266.json");
pub const SYNTHETIC50_CATALOG: &str = include_str!("../../../catalogs/synthetic50.json");
pub const INNODB63_SCHEMA: &str = include_str!("../../../schemas/innodb63.json");
pub const SYNTHETIC50_MODEL: &str = include_str!("../../../envs/synthetic50.json");
pub const SYNTHETIC50_HINTS: &str = include_str!("../../../hints/synthetic50.json");
pub const MYSQL_DEMO_HINTS: &str = include_str!("../../../hints/mysql_demo.json");

pub fn mysql266() -> KnobCatalog {
    KnobCatalog::from_json(MYSQL266_CATALOG).expect("shipped catalog is valid")
}

pub fn synthetic50() -> KnobCatalog {
    KnobCatalog::from_json(SYNTHETIC50_CATALOG).expect("shipped catalog is valid")
}

pub fn innodb63() -> MetricSchema {
    MetricSchema::from_json(INNODB63_SCHEMA).expect("shipped schema is valid")
}

const GIB: u64 = 1 << 30;

/// 12 cores, 64 GiB RAM, 200 GiB disk.
pub fn hardware_12c_64g() -> HardwareProfile {
    HardwareProfile { cpu_cores: 12, ram_bytes: 64 * GIB, disk_bytes: 200 * GIB }
}

/// Same machine with half the memory.
pub fn hardware_12c_32g() -> HardwareProfile {
    HardwareProfile { ram_bytes: 32 * GIB, ..hardware_12c_64g() }
}

pub fn hardware_12c_16g() -> HardwareProfile {
    HardwareProfile { ram_bytes: 16 * GIB, disk_bytes: 120 * GIB, ..hardware_12c_64g() }
}
