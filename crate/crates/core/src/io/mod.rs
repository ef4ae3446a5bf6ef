//! Persistence and scenario definitions.

mod checkpoint;
mod dataset_dir;
mod kv;
mod observe;
mod preset;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use dataset_dir::{parse_csv, read_dataset, write_dataset};
pub use kv::KeyValues;
pub use observe::{extract_breakthrough, extract_profile};
pub use preset::{preset, ScenarioConfig, CORE_VOLUMES, PRESET_NAMES, PRESET_TIMES};
