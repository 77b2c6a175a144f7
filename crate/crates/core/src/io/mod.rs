//! File formats and the dataset evaluation harness.

pub mod config_file;
pub mod eval;
pub mod hfsw;
pub mod wav;

pub use config_file::{load_config, parse_config, render_config};
pub use eval::{run_eval, EvalManifest, EvalMode, EvalReport};
pub use hfsw::{decode_weights, encode_weights, load_weights, save_weights};
pub use wav::{read_wav, write_wav, WavFormat};
