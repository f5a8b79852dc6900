//! Synthetic instances, an exhaustive oracle, the benchmark harness and
//! buffer-time heatmaps.

mod benchmark;
mod generator;
mod heatmap;
mod oracle;

pub use benchmark::{
    default_methods, format_table, run_benchmark, write_instance_jsonl, write_table_csv,
    BenchConfig, BenchReport, BenchmarkRow, InstanceResult, Method, Split,
};
pub use generator::{
    generate_instances, load_manifest, write_instances, GeneratorConfig, Manifest, ManifestEntry,
    MANIFEST_FILE,
};
pub use heatmap::{buffer_matrix, export_heatmap, heatmap_csv, heatmap_svg, parse_heatmap_csv};
pub use oracle::{brute_force_best, OracleObjective, OracleResult, BRUTE_FORCE_LIMIT};

use sha2::{Digest, Sha256};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
