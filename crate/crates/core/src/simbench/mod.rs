//! Simulation designs and the replication benchmark.

mod bench;
mod generate;

pub use bench::{benchmark_csv, run_benchmark, BenchmarkRow, BENCHMARK_CSV_HEADER};
pub use generate::{
    generate, generate_raw, generate_with_noise, CaseId, RawSample, SimCase, SimData,
    STRUCTURAL_COVARIATES,
};
