use std::fmt::Write as _;
use std::thread;

use crate::data::{standardize, DataSet};
use crate::error::{Error, Result};
use crate::evaluation::multiple_correlation;
use crate::format::format_float;
use crate::kernels::gram;
use crate::sdr::{fit, transform, FitConfig, Method};

use super::generate::{generate, CaseId, SimCase};

/// Summary of one method over the replications of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub case_id: CaseId,
    pub p: usize,
    pub method: Method,
    /// NaN when every replication failed.
    pub mean_rbar2: f64,
    /// Sample standard deviation; 0 for a single replication.
    pub sd_rbar2: f64,
    /// Replications that produced a value.
    pub reps: usize,
    /// Replications whose data generation or fit failed.
    pub failures: usize,
}

pub const BENCHMARK_CSV_HEADER: &str = "case,p,method,mean_rbar2,sd_rbar2,reps,failures";

/// Score of every method on replication `rep`, or `None` where it failed.
fn one_rep(case: &SimCase, methods: &[Method], rep: usize, cfg: &FitConfig) -> Vec<Option<f64>> {
    let sim = SimCase {
        seed: case.seed.wrapping_add(rep as u64),
        ..*case
    };
    let Ok(data) = generate(&sim) else {
        return vec![None; methods.len()];
    };
    let (z, _) = standardize(data.data.x());
    let Ok(ds) = DataSet::new(z, data.data.y().clone()) else {
        return vec![None; methods.len()];
    };
    methods
        .iter()
        .map(|&method| {
            let c = FitConfig {
                method,
                ..cfg.clone()
            };
            let f = fit(&ds, &c).ok()?;
            let r = gram(ds.x(), &f.kernel).ok()?;
            let u = transform(&f, r.entries()).ok()?;
            multiple_correlation(&data.u_true, &u).ok().map(|m| m.value)
        })
        .collect()
}

/// Replicates `case` `reps` times with seeds `case.seed + rep`, fits every
/// method on the standardized predictors and summarizes the multiple
/// correlation with the true indices. Replications run on `workers`
/// threads; results do not depend on the thread count.
pub fn run_benchmark(
    case: &SimCase,
    methods: &[Method],
    reps: usize,
    cfg: &FitConfig,
    workers: usize,
) -> Result<Vec<BenchmarkRow>> {
    case.validate()?;
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods to benchmark"));
    }
    let workers = workers.clamp(1, reps);
    let mut results: Vec<Vec<Option<f64>>> = vec![Vec::new(); reps];
    if workers == 1 {
        for (rep, slot) in results.iter_mut().enumerate() {
            *slot = one_rep(case, methods, rep, cfg);
        }
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        (w..reps)
                            .step_by(workers)
                            .map(|rep| (rep, one_rep(case, methods, rep, cfg)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (rep, r) in h.join().expect("benchmark worker panicked") {
                    results[rep] = r;
                }
            }
        });
    }

    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let vals: Vec<f64> = results.iter().filter_map(|r| r[k]).collect();
            let m = vals.len();
            let mean = vals.iter().sum::<f64>() / m as f64;
            let sd = match m {
                0 => f64::NAN,
                1 => 0.0,
                _ => (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt(),
            };
            BenchmarkRow {
                case_id: case.case_id,
                p: case.p,
                method,
                mean_rbar2: mean,
                sd_rbar2: sd,
                reps: m,
                failures: reps - m,
            }
        })
        .collect())
}

/// Rows as CSV text with a header line.
pub fn benchmark_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from(BENCHMARK_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.case_id,
            r.p,
            r.method,
            format_float(r.mean_rbar2),
            format_float(r.sd_rbar2),
            r.reps,
            r.failures
        );
    }
    out
}
