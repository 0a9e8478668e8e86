use std::fs;
use std::io::Write;

use kernel_sdr::evaluation::{cv_select_lambda_with, prediction_cv};
use kernel_sdr::format::format_float;
use kernel_sdr::kernels::{gram, KernelSpec};
use kernel_sdr::sdr::{fit, transform};
use kernel_sdr::simbench::{benchmark_csv, generate, run_benchmark, SimCase};

use crate::config::RunConfig;
use crate::data_io::{exact_rows, load_csv, matrix_rows, numbered, write_csv, LoadedData};
use crate::error::{CliError, CliResult};

fn prepare_output(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.output)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.output.display())))
}

fn load(cfg: &RunConfig, err: &mut dyn Write) -> CliResult<LoadedData> {
    let d = load_csv(cfg.require_input()?, &cfg.response)?;
    for name in &d.dropped {
        let _ = writeln!(err, "warning: dropped constant column '{name}'");
    }
    Ok(d)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes `<case>_data.csv` (predictors `x1..xp` and response `y`) and
/// `<case>_u_true.csv` for every selected design.
pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    prepare_output(cfg)?;
    for case_id in cfg.case.cases() {
        let sim = generate(&SimCase::new(case_id, cfg.n, cfg.p, cfg.seed)?)?;
        let x = sim.data.x();
        let mut rows = exact_rows(x);
        for (row, y) in rows.iter_mut().zip(sim.data.y().iter()) {
            row.push(format!("{y}"));
        }
        let mut header = numbered("x", x.ncols());
        header.push("y".to_string());
        let data_path = cfg.output.join(format!("{case_id}_data.csv"));
        write_csv(&data_path, &header, &rows)?;
        let u_path = cfg.output.join(format!("{case_id}_u_true.csv"));
        write_csv(&u_path, &numbered("u", sim.u_true.nrows()), &exact_rows(&sim.u_true.transpose()))?;
        writeln!(out, "{case_id}: n={} p={} seed={} -> {}", cfg.n, cfg.p, cfg.seed, data_path.display())?;
    }
    Ok(())
}

/// Writes `coefficients.csv`, `reduced.csv`, `trace.csv`, `scaling.csv`
/// and `summary.csv`.
pub fn cmd_fit(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let d = load(cfg, err)?;
    prepare_output(cfg)?;
    let f = fit(&d.data, &cfg.fit_config())?;
    let u = transform(&f, gram(d.data.x(), &f.kernel)?.entries())?;
    let q = f.q();
    write_csv(&cfg.output.join("coefficients.csv"), &numbered("c", q), &matrix_rows(f.c.as_matrix()))?;
    write_csv(&cfg.output.join("reduced.csv"), &numbered("u", q), &matrix_rows(&u.transpose()))?;
    let trace: Vec<Vec<String>> = f
        .objective_trace
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), format_float(*v)])
        .collect();
    write_csv(&cfg.output.join("trace.csv"), &strings(&["step", "objective"]), &trace)?;
    let scaling: Vec<Vec<String>> = d
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| vec![name.clone(), format_float(d.scaling.mean[j]), format_float(d.scaling.sd[j])])
        .collect();
    write_csv(&cfg.output.join("scaling.csv"), &strings(&["column", "mean", "sd"]), &scaling)?;

    let kernel = match f.kernel {
        KernelSpec::Gaussian { sigma } => format!("gaussian(sigma={})", format_float(sigma)),
        KernelSpec::Polynomial { degree, offset } => {
            format!("polynomial(degree={degree},offset={})", format_float(offset))
        }
    };
    let first = f.objective_trace.first().copied().unwrap_or(f64::NAN);
    let last = f.objective_trace.last().copied().unwrap_or(f64::NAN);
    let summary = vec![
        ("method", f.method.to_string()),
        ("n", d.data.n().to_string()),
        ("p", d.data.p().to_string()),
        ("q", q.to_string()),
        ("lambda", format_float(f.lambda_used)),
        ("h1", format_float(f.bandwidths_used[0])),
        ("h2", format_float(f.bandwidths_used[1])),
        ("h3", format_float(f.bandwidths_used[2])),
        ("kernel", kernel),
        ("converged", f.converged.to_string()),
        ("iterations", f.iterations.to_string()),
        ("initial_objective", format_float(first)),
        ("final_objective", format_float(last)),
        ("dropped_columns", d.dropped.join(";")),
    ];
    let rows: Vec<Vec<String>> = summary.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    write_csv(&cfg.output.join("summary.csv"), &strings(&["key", "value"]), &rows)?;
    for (k, v) in summary {
        writeln!(out, "{k}={v}")?;
    }
    Ok(())
}

/// Writes `cv.csv` with one row per grid point.
pub fn cmd_cv(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let d = load(cfg, err)?;
    prepare_output(cfg)?;
    let report = cv_select_lambda_with(
        &d.data,
        &cfg.fit_config(),
        &cfg.lambda_grid,
        cfg.folds,
        cfg.criterion,
        &cfg.cv_settings(),
    )?;
    let rows: Vec<Vec<String>> = report
        .lambda_grid
        .iter()
        .zip(&report.scores)
        .map(|(l, s)| {
            let chosen = if *l == report.best_lambda { "1" } else { "0" };
            vec![format_float(*l), format_float(*s), chosen.to_string()]
        })
        .collect();
    write_csv(&cfg.output.join("cv.csv"), &strings(&["lambda", "score", "selected"]), &rows)?;
    writeln!(
        out,
        "criterion={} folds={} best_lambda={}",
        report.criterion,
        report.fold_count,
        format_float(report.best_lambda)
    )?;
    Ok(())
}

/// Writes `benchmark.csv` with one row per design and method.
pub fn cmd_benchmark(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    prepare_output(cfg)?;
    let mut rows = Vec::new();
    for case_id in cfg.case.cases() {
        let case = SimCase::new(case_id, cfg.n, cfg.p, cfg.seed)?;
        rows.extend(run_benchmark(&case, &cfg.methods, cfg.reps, &cfg.fit_config(), cfg.workers)?);
    }
    let text = benchmark_csv(&rows);
    fs::write(cfg.output.join("benchmark.csv"), &text)?;
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Writes `pmae.csv`: per-fold PMAE of the reduced-predictor regression
/// and of the training-mean predictor, then their means.
pub fn cmd_predict(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let d = load(cfg, err)?;
    prepare_output(cfg)?;
    let r = prediction_cv(&d.data, &cfg.fit_config(), cfg.folds, cfg.ridge_reg)?;
    let mut rows: Vec<Vec<String>> = r
        .fold_pmae
        .iter()
        .zip(&r.baseline_fold_pmae)
        .enumerate()
        .map(|(i, (a, b))| vec![(i + 1).to_string(), format_float(*a), format_float(*b)])
        .collect();
    rows.push(vec![
        "mean".to_string(),
        format_float(r.mean_pmae),
        format_float(r.baseline_mean_pmae),
    ]);
    write_csv(&cfg.output.join("pmae.csv"), &strings(&["fold", "pmae", "baseline_pmae"]), &rows)?;
    writeln!(
        out,
        "mean_pmae={} baseline_pmae={}",
        format_float(r.mean_pmae),
        format_float(r.baseline_mean_pmae)
    )?;
    Ok(())
}
