use std::fs;
use std::path::{Path, PathBuf};

use kernel_sdr::evaluation::{CvCriterion, CvSettings, DEFAULT_KCCA_REG, DEFAULT_RIDGE_REG};
use kernel_sdr::format::format_float;
use kernel_sdr::sdr::{FitConfig, Method};
use kernel_sdr::simbench::CaseId;
use kernel_sdr::smoothing::BandwidthSpec;

use crate::error::{CliError, CliResult};

/// Which simulation designs a command covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseSelection {
    One(CaseId),
    All,
}

impl CaseSelection {
    pub fn cases(&self) -> Vec<CaseId> {
        match self {
            CaseSelection::One(c) => vec![*c],
            CaseSelection::All => CaseId::ALL.to_vec(),
        }
    }
}

/// Every setting a subcommand can read, after defaults, the config file
/// and command-line flags have been merged.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub response: String,
    pub method: Method,
    pub methods: Vec<Method>,
    pub q: usize,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub h3: Option<f64>,
    pub adaptive_h2: bool,
    pub folds: usize,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub criterion: CvCriterion,
    pub case: CaseSelection,
    pub n: usize,
    pub p: usize,
    pub kcca_reg: f64,
    pub ridge_reg: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub n_slices: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            input: None,
            output: PathBuf::from("."),
            response: "y".to_string(),
            method: fit.method,
            methods: vec![Method::Ksir, Method::Gsksir1],
            q: fit.q,
            lambda: fit.lambda,
            lambda_grid: vec![1e-4, 1e-2, 1.0],
            h1: None,
            h2: None,
            h3: None,
            adaptive_h2: fit.adaptive_h2,
            folds: 5,
            reps: 20,
            seed: 0,
            workers: 1,
            criterion: CvCriterion::Kcca,
            case: CaseSelection::One(CaseId::Case2),
            n: 200,
            p: 10,
            kcca_reg: DEFAULT_KCCA_REG,
            ridge_reg: DEFAULT_RIDGE_REG,
            max_iters: fit.max_iters,
            tol: fit.tol,
            n_slices: fit.n_slices,
        }
    }
}

/// Keys accepted in config files and as `--key` flags, in print order.
pub const KEYS: &[&str] = &[
    "input",
    "output",
    "response",
    "method",
    "methods",
    "q",
    "lambda",
    "lambda-grid",
    "h1",
    "h2",
    "h3",
    "h2-mode",
    "folds",
    "reps",
    "seed",
    "workers",
    "criterion",
    "case",
    "n",
    "p",
    "kcca-reg",
    "ridge-reg",
    "max-iters",
    "tol",
    "n-slices",
];

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Usage(format!("invalid value '{value}' for '{key}': expected {what}"))
}

fn parse_count(key: &str, value: &str, min: usize) -> CliResult<usize> {
    match value.trim().parse::<usize>() {
        Ok(v) if v >= min => Ok(v),
        _ => Err(bad(key, value, &format!("an integer >= {min}"))),
    }
}

fn parse_real(key: &str, value: &str, min: f64, strict: bool) -> CliResult<f64> {
    let v: f64 = value.trim().parse().map_err(|_| bad(key, value, "a number"))?;
    let ok = v.is_finite() && if strict { v > min } else { v >= min };
    if ok {
        Ok(v)
    } else {
        let rel = if strict { ">" } else { ">=" };
        Err(bad(key, value, &format!("a finite number {rel} {min}")))
    }
}

fn parse_bandwidth(key: &str, value: &str) -> CliResult<Option<f64>> {
    if value.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_real(key, value, 0.0, true).map(Some)
    }
}

fn fmt_bandwidth(h: Option<f64>) -> String {
    h.map_or_else(|| "auto".to_string(), format_float)
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key {
            "input" => self.input = Some(PathBuf::from(v)),
            "output" => self.output = PathBuf::from(v),
            "response" => {
                if v.is_empty() {
                    return Err(bad(key, value, "a column name"));
                }
                self.response = v.to_string();
            }
            "method" => self.method = v.parse().map_err(|_| bad(key, value, "gsksir1, gsksir2, gsksave or ksir"))?,
            "methods" => {
                let list = v
                    .split(',')
                    .map(|m| m.parse::<Method>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad(key, value, "a comma-separated list of methods"))?;
                if list.is_empty() {
                    return Err(bad(key, value, "at least one method"));
                }
                self.methods = list;
            }
            "q" => self.q = parse_count(key, v, 1)?,
            "lambda" => self.lambda = parse_real(key, v, 0.0, false)?,
            "lambda-grid" => {
                let grid = v
                    .split(',')
                    .map(|s| parse_real(key, s, 0.0, false))
                    .collect::<CliResult<Vec<_>>>()?;
                self.lambda_grid = grid;
            }
            "h1" => self.h1 = parse_bandwidth(key, v)?,
            "h2" => self.h2 = parse_bandwidth(key, v)?,
            "h3" => self.h3 = parse_bandwidth(key, v)?,
            "h2-mode" => {
                self.adaptive_h2 = match v {
                    "adaptive" => true,
                    "frozen" => false,
                    _ => return Err(bad(key, value, "adaptive or frozen")),
                }
            }
            "folds" => self.folds = parse_count(key, v, 2)?,
            "reps" => self.reps = parse_count(key, v, 1)?,
            "seed" => self.seed = v.parse().map_err(|_| bad(key, value, "a non-negative integer"))?,
            "workers" => self.workers = parse_count(key, v, 1)?,
            "criterion" => self.criterion = v.parse().map_err(|_| bad(key, value, "kcca or prediction"))?,
            "case" => {
                self.case = if v.eq_ignore_ascii_case("all") {
                    CaseSelection::All
                } else {
                    CaseSelection::One(v.parse().map_err(|_| bad(key, value, "case1, case2, case3 or all"))?)
                }
            }
            "n" => self.n = parse_count(key, v, 2)?,
            "p" => self.p = parse_count(key, v, 10)?,
            "kcca-reg" => self.kcca_reg = parse_real(key, v, 0.0, true)?,
            "ridge-reg" => self.ridge_reg = parse_real(key, v, 0.0, true)?,
            "max-iters" => self.max_iters = parse_count(key, v, 1)?,
            "tol" => self.tol = parse_real(key, v, 0.0, true)?,
            "n-slices" => self.n_slices = parse_count(key, v, 2)?,
            _ => return Err(CliError::Usage(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1))
            })?;
            self.apply(k.trim(), v).map_err(|e| {
                CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
        }
        Ok(())
    }

    /// The textual value of `key`, as accepted by [`RunConfig::apply`].
    pub fn value(&self, key: &str) -> String {
        match key {
            "input" => self.input.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "output" => self.output.display().to_string(),
            "response" => self.response.clone(),
            "method" => self.method.to_string(),
            "methods" => join(&self.methods, |m| m.to_string()),
            "q" => self.q.to_string(),
            "lambda" => format_float(self.lambda),
            "lambda-grid" => join(&self.lambda_grid, |l| format_float(*l)),
            "h1" => fmt_bandwidth(self.h1),
            "h2" => fmt_bandwidth(self.h2),
            "h3" => fmt_bandwidth(self.h3),
            "h2-mode" => if self.adaptive_h2 { "adaptive" } else { "frozen" }.to_string(),
            "folds" => self.folds.to_string(),
            "reps" => self.reps.to_string(),
            "seed" => self.seed.to_string(),
            "workers" => self.workers.to_string(),
            "criterion" => self.criterion.to_string(),
            "case" => match self.case {
                CaseSelection::All => "all".to_string(),
                CaseSelection::One(c) => c.to_string(),
            },
            "n" => self.n.to_string(),
            "p" => self.p.to_string(),
            "kcca-reg" => format_float(self.kcca_reg),
            "ridge-reg" => format_float(self.ridge_reg),
            "max-iters" => self.max_iters.to_string(),
            "tol" => format_float(self.tol),
            "n-slices" => self.n_slices.to_string(),
            _ => String::new(),
        }
    }

    /// All settings as a config file that reproduces them.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let v = self.value(key);
            if key == &"input" && v.is_empty() {
                out.push_str("# input =\n");
            } else {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }

    pub fn fit_config(&self) -> FitConfig {
        let bw = |h: Option<f64>| h.map_or(BandwidthSpec::Auto, BandwidthSpec::Fixed);
        FitConfig {
            q: self.q,
            lambda: self.lambda,
            h1: bw(self.h1),
            h2: bw(self.h2),
            h3: bw(self.h3),
            adaptive_h2: self.adaptive_h2,
            method: self.method,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            n_slices: self.n_slices,
            ..FitConfig::default()
        }
    }

    pub fn cv_settings(&self) -> CvSettings {
        CvSettings {
            kcca_reg: self.kcca_reg,
            ridge_reg: self.ridge_reg,
        }
    }

    pub fn require_input(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --input".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendered_config_round_trips() {
        let mut c = RunConfig::default();
        c.apply("lambda-grid", "0.5,2").unwrap();
        c.apply("h2", "0.3").unwrap();
        c.apply("case", "all").unwrap();
        c.apply("input", "data.csv").unwrap();
        let dir = std::env::temp_dir().join(format!("ksdr-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        fs::write(&path, c.render()).unwrap();
        let mut back = RunConfig::default();
        back.apply_file(&path).unwrap();
        assert_eq!(back, c);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply("q", "0"), Err(CliError::Usage(_))));
        assert!(c.apply("lambda", "-1").is_err());
        assert!(c.apply("method", "sir").is_err());
        assert!(c.apply("p", "5").is_err());
        assert!(c.apply("colour", "red").is_err());
        assert!(c.apply("h1", "auto").is_ok());
    }

    #[test]
    fn every_key_has_a_value() {
        let c = RunConfig::default();
        for key in KEYS.iter().filter(|k| **k != "input") {
            assert!(!c.value(key).is_empty(), "{key}");
        }
    }
}
