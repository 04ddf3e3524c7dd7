//! Configuration files, result files and the run driver behind the binary.
//!
//! Configuration is plain `key = value` text. Keys may sit under optional
//! `[geometry]`, `[system]`, `[run]`, `[solver]` or `[sweep]` headers; `#`
//! starts a comment. Every key has a default, so an empty file is valid.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::channel::{Geometry, Noise, Position};
use crate::optimizer::OptimizerSettings;
use crate::sim::{db_to_linear, run_sweep, summarize, Scheme, SimConfig, SimError, SummaryRow, SweepParameter, SweepRow, SweepSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{key}`; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax { .. } | CliError::UnknownKey { .. } | CliError::Invalid { .. } => 2,
            CliError::Sim(SimError::Config { .. }) => 2,
            CliError::Io { .. } | CliError::Sim(_) => 1,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "geometry",
        &[
            "bs_x", "bs_y", "ris_x", "ris_y", "eu_r_x", "eu_r_y", "iu_r_x", "iu_r_y", "eu_t_x", "eu_t_y", "iu_t_x",
            "iu_t_y", "exponent_info", "exponent_energy", "exponent_bs_ris",
        ],
    ),
    (
        "system",
        &[
            "m", "n_t", "power_budget", "gamma_th_db", "energy_min_db", "sigma2_info", "sigma2_energy", "lambda_t",
            "lambda_r",
        ],
    ),
    ("run", &["horizon", "runs", "seed", "modes"]),
    (
        "solver",
        &["max_ao_iters", "max_sca_iters", "max_penalty_iters", "tolerance", "num_randomizations", "mu_scale", "deadline_secs"],
    ),
    ("sweep", &["parameter", "values"]),
];

fn valid_keys() -> String {
    KEYS.iter().flat_map(|(_, ks)| ks.iter().copied()).collect::<Vec<_>>().join(", ")
}

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(_, ks)| ks.contains(&key)).map(|(s, _)| *s)
}

/// Settings as written by the user; thresholds stay in dB until
/// [`RunSpec::sim_config`].
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub geometry: Geometry,
    pub sigma2_info: f64,
    pub sigma2_energy: f64,
    pub m: usize,
    pub n_t: usize,
    pub power_budget: f64,
    pub gamma_th_db: f64,
    pub energy_min_db: f64,
    pub lambda: [f64; 2],
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub modes: Vec<Scheme>,
    pub optimizer: OptimizerSettings,
    pub sweep: Option<SweepSpec>,
}

impl Default for RunSpec {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            geometry: sim.geometry,
            sigma2_info: 1.0,
            sigma2_energy: 1.0,
            m: sim.m,
            n_t: sim.n_t,
            power_budget: sim.power_budget,
            gamma_th_db: 3.0,
            energy_min_db: -20.0,
            lambda: sim.lambda,
            horizon: sim.horizon,
            runs: sim.monte_carlo_runs,
            seed: sim.seed,
            modes: vec![Scheme::EnergySplitting],
            optimizer: sim.optimizer,
            sweep: None,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid { field: field.to_string(), reason: reason.into() }
}

fn num(field: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>().map_err(|_| invalid(field, format!("`{v}` is not a number")))
}

fn int<T: std::str::FromStr>(field: &str, v: &str) -> Result<T, CliError> {
    v.parse::<T>().map_err(|_| invalid(field, format!("`{v}` is not a non-negative integer")))
}

pub fn parse_modes(v: &str) -> Result<Vec<Scheme>, CliError> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s: Scheme = part.parse().map_err(|e: String| invalid("modes", e))?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(invalid("modes", "no modes given"));
    }
    Ok(out)
}

fn parse_values(v: &str) -> Result<Vec<f64>, CliError> {
    let vals = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num("values", s))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.is_empty() {
        return Err(invalid("values", "no values given"));
    }
    Ok(vals)
}

/// Parses `parameter=v1,v2,...`.
pub fn parse_sweep(s: &str) -> Result<SweepSpec, CliError> {
    let (p, v) = s.split_once('=').ok_or_else(|| invalid("sweep", format!("`{s}` is not of the form parameter=v1,v2")))?;
    let parameter = p.parse::<SweepParameter>().map_err(|e| invalid("parameter", e))?;
    Ok(SweepSpec { parameter, values: parse_values(v)? })
}

impl RunSpec {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let g = &mut self.geometry;
        let pos = |p: &mut Position, x: bool, field: &str| -> Result<(), CliError> {
            let val = num(field, v)?;
            if x {
                p.x = val;
            } else {
                p.y = val;
            }
            Ok(())
        };
        match key {
            "bs_x" => pos(&mut g.bs, true, key)?,
            "bs_y" => pos(&mut g.bs, false, key)?,
            "ris_x" => pos(&mut g.ris, true, key)?,
            "ris_y" => pos(&mut g.ris, false, key)?,
            "eu_r_x" => pos(&mut g.eu_r, true, key)?,
            "eu_r_y" => pos(&mut g.eu_r, false, key)?,
            "iu_r_x" => pos(&mut g.iu_r, true, key)?,
            "iu_r_y" => pos(&mut g.iu_r, false, key)?,
            "eu_t_x" => pos(&mut g.eu_t, true, key)?,
            "eu_t_y" => pos(&mut g.eu_t, false, key)?,
            "iu_t_x" => pos(&mut g.iu_t, true, key)?,
            "iu_t_y" => pos(&mut g.iu_t, false, key)?,
            "exponent_info" => g.exponent_info = num(key, v)?,
            "exponent_energy" => g.exponent_energy = num(key, v)?,
            "exponent_bs_ris" => g.exponent_bs_ris = num(key, v)?,
            "m" => self.m = int(key, v)?,
            "n_t" => self.n_t = int(key, v)?,
            "power_budget" => self.power_budget = num(key, v)?,
            "gamma_th_db" => self.gamma_th_db = num(key, v)?,
            "energy_min_db" => self.energy_min_db = num(key, v)?,
            "sigma2_info" => self.sigma2_info = num(key, v)?,
            "sigma2_energy" => self.sigma2_energy = num(key, v)?,
            "lambda_t" => self.lambda[0] = num(key, v)?,
            "lambda_r" => self.lambda[1] = num(key, v)?,
            "horizon" => self.horizon = int(key, v)?,
            "runs" => self.runs = int(key, v)?,
            "seed" => self.seed = int(key, v)?,
            "modes" => self.modes = parse_modes(v)?,
            "max_ao_iters" => self.optimizer.max_ao_iters = int(key, v)?,
            "max_sca_iters" => self.optimizer.max_sca_iters = int(key, v)?,
            "max_penalty_iters" => self.optimizer.max_penalty_iters = int(key, v)?,
            "tolerance" => self.optimizer.tolerance = num(key, v)?,
            "num_randomizations" => self.optimizer.num_randomizations = int(key, v)?,
            "mu_scale" => self.optimizer.mu_scale = num(key, v)?,
            "deadline_secs" => {
                let d = num(key, v)?;
                if !(d > 0.0 && d.is_finite()) {
                    return Err(invalid(key, "must be positive"));
                }
                self.optimizer.deadline = Duration::from_secs_f64(d);
            }
            "parameter" => {
                let parameter = v.parse::<SweepParameter>().map_err(|e| invalid(key, e))?;
                let values = self.sweep.take().map(|s| s.values).unwrap_or_default();
                self.sweep = Some(SweepSpec { parameter, values });
            }
            "values" => {
                let values = parse_values(v)?;
                match &mut self.sweep {
                    Some(s) => s.values = values,
                    None => self.sweep = Some(SweepSpec { parameter: SweepParameter::GammaThDb, values }),
                }
            }
            _ => return Err(CliError::UnknownKey { key: key.to_string(), valid: valid_keys() }),
        }
        Ok(())
    }

    /// Resolved simulation settings for the first selected mode. Threshold
    /// conversion from dB happens here and nowhere else.
    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let cfg = SimConfig {
            geometry: self.geometry.clone(),
            noise: Noise { info: [self.sigma2_info; 2], energy: [self.sigma2_energy; 2] },
            m: self.m,
            n_t: self.n_t,
            horizon: self.horizon,
            lambda: self.lambda,
            gamma_th: db_to_linear(self.gamma_th_db),
            power_budget: self.power_budget,
            energy_min: db_to_linear(self.energy_min_db),
            scheme: self.modes.first().copied().unwrap_or(Scheme::EnergySplitting),
            seed: self.seed,
            monte_carlo_runs: self.runs,
            optimizer: self.optimizer.clone(),
        };
        if !self.gamma_th_db.is_finite() {
            return Err(invalid("gamma_th_db", "must be finite"));
        }
        if self.energy_min_db.is_nan() || self.energy_min_db == f64::INFINITY {
            return Err(invalid("energy_min_db", "must be finite or -inf"));
        }
        if self.optimizer.max_ao_iters == 0 {
            return Err(invalid("max_ao_iters", "must be at least 1"));
        }
        if self.optimizer.max_sca_iters == 0 {
            return Err(invalid("max_sca_iters", "must be at least 1"));
        }
        if !(self.optimizer.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if !(self.optimizer.mu_scale > 0.0) {
            return Err(invalid("mu_scale", "must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid("values", "sweep parameter given without values"));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every setting in the same format [`parse_config`] reads.
    pub fn to_config_text(&self) -> String {
        let g = &self.geometry;
        let o = &self.optimizer;
        let mut t = String::new();
        let modes: Vec<_> = self.modes.iter().map(|m| m.label()).collect();
        let _ = writeln!(t, "[geometry]");
        for (k, v) in [
            ("bs_x", g.bs.x),
            ("bs_y", g.bs.y),
            ("ris_x", g.ris.x),
            ("ris_y", g.ris.y),
            ("eu_r_x", g.eu_r.x),
            ("eu_r_y", g.eu_r.y),
            ("iu_r_x", g.iu_r.x),
            ("iu_r_y", g.iu_r.y),
            ("eu_t_x", g.eu_t.x),
            ("eu_t_y", g.eu_t.y),
            ("iu_t_x", g.iu_t.x),
            ("iu_t_y", g.iu_t.y),
            ("exponent_info", g.exponent_info),
            ("exponent_energy", g.exponent_energy),
            ("exponent_bs_ris", g.exponent_bs_ris),
        ] {
            let _ = writeln!(t, "{k} = {v}");
        }
        let _ = writeln!(t, "\n[system]\nm = {}\nn_t = {}\npower_budget = {}", self.m, self.n_t, self.power_budget);
        let _ = writeln!(t, "gamma_th_db = {}\nenergy_min_db = {}", self.gamma_th_db, self.energy_min_db);
        let _ = writeln!(t, "sigma2_info = {}\nsigma2_energy = {}", self.sigma2_info, self.sigma2_energy);
        let _ = writeln!(t, "lambda_t = {}\nlambda_r = {}", self.lambda[0], self.lambda[1]);
        let _ = writeln!(t, "\n[run]\nhorizon = {}\nruns = {}\nseed = {}\nmodes = {}", self.horizon, self.runs, self.seed, modes.join(","));
        let _ = writeln!(
            t,
            "\n[solver]\nmax_ao_iters = {}\nmax_sca_iters = {}\nmax_penalty_iters = {}\ntolerance = {}\nnum_randomizations = {}\nmu_scale = {}\ndeadline_secs = {}",
            o.max_ao_iters,
            o.max_sca_iters,
            o.max_penalty_iters,
            o.tolerance,
            o.num_randomizations,
            o.mu_scale,
            o.deadline.as_secs_f64()
        );
        if let Some(s) = &self.sweep {
            let vals: Vec<_> = s.values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(t, "\n[sweep]\nparameter = {}\nvalues = {}", s.parameter, vals.join(","));
        }
        t
    }
}

/// Parses configuration text on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunSpec, CliError> {
    let mut spec = RunSpec::default();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::Syntax { line: n + 1, message: format!("unterminated section header `{line}`") })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(CliError::Syntax {
                    line: n + 1,
                    message: format!("unknown section `{name}` (expected geometry, system, run, solver or sweep)"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Syntax { line: n + 1, message: format!("expected `key = value`, got `{line}`") })?;
        let (k, v) = (k.trim(), v.trim());
        match (section_of(k), section.as_deref()) {
            (None, _) => return Err(CliError::UnknownKey { key: k.to_string(), valid: valid_keys() }),
            (Some(home), Some(cur)) if home != cur => {
                return Err(CliError::Syntax { line: n + 1, message: format!("key `{k}` belongs in [{home}], not [{cur}]") });
            }
            _ => {}
        }
        spec.set(k, v)?;
    }
    spec.sim_config()?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<RunSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub const RESULTS_HEADER: &str = "mode,parameter,value,run_id,avg_sum_aoi,min_harvested_energy,delivery_rate_t,delivery_rate_r,infeasible_fraction,mean_ao_iterations";
pub const SUMMARY_HEADER: &str = "mode,parameter,value,runs,mean_avg_sum_aoi,stderr_avg_sum_aoi";

fn param_cells(p: Option<SweepParameter>, v: f64) -> (String, String) {
    match p {
        Some(p) => (p.label().to_string(), v.to_string()),
        None => ("none".to_string(), String::new()),
    }
}

pub fn results_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let (p, v) = param_cells(r.parameter, r.value);
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{p},{v},{},{},{},{},{},{},{}",
            r.scheme,
            r.run,
            m.avg_sum_aoi,
            m.min_harvested_energy,
            m.delivery_rate[0],
            m.delivery_rate[1],
            m.infeasible_slot_fraction,
            m.mean_ao_iterations
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let (p, v) = param_cells(r.parameter, r.value);
        let _ = writeln!(out, "{},{p},{v},{},{},{}", r.scheme, r.runs, r.mean_avg_sum_aoi, r.stderr_avg_sum_aoi);
    }
    out
}

/// What was run and where the outputs went.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub spec: RunSpec,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub version: &'static str,
    pub created_unix: u64,
    pub rows: usize,
}

impl RunManifest {
    /// Comment header followed by the full resolved configuration, so a
    /// manifest can be fed back in as a configuration file.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "# star-ris-aoi {}", self.version);
        let _ = writeln!(t, "# created_unix = {}", self.created_unix);
        if let Some(p) = &self.config_path {
            let _ = writeln!(t, "# config = {}", p.display());
        }
        let _ = writeln!(t, "# results = results.csv ({} rows), summary = summary.csv", self.rows);
        t.push_str(&self.spec.to_config_text());
        t
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|source| CliError::Io { path, source })
}

/// Runs every mode and sweep value in `spec` and writes `results.csv`,
/// `summary.csv` and `manifest.txt` into `out_dir`.
pub fn execute(spec: &RunSpec, config_path: Option<&Path>, out_dir: &Path) -> Result<RunManifest, CliError> {
    let base = spec.sim_config()?;
    let rows = run_sweep(&base, spec.sweep.as_ref(), &spec.modes)?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
    write(out_dir.join("results.csv"), &results_csv(&rows))?;
    write(out_dir.join("summary.csv"), &summary_csv(&summarize(&rows)))?;
    let manifest = RunManifest {
        spec: spec.clone(),
        config_path: config_path.map(Path::to_path_buf),
        out_dir: out_dir.to_path_buf(),
        version: env!("CARGO_PKG_VERSION"),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        rows: rows.len(),
    };
    write(out_dir.join("manifest.txt"), &manifest.to_text())?;
    Ok(manifest)
}
