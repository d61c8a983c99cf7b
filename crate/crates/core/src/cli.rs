//! Command-line front end: TOML configuration, subcommands and artifact output.
//!
//! Configuration schema (every key optional):
//!
//! ```toml
//! [model]
//! kind = "discrete"          # discrete | model_a | model_b | two_site
//! lower = [0, 0]             # box corners (discrete, model_a, model_b)
//! upper = [7, 7]
//! W = [[1.0, 0.0], [0.0, 2.0]]   # model_a: positive definite single-site matrix
//! L = [2, 2]                 # model_b: tile periods
//! f = [1.0, 0.5, 2.0, 1.5]   # model_b: single-site profile on C_0, length prod(L)
//! a = 1.0                    # two_site couplings and truncation radius
//! b = 0.0
//! R = 12
//!
//! [disorder]
//! law = "uniform"            # uniform | truncated_gaussian
//! lo = 0.0
//! hi = 1.0
//! mean = 0.5                 # truncated_gaussian only
//! sd = 0.25
//! seed = 0
//!
//! [experiment]
//! trials = 100
//! tau = 1e-10
//! trial = 0                  # disorder stream used by spectrum and bs
//! z = [[0.0, 50.0], [0.0, 100.0], [0.0, 200.0]]
//! z0 = [1.0, 1.0]
//! lambda = 1.0
//! L_list = [1, 2, 3, 4, 5, 6]
//! mu = [1.2, 1.7]            # optional; drawn from [1, 2] when absent
//! require_simple = false
//!
//! [output]
//! dir = "out"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::birman_schwinger::{bs_block, bs_correspondence, case_iii_splitting, DEFAULT_GAP_TOL};
use crate::cyclicity::{two_tile_span, two_tile_span_auto};
use crate::error::Error;
use crate::experiments::{
    combes_thomas_fit, multiplicity_census, sample_spectrum, verify_identity_suite, IdentityReference, DEFAULT_TAU,
};
use crate::lattice::{LatticeBox, TileGeometry};
use crate::linalg::{c64, is_simple, RMatrix, C64};
use crate::models::{
    sample_omega, DisorderLaw, DisorderSpec, ModelKind, ModelSpec, Potential, SingleSiteMatrix,
    TWO_SITE_MIN_RADIUS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bslab", version, about = "Eigenvalue simplicity laboratory for Anderson-type models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `disorder.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel trials.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Run the identity suite and write its ledger.
    VerifyIdentities,
    /// Spectrum, gaps and clusters of one disorder sample.
    Spectrum,
    /// Birman-Schwinger blocks at the origin along the z list.
    Bs,
    /// Multiplicity census over many disorder samples.
    Census,
    /// Off-diagonal resolvent decay fit.
    Decay,
    /// Splitting of the near-degenerate pair for the two-site model.
    Splitting,
    /// Two-tile span check for Model B.
    Span,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::Spectrum => "spectrum",
            Command::Bs => "bs",
            Command::Census => "census",
            Command::Decay => "decay",
            Command::Splitting => "splitting",
            Command::Span => "span",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub tau: f64,
    pub trial: u64,
    pub z: Vec<[f64; 2]>,
    pub z0: [f64; 2],
    pub lambda: f64,
    #[serde(rename = "L_list")]
    pub l_list: Vec<i64>,
    pub mu: Option<Vec<f64>>,
    pub require_simple: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            tau: DEFAULT_TAU,
            trial: 0,
            z: vec![[0.0, 50.0], [0.0, 100.0], [0.0, 200.0]],
            z0: [1.0, 1.0],
            lambda: 1.0,
            l_list: (1..=6).collect(),
            mu: None,
            require_simple: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub disorder: DisorderSpec,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn z_list(&self) -> Vec<C64> {
        self.experiment.z.iter().map(|z| c64(z[0], z[1])).collect()
    }

    pub fn z0(&self) -> C64 {
        c64(self.experiment.z0[0], self.experiment.z0[1])
    }
}

/// All problems found in a configuration, each prefixed by its key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

const SECTIONS: &[&str] = &["model", "disorder", "experiment", "output"];
const MODEL_KEYS: &[&str] = &["kind", "lower", "upper", "W", "L", "f", "a", "b", "R"];
const DISORDER_KEYS: &[&str] = &["law", "lo", "hi", "mean", "sd", "seed"];
const EXPERIMENT_KEYS: &[&str] =
    &["trials", "tau", "trial", "z", "z0", "lambda", "L_list", "mu", "require_simple"];
const OUTPUT_KEYS: &[&str] = &["dir"];

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    errors: &'a mut Vec<String>,
}

fn suggestion(key: &str, allowed: &[&str]) -> String {
    allowed
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), *k))
        .filter(|(s, _)| *s > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map_or_else(String::new, |(_, k)| format!(" (did you mean \"{k}\"?)"))
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Section<'a> {
    fn check_keys(&mut self, allowed: &[&str]) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    self.errors.push(format!(
                        "{}.{key}: unknown key{}",
                        self.name,
                        suggestion(key, allowed)
                    ));
                }
            }
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    fn fail(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn mismatch(&mut self, key: &str, expected: &str, v: &Value) {
        self.fail(key, format!("expected {expected}, found {}", type_name(v)));
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        match self.raw(key) {
            None => default,
            Some(v) => as_f64(v).unwrap_or_else(|| {
                self.mismatch(key, "a number", v);
                default
            }),
        }
    }

    fn int(&mut self, key: &str, default: i64) -> i64 {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(i)) => *i,
            Some(v) => {
                self.mismatch(key, "an integer", v);
                default
            }
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.mismatch(key, "a boolean", v);
                default
            }
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        match self.raw(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                self.mismatch(key, "a string", v);
                default.to_string()
            }
        }
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let Value::Array(items) = v else {
            self.mismatch(key, "an array of numbers", v);
            return None;
        };
        let out: Option<Vec<f64>> = items.iter().map(as_f64).collect();
        if out.is_none() {
            self.fail(key, "expected an array of numbers");
        }
        out
    }

    fn int_list(&mut self, key: &str) -> Option<Vec<i64>> {
        let v = self.raw(key)?;
        let Value::Array(items) = v else {
            self.mismatch(key, "an array of integers", v);
            return None;
        };
        let out: Option<Vec<i64>> = items.iter().map(|x| x.as_integer()).collect();
        if out.is_none() {
            self.fail(key, "expected an array of integers");
        }
        out
    }

    fn matrix(&mut self, key: &str) -> Option<Vec<Vec<f64>>> {
        let v = self.raw(key)?;
        let rows: Option<Vec<Vec<f64>>> = v
            .as_array()
            .and_then(|rows| rows.iter().map(|r| r.as_array()?.iter().map(as_f64).collect()).collect());
        if rows.is_none() {
            self.fail(key, "expected an array of arrays of numbers");
        }
        rows
    }

    fn unused(&mut self, keys: &[&str], kind: &str) {
        for &k in keys {
            if self.has(k) {
                self.fail(k, format!("not used by kind = \"{kind}\""));
            }
        }
    }
}

fn section<'a>(root: &'a Table, name: &'static str, errors: &'a mut Vec<String>) -> Section<'a> {
    let table = match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(v) => {
            errors.push(format!("{name}: expected a table, found {}", type_name(v)));
            None
        }
    };
    Section { name, table, errors }
}

fn parse_model(s: &mut Section) -> Option<ModelSpec> {
    s.check_keys(MODEL_KEYS);
    let kind = s.string("kind", "discrete");
    let lattice = |s: &mut Section| -> Option<LatticeBox> {
        let lower = s.int_list("lower").unwrap_or_else(|| vec![0, 0]);
        let upper = s.int_list("upper").unwrap_or_else(|| vec![7, 7]);
        match LatticeBox::new(lower, upper) {
            Ok(b) => Some(b),
            Err(e) => {
                s.fail("upper", e);
                None
            }
        }
    };
    match kind.as_str() {
        "discrete" => {
            s.unused(&["W", "L", "f", "a", "b", "R"], &kind);
            Some(ModelSpec { kind: ModelKind::Discrete, lattice: lattice(s)? })
        }
        "model_a" => {
            s.unused(&["L", "f", "a", "b", "R"], &kind);
            let b = lattice(s);
            let Some(rows) = s.matrix("W") else {
                if !s.has("W") {
                    s.fail("W", "required for kind = \"model_a\"");
                }
                return None;
            };
            let k = rows.len();
            if k == 0 || rows.iter().any(|r| r.len() != k) {
                s.fail("W", "must be a non-empty square matrix");
                return None;
            }
            let m = RMatrix::from_fn(k, k, |i, j| rows[i][j]);
            if (0..k).any(|i| (0..k).any(|j| m[(i, j)] != m[(j, i)])) {
                s.fail("W", "must be symmetric");
                return None;
            }
            match SingleSiteMatrix::new(&m) {
                Ok(w) => Some(ModelSpec { kind: ModelKind::ModelA { w }, lattice: b? }),
                Err(e) => {
                    s.fail("W", e);
                    None
                }
            }
        }
        "model_b" => {
            s.unused(&["W", "a", "b", "R"], &kind);
            let b = lattice(s);
            let period = s.int_list("L").unwrap_or_else(|| vec![2, 2]);
            let geom = match TileGeometry::new(period.clone()) {
                Ok(g) => g,
                Err(e) => {
                    s.fail("L", e);
                    return None;
                }
            };
            let f = s.f64_list("f").unwrap_or_else(|| vec![1.0; geom.tile_size()]);
            if f.len() != geom.tile_size() {
                s.fail("f", format!("needs {} entries (product of L), found {}", geom.tile_size(), f.len()));
                return None;
            }
            if f.iter().any(|&x| !(x > 0.0)) {
                s.fail("f", "entries must be strictly positive");
                return None;
            }
            let b = b?;
            if geom.dim() != b.dim() {
                s.fail("L", format!("has {} entries but the box is {}-dimensional", geom.dim(), b.dim()));
                return None;
            }
            Some(ModelSpec { kind: ModelKind::ModelB { period, f }, lattice: b })
        }
        "two_site" => {
            s.unused(&["W", "L", "f", "lower", "upper"], &kind);
            let a = s.f64("a", 1.0);
            let b = s.f64("b", 0.0);
            let radius = s.int("R", 12);
            if radius < TWO_SITE_MIN_RADIUS {
                s.fail("R", format!("must be at least {TWO_SITE_MIN_RADIUS}"));
                return None;
            }
            let lattice = LatticeBox::cube(2, -radius, radius + 1).ok()?;
            Some(ModelSpec { kind: ModelKind::TwoSite { a, b, radius }, lattice })
        }
        other => {
            s.fail(
                "kind",
                format!("unknown model kind \"{other}\"{}", suggestion(other, &["discrete", "model_a", "model_b", "two_site"])),
            );
            None
        }
    }
}

fn parse_disorder(s: &mut Section) -> Option<DisorderSpec> {
    s.check_keys(DISORDER_KEYS);
    let law_name = s.string("law", "uniform");
    let lo = s.f64("lo", 0.0);
    let hi = s.f64("hi", 1.0);
    let seed = s.int("seed", 0);
    if seed < 0 {
        s.fail("seed", "must be non-negative");
    }
    let law = match law_name.as_str() {
        "uniform" => {
            s.unused(&["mean", "sd"], "uniform");
            DisorderLaw::Uniform { lo, hi }
        }
        "truncated_gaussian" => {
            let mean = s.f64("mean", 0.5 * (lo + hi));
            let sd = s.f64("sd", 1.0);
            DisorderLaw::TruncatedGaussian { mean, sd, lo, hi }
        }
        other => {
            s.fail("law", format!("unknown law \"{other}\"{}", suggestion(other, &["uniform", "truncated_gaussian"])));
            return None;
        }
    };
    if let Err(e) = law.validate() {
        s.fail("law", e);
        return None;
    }
    Some(DisorderSpec { law, master_seed: seed.max(0) as u64 })
}

fn parse_experiment(s: &mut Section) -> ExperimentConfig {
    s.check_keys(EXPERIMENT_KEYS);
    let d = ExperimentConfig::default();
    let trials = s.int("trials", d.trials as i64);
    if trials < 1 {
        s.fail("trials", "must be at least 1");
    }
    let tau = s.f64("tau", d.tau);
    if !(tau > 0.0) {
        s.fail("tau", "must be positive");
    }
    let trial = s.int("trial", 0);
    if trial < 0 {
        s.fail("trial", "must be non-negative");
    }
    let pair = |s: &mut Section, key: &str, v: Vec<f64>| -> Option<[f64; 2]> {
        if v.len() == 2 {
            Some([v[0], v[1]])
        } else {
            s.fail(key, "complex numbers are written [re, im]");
            None
        }
    };
    let z = match s.matrix("z") {
        Some(rows) => rows.into_iter().filter_map(|r| pair(s, "z", r)).collect(),
        None => d.z.clone(),
    };
    if z.is_empty() {
        s.fail("z", "must not be empty");
    }
    let z0 = match s.f64_list("z0") {
        Some(v) => pair(s, "z0", v).unwrap_or(d.z0),
        None => d.z0,
    };
    if !(z0[1] > 0.0) {
        s.fail("z0", "imaginary part must be positive");
    }
    let lambda = s.f64("lambda", d.lambda);
    if lambda == 0.0 {
        s.fail("lambda", "must be non-zero");
    }
    let l_list = s.int_list("L_list").unwrap_or(d.l_list);
    let mu = s.f64_list("mu");
    let require_simple = s.bool("require_simple", false);
    ExperimentConfig {
        trials: trials.max(1) as usize,
        tau,
        trial: trial.max(0) as u64,
        z,
        z0,
        lambda,
        l_list,
        mu,
        require_simple,
    }
}

/// Parses and validates a configuration, reporting every violation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError { violations: vec![format!("syntax: {}", e.message())] })?;
    let mut errors = Vec::new();
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            errors.push(format!("{key}: unknown section{}", suggestion(key, SECTIONS)));
        }
    }
    let model = parse_model(&mut section(&root, "model", &mut errors));
    let disorder = parse_disorder(&mut section(&root, "disorder", &mut errors));
    let experiment = parse_experiment(&mut section(&root, "experiment", &mut errors));
    let mut out = section(&root, "output", &mut errors);
    out.check_keys(OUTPUT_KEYS);
    let dir = PathBuf::from(out.string("dir", "out"));
    match (model, disorder) {
        (Some(model), Some(disorder)) if errors.is_empty() => {
            Ok(RunConfig { model, disorder, experiment, output: OutputConfig { dir } })
        }
        _ => Err(ConfigError { violations: errors }),
    }
}

/// Checks that only make sense for a particular subcommand.
pub fn validate_for(cmd: Command, cfg: &RunConfig) -> Result<(), ConfigError> {
    let mut v = Vec::new();
    let kind = &cfg.model.kind;
    match cmd {
        Command::Splitting => {
            if let ModelKind::TwoSite { a, b, .. } = kind {
                if a == b {
                    v.push("model.b: splitting needs a != b".to_string());
                }
            } else {
                v.push("model.kind: splitting needs kind = \"two_site\"".to_string());
            }
            if cfg.experiment.z.iter().any(|z| c64(z[0], z[1]).norm() < 10.0) {
                v.push("experiment.z: splitting needs |z| >= 10".to_string());
            }
        }
        Command::Span => {
            if !matches!(kind, ModelKind::ModelB { .. }) {
                v.push("model.kind: span needs kind = \"model_b\"".to_string());
            }
        }
        Command::Decay => {
            if matches!(kind, ModelKind::TwoSite { .. }) {
                v.push("model.kind: decay needs a random model".to_string());
            }
            if cfg.experiment.z0[1] < 1.0 {
                v.push("experiment.z0: decay fits need Im z0 >= 1".to_string());
            }
            let l = &cfg.experiment.l_list;
            if l.len() < 4 || l[0] < 1 || l.windows(2).any(|w| w[1] <= w[0]) {
                v.push("experiment.L_list: needs at least four positive, increasing distances".to_string());
            }
        }
        Command::Bs => {
            if cfg.experiment.z.iter().any(|z| z[1] <= 0.0) {
                v.push("experiment.z: Birman-Schwinger blocks are evaluated in the upper half-plane".to_string());
            }
        }
        _ => {}
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(ConfigError { violations: v })
    }
}

/// One output file.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(verifies: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = format!("# verifies: {verifies}\n{}\n", header.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn json_artifact(verifies: &str, body: serde_json::Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("verifies".into(), json!(verifies));
    if let serde_json::Value::Object(m) = body {
        doc.extend(m);
    } else {
        doc.insert("result".into(), body);
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("serializable");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("serializable")
}

fn exit_for(error: &Error) -> i32 {
    match error {
        Error::Domain(_) | Error::Precondition(_) | Error::SizeMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn origin_split(cfg: &RunConfig) -> crate::Result<(RMatrix, RMatrix, Potential)> {
    let omega = sample_omega(&cfg.disorder, cfg.model.disorder_count(), cfg.experiment.trial);
    let h = cfg.model.build(&omega)?;
    let v = cfg.model.origin_potential()?;
    let mut h0 = h.matrix.clone();
    for &i in &v.support {
        for &j in &v.support {
            h0[(i, j)] -= h.potential[(i, j)];
        }
    }
    Ok((h.matrix, h0, v))
}

/// Runs a validated configuration and returns artifacts without touching disk.
pub fn execute(cmd: Command, cfg: &RunConfig, workers: Option<usize>) -> crate::Result<RunOutcome> {
    let mut artifacts = Vec::new();
    let (passed, summary) = match cmd {
        Command::VerifyIdentities => {
            let ledger = verify_identity_suite(&IdentityReference::default(), cfg.disorder.master_seed, workers)?;
            let mut summary = String::new();
            for l in &ledger.lines {
                let _ = writeln!(
                    summary,
                    "{} {} deviation={} tolerance={}",
                    if l.passed { "PASS" } else { "FAIL" },
                    l.id,
                    fmt_num(l.deviation),
                    fmt_num(l.tolerance)
                );
            }
            artifacts.push(Artifact {
                name: "ledger.json".into(),
                contents: json_artifact(
                    "exact compressions, expansions and structural identities of the simplicity argument",
                    to_value(&ledger),
                ),
            });
            (ledger.passed, summary)
        }
        Command::Spectrum => {
            let r = sample_spectrum(&cfg.model, &cfg.disorder, cfg.experiment.trial, cfg.experiment.tau)?;
            artifacts.push(Artifact {
                name: "spectrum.csv".into(),
                contents: csv(
                    "eigenvalues of one disorder sample",
                    &["index", "eigenvalue"],
                    r.eigenvalues.iter().enumerate().map(|(i, e)| vec![i.to_string(), fmt_num(*e)]),
                ),
            });
            artifacts.push(Artifact {
                name: "spectrum.json".into(),
                contents: json_artifact(
                    "simplicity of the spectrum of one disorder sample",
                    json!({
                        "min_gap": r.min_gap,
                        "relative_min_gap": r.relative_min_gap,
                        "max_cluster": r.max_cluster(),
                        "degenerate_clusters": r.degenerate_clusters(),
                        "log_discriminant": r.log_discriminant,
                    }),
                ),
            });
            let simple = r.max_cluster() < 2;
            (
                simple || !cfg.experiment.require_simple,
                format!("min relative gap {}, largest cluster {}\n", fmt_num(r.relative_min_gap), r.max_cluster()),
            )
        }
        Command::Bs => {
            let (_, h0, v) = origin_split(cfg)?;
            let mut rows = Vec::new();
            let mut ok = true;
            for z in cfg.z_list() {
                let g = bs_block(&h0, &v, z)?;
                let s = is_simple(&g.block, DEFAULT_GAP_TOL)?;
                let herglotz = g.herglotz_margin()?;
                ok &= herglotz >= -1e-12;
                rows.push(vec![
                    fmt_num(z.re),
                    fmt_num(z.im),
                    fmt_num(s.min_gap),
                    fmt_num(s.min_gap / (s.diameter + 1.0)),
                    s.simple.to_string(),
                    fmt_num(herglotz),
                ]);
            }
            let lambda = cfg.experiment.lambda;
            let corr = bs_correspondence(&(&h0 + &v.full * lambda), &h0, &v, lambda)?;
            ok &= corr.max_residual() < 1e-8;
            artifacts.push(Artifact {
                name: "bs.csv".into(),
                contents: csv(
                    "Birman-Schwinger block at the origin: simplicity and Herglotz property",
                    &["z_re", "z_im", "min_gap", "normalized_gap", "simple", "herglotz_margin"],
                    rows,
                ),
            });
            artifacts.push(Artifact {
                name: "bs.json".into(),
                contents: json_artifact(
                    "eigenvector correspondence between H_0 + lambda V and G(E) + 1/lambda",
                    to_value(&corr),
                ),
            });
            (ok, format!("correspondence max residual {}\n", fmt_num(corr.max_residual())))
        }
        Command::Census => {
            let c = multiplicity_census(
                &cfg.model,
                &cfg.disorder,
                cfg.experiment.trials,
                cfg.experiment.tau,
                workers,
            )?;
            artifacts.push(Artifact {
                name: "census.csv".into(),
                contents: csv(
                    "per-trial eigenvalue gaps and multiplicity clusters",
                    &["trial", "min_gap", "cluster_count"],
                    c.records.iter().map(|r| vec![r.trial.to_string(), fmt_num(r.min_gap), r.cluster_count.to_string()]),
                ),
            });
            artifacts.push(Artifact {
                name: "census.json".into(),
                contents: json_artifact(
                    "empirical frequency of degenerate eigenvalues",
                    json!({
                        "trials": c.trials,
                        "tau": c.tau,
                        "degenerate_trials": c.degenerate_trials,
                        "degenerate_fraction": c.degenerate_fraction,
                        "upper_bound_95": c.upper_bound_95,
                        "histogram": to_value(&c.histogram),
                    }),
                ),
            });
            (
                c.degenerate_trials == 0 || !cfg.experiment.require_simple,
                format!("{} of {} trials degenerate\n", c.degenerate_trials, c.trials),
            )
        }
        Command::Decay => {
            let omega = sample_omega(&cfg.disorder, cfg.model.disorder_count(), cfg.experiment.trial);
            let h = cfg.model.build(&omega)?;
            let geom = match &cfg.model.kind {
                ModelKind::ModelB { period, .. } => TileGeometry::new(period.clone())?,
                _ => TileGeometry::new(vec![1; cfg.model.lattice.dim()])?,
            };
            let fit = combes_thomas_fit(&h, &geom, cfg.z0(), &cfg.experiment.l_list)?;
            artifacts.push(Artifact {
                name: "decay.csv".into(),
                contents: csv(
                    "exponential off-diagonal decay of the resolvent",
                    &["L", "norm"],
                    fit.distances.iter().zip(&fit.norms).map(|(l, n)| vec![l.to_string(), fmt_num(*n)]),
                ),
            });
            artifacts.push(Artifact {
                name: "decay.json".into(),
                contents: json_artifact("log-linear fit of annulus resolvent norms", to_value(&fit)),
            });
            (
                fit.eta > 0.0 && fit.r_squared >= 0.99 && fit.monotone,
                format!("eta {} r^2 {}\n", fmt_num(fit.eta), fmt_num(fit.r_squared)),
            )
        }
        Command::Splitting => {
            let ModelKind::TwoSite { a, b, radius } = cfg.model.kind else {
                unreachable!("validated")
            };
            let t = case_iii_splitting(a, b, &cfg.z_list(), radius)?;
            let dev: Vec<f64> = t.rows.iter().map(|r| (r.gap_ratio - 1.0).abs()).collect();
            let ok = dev.windows(2).all(|w| w[1] < w[0])
                && t.rows.iter().all(|r| r.truncation_change < 1e-8);
            artifacts.push(Artifact {
                name: "splitting.csv".into(),
                contents: csv(
                    "splitting of the near-degenerate pair as +-(a-b)/z^3",
                    &[
                        "z_re",
                        "z_im",
                        "gap",
                        "gap_ratio",
                        "relative_deviation",
                        "schur_disagreement",
                        "truncation_change",
                    ],
                    t.rows.iter().map(|r| {
                        vec![
                            fmt_num(r.z_re),
                            fmt_num(r.z_im),
                            fmt_num(r.gap),
                            fmt_num(r.gap_ratio),
                            fmt_num(r.relative_deviation),
                            fmt_num(r.schur_disagreement),
                            fmt_num(r.truncation_change),
                        ]
                    }),
                ),
            });
            (ok, format!("gap ratios {:?}\n", t.rows.iter().map(|r| r.gap_ratio).collect::<Vec<_>>()))
        }
        Command::Span => {
            let ModelKind::ModelB { period, f } = &cfg.model.kind else { unreachable!("validated") };
            let geom = TileGeometry::new(period.clone())?;
            let c = vec![0i64; period.len()];
            let mut cp = c.clone();
            cp[0] = -1;
            let r = match &cfg.experiment.mu {
                Some(mu) => two_tile_span(&geom, &c, &cp, f, cfg.z0(), mu)?,
                None => two_tile_span_auto(&geom, &c, &cp, f, cfg.z0(), cfg.disorder.master_seed)?,
            };
            artifacts.push(Artifact {
                name: "span.json".into(),
                contents: json_artifact(
                    "span of two-tile resolvent blocks over the coupling mu",
                    to_value(&r),
                ),
            });
            (r.full(), format!("rank {} of {}\n", r.achieved_rank, r.target_dim))
        }
    };
    Ok(RunOutcome { exit_code: if passed { EXIT_OK } else { EXIT_ASSERTION }, artifacts, summary })
}

/// Manifest describing a run: resolved configuration, its hash, seed and version.
pub fn manifest(cmd: Command, cfg: &RunConfig, artifacts: &[Artifact], exit_code: i32) -> String {
    let config = to_value(cfg);
    let config_text = serde_json::to_string(&config).expect("serializable");
    let hash = Sha256::digest(config_text.as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let files: BTreeMap<&str, String> = artifacts
        .iter()
        .map(|a| {
            let h = Sha256::digest(a.contents.as_bytes());
            (a.name.as_str(), h.iter().map(|b| format!("{b:02x}")).collect())
        })
        .collect();
    let doc = json!({
        "tool": "bslab",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "seed": cfg.disorder.master_seed,
        "config_sha256": hex,
        "config": config,
        "artifacts": files,
        "exit_code": exit_code,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

fn write_artifacts(dir: &Path, cmd: Command, cfg: &RunConfig, outcome: &RunOutcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    std::fs::write(dir.join("manifest.json"), manifest(cmd, cfg, &outcome.artifacts, outcome.exit_code))
}

/// Full CLI run; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        },
        None => String::new(),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.disorder.master_seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.clone();
    }
    if let Err(e) = validate_for(cli.command, &cfg) {
        eprint!("{e}");
        return EXIT_CONFIG;
    }
    if cli.workers == Some(0) {
        eprintln!("--workers must be at least 1");
        return EXIT_CONFIG;
    }
    let outcome = match execute(cli.command, &cfg, cli.workers) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return exit_for(&e);
        }
    };
    print!("{}", outcome.summary);
    if let Err(e) = write_artifacts(&cfg.output.dir, cli.command, &cfg, &outcome) {
        eprintln!("cannot write artifacts to {}: {e}", cfg.output.dir.display());
        return EXIT_NUMERICAL;
    }
    outcome.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("").unwrap();
        assert!(matches!(cfg.model.kind, ModelKind::Discrete));
        assert_eq!(cfg.model.lattice.len(), 64);
        assert_eq!(cfg.experiment.trials, 100);
        assert_eq!(cfg.disorder, DisorderSpec::default());
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert!(echoed.contains("\"trials\":100"));
    }

    #[test]
    fn bad_w_names_key() {
        let e = parse_config("[model]\nkind = \"model_a\"\nW = [[1.0, 0.0], [0.0, -1.0]]\n").unwrap_err();
        assert_eq!(e.violations.len(), 1);
        assert!(e.violations[0].starts_with("model.W"), "{e}");
        assert!(e.violations[0].contains("positive definite"));
    }

    #[test]
    fn unknown_keys_get_suggestions() {
        let e = parse_config("[modle]\nkind = \"discrete\"\n").unwrap_err();
        assert!(e.violations[0].contains("did you mean \"model\""), "{e}");
        let e = parse_config("[experiment]\ntrails = 3\ntau = \"x\"\n").unwrap_err();
        assert_eq!(e.violations.len(), 2, "{e}");
        assert!(e.violations.iter().any(|v| v.contains("did you mean \"trials\"")));
        assert!(e.violations.iter().any(|v| v.starts_with("experiment.tau")));
    }

    #[test]
    fn subcommand_requirements() {
        let cfg = parse_config("").unwrap();
        assert!(validate_for(Command::Splitting, &cfg).is_err());
        assert!(validate_for(Command::Span, &cfg).is_err());
        assert!(validate_for(Command::Census, &cfg).is_ok());
        let cfg = parse_config("[model]\nkind = \"two_site\"\na = 1\nb = 0\nR = 6\n").unwrap();
        assert!(validate_for(Command::Splitting, &cfg).is_ok());
    }

    #[test]
    fn census_with_degenerate_w_fails_assertion() {
        let cfg = parse_config(
            "[model]\nkind = \"model_a\"\nlower = [0, 0]\nupper = [3, 3]\nW = [[1, 0], [0, 1]]\n\
             [experiment]\ntrials = 3\ntau = 1e-12\nrequire_simple = true\n",
        )
        .unwrap();
        let out = execute(Command::Census, &cfg, Some(1)).unwrap();
        assert_eq!(out.exit_code, EXIT_ASSERTION);
        assert!(out.artifacts[0].contents.starts_with("# verifies:"));
    }
}
