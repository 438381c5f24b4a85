//! Experiment configuration: a single JSON file with `system`, `construction`
//! and `output` blocks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skewshadow::system::{Forcing, SkewSystem, ToralMatrix, TrigTerm, GOLDEN};
use skewshadow::torus::{FiberPoint, ProductPoint};
use skewshadow::Error;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub construction: Construction,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rotation {
    Named(String),
    Value(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    #[serde(default)]
    pub degrees: [i64; 2],
    #[serde(default)]
    pub offset: [f64; 2],
    #[serde(default)]
    pub x_terms: Vec<TermConfig>,
    #[serde(default)]
    pub y_terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub matrix: [[i64; 2]; 2],
    #[serde(default = "default_rotation")]
    pub rotation: Rotation,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_rotation() -> Rotation {
    Rotation::Named("golden".into())
}

fn default_grid() -> usize {
    2048
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Construction parameters; every command reads the subset it needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Construction {
    pub seed: u64,
    pub epsilon: f64,
    pub graph: [f64; 2],
    pub continuity_levels: usize,
    pub max_levels: usize,
    pub return_budget: usize,
    pub tail_tol: f64,
    pub gamma: f64,
    pub delta2: f64,
    pub alpha_sep: f64,
    pub n_max: usize,
    pub anchor: [f64; 2],
    pub partition: usize,
    pub word_pairs: usize,
    pub word_span: i64,
    pub check_grid: usize,
    /// Leaf words as `[[index, symbol], …]` lists; symbol 1 elsewhere.
    pub words: Vec<Vec<(i64, u64)>>,
    pub target: Option<[f64; 2]>,
    pub q_horizon: usize,
    pub depth: usize,
    pub sequences: usize,
    pub entropy_n: Vec<usize>,
    pub entropy_alpha: f64,
    pub budget: usize,
    pub weyl_n: usize,
    pub frequencies: Vec<[i64; 3]>,
    pub start: [f64; 3],
    pub mixing_u: BallConfig,
    pub mixing_v: BallConfig,
    pub mixing_n: usize,
    pub mixing_grid: usize,
    pub max_samples: usize,
}

impl Default for Construction {
    fn default() -> Self {
        Construction {
            seed: 0,
            epsilon: 0.05,
            graph: [0.3, 0.7],
            continuity_levels: 4,
            max_levels: 12,
            return_budget: 5000,
            tail_tol: 1e-13,
            gamma: 0.3,
            delta2: 0.005,
            alpha_sep: 0.05,
            n_max: 60,
            anchor: [0.0, 0.0],
            partition: 1,
            word_pairs: 8,
            word_span: 3,
            check_grid: 16,
            words: Vec::new(),
            target: None,
            q_horizon: 37,
            depth: 8,
            sequences: 10,
            entropy_n: (1..=12).collect(),
            entropy_alpha: 0.05,
            budget: 200_000,
            weyl_n: 1_000_000,
            frequencies: vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 1, 1]],
            start: [0.1234, 0.5678, 0.1],
            mixing_u: BallConfig { center: [0.2, 0.3], radius: 0.1 },
            mixing_v: BallConfig { center: [0.7, 0.6], radius: 0.1 },
            mixing_n: 12,
            mixing_grid: 64,
            max_samples: 1_000_000,
        }
    }
}

impl Construction {
    pub fn start_point(&self) -> ProductPoint {
        ProductPoint::new(FiberPoint::new(self.start[0], self.start[1]), self.start[2].into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("out"), formats: vec!["json".into(), "csv".into()] }
    }
}

impl OutputConfig {
    pub fn wants(&self, fmt: &str) -> bool {
        self.formats.iter().any(|f| f == fmt)
    }
}

/// A parsed configuration with its source text (for line lookups) and hash.
pub struct Loaded {
    pub path: PathBuf,
    pub source: String,
    pub config: ExperimentConfig,
    pub hash: String,
}

impl Loaded {
    /// 1-based line of the first occurrence of `"key"` in the source.
    pub fn line_of(&self, key: &str) -> usize {
        let needle = format!("\"{key}\"");
        self.source.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
    }

    pub fn invalid(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("{}:{}: {key}: {msg}", self.path.display(), self.line_of(key)))
    }

    pub fn system(&self) -> Result<SkewSystem, CliError> {
        let s = &self.config.system;
        let m = s.matrix;
        let matrix = ToralMatrix::new(m[0][0], m[0][1], m[1][0], m[1][1]).map_err(|e| self.located("matrix", e))?;
        let rotation = match &s.rotation {
            Rotation::Named(n) if n == "golden" => GOLDEN,
            Rotation::Named(n) => return Err(self.invalid("rotation", format!("unknown preset {n:?}"))),
            Rotation::Value(v) => *v,
        };
        if s.grid == 0 {
            return Err(self.invalid("grid", "must be positive"));
        }
        let terms = |v: &[TermConfig], key: &str| -> Result<Vec<TrigTerm>, CliError> {
            v.iter()
                .map(|t| {
                    if t.k == 0 {
                        return Err(self.invalid(key, "trigonometric term needs k >= 1; use offset for constants"));
                    }
                    if !(t.cos.is_finite() && t.sin.is_finite()) {
                        return Err(self.invalid(key, "coefficients must be finite"));
                    }
                    Ok(TrigTerm { k: t.k, cos: t.cos, sin: t.sin })
                })
                .collect()
        };
        let f = &s.forcing;
        let forcing = Forcing {
            degrees: (f.degrees[0], f.degrees[1]),
            offset: f.offset,
            terms: [terms(&f.x_terms, "x_terms")?, terms(&f.y_terms, "y_terms")?],
        };
        SkewSystem::new(matrix, forcing, rotation, s.grid).map_err(|e| match e {
            Error::InvalidInput(msg) => self.invalid("rotation", msg),
            other => self.located("matrix", other),
        })
    }

    /// Keeps the library error (and its exit code) but prefixes the source position.
    fn located(&self, key: &str, e: Error) -> CliError {
        CliError::Located(format!("{}:{}: {key}", self.path.display(), self.line_of(key)), e)
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&source).map_err(|e| {
        CliError::Config(format!("{}:{}:{}: {}", path.display(), e.line(), e.column(), strip_position(&e.to_string())))
    })?;
    let hash = Sha256::digest(source.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let loaded = Loaded { path: path.to_path_buf(), source, config, hash };
    for f in &loaded.config.output.formats {
        if f != "json" && f != "csv" {
            return Err(loaded.invalid("formats", format!("unknown format {f:?}")));
        }
    }
    Ok(loaded)
}

/// serde_json appends " at line L column C"; the position is already in front.
fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}
