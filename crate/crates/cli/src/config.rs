//! Run configuration, input loading and the error type that maps to exit codes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stokes_core::braiding::PathInput;
use stokes_core::irregular::IrregularType;
use stokes_core::wild::{CurveInput, StokesRepresentation};

#[derive(Debug, Parser)]
#[command(name = "stokes", version, about = "Quasi-Hamiltonian spaces of Stokes data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Singular directions, Stokes groups and dimensions of an irregular type.
    Stokes,
    /// Quasi-Hamiltonian axiom checks over a menu of spaces.
    Verify,
    /// Burnside stability of Stokes representations.
    Stability,
    /// Genericity of conjugacy class data.
    Genericity,
    /// Expected and measured dimensions of wild character varieties.
    Dims,
    /// Transport of a Stokes representation along an admissible path.
    Braid,
    /// Van den Bergh correspondence and edge reversal.
    Vdb,
    /// CSV of direction angles along a path, or of a direction diagram.
    PlotData,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunConfig {
    /// Input JSON file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance of the main check of the command.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Space name for `verify` (repeatable) or `dv,dw` for `vdb`.
    #[arg(long, global = true)]
    pub space: Vec<String>,
    /// Number of seeds or sampled points.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {}", m),
            CliError::Failed(m) => write!(f, "{}", m),
        }
    }
}

/// Library errors caused by the input are input errors; the rest are failures.
impl From<stokes_core::Error> for CliError {
    fn from(e: stokes_core::Error) -> Self {
        use stokes_core::Error as E;
        match e {
            E::Invalid(_) | E::Dimension(_) | E::Pattern(_) | E::Unsupported(_) | E::RefinePath(_) => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Input(format!("--tol: must be positive, got {}", t)));
            }
        }
        if self.samples == Some(0) {
            return Err(CliError::Input("--samples: must be at least 1".into()));
        }
        Ok(())
    }

    pub fn input_path(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::Input("--input: required for this command".into()))
    }

    pub fn read_input(&self) -> Result<String, CliError> {
        let path = self.input_path()?;
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("--input {}: {}", path.display(), e)))
    }

    /// Parse the input file, naming the offending field on failure.
    pub fn load<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        parse(&self.read_input()?)
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let field = if at == "." { "input".to_string() } else { at };
        CliError::Input(format!("{}: {}", field, e.inner()))
    })
}

/// An irregular type, bare or as `{"type": Q, "cut": p}`.
#[derive(Debug, Clone)]
pub struct StokesInput {
    pub q: IrregularType,
    pub cut: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WithCut {
    #[serde(rename = "type")]
    q: IrregularType,
    #[serde(default)]
    cut: f64,
}

impl StokesInput {
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value = parse(text)?;
        if v.get("type").is_some() {
            let w: WithCut = parse(text)?;
            Ok(StokesInput { q: w.q, cut: w.cut })
        } else {
            Ok(StokesInput { q: parse(text)?, cut: 0.0 })
        }
    }

    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        Self::from_text(&cfg.read_input()?)
    }
}

/// A curve with optional classes and an optional `"representation"` key.
#[derive(Debug, Clone)]
pub struct WildInput {
    pub curve: CurveInput,
    pub representation: Option<StokesRepresentation>,
}

impl WildInput {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut v: serde_json::Value = cfg.load()?;
        let rep = v.as_object_mut().and_then(|o| o.remove("representation"));
        let representation = match rep {
            Some(r) => Some(parse_value(r).map_err(|e| prefix("representation", e))?),
            None => None,
        };
        Ok(WildInput { curve: parse_value(v)?, representation })
    }
}

fn prefix(p: &str, e: CliError) -> CliError {
    match e {
        CliError::Input(m) if m.starts_with("input:") => CliError::Input(format!("{}:{}", p, &m[6..])),
        CliError::Input(m) => CliError::Input(format!("{}.{}", p, m)),
        e => e,
    }
}

pub fn parse_value<T: DeserializeOwned>(v: serde_json::Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let at = e.path().to_string();
        let field = if at == "." { "input".to_string() } else { at };
        CliError::Input(format!("{}: {}", field, e.inner()))
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BraidInput {
    pub curve: CurveInput,
    pub path: PathInput,
    #[serde(default)]
    pub representation: Option<StokesRepresentation>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdbInput {
    pub dv: usize,
    pub dw: usize,
    #[serde(default, with = "opt_mat")]
    pub a: Option<stokes_core::linalg::Mat>,
    #[serde(default, with = "opt_mat")]
    pub b: Option<stokes_core::linalg::Mat>,
}

mod opt_mat {
    use serde::{Deserialize, Deserializer};
    use stokes_core::io::rows_to_mat;
    use stokes_core::linalg::Mat;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        let rows: Option<Vec<Vec<[f64; 2]>>> = Option::deserialize(d)?;
        rows.map(|r| rows_to_mat(&r).map_err(serde::de::Error::custom)).transpose()
    }
}
