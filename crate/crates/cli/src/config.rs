//! Optional JSON config file. Every key mirrors a long flag (dashes become
//! underscores); flags given on the command line win.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectree::operators::ComplexValue;
use spectree::{PotentialSpec, Threshold, C64};

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<usize>,
    pub depth: Option<usize>,
    /// Inline spec object, or a path relative to the config file.
    pub potential: Option<serde_json::Value>,
    pub threshold: Option<Threshold>,
    pub rmin: Option<f64>,
    pub rmax: Option<f64>,
    pub grid: Option<usize>,
    pub nodes: Option<usize>,
    pub center: Option<ComplexOrReal>,
    pub radius: Option<f64>,
    pub disk_radius: Option<f64>,
    pub delta: Option<f64>,
    pub z: Option<Vec<ComplexOrReal>>,
    pub tol: Option<f64>,
    pub min_sv: Option<f64>,
    pub residual_tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(skip)]
    pub dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum ComplexOrReal {
    Real(f64),
    Complex(ComplexValue),
}

impl From<ComplexOrReal> for C64 {
    fn from(v: ComplexOrReal) -> Self {
        match v {
            ComplexOrReal::Real(x) => C64::new(x, 0.0),
            ComplexOrReal::Complex(c) => c.into(),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn potential(&self) -> Result<Option<PotentialSpec>, Failure> {
        match &self.potential {
            None => Ok(None),
            Some(serde_json::Value::String(p)) => {
                load_potential(&self.dir.join(p).to_string_lossy()).map(Some)
            }
            Some(v) => parse_potential(&v.to_string()).map(Some),
        }
    }
}

fn parse_potential(text: &str) -> Result<PotentialSpec, Failure> {
    PotentialSpec::from_json(text).map_err(|e| Failure::Usage(format!("invalid potential: {e}")))
}

/// `arg` is inline JSON when it starts with `{`, otherwise a file path.
pub fn load_potential(arg: &str) -> Result<PotentialSpec, Failure> {
    if arg.trim_start().starts_with('{') {
        return parse_potential(arg);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| Failure::Usage(format!("cannot read potential file {arg}: {e}")))?;
    parse_potential(&text)
}

/// Parses `re,im` or a bare real number.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|e| format!("bad number {p:?}: {e}"))
    };
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re,im` or a real number, got {s:?}")),
    }
}
