//! Flat `key = value` experiment manifests.
//!
//! ```text
//! # velocity in d = 1
//! kind   = velocity
//! dim    = 1
//! alphas = 3, 1
//! seed   = 7
//! steps  = 100000
//! runs   = 200
//! ```
//!
//! One assignment per line, `#` starts a comment, lists are comma separated.
//! Unknown keys and repeated keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rwre_core::dirichlet::WeightVector;
use rwre_core::lattice::Site;

use crate::error::{FieldError, LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Velocity,
    Equivalence,
    Green,
    Kalikow,
    Expansion,
    Verify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Velocity,
        ExperimentKind::Equivalence,
        ExperimentKind::Green,
        ExperimentKind::Kalikow,
        ExperimentKind::Expansion,
        ExperimentKind::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Velocity => "velocity",
            ExperimentKind::Equivalence => "equivalence",
            ExperimentKind::Green => "green",
            ExperimentKind::Kalikow => "kalikow",
            ExperimentKind::Expansion => "expansion",
            ExperimentKind::Verify => "verify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreenMode {
    Killed,
    Fourier,
    Series,
    Symmetrize,
    Lemma2,
    Lemma3,
}

impl GreenMode {
    pub const ALL: [GreenMode; 6] = [
        GreenMode::Killed,
        GreenMode::Fourier,
        GreenMode::Series,
        GreenMode::Symmetrize,
        GreenMode::Lemma2,
        GreenMode::Lemma3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GreenMode::Killed => "killed",
            GreenMode::Fourier => "fourier",
            GreenMode::Series => "series",
            GreenMode::Symmetrize => "symmetrize",
            GreenMode::Lemma2 => "lemma2",
            GreenMode::Lemma3 => "lemma3",
        }
    }
}

impl fmt::Display for GreenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GreenMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        GreenMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown green mode `{s}`"))
    }
}

pub const KEYS: &[&str] = &[
    "kind",
    "dim",
    "alphas",
    "seed",
    "steps",
    "runs",
    "samples",
    "radius",
    "delta",
    "anchor",
    "mode",
    "horizon",
    "nodes",
    "draws",
    "paths",
    "horizons",
    "dump_displacements",
    "out",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentManifest {
    pub kind: ExperimentKind,
    pub dim: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    pub seed: u64,
    pub steps: Option<usize>,
    pub runs: Option<usize>,
    pub samples: Option<usize>,
    pub radius: Option<u32>,
    pub delta: Option<f64>,
    /// Defaults to the origin.
    pub anchor: Option<Vec<i64>>,
    pub mode: Option<GreenMode>,
    /// Series truncation; defaults to the tail target.
    pub horizon: Option<usize>,
    /// Quadrature nodes per stick.
    pub nodes: Option<usize>,
    /// Monte Carlo draws.
    pub draws: Option<usize>,
    /// Random paths for the closed-form versus sequential comparison.
    pub paths: Option<usize>,
    /// Step counts at which displacements are dumped.
    pub horizons: Option<Vec<usize>>,
    pub dump_displacements: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        ExperimentManifest {
            kind,
            dim: None,
            alphas: None,
            seed,
            steps: None,
            runs: None,
            samples: None,
            radius: None,
            delta: None,
            anchor: None,
            mode: None,
            horizon: None,
            nodes: None,
            draws: None,
            paths: None,
            horizons: None,
            dump_displacements: false,
            out: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text, None)
    }

    /// Parses manifest text. `kind` fills in a missing `kind` key and must
    /// agree with it when both are given.
    pub fn parse(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let mut errors = Vec::new();
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                errors.push(FieldError { field: content.to_string(), line: Some(line), message: "expected `key = value`".into() });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                errors.push(FieldError { field: key.to_string(), line: Some(line), message: "unknown key".into() });
            } else if let Some((first, _)) = entries.get(key) {
                errors.push(FieldError {
                    field: key.to_string(),
                    line: Some(line),
                    message: format!("repeated (first set on line {first})"),
                });
            } else {
                entries.insert(key, (line, value));
            }
        }

        let mut fields = Fields { entries, errors };
        let declared: Option<ExperimentKind> = fields.get("kind");
        let kind = match (declared, kind) {
            (Some(a), Some(b)) if a != b => {
                fields.error("kind", format!("manifest declares `{a}` but `{b}` was requested"));
                b
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => {
                fields.missing("kind");
                ExperimentKind::Verify
            }
        };
        let mut m = ExperimentManifest::new(kind, 0);
        match fields.get::<u64>("seed") {
            Some(seed) => m.seed = seed,
            None if kind == ExperimentKind::Verify => {}
            None => fields.missing("seed"),
        }
        m.dim = fields.get("dim");
        m.alphas = fields.list("alphas");
        m.steps = fields.get("steps");
        m.runs = fields.get("runs");
        m.samples = fields.get("samples");
        m.radius = fields.get("radius");
        m.delta = fields.get("delta");
        m.anchor = fields.list("anchor");
        m.mode = fields.get("mode");
        m.horizon = fields.get("horizon");
        m.nodes = fields.get("nodes");
        m.draws = fields.get("draws");
        m.paths = fields.get("paths");
        m.horizons = fields.list("horizons");
        m.dump_displacements = fields.get("dump_displacements").unwrap_or(false);
        m.out = fields.get::<String>("out").map(PathBuf::from);

        let mut errors = fields.errors;
        errors.extend(m.check());
        if errors.is_empty() {
            Ok(m)
        } else {
            Err(LabError::ManifestInvalid(errors))
        }
    }

    /// Kind-specific requirements.
    pub fn check(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut need = |field: &str, present: bool| {
            if !present {
                errors.push(FieldError {
                    field: field.into(),
                    line: None,
                    message: format!("required for `{}` experiments", self.kind),
                });
            }
        };
        let weighted = self.kind != ExperimentKind::Verify;
        if weighted {
            need("dim", self.dim.is_some());
            need("alphas", self.alphas.is_some());
        }
        match self.kind {
            ExperimentKind::Velocity | ExperimentKind::Equivalence => {
                need("steps", self.steps.is_some());
                need("runs", self.runs.is_some());
            }
            ExperimentKind::Green => {
                need("mode", self.mode.is_some());
                match self.mode {
                    Some(GreenMode::Killed | GreenMode::Symmetrize | GreenMode::Lemma2) => {
                        need("radius", self.radius.is_some());
                        need("delta", self.delta.is_some());
                    }
                    Some(GreenMode::Lemma3) => {
                        need("radius", self.radius.is_some());
                        need("samples", self.samples.is_some());
                    }
                    _ => {}
                }
            }
            ExperimentKind::Kalikow => {
                need("radius", self.radius.is_some());
                need("delta", self.delta.is_some());
                need("samples", self.samples.is_some());
            }
            ExperimentKind::Expansion => {
                if self.steps.is_some() != self.runs.is_some() {
                    need("steps", self.steps.is_some());
                    need("runs", self.runs.is_some());
                }
            }
            ExperimentKind::Verify => {}
        }

        let mut bad = |field: &str, message: String| {
            errors.push(FieldError { field: field.into(), line: None, message });
        };
        if self.dim == Some(0) {
            bad("dim", "must be at least 1".into());
        }
        if let (Some(dim), Some(alphas)) = (self.dim, &self.alphas) {
            if dim > 0 {
                if let Err(e) = WeightVector::new(dim, alphas.clone()) {
                    bad("alphas", e.to_string());
                }
            }
        } else if let Some(alphas) = &self.alphas {
            if alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                bad("alphas", "weights must be positive and finite".into());
            }
        }
        if let (Some(anchor), Some(dim)) = (&self.anchor, self.dim) {
            if anchor.len() != dim {
                bad("anchor", format!("has {} coordinates, dim is {dim}", anchor.len()));
            }
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta <= 1.0) {
                bad("delta", format!("{delta} is outside (0, 1]"));
            }
        }
        for (field, value) in [("runs", self.runs), ("samples", self.samples), ("draws", self.draws), ("nodes", self.nodes)] {
            if value == Some(0) {
                bad(field, "must be positive".into());
            }
        }
        if let (Some(h), Some(steps)) = (&self.horizons, self.steps) {
            if h.iter().any(|&x| x > steps) {
                bad("horizons", format!("every horizon must be at most steps = {steps}"));
            }
        }
        if self.kind == ExperimentKind::Equivalence && self.steps.is_some_and(|s| s > 8) {
            bad("steps", "exhaustive enumeration is limited to 8 steps".into());
        }
        errors
    }

    pub fn weights(&self) -> Option<WeightVector> {
        WeightVector::new(self.dim?, self.alphas.clone()?).ok()
    }

    pub fn anchor_site(&self) -> Option<Site> {
        let dim = self.dim?;
        Some(self.anchor.clone().map_or_else(|| Site::origin(dim), Site::new))
    }

    /// Normalized text: present keys in `KEYS` order, numbers in shortest
    /// round-trip form. Two manifests with equal values have equal text.
    pub fn canonical(&self) -> String {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut out = String::new();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push_str(key);
                out.push_str(" = ");
                out.push_str(&v);
                out.push('\n');
            }
        };
        put("kind", Some(self.kind.to_string()));
        put("dim", self.dim.map(|v| v.to_string()));
        put("alphas", self.alphas.as_deref().map(list));
        put("seed", Some(self.seed.to_string()));
        put("steps", self.steps.map(|v| v.to_string()));
        put("runs", self.runs.map(|v| v.to_string()));
        put("samples", self.samples.map(|v| v.to_string()));
        put("radius", self.radius.map(|v| v.to_string()));
        put("delta", self.delta.map(|v| v.to_string()));
        put("anchor", self.anchor.as_deref().map(list));
        put("mode", self.mode.map(|v| v.to_string()));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put("nodes", self.nodes.map(|v| v.to_string()));
        put("draws", self.draws.map(|v| v.to_string()));
        put("paths", self.paths.map(|v| v.to_string()));
        put("horizons", self.horizons.as_deref().map(list));
        put("dump_displacements", self.dump_displacements.then(|| "true".to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        out
    }
}

struct Fields<'a> {
    entries: BTreeMap<&'a str, (usize, &'a str)>,
    errors: Vec<FieldError>,
}

impl Fields<'_> {
    fn get<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (line, raw) = *self.entries.get(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(FieldError { field: key.into(), line: Some(line), message: format!("`{raw}`: {e}") });
                None
            }
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Option<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let (line, raw) = *self.entries.get(key)?;
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim) {
            match item.parse() {
                Ok(v) => out.push(v),
                Err(e) => {
                    self.errors.push(FieldError { field: key.into(), line: Some(line), message: format!("`{item}`: {e}") });
                    return None;
                }
            }
        }
        Some(out)
    }

    fn missing(&mut self, key: &str) {
        self.errors.push(FieldError { field: key.into(), line: None, message: "missing".into() });
    }

    fn error(&mut self, key: &str, message: String) {
        let line = self.entries.get(key).map(|e| e.0);
        self.errors.push(FieldError { field: key.into(), line, message });
    }
}
