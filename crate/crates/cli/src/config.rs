//! Experiment configuration: JSON file contents, overridden by command-line
//! flags, resolved into domains, mesh-size ranges and form parameters.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use multimesh::geom2d::rotate_rect;
use multimesh::scenarios::mesh_size;
use multimesh::solver::DEFAULT_SEED;
use multimesh::{ConvexPolygon, FormParams, StabVariant};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// `-Δu = f` with `u = sin(πx) sin(πy)`.
    #[default]
    Poisson,
    /// `-Δu + ε⁻²u = 0` around the hexagonal obstacle.
    BoundaryLayer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "single")]
    Single,
    #[default]
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
    /// Rectangles listed in `domains`.
    #[serde(rename = "custom")]
    Custom,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::Single => "single",
            Case::One => "I",
            Case::Two => "II",
            Case::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Case {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Case::Single),
            "I" | "i" | "1" => Ok(Case::One),
            "II" | "ii" | "2" => Ok(Case::Two),
            "custom" => Ok(Case::Custom),
            _ => bail!("unknown case '{s}' (single|I|II|custom)"),
        }
    }
}

/// Axis-aligned rectangle `[x0,x1]×[y0,y1]` rotated by `angle_deg` about
/// its centroid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    pub bounds: [f64; 4],
    #[serde(default)]
    pub angle_deg: f64,
}

impl RectSpec {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64, angle_deg: f64) -> Self {
        Self {
            bounds: [x0, x1, y0, y1],
            angle_deg,
        }
    }

    pub fn polygon(&self) -> Result<ConvexPolygon> {
        let [x0, x1, y0, y1] = self.bounds;
        Ok(rotate_rect((x0, x1, y0, y1), self.angle_deg, None)?)
    }
}

const UNIT: RectSpec = RectSpec::new(0.0, 1.0, 0.0, 1.0, 0.0);

/// Subcommand, which fixes the default mesh-size range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Convergence,
    Condition,
    BoundaryLayer,
}

impl Command {
    /// `(k_min, k_max)` without and with `--full`.
    fn default_k_range(self, full: bool) -> (i32, i32) {
        match (self, full) {
            (Command::Solve, _) => (3, 3),
            (Command::Convergence, false) => (3, 6),
            (Command::Convergence, true) => (3, 10),
            (Command::Condition, false) => (2, 5),
            (Command::Condition, true) => (2, 7),
            (Command::BoundaryLayer, false) => (0, 2),
            (Command::BoundaryLayer, true) => (0, 4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub config: Case,
    /// Predomains for `custom`, background first.
    pub domains: Vec<RectSpec>,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    /// Per-part exponents for a single solve; all parts at `k_min` otherwise.
    pub ks: Option<Vec<i32>>,
    pub p: usize,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub stab: StabVariant,
    pub seed: u64,
    pub full: bool,
    pub out: PathBuf,
    /// Points per side of the solution probe grid.
    pub probe: Option<usize>,
    /// Estimate the condition number of every solve.
    pub kappa: bool,
    /// Relative residual for CG. Much below 1e-10 the finest levels can
    /// stagnate at the rounding floor.
    pub tol: f64,
    /// Cells across the boundary-layer band.
    pub layers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Poisson,
            config: Case::One,
            domains: Vec::new(),
            k_min: None,
            k_max: None,
            ks: None,
            p: 1,
            beta0: None,
            beta1: None,
            stab: StabVariant::GradientJump,
            seed: DEFAULT_SEED,
            full: false,
            out: PathBuf::from("out"),
            probe: None,
            kappa: false,
            tol: 1e-10,
            layers: 8,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self, cmd: Command) -> Result<()> {
        if !(1..=2).contains(&self.p) {
            bail!("polynomial degree {} not supported (1 or 2)", self.p);
        }
        let (lo, hi) = self.k_range(cmd);
        if lo > hi {
            bail!("empty mesh-size range {lo}..{hi}");
        }
        if cmd == Command::BoundaryLayer && lo < 0 {
            bail!("boundary-layer levels start at 0, got {lo}");
        }
        if self.config == Case::Custom && self.domains.is_empty() {
            bail!("custom configuration needs at least one domain");
        }
        if self.config != Case::Custom && !self.domains.is_empty() {
            bail!("domains are only read for the custom configuration");
        }
        if let Some(ks) = &self.ks {
            let n = self.rect_specs().len();
            if ks.len() != n {
                bail!("{} mesh exponents given for {n} parts", ks.len());
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            bail!("tolerance {} outside (0, 1)", self.tol);
        }
        if self.layers == 0 {
            bail!("band needs at least one layer");
        }
        self.form_params().validate()?;
        Ok(())
    }

    /// A solve uses one level, `k_min`.
    pub fn k_range(&self, cmd: Command) -> (i32, i32) {
        let (lo, hi) = cmd.default_k_range(self.full);
        let lo = self.k_min.unwrap_or(lo);
        match cmd {
            Command::Solve => (lo, lo),
            _ => (lo, self.k_max.unwrap_or(hi)),
        }
    }

    /// Exponents of a single solve.
    pub fn solve_ks(&self) -> Vec<i32> {
        match &self.ks {
            Some(ks) => ks.clone(),
            None => vec![self.k_range(Command::Solve).0; self.rect_specs().len()],
        }
    }

    pub fn rect_specs(&self) -> Vec<RectSpec> {
        match self.config {
            Case::Single => vec![UNIT],
            Case::One => vec![
                UNIT,
                RectSpec::new(0.2, 0.8, 0.2, 0.8, 0.0),
                RectSpec::new(0.4, 0.6, 0.4, 0.6, 0.0),
            ],
            Case::Two => vec![
                UNIT,
                RectSpec::new(0.2, 0.8, 0.3, 0.75, 23.0),
                RectSpec::new(0.3, 0.5, 0.05, 0.8, 44.0),
            ],
            Case::Custom => self.domains.clone(),
        }
    }

    pub fn domains(&self) -> Result<Vec<ConvexPolygon>> {
        self.rect_specs().iter().map(RectSpec::polygon).collect()
    }

    pub fn form_params(&self) -> FormParams {
        let d = FormParams::with_stab(self.p, self.stab);
        FormParams {
            beta0: self.beta0.unwrap_or(d.beta0),
            beta1: self.beta1.unwrap_or(d.beta1),
            ..d
        }
    }

    /// Target mesh sizes of a solve with exponents `ks`.
    pub fn target_sizes(ks: &[i32]) -> Vec<f64> {
        ks.iter().map(|&k| mesh_size(k)).collect()
    }
}
