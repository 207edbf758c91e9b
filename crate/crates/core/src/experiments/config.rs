//! Run configuration: `key = value` lines, `#` comments, applied on top of
//! an optional preset.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::problems;
use crate::adapt::{AdaptConfig, ElementSize, EstimatorOptions, MarkParams, StopRule};
use crate::error::{Error, Result};
use crate::fem::{EllipticProblem, SolverKind, SolverOptions};
use crate::geometry::NurbsGeometry;
use crate::hier::{Admissibility, AdmissibleKind, Flavor, LevelSequence};
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq)]
pub enum GeometrySource {
    Square,
    QuarterAnnulus,
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    EdgeSingularity,
    /// Sine bump on the strip `a <= x <= b`.
    SineStrip,
    Sine,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub geometry: GeometrySource,
    pub problem: ProblemKind,
    /// Strip bounds for [`ProblemKind::SineStrip`].
    pub strip: (f64, f64),
    pub degree: usize,
    pub multiplicity: usize,
    pub mu: usize,
    pub kind: AdmissibleKind,
    pub flavor: Flavor,
    /// Elements per direction of the initial mesh.
    pub base: usize,
    pub theta: f64,
    pub c_min: f64,
    pub uniform: bool,
    pub max_iterations: usize,
    pub max_dofs: Option<usize>,
    pub eta_tolerance: Option<f64>,
    /// Gauss points per direction; the space default when unset.
    pub quadrature: Option<usize>,
    pub solver: SolverKind,
    pub element_size: ElementSize,
    pub output: PathBuf,
    pub name: String,
    /// Write an SVG of the mesh every this many iterations; 0 disables.
    pub snapshot_every: usize,
    pub seed: u64,
    pub timing: bool,
}

pub const PRESETS: [&str; 3] = ["edge-singularity", "approx-class", "approx-class-nonaligned"];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            geometry: GeometrySource::Square,
            problem: ProblemKind::Sine,
            strip: (0.25, 0.75),
            degree: 2,
            multiplicity: 1,
            mu: 2,
            kind: AdmissibleKind::T,
            flavor: Flavor::Thb,
            base: 4,
            theta: 0.5,
            c_min: 1.0,
            uniform: false,
            max_iterations: 20,
            max_dofs: None,
            eta_tolerance: None,
            quadrature: None,
            solver: SolverKind::Auto,
            element_size: ElementSize::Physical,
            output: PathBuf::from("out"),
            name: "run".into(),
            snapshot_every: 0,
            seed: 0,
            timing: true,
        }
    }
}

impl RunConfig {
    /// Defaults of a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        let base = RunConfig {
            preset: Some(name.to_string()),
            name: name.to_string(),
            max_iterations: 100,
            max_dofs: Some(200_000),
            ..Default::default()
        };
        match name {
            "edge-singularity" => Ok(RunConfig {
                problem: ProblemKind::EdgeSingularity,
                degree: 2,
                multiplicity: 1,
                mu: 2,
                kind: AdmissibleKind::T,
                base: 4,
                theta: 0.25,
                ..base
            }),
            "approx-class" | "approx-class-nonaligned" => {
                let aligned = name == "approx-class";
                Ok(RunConfig {
                    problem: ProblemKind::SineStrip,
                    strip: if aligned { (0.25, 0.75) } else { (0.2, 0.8) },
                    degree: 4,
                    multiplicity: 3,
                    mu: 4,
                    kind: AdmissibleKind::T,
                    base: 2,
                    theta: 0.5,
                    ..base
                })
            }
            _ => Err(Error::Config(format!(
                "unknown preset '{name}' (known: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Parses `key = value` lines; a `preset` line selects the starting
    /// point wherever it appears, the remaining keys override it in order.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Builds from ordered `(key, value)` pairs.
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut cfg = match pairs.iter().rev().find(|(k, _)| k == "preset") {
            Some((_, v)) => Self::preset(v)?,
            None => Self::default(),
        };
        for (k, v) in &pairs {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides, e.g. from the command line.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        let mut pairs = self.to_pairs();
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not of the form key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(pairs)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key} = {value}: {what}"));
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad("expected a non-negative integer"));
        let float = |v: &str| v.parse::<f64>().map_err(|_| bad("expected a number"));
        let optional = |v: &str| matches!(v, "none" | "");
        match key {
            "geometry" => {
                self.geometry = match value {
                    "square" | "identity" => GeometrySource::Square,
                    "quarter-annulus" => GeometrySource::QuarterAnnulus,
                    path => GeometrySource::File(PathBuf::from(path)),
                }
            }
            "problem" => {
                self.problem = match value {
                    "edge-singularity" => ProblemKind::EdgeSingularity,
                    "sine-strip" => ProblemKind::SineStrip,
                    "sine" => ProblemKind::Sine,
                    _ => return Err(bad("known problems are edge-singularity, sine-strip, sine")),
                }
            }
            "a" => self.strip.0 = float(value)?,
            "b" => self.strip.1 = float(value)?,
            "p" | "degree" => self.degree = int(value)?,
            "m" | "multiplicity" => self.multiplicity = int(value)?,
            "mu" => self.mu = int(value)?,
            "kind" => self.kind = value.parse()?,
            "flavor" => {
                self.flavor = match value.to_ascii_lowercase().as_str() {
                    "thb" => Flavor::Thb,
                    "hb" => Flavor::Hb,
                    _ => return Err(bad("expected thb or hb")),
                }
            }
            "base" => self.base = int(value)?,
            "theta" => self.theta = float(value)?,
            "c_min" => {
                self.c_min = match value {
                    "inf" | "infinity" => f64::INFINITY,
                    v => float(v)?,
                }
            }
            "refinement" => {
                self.uniform = match value {
                    "uniform" => true,
                    "adaptive" => false,
                    _ => return Err(bad("expected adaptive or uniform")),
                }
            }
            "max_iterations" => self.max_iterations = int(value)?,
            "max_dofs" => self.max_dofs = if optional(value) { None } else { Some(int(value)?) },
            "eta_tol" => self.eta_tolerance = if optional(value) { None } else { Some(float(value)?) },
            "quadrature" => self.quadrature = if optional(value) { None } else { Some(int(value)?) },
            "solver" => self.solver = value.parse()?,
            "h" => {
                self.element_size = match value {
                    "physical" => ElementSize::Physical,
                    "parametric" => ElementSize::Parametric,
                    _ => return Err(bad("expected physical or parametric")),
                }
            }
            "output" => self.output = PathBuf::from(value),
            "name" => {
                if value.is_empty() || value.contains(['/', '\\']) {
                    return Err(bad("names must be non-empty and contain no path separators"));
                }
                self.name = value.to_string()
            }
            "snapshot_every" => self.snapshot_every = int(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad("expected an integer"))?,
            "timing" => self.timing = value.parse().map_err(|_| bad("expected true or false"))?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.degree == 0 || self.degree > 10 {
            return fail(format!("degree {} is out of range 1..=10", self.degree));
        }
        if !(1..=self.degree).contains(&self.multiplicity) {
            return fail(format!("multiplicity {} is not in 1..={}", self.multiplicity, self.degree));
        }
        if self.mu < 2 {
            return fail(format!("admissibility class {} is below 2", self.mu));
        }
        if self.base == 0 {
            return fail("the initial mesh needs at least one element per direction".into());
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return fail(format!("theta {} is not in (0, 1]", self.theta));
        }
        if !(self.c_min >= 1.0) {
            return fail(format!("c_min {} is below 1", self.c_min));
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be positive".into());
        }
        let (a, b) = self.strip;
        if !(0.0 < a && a < b && b < 1.0) {
            return fail(format!("strip bounds a = {a}, b = {b} must satisfy 0 < a < b < 1"));
        }
        Ok(())
    }

    /// The configuration as `key = value` text that parses back to itself.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let mut v: Vec<(&str, String)> = Vec::new();
        if let Some(p) = &self.preset {
            v.push(("preset", p.clone()));
        }
        v.push((
            "geometry",
            match &self.geometry {
                GeometrySource::Square => "square".into(),
                GeometrySource::QuarterAnnulus => "quarter-annulus".into(),
                GeometrySource::File(p) => p.display().to_string(),
            },
        ));
        v.push((
            "problem",
            match self.problem {
                ProblemKind::EdgeSingularity => "edge-singularity",
                ProblemKind::SineStrip => "sine-strip",
                ProblemKind::Sine => "sine",
            }
            .into(),
        ));
        v.push(("a", self.strip.0.to_string()));
        v.push(("b", self.strip.1.to_string()));
        v.push(("p", self.degree.to_string()));
        v.push(("m", self.multiplicity.to_string()));
        v.push(("mu", self.mu.to_string()));
        v.push(("kind", self.kind.to_string()));
        v.push(("flavor", self.flavor.to_string().to_ascii_lowercase()));
        v.push(("base", self.base.to_string()));
        v.push(("theta", self.theta.to_string()));
        v.push(("c_min", if self.c_min.is_infinite() { "inf".into() } else { self.c_min.to_string() }));
        v.push(("refinement", if self.uniform { "uniform" } else { "adaptive" }.into()));
        v.push(("max_iterations", self.max_iterations.to_string()));
        v.push(("max_dofs", opt(self.max_dofs.map(|x| x.to_string()))));
        v.push(("eta_tol", opt(self.eta_tolerance.map(|x| x.to_string()))));
        v.push(("quadrature", opt(self.quadrature.map(|x| x.to_string()))));
        v.push((
            "solver",
            match self.solver {
                SolverKind::Auto => "auto",
                SolverKind::Cg => "cg",
                SolverKind::Direct => "direct",
            }
            .into(),
        ));
        v.push((
            "h",
            match self.element_size {
                ElementSize::Physical => "physical",
                ElementSize::Parametric => "parametric",
            }
            .into(),
        ));
        v.push(("output", self.output.display().to_string()));
        v.push(("name", self.name.clone()));
        v.push(("snapshot_every", self.snapshot_every.to_string()));
        v.push(("seed", self.seed.to_string()));
        v.push(("timing", self.timing.to_string()));
        v.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Strip bounds lie on dyadic breakpoints the mesh can reach.
    pub fn strip_is_aligned(&self) -> bool {
        let on_grid = |x: f64| {
            let s = x * self.base as f64 * (1u64 << 30) as f64;
            s == s.round()
        };
        on_grid(self.strip.0) && on_grid(self.strip.1)
    }

    /// Gauss points per direction used by the run, `None` for the space's
    /// default.
    pub fn quadrature_points(&self) -> Option<usize> {
        self.quadrature
    }

    pub fn build_problem(&self) -> EllipticProblem {
        match self.problem {
            ProblemKind::EdgeSingularity => problems::edge_singularity(2.3, 2.9),
            // the strip bounds are parametric lines only on the square
            ProblemKind::SineStrip => match self.geometry {
                GeometrySource::Square => problems::sine_strip(self.strip.0, self.strip.1),
                _ => problems::sine_strip(self.strip.0, self.strip.1).with_breaks(0, Vec::new()),
            },
            ProblemKind::Sine => problems::sine(),
        }
    }

    pub fn build_geometry(&self) -> Result<NurbsGeometry<2>> {
        match &self.geometry {
            GeometrySource::Square => Ok(NurbsGeometry::identity()),
            GeometrySource::QuarterAnnulus => Ok(NurbsGeometry::quarter_annulus()),
            GeometrySource::File(p) => NurbsGeometry::read_file(p),
        }
    }

    /// The adaptive-loop configuration this run describes.
    pub fn adapt_config(&self, exec: Execution) -> Result<AdaptConfig> {
        self.validate()?;
        let levels = LevelSequence::uniform([self.degree; 2], [self.base; 2], self.multiplicity)?;
        Ok(AdaptConfig {
            geometry: Arc::new(self.build_geometry()?),
            problem: self.build_problem(),
            levels: Arc::new(levels),
            flavor: self.flavor,
            admissibility: Admissibility::new(self.mu, self.kind)?,
            marking: if self.uniform {
                MarkParams::uniform()
            } else {
                MarkParams::new(self.theta, self.c_min)?
            },
            stop: StopRule {
                max_iterations: self.max_iterations,
                max_dofs: self.max_dofs,
                eta_tolerance: self.eta_tolerance,
            },
            solver: SolverOptions {
                kind: self.solver,
                ..Default::default()
            },
            estimator: EstimatorOptions {
                size: self.element_size,
                edge_points: None,
            },
            quadrature: self.quadrature_points(),
            exec,
            timing: self.timing,
        })
    }
}

/// `key = value` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            msg: format!("expected key = value, found '{line}'"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                line: n + 1,
                msg: "empty key".into(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
