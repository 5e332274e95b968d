use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeParams, DoublingParams};
use crate::cauchy::{AlphaParams, Cutoff, MaskSpec};
use crate::error::{Error, Result};
use crate::fields::{mfs_fit, CatalogField, FittedField, HarmonicField, MfsParams};
use crate::geometry::{GraphDomain, GraphKind, LipschitzGraph};
use crate::point::{embed, Point};
use crate::whitney::WhitneyParams;

pub const DEFAULT_SEED: u64 = 42;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn one() -> f64 {
    1.0
}

/// A scenario file: one experiment on one geometry and field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    pub experiment: Experiment,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative quadrature tolerance handed to every integral.
    pub quadrature: f64,
    /// Pass threshold of quadrature-limited audits; `None` keeps each audit's own.
    pub audit: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quadrature: 1e-8, audit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: None, prefix: "report".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub dim: usize,
    pub graph: GraphSpec,
    /// Horizontal coordinate `x_1` of the ball centre on Σ.
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub radius: f64,
    /// Half side of the bounding box; defaults to four radii.
    #[serde(default)]
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Flat {},
    Ramp { slope: f64 },
    Sawtooth { slope: f64, period: f64 },
    Bump { slope: f64, width: f64 },
    RandomGrid { tau0: f64, spacing: f64, half_count: usize, seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// A named catalog field; on a ramp it is tilted to vanish on Σ.
    Catalog {
        name: String,
        #[serde(default = "one")]
        scale: f64,
    },
    Mix { names: Vec<String>, coefficients: Vec<f64> },
    /// MFS fit vanishing on Σ and matching a catalog field away from it.
    Fitted {
        target: String,
        #[serde(default)]
        mfs: MfsParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Whitney(WhitneyExperiment),
    Frequency(FrequencyExperiment),
    Cascade(CascadeExperiment),
    Doubling(DoublingExperiment),
    Cauchy(CauchyExperiment),
    Verify(VerifyExperiment),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Whitney(_) => "whitney",
            Experiment::Frequency(_) => "frequency",
            Experiment::Cascade(_) => "cascade",
            Experiment::Doubling(_) => "doubling",
            Experiment::Cauchy(_) => "cauchy",
            Experiment::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitneyExperiment {
    /// Window corners in user coordinates.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub params: Option<WhitneyParams>,
    #[serde(default)]
    pub audit: bool,
    /// Radius of `B0` at the domain centre; enables the generation map.
    #[serde(default)]
    pub b0_radius: Option<f64>,
    #[serde(default = "six")]
    pub generations: u32,
}

fn six() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyExperiment {
    /// Centre in user coordinates; defaults to the domain centre.
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "eight")]
    pub count: usize,
    #[serde(default)]
    pub derivative: bool,
    #[serde(default)]
    pub volume_energy: bool,
    #[serde(default = "rho_fd")]
    pub rho_fd: f64,
    /// Audit `|F - expect_f|` on every row.
    #[serde(default)]
    pub expect_f: Option<f64>,
}

fn eight() -> usize {
    8
}

fn rho_fd() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeExperiment {
    #[serde(default = "b0_radius")]
    pub b0_radius: f64,
    #[serde(default)]
    pub params: CascadeParams,
    #[serde(default)]
    pub fj: bool,
    /// Run the law-of-large-numbers harness on the cascade variables.
    #[serde(default)]
    pub lln_m: Option<u64>,
}

fn b0_radius() -> f64 {
    1.0 / 64.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingExperiment {
    #[serde(default = "twenty")]
    pub points: usize,
    /// Boundary points are drawn within `shrink` radii of the centre.
    #[serde(default = "half")]
    pub shrink: f64,
    pub r_max: f64,
    pub r_min: f64,
    #[serde(default = "five")]
    pub count: usize,
    #[serde(default)]
    pub params: DoublingParams,
    #[serde(default)]
    pub expect_ratio: Option<f64>,
}

fn twenty() -> usize {
    20
}

fn half() -> f64 {
    0.5
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyMode {
    Alpha,
    Flux,
    Mass,
    Threeball,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauchyExperiment {
    pub mode: CauchyMode,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<f64>,
    /// Radii for `ratio`; outer radius for `threeball`.
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub cutoff: Cutoff,
    #[serde(default)]
    pub mask: MaskSpec,
    /// Exponent for `threeball`; defaults to the value from `c2`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub estimate: AlphaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifyExperiment {
    #[serde(default)]
    pub filter: Option<String>,
}

impl GeometrySpec {
    pub fn build(&self, seed: u64) -> Result<GraphDomain> {
        let d = self.dim;
        let graph = match &self.graph {
            GraphSpec::Flat {} => LipschitzGraph::flat(d)?,
            GraphSpec::Ramp { slope } => LipschitzGraph::ramp(d, *slope)?,
            GraphSpec::Sawtooth { slope, period } => LipschitzGraph::sawtooth(d, *slope, *period)?,
            GraphSpec::Bump { slope, width } => LipschitzGraph::bump(d, *slope, *width)?,
            GraphSpec::RandomGrid { tau0, spacing, half_count, seed: s } => {
                LipschitzGraph::random_grid(d, *tau0, *spacing, *half_count, s.unwrap_or(seed))?
            }
        };
        let center = graph_point(&graph, self.center);
        let domain = GraphDomain::new(graph, center, self.radius)?;
        Ok(match self.extent {
            Some(e) => domain.with_extent(e),
            None => domain,
        })
    }
}

fn graph_point(graph: &LipschitzGraph, s: f64) -> Point {
    [s, 0.0, graph.phi(s)]
}

impl FieldSpec {
    pub fn build(&self, domain: &GraphDomain) -> Result<Box<dyn HarmonicField>> {
        let dim = domain.dim();
        let tilt = |f: CatalogField| match domain.graph.kind {
            GraphKind::Ramp { slope } => f.placed(domain.center, slope),
            _ => f,
        };
        Ok(match self {
            FieldSpec::Catalog { name, scale } => Box::new(tilt(CatalogField::named(dim, name)?.scaled(*scale))),
            FieldSpec::Mix { names, coefficients } => {
                if names.len() != coefficients.len() || names.is_empty() {
                    return Err(Error::Config("`names` and `coefficients` need equal, non-zero lengths".into()));
                }
                let mut terms = Vec::new();
                for (n, c) in names.iter().zip(coefficients) {
                    terms.extend(CatalogField::named(dim, n)?.terms.into_iter().map(|(a, t)| (a * c, t)));
                }
                Box::new(tilt(CatalogField::mix(dim, terms)?))
            }
            FieldSpec::Fitted { target, mfs } => {
                let t = tilt(CatalogField::named(dim, target)?);
                let f: FittedField = mfs_fit(domain, |p| t.value(p), mfs)?;
                Box::new(f)
            }
        })
    }
}

/// User coordinates to an internal point, or the domain centre.
pub fn point_or_center(domain: &GraphDomain, x: &Option<Vec<f64>>) -> Result<Point> {
    match x {
        Some(v) => embed(domain.dim(), v),
        None => Ok(domain.center),
    }
}
