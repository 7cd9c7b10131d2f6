//! Experiment configuration: a JSON document, every section optional.

use std::collections::BTreeMap;
use std::fmt;

use magtrace_core::dixmier::DixmierConfig;
use magtrace_core::elements::{ElementQuadrature, L1Element};
use magtrace_core::hull::{AverageQuadrature, ExpectationConfig, HullModel, PotentialSymbol, TrigMode};
use magtrace_core::regions::{BoolOp, RegionSpec};
use magtrace_core::tuv::{FolnerSchedule, TuvConfig};
use magtrace_core::MagneticParams;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl From<magtrace_core::Error> for ConfigError {
    fn from(e: magtrace_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub magnetic: MagneticSection,
    pub seed: u64,
    pub hull: HullSpec,
    pub potentials: BTreeMap<String, PotentialSpec>,
    pub regions: BTreeMap<String, RegionConfig>,
    pub element: Vec<TermSpec>,
    pub scaling: ScalingSection,
    pub dixmier: DixmierSection,
    pub tuv: TuvSection,
    pub compare: CompareSection,
    pub quadrature: QuadratureSection,
    pub algebra: AlgebraSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut potentials = BTreeMap::new();
        potentials.insert(
            "g".to_string(),
            PotentialSpec::Cosine {
                offset: 1.0,
                amplitude: 0.5,
                freq: vec![1, 0],
            },
        );
        let mut regions = BTreeMap::new();
        regions.insert(
            "quarter".to_string(),
            RegionConfig::Sector {
                theta1: 0.0,
                theta2: std::f64::consts::FRAC_PI_2,
            },
        );
        regions.insert(
            "stripes".to_string(),
            RegionConfig::Stripes {
                direction: [1.0, 0.0],
                width: 1.0,
                period: 3.0,
                phase: 0.0,
            },
        );
        Self {
            magnetic: MagneticSection::default(),
            seed: 1,
            hull: HullSpec::Torus {
                period: Some(1.0),
                alpha: None,
                beta: None,
            },
            potentials,
            regions,
            element: vec![
                TermSpec {
                    source: 0,
                    target: 0,
                    potential: "g".into(),
                },
                TermSpec {
                    source: 1,
                    target: 2,
                    potential: "g".into(),
                },
            ],
            scaling: ScalingSection::default(),
            dixmier: DixmierSection::default(),
            tuv: TuvSection::default(),
            compare: CompareSection::default(),
            quadrature: QuadratureSection::default(),
            algebra: AlgebraSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagneticSection {
    pub ell: f64,
    pub lambda: f64,
}

impl Default for MagneticSection {
    fn default() -> Self {
        Self { ell: 1.0, lambda: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HullSpec {
    Singleton,
    /// Either a square period or an explicit lattice basis.
    Torus {
        #[serde(default)]
        period: Option<f64>,
        #[serde(default)]
        alpha: Option<[f64; 2]>,
        #[serde(default)]
        beta: Option<[f64; 2]>,
    },
    QuasiPeriodic {
        freqs: Vec<[f64; 2]>,
    },
    /// Seeded by the top-level seed.
    RandomFourier {
        modes: usize,
        decay: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub freq: Vec<i64>,
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: [f64; 2],
    },
    /// offset + amplitude·cos(2π freq·ω).
    Cosine {
        offset: f64,
        amplitude: f64,
        freq: Vec<i64>,
    },
    Trig {
        constant: [f64; 2],
        modes: Vec<ModeSpec>,
    },
    /// The random Fourier field of a random-Fourier hull.
    RandomFourier,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    FullPlane,
    HalfPlane {
        normal: [f64; 2],
        offset: f64,
    },
    Sector {
        theta1: f64,
        theta2: f64,
    },
    Stripes {
        direction: [f64; 2],
        width: f64,
        period: f64,
        phase: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Combo {
        op: ComboOp,
        children: Vec<RegionConfig>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComboOp {
    Union,
    Intersection,
    Difference,
    Complement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub source: usize,
    pub target: usize,
    pub potential: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSection {
    /// (i, j) pairs.
    pub indices: Vec<[usize; 2]>,
    pub n: Vec<usize>,
    pub xi: Vec<f64>,
    pub l1_n: Vec<usize>,
    pub diagonal_tolerance: f64,
    pub off_diagonal_tolerance: f64,
    pub l1_tolerance: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            indices: (0..4).flat_map(|i| (0..4).map(move |j| [i, j])).collect(),
            n: vec![2000],
            xi: vec![0.25, 0.5, 1.0, 1.5, 2.0],
            l1_n: vec![10, 100, 1000],
            diagonal_tolerance: 1e-3,
            off_diagonal_tolerance: 5e-2,
            l1_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DixmierRun {
    pub region: String,
    pub j: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DixmierSection {
    pub schedule: Vec<usize>,
    pub runs: Vec<DixmierRun>,
    /// Extra λ values besides magnetic.lambda.
    pub lambdas: Vec<f64>,
    pub tolerance: f64,
}

impl Default for DixmierSection {
    fn default() -> Self {
        Self {
            schedule: vec![100, 200, 500, 1000, 2000, 5000, 10_000, 20_000],
            runs: vec![
                DixmierRun {
                    region: "quarter".into(),
                    j: 0,
                    k: 0,
                },
                DixmierRun {
                    region: "stripes".into(),
                    j: 0,
                    k: 0,
                },
                DixmierRun {
                    region: "stripes".into(),
                    j: 0,
                    k: 1,
                },
            ],
            lambdas: Vec::new(),
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuvSection {
    pub sizes: Vec<f64>,
    pub tolerance: f64,
    pub shape_tolerance: f64,
}

impl Default for TuvSection {
    fn default() -> Self {
        Self {
            sizes: vec![10.5, 20.5, 50.5],
            tolerance: 1e-3,
            shape_tolerance: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub omega_samples: usize,
    pub dixmier_tolerance: f64,
    pub tuv_tolerance: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            omega_samples: 8,
            dixmier_tolerance: 0.05,
            tuv_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub element_nodes: usize,
    pub element_tolerance: f64,
    pub average_nodes: usize,
    pub omega_points: usize,
    pub mc_samples: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self {
            element_nodes: 16,
            element_tolerance: 1e-9,
            average_nodes: 10,
            omega_points: 8,
            mc_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraSection {
    pub period: f64,
    pub step: f64,
    pub half_width: usize,
    pub omega_points: usize,
    pub cocycle_triples: usize,
    pub pairs: usize,
    /// Negative control: flips the sign of the cocycle phase.
    pub break_cocycle: bool,
}

impl Default for AlgebraSection {
    fn default() -> Self {
        Self {
            period: 2.0,
            step: 0.5,
            half_width: 8,
            omega_points: 4,
            cocycle_triples: 10_000,
            pairs: 20,
            break_cocycle: false,
        }
    }
}

/// Everything a command needs, built once from a validated config.
pub struct Setup {
    pub config: ExperimentConfig,
    pub hash: String,
    pub params: MagneticParams,
    pub hull: HullModel,
    pub regions: BTreeMap<String, RegionSpec>,
    pub element: L1Element,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dixmier_config(&self, params: MagneticParams) -> DixmierConfig {
        DixmierConfig {
            params,
            quad: ElementQuadrature {
                nodes: self.quadrature.element_nodes,
                tolerance: self.quadrature.element_tolerance,
                ..ElementQuadrature::default()
            },
        }
    }

    pub fn expectation_config(&self) -> ExpectationConfig {
        ExpectationConfig {
            points: self.quadrature.omega_points,
            mc_samples: self.quadrature.mc_samples,
            seed: self.seed,
        }
    }

    pub fn tuv_config(&self, params: MagneticParams) -> TuvConfig {
        TuvConfig {
            params,
            quad: AverageQuadrature {
                nodes: self.quadrature.average_nodes,
                ..AverageQuadrature::default()
            },
            omega: self.expectation_config(),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let mut out = vec![self.magnetic.lambda];
        for &l in &self.dixmier.lambdas {
            if !out.contains(&l) {
                out.push(l);
            }
        }
        out
    }

    pub fn folner(&self, square: bool) -> Result<FolnerSchedule, ConfigError> {
        let sizes = self.tuv.sizes.clone();
        Ok(if square { FolnerSchedule::square(sizes)? } else { FolnerSchedule::disk(sizes)? })
    }

    pub fn build(self) -> Result<Setup, ConfigError> {
        if !(self.magnetic.ell > 0.0) {
            return bad("magnetic.ell must be positive");
        }
        if !(self.magnetic.lambda > -1.0) || self.dixmier.lambdas.iter().any(|l| !(*l > -1.0)) {
            return bad("lambda must exceed -1");
        }
        magtrace_core::dixmier::validate_extrapolation_schedule(&self.dixmier.schedule)?;
        self.folner(true)?;
        if self.scaling.n.iter().chain(&self.scaling.l1_n).any(|&n| n < 2) {
            return bad("scaling N values must be at least 2");
        }
        if self.scaling.xi.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return bad("scaling xi values must be finite and nonnegative");
        }
        if self.quadrature.element_nodes == 0 || self.quadrature.average_nodes == 0 || self.quadrature.omega_points == 0 {
            return bad("quadrature node counts must be positive");
        }
        if self.compare.omega_samples == 0 {
            return bad("compare.omega_samples must be positive");
        }
        let params = MagneticParams::new(self.magnetic.ell)?;
        let hull = match &self.hull {
            HullSpec::Singleton => HullModel::singleton(),
            HullSpec::Torus { period: Some(p), alpha: None, beta: None } => HullModel::square_torus(*p)?,
            HullSpec::Torus { period: None, alpha: Some(a), beta: Some(b) } => HullModel::torus(*a, *b)?,
            HullSpec::Torus { .. } => return bad("torus hull needs either period or both alpha and beta"),
            HullSpec::QuasiPeriodic { freqs } => HullModel::quasi_periodic(freqs.clone())?,
            HullSpec::RandomFourier { modes, decay } => HullModel::random_fourier(*modes, *decay, self.seed)?,
        };
        let mut potentials = BTreeMap::new();
        for (name, spec) in &self.potentials {
            let g = match spec {
                PotentialSpec::Constant { value } => PotentialSymbol::constant(Complex64::new(value[0], value[1])),
                PotentialSpec::Cosine { offset, amplitude, freq } => {
                    check_freq(name, freq, &hull)?;
                    PotentialSymbol::cosine(*offset, *amplitude, freq.clone())
                }
                PotentialSpec::Trig { constant, modes } => {
                    let mut ms = Vec::with_capacity(modes.len());
                    for m in modes {
                        check_freq(name, &m.freq, &hull)?;
                        ms.push(TrigMode {
                            freq: m.freq.clone(),
                            amplitude: Complex64::new(m.amplitude[0], m.amplitude[1]),
                        });
                    }
                    PotentialSymbol::trig(Complex64::new(constant[0], constant[1]), ms)
                }
                PotentialSpec::RandomFourier => PotentialSymbol::random_fourier(&hull)?,
            };
            potentials.insert(name.clone(), g);
        }
        let mut regions = BTreeMap::new();
        for (name, spec) in &self.regions {
            regions.insert(name.clone(), region(spec)?);
        }
        for run in &self.dixmier.runs {
            if !regions.contains_key(&run.region) {
                return bad(format!("dixmier run refers to unknown region '{}'", run.region));
            }
        }
        let mut element = L1Element::new(&hull);
        for t in &self.element {
            let g = potentials
                .get(&t.potential)
                .ok_or_else(|| ConfigError(format!("element term refers to unknown potential '{}'", t.potential)))?;
            element = element.with_term(t.source, t.target, g.clone());
        }
        Ok(Setup {
            hash: self.hash(),
            config: self,
            params,
            hull,
            regions,
            element,
        })
    }
}

fn check_freq(name: &str, freq: &[i64], hull: &HullModel) -> Result<(), ConfigError> {
    if freq.len() != hull.dim() {
        return bad(format!("potential '{name}': frequency vector has {} entries, hull dimension is {}", freq.len(), hull.dim()));
    }
    Ok(())
}

fn region(spec: &RegionConfig) -> Result<RegionSpec, ConfigError> {
    Ok(match spec {
        RegionConfig::FullPlane => RegionSpec::FullPlane,
        RegionConfig::HalfPlane { normal, offset } => RegionSpec::half_plane(*normal, *offset)?,
        RegionConfig::Sector { theta1, theta2 } => RegionSpec::sector(*theta1, *theta2)?,
        RegionConfig::Stripes {
            direction,
            width,
            period,
            phase,
        } => RegionSpec::stripes(*direction, *width, *period, *phase)?,
        RegionConfig::Disk { center, radius } => RegionSpec::disk(*center, *radius)?,
        RegionConfig::Combo { op, children } => {
            let op = match op {
                ComboOp::Union => BoolOp::Union,
                ComboOp::Intersection => BoolOp::Intersection,
                ComboOp::Difference => BoolOp::Difference,
                ComboOp::Complement => BoolOp::Complement,
            };
            RegionSpec::combo(op, children.iter().map(region).collect::<Result<_, _>>()?)?
        }
    })
}
