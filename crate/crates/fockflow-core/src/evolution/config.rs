//! Scenario documents for evolution and flow sweeps.

use serde::{Deserialize, Serialize};

use super::{hamiltonian_to_scattering, system_trivial_field, EvolutionError, GeneratorField, HamiltonianField};
use crate::chain_space::Grid;
use crate::ito_calculus::TriangularMatrix;
use crate::kernel_algebra::matrix_from_pairs;
use crate::linalg::Mat;

pub type PairMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Weights {
    Named(String),
    List(Vec<f64>),
}

impl Default for Weights {
    fn default() -> Self {
        Weights::Named("uniform".into())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    pub t_max: f64,
    #[serde(default)]
    pub weights: Weights,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DimSection {
    pub dim: usize,
}

/// Triangular blocks; absent blocks are zero.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    #[serde(rename = "H00", default)]
    pub h00: Option<PairMatrix>,
    #[serde(rename = "H+0", default)]
    pub hp0: Option<PairMatrix>,
    #[serde(rename = "H0-", default)]
    pub h0m: Option<PairMatrix>,
    #[serde(rename = "H+-", default)]
    pub hpm: Option<PairMatrix>,
}

#[derive(Copy, Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `𝐅 = exp(−i𝐇)` from the listed Hamiltonian blocks.
    Hamiltonian,
    /// The listed blocks are `𝐋 = 𝐅 − 𝐈` directly.
    Scattering,
    /// The listed blocks are a noise-only table `𝐥` (system dimension 1 in
    /// the blocks), lifted as `I_H ⊗ 𝐥`.
    SecondQuantization,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: GeneratorKind,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(rename = "T0", default)]
    pub t0: Option<PairMatrix>,
}

#[derive(Copy, Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    /// `φ(x, A) = 𝐅^⋆(A ⊗ 𝟏)𝐅` with `𝐅` from the generator section.
    Spatial,
    /// `φ(x, A) = Σ 𝐋_k^⋆(A ⊗ 𝟏)𝐑_k` from explicit sandwich terms.
    CustomBlocks,
}

/// One sandwich term `𝐋^⋆(A ⊗ 𝟏)𝐑`, both given by their four blocks with
/// identity corners.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SandwichTerm {
    pub left: BlockSection,
    pub right: BlockSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub kind: MapKind,
    /// Algebra generators; the full matrix algebra when empty.
    #[serde(default)]
    pub generators: Vec<PairMatrix>,
    /// The operator whose flow is swept; defaults to the first generator.
    #[serde(default)]
    pub operator: Option<PairMatrix>,
    #[serde(default)]
    pub terms: Vec<SandwichTerm>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSection,
    pub system: DimSection,
    pub noise: DimSection,
    #[serde(default)]
    pub hamiltonian: BlockSection,
    pub generator: GeneratorSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub flow: Option<FlowSection>,
}

fn parse_matrix(m: &Option<PairMatrix>, rows: usize, cols: usize, name: &str) -> Result<Mat, EvolutionError> {
    match m {
        None => Ok(Mat::zeros(rows, cols)),
        Some(p) => {
            let x = matrix_from_pairs(p).map_err(|e| EvolutionError::Config(format!("{name}: {e}")))?;
            if (x.nrows(), x.ncols()) != (rows, cols) {
                return Err(EvolutionError::Config(format!("{name}: shape {}×{}, expected {rows}×{cols}", x.nrows(), x.ncols())));
            }
            Ok(x)
        }
    }
}

impl BlockSection {
    /// Zero-corner triangular matrix over `H = C^n`, `E = C^d`.
    pub fn triangular(&self, n: usize, d: usize) -> Result<TriangularMatrix, EvolutionError> {
        Ok(TriangularMatrix::from_blocks(
            &Mat::zeros(n, n),
            &parse_matrix(&self.h00, n * d, n * d, "H00")?,
            &parse_matrix(&self.hp0, n * d, n, "H+0")?,
            &parse_matrix(&self.h0m, n, n * d, "H0-")?,
            &parse_matrix(&self.hpm, n, n, "H+-")?,
            d,
        ))
    }
}

impl ScenarioConfig {
    /// Parse a TOML document; errors carry the line and column.
    pub fn from_toml(s: &str) -> Result<ScenarioConfig, EvolutionError> {
        toml::from_str(s).map_err(|e| EvolutionError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configured grid with `points` replaced by `m`.
    pub fn grid_with(&self, m: usize) -> Result<Grid, EvolutionError> {
        let (n, d) = (self.system.dim, self.noise.dim);
        let err = |e: crate::chain_space::GridError| EvolutionError::Config(e.to_string());
        match &self.grid.weights {
            Weights::Named(s) if s == "uniform" => Grid::uniform(m, self.grid.t_max, d, n).map_err(err),
            Weights::Named(s) => Err(EvolutionError::Config(format!("grid.weights: unknown scheme {s:?}, use \"uniform\" or a list"))),
            Weights::List(w) => {
                if w.len() != m {
                    return Err(EvolutionError::Config(format!("grid.weights lists {} weights for {m} points", w.len())));
                }
                let mut times = Vec::with_capacity(m);
                let mut acc = 0.0;
                for x in w {
                    times.push(acc);
                    acc += x;
                }
                Grid::new(times, w.clone(), d, n).map_err(err)
            }
        }
    }

    pub fn grid(&self) -> Result<Grid, EvolutionError> {
        self.grid_with(self.grid.points)
    }

    pub fn initial(&self) -> Result<Mat, EvolutionError> {
        let n = self.system.dim;
        match &self.initial.t0 {
            None => Ok(Mat::identity(n, n)),
            some => parse_matrix(some, n, n, "T0"),
        }
    }

    /// The point matrix `𝐅` shared by every grid point.
    pub fn point_generator(&self) -> Result<TriangularMatrix, EvolutionError> {
        let (n, d) = (self.system.dim, self.noise.dim);
        match self.generator.kind {
            GeneratorKind::Hamiltonian => Ok(hamiltonian_to_scattering(&self.hamiltonian.triangular(n, d)?)),
            GeneratorKind::Scattering => Ok(self.hamiltonian.triangular(n, d)?.add(&TriangularMatrix::identity(n, d))),
            GeneratorKind::SecondQuantization => {
                let l = self.hamiltonian.triangular(1, d)?;
                let g = Grid::uniform(1, 1.0, d, n).map_err(|e| EvolutionError::Config(e.to_string()))?;
                Ok(system_trivial_field(&g, &[l])?.point(0).clone())
            }
        }
    }

    /// The Hamiltonian field when the generator is given as one.
    pub fn hamiltonian_field(&self, grid: &Grid) -> Result<Option<HamiltonianField>, EvolutionError> {
        match self.generator.kind {
            GeneratorKind::Hamiltonian => {
                let h = self.hamiltonian.triangular(self.system.dim, self.noise.dim)?;
                Ok(Some(HamiltonianField::constant(grid, &h)?))
            }
            _ => Ok(None),
        }
    }

    pub fn field(&self, grid: &Grid) -> Result<GeneratorField, EvolutionError> {
        GeneratorField::constant(grid, &self.point_generator()?)
    }
}
