//! Model parameters shared by every module: lattice size, spin cardinality
//! and temperature, in units where the coupling and Boltzmann's constant are 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of angular sectors used to census XY spins.
pub const DEFAULT_Q_BIN: u32 = 6;

/// Spin cardinality: a finite clock model or the continuous XY limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    /// q-state clock spins `s = 0..q`.
    Finite(u32),
    /// Continuous planar rotors; `q_bin` sectors are used for the census.
    Continuous { q_bin: u32 },
}

impl Cardinality {
    /// Number of species (finite q) or angular bins (XY) seen by the census.
    pub fn n_species(self) -> usize {
        match self {
            Cardinality::Finite(q) => q as usize,
            Cardinality::Continuous { q_bin } => q_bin as usize,
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Cardinality::Continuous { .. })
    }

    /// `q` as written in CSV files: the integer, or `xy`.
    pub fn q_label(self) -> String {
        match self {
            Cardinality::Finite(q) => q.to_string(),
            Cardinality::Continuous { .. } => "xy".to_string(),
        }
    }

    /// Sector count written alongside `q`; equals `q` for finite models.
    pub fn q_bin(self) -> u32 {
        match self {
            Cardinality::Finite(q) => q,
            Cardinality::Continuous { q_bin } => q_bin,
        }
    }

    /// Parses the CSV/CLI form: an integer, or `xy`/`inf` with a sector count.
    pub fn parse(q: &str, q_bin: u32) -> Result<Self> {
        match q.trim() {
            "xy" | "inf" | "infinity" | "continuous" => Ok(Cardinality::Continuous { q_bin }),
            other => other
                .parse::<u32>()
                .map(Cardinality::Finite)
                .map_err(|_| Error::InvalidParams(format!("cannot parse q from {other:?}"))),
        }
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cardinality::Finite(q) => write!(f, "{q}"),
            Cardinality::Continuous { q_bin } => write!(f, "xy(q_bin={q_bin})"),
        }
    }
}

/// Lattice size, spin cardinality and temperature of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Sites per side; the lattice holds `size * size` spins.
    pub size: usize,
    pub q: Cardinality,
    /// Temperature. Zero selects the frozen limit; `f64::INFINITY` accepts every move.
    pub temperature: f64,
}

impl ModelParams {
    pub fn new(size: usize, q: Cardinality, temperature: f64) -> Result<Self> {
        let params = ModelParams {
            size,
            q,
            temperature,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn clock(size: usize, q: u32, temperature: f64) -> Result<Self> {
        Self::new(size, Cardinality::Finite(q), temperature)
    }

    pub fn xy(size: usize, q_bin: u32, temperature: f64) -> Result<Self> {
        Self::new(size, Cardinality::Continuous { q_bin }, temperature)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 3 {
            return Err(Error::InvalidParams(format!(
                "lattice size must be at least 3, got {}",
                self.size
            )));
        }
        if self.size > u32::MAX as usize / self.size {
            return Err(Error::InvalidParams(format!(
                "lattice size {} too large",
                self.size
            )));
        }
        match self.q {
            Cardinality::Finite(q) if !(2..=u16::MAX as u32).contains(&q) => {
                return Err(Error::InvalidParams(format!("q must be in 2..=65535, got {q}")));
            }
            Cardinality::Continuous { q_bin } if q_bin < 2 => {
                return Err(Error::InvalidParams(format!("q_bin must be at least 2, got {q_bin}")));
            }
            _ => {}
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidParams(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.size * self.size
    }

    pub fn with_size(&self, size: usize) -> Self {
        ModelParams { size, ..*self }
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        ModelParams {
            temperature,
            ..*self
        }
    }
}
