//! Physical parameters of the wire-in-tube problem and the three uniform
//! random inputs (tube inner radius, current magnitude, tube permeability).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Deterministic description of one problem instance.
///
/// Region I is the wire (`r < r0`), region II the air gap (`r0 < r < r1`) and
/// region III the steel tube (`r1 < r < r2`). Only the tube conducts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Wire radius (m).
    pub r0: f64,
    /// Tube inner radius (m).
    pub r1: f64,
    /// Tube outer radius, carrying the Dirichlet condition (m).
    pub r2: f64,
    /// Relative permeabilities of regions I, II, III.
    pub mu_wire: f64,
    pub mu_air: f64,
    pub mu_tube: f64,
    /// Tube conductivity (S/m).
    pub sigma: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Phasor magnitude of the wire current (A).
    pub current: f64,
}

impl Default for ModelParams {
    /// Nominal instance: r0 = 0.1 m, r1 = 0.5 m, r2 = 0.8 m, sigma = 2e3 S/m,
    /// f = 50 Hz, I0 = 100 A, mu_III = 1000.
    fn default() -> Self {
        ModelParams {
            r0: 0.1,
            r1: 0.5,
            r2: 0.8,
            mu_wire: 1.0,
            mu_air: 1.0,
            mu_tube: 1000.0,
            sigma: 2.0e3,
            omega: 2.0 * std::f64::consts::PI * 50.0,
            current: 100.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r0,
            self.r1,
            self.r2,
            self.mu_wire,
            self.mu_air,
            self.mu_tube,
            self.sigma,
            self.omega,
            self.current,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("model parameters must be finite"));
        }
        if !(0.0 < self.r0 && self.r0 < self.r1 && self.r1 < self.r2) {
            return Err(Error::config(format!(
                "radii must satisfy 0 < r0 < r1 < r2, got r0 = {}, r1 = {}, r2 = {}",
                self.r0, self.r1, self.r2
            )));
        }
        if self.mu_wire != 1.0 || self.mu_air != 1.0 {
            return Err(Error::config("wire and air regions must have relative permeability 1"));
        }
        if self.mu_tube < 1.0 {
            return Err(Error::config(format!("mu_tube must be >= 1, got {}", self.mu_tube)));
        }
        if self.sigma < 0.0 {
            return Err(Error::config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.omega <= 0.0 {
            return Err(Error::config(format!("omega must be > 0, got {}", self.omega)));
        }
        Ok(())
    }

    /// Source current density phasor in the wire, `I0 / (pi r0^2)` (A/m^2).
    pub fn source_density(&self) -> f64 {
        self.current / (std::f64::consts::PI * self.r0 * self.r0)
    }

    /// Skin depth `sqrt(2 / (omega mu sigma))` in the tube; infinite for sigma = 0.
    pub fn skin_depth(&self) -> f64 {
        let denom = self.omega * self.mu_tube * crate::MU0 * self.sigma;
        if denom > 0.0 {
            (2.0 / denom).sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn with_frequency(mut self, hz: f64) -> Self {
        self.omega = 2.0 * std::f64::consts::PI * hz;
        self
    }

    /// Replace the three random fields by their nominal values.
    pub fn nominal(&self, dists: &ParameterDistributions) -> ModelParams {
        ModelParams {
            r1: dists.r1.nominal,
            current: dists.current.nominal,
            mu_tube: dists.mu_tube.nominal,
            ..*self
        }
    }

    /// Override the three random fields with a sample and re-check invariants.
    pub fn apply_sample(&self, s: &ParamSample) -> Result<ModelParams> {
        let p = ModelParams {
            r1: s.r1,
            current: s.current,
            mu_tube: s.mu_tube,
            ..*self
        };
        p.validate()?;
        Ok(p)
    }
}

/// Symmetric uniform law `U(nominal - half_width, nominal + half_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformParam {
    pub nominal: f64,
    pub half_width: f64,
}

impl UniformParam {
    pub const fn new(nominal: f64, half_width: f64) -> Self {
        UniformParam { nominal, half_width }
    }

    pub fn lo(&self) -> f64 {
        self.nominal - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.nominal + self.half_width
    }

    /// Map a unit variate `u` in `[0, 1)` onto the support. `u = 0.5` gives the nominal value.
    pub fn at(&self, u: f64) -> f64 {
        self.nominal + self.half_width * (2.0 * u - 1.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.half_width == 0.0
    }

    pub fn variance(&self) -> f64 {
        self.half_width * self.half_width / 3.0
    }
}

/// The three independent uniform inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterDistributions {
    pub r1: UniformParam,
    pub current: UniformParam,
    pub mu_tube: UniformParam,
}

impl Default for ParameterDistributions {
    fn default() -> Self {
        ParameterDistributions {
            r1: UniformParam::new(0.5, 0.1),
            current: UniformParam::new(100.0, 10.0),
            mu_tube: UniformParam::new(1000.0, 400.0),
        }
    }
}

impl ParameterDistributions {
    /// Check the distributions against the fixed geometry.
    pub fn validate(&self, fixed: &ModelParams) -> Result<()> {
        for (name, d) in [("r1", self.r1), ("current", self.current), ("mu_tube", self.mu_tube)] {
            if !(d.nominal.is_finite() && d.half_width.is_finite() && d.half_width >= 0.0) {
                return Err(Error::config(format!(
                    "distribution of {name} needs a finite nominal value and half-width >= 0"
                )));
            }
        }
        if !(self.r1.lo() > fixed.r0 && self.r1.hi() < fixed.r2) {
            return Err(Error::config(format!(
                "r1 support [{}, {}] must lie strictly inside ({}, {})",
                self.r1.lo(),
                self.r1.hi(),
                fixed.r0,
                fixed.r2
            )));
        }
        if self.mu_tube.lo() < 1.0 {
            return Err(Error::config(format!(
                "mu_tube support starts at {} < 1",
                self.mu_tube.lo()
            )));
        }
        Ok(())
    }

    /// All three laws have zero width, so every sample is the nominal one.
    pub fn is_degenerate(&self) -> bool {
        self.r1.is_degenerate() && self.current.is_degenerate() && self.mu_tube.is_degenerate()
    }

    pub fn collapsed(&self) -> Self {
        ParameterDistributions {
            r1: UniformParam::new(self.r1.nominal, 0.0),
            current: UniformParam::new(self.current.nominal, 0.0),
            mu_tube: UniformParam::new(self.mu_tube.nominal, 0.0),
        }
    }

    /// Draw sample `sample_index` of the stream family `master_seed`.
    ///
    /// The variates are consumed in the order r1, current, mu_tube.
    pub fn draw(&self, master_seed: u64, sample_index: u64) -> ParamSample {
        let mut g = SplitMix64::for_sample(master_seed, sample_index);
        let (u1, u2, u3) = (g.next_f64(), g.next_f64(), g.next_f64());
        self.sample_from_unit(u1, u2, u3, master_seed, sample_index)
    }

    /// Sample built from explicit unit variates.
    pub fn sample_from_unit(
        &self,
        u_r1: f64,
        u_current: f64,
        u_mu: f64,
        master_seed: u64,
        sample_index: u64,
    ) -> ParamSample {
        ParamSample {
            r1: self.r1.at(u_r1),
            current: self.current.at(u_current),
            mu_tube: self.mu_tube.at(u_mu),
            sample_index,
            master_seed,
        }
    }

    pub fn nominal_sample(&self) -> ParamSample {
        self.sample_from_unit(0.5, 0.5, 0.5, 0, 0)
    }
}

/// One realization of the random inputs together with its seed lineage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSample {
    pub r1: f64,
    pub current: f64,
    pub mu_tube: f64,
    pub sample_index: u64,
    pub master_seed: u64,
}
