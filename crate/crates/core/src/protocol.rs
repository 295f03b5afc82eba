//! Protocol identifiers and physical parameters.
//!
//! Internally gamma = 1 sets the unit system: frequencies in units of gamma,
//! times in units of 1/gamma. All parameters are stored as the dimensionless
//! ratios the scaling laws are quoted in.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Resonant storage with no applied broadening (EIT / Raman / absorption).
    Unbroadened,
    /// Transverse CRIB with a rectangular broadening profile.
    Tcrib,
    /// Longitudinal CRIB, closed-form kernel (validation only; singular locus).
    LcribAnalytic,
    /// Longitudinal CRIB, Green's function built by the Maxwell-Bloch solver.
    LcribNumeric,
    /// Raman storage with a longitudinal broadening of the storage state.
    Raman,
    /// Atomic frequency comb.
    Afc,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Unbroadened => "unbroadened",
            Protocol::Tcrib => "tcrib",
            Protocol::LcribAnalytic => "lcrib-analytic",
            Protocol::LcribNumeric => "lcrib-numeric",
            Protocol::Raman => "raman",
            Protocol::Afc => "afc",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbroadened" => Ok(Protocol::Unbroadened),
            "tcrib" => Ok(Protocol::Tcrib),
            "lcrib-analytic" => Ok(Protocol::LcribAnalytic),
            "lcrib-numeric" => Ok(Protocol::LcribNumeric),
            "raman" => Ok(Protocol::Raman),
            "afc" => Ok(Protocol::Afc),
            other => Err(Error::InvalidSpec(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Gaussian control pulse `Omega(tau) = amplitude * exp(-((tau - center)/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl ControlPulse {
    /// Rabi frequency at time `tau`.
    pub fn rabi(&self, tau: f64) -> f64 {
        let u = (tau - self.center) / self.width;
        self.amplitude * (-u * u).exp()
    }

    /// The reference operating pulse for depth `d`: `sqrt(10 d) * exp(-(10 tau)^2)`,
    /// amplitude in units of gamma, centered at tau = 0.
    pub fn raman_default(d: f64) -> Self {
        ControlPulse {
            amplitude: (10.0 * d).sqrt(),
            center: 0.0,
            width: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub protocol: Protocol,
    /// Optical depth. Total depth for unbroadened/CRIB/Raman; depth per comb
    /// tooth for AFC.
    pub d: f64,
    /// Half homogeneous linewidth; the frequency unit, fixed to 1.
    pub gamma: f64,
    /// Width of the applied broadening in units of gamma (0 if unbroadened).
    pub delta0: f64,
    /// Raman detuning in units of gamma.
    pub delta: f64,
    /// Comb tooth count (AFC only).
    pub m_teeth: u32,
    /// Control pulse (Raman only).
    pub control: Option<ControlPulse>,
}

impl ProtocolSpec {
    pub fn new(protocol: Protocol, d: f64) -> Self {
        ProtocolSpec {
            protocol,
            d,
            gamma: 1.0,
            delta0: 0.0,
            delta: 0.0,
            m_teeth: 1,
            control: None,
        }
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    pub fn with_teeth(mut self, m: u32) -> Self {
        self.m_teeth = m;
        self
    }

    /// Reference Raman settings for depth `d`: default Gaussian control and
    /// detuning `sqrt(90 d) gamma`.
    pub fn raman_reference(d: f64, delta0: f64) -> Self {
        let mut s = ProtocolSpec::new(Protocol::Raman, d);
        s.delta = (90.0 * d).sqrt();
        s.delta0 = delta0;
        s.control = Some(ControlPulse::raman_default(d));
        s
    }

    /// AFC spec from per-tooth depth, tooth count and finesse F = Delta0 / (2 gamma (M-1)).
    pub fn afc_from_finesse(d_per_tooth: f64, m: u32, finesse: f64) -> Self {
        let mut s = ProtocolSpec::new(Protocol::Afc, d_per_tooth);
        s.m_teeth = m;
        s.delta0 = if m > 1 {
            2.0 * finesse * (m - 1) as f64
        } else {
            0.0
        };
        s
    }

    /// Comb finesse `Delta0 / (2 gamma (M - 1))`; `None` for a single tooth.
    pub fn finesse(&self) -> Option<f64> {
        (self.m_teeth > 1).then(|| self.delta0 / (2.0 * self.gamma * (self.m_teeth - 1) as f64))
    }

    /// Exponent ratio beta = d gamma / Delta0 of the analytic lCRIB kernel.
    pub fn beta(&self) -> f64 {
        self.d * self.gamma / self.delta0
    }

    /// Comb tooth detunings delta_j = -Delta0/2 + (j-1) Delta0/(M-1); a single
    /// tooth sits at zero detuning.
    pub fn tooth_detunings(&self) -> Vec<f64> {
        let m = self.m_teeth;
        if m == 1 {
            return vec![0.0];
        }
        (0..m)
            .map(|j| -0.5 * self.delta0 + j as f64 * self.delta0 / (m - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidSpec(format!("optical depth d must be > 0, got {}", self.d)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidSpec("gamma must be > 0".into()));
        }
        if self.delta0 < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "broadening width delta0 must be >= 0, got {}",
                self.delta0
            )));
        }
        if self.m_teeth < 1 {
            return Err(Error::InvalidSpec("tooth count M must be >= 1".into()));
        }
        if self.protocol == Protocol::Afc && self.m_teeth >= 2 && self.delta0 == 0.0 {
            return Err(Error::InvalidSpec(
                "AFC with M >= 2 teeth requires delta0 > 0 (coincident teeth would change d_tot)"
                    .into(),
            ));
        }
        if self.protocol == Protocol::Raman {
            match &self.control {
                None => {
                    return Err(Error::InvalidSpec(
                        "raman protocol requires control pulse parameters".into(),
                    ))
                }
                Some(c) if !(c.width > 0.0) => {
                    return Err(Error::InvalidSpec("control width must be > 0".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
