//! Conductivity of water-bearing rock.
//!
//! Three closed-form laws relate rock conductivity `sigma_o` (S/m) to
//! porosity `phi`, water saturation `sw` and clay volume fraction `f_clay`:
//!
//! * Archie (clean rock): `phi^m * sw^n * sigma_w`
//! * Waxman-Smits: `phi^m * sw^n * (sigma_w + B * Qv / sw)`
//! * Sen-Goode-Sibbit:
//!   `phi^m * sw^n * (sigma_w + 1.93 m muT Qv / (1 + 0.7 muT sw^-n / sigma_w)) + 1.3 muT phi^m Qv`
//!
//! with `sigma_w = 1 / rho_w`, `Qv = CEC * f_clay * (1 - phi) / phi` and
//! `muT = 1 + 0.0414 (T - 22)`. With no clay exchange capacity both shaly-sand
//! laws evaluate to exactly the Archie value.

mod fit;
mod nelder_mead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_params, FitBox, FitOptions, FitResult};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

/// Default formation temperature in degrees Celsius.
pub const DEFAULT_TEMPERATURE_C: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Equation {
    Ws,
    Sgs,
    Archie,
}

impl Equation {
    pub const ALL: [Equation; 3] = [Equation::Ws, Equation::Sgs, Equation::Archie];

    pub fn as_str(self) -> &'static str {
        match self {
            Equation::Ws => "WS",
            Equation::Sgs => "SGS",
            Equation::Archie => "ARCHIE",
        }
    }
}

impl std::fmt::Display for Equation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "WS" => Ok(Equation::Ws),
            "SGS" => Ok(Equation::Sgs),
            "ARCHIE" => Ok(Equation::Archie),
            other => Err(Error::Config(format!(
                "unknown equation {other:?}; expected WS, SGS or ARCHIE"
            ))),
        }
    }
}

/// Temperature-only Juhasz correlation for the Waxman-Smits `B` coefficient
/// (S/m per meq/ml).
pub fn b_of_temperature(temperature_c: f64) -> f64 {
    -1.28 + 0.225 * temperature_c - 0.0004059 * temperature_c * temperature_c
}

/// Formation conditions shared by every realization of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub temperature_c: f64,
    /// Replaces the temperature correlation for `B` when set.
    pub b_override: Option<f64>,
}

impl Default for Conditions {
    fn default() -> Self {
        Conditions {
            temperature_c: DEFAULT_TEMPERATURE_C,
            b_override: None,
        }
    }
}

impl Conditions {
    pub fn params(&self, m: f64, n: f64, rho_w: f64, cec: f64, eq: Equation) -> Result<RockParams> {
        RockParams::with_temperature(m, n, rho_w, cec, eq, self.temperature_c, self.b_override)
    }
}

/// Parameters of one conductivity realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RockParams {
    /// Cementation exponent.
    pub m: f64,
    /// Saturation exponent.
    pub n: f64,
    /// Water resistivity, ohm-m.
    pub rho_w: f64,
    /// Cation exchange capacity, meq/100g.
    pub cec: f64,
    pub temperature_c: f64,
    pub equation: Equation,
    /// Waxman-Smits `B`, precomputed from the temperature unless overridden.
    pub b_coeff: f64,
}

impl RockParams {
    /// Parameters at the default temperature with the matching `B`.
    pub fn new(m: f64, n: f64, rho_w: f64, cec: f64, equation: Equation) -> Result<Self> {
        RockParams::with_temperature(m, n, rho_w, cec, equation, DEFAULT_TEMPERATURE_C, None)
    }

    pub fn with_temperature(
        m: f64,
        n: f64,
        rho_w: f64,
        cec: f64,
        equation: Equation,
        temperature_c: f64,
        b_override: Option<f64>,
    ) -> Result<Self> {
        let p = RockParams {
            m,
            n,
            rho_w,
            cec: if equation == Equation::Archie { 0.0 } else { cec },
            temperature_c,
            equation,
            b_coeff: b_override.unwrap_or_else(|| b_of_temperature(temperature_c)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.m, self.n, self.rho_w, self.cec, self.temperature_c, self.b_coeff]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.m <= 0.0 || self.n <= 0.0 || self.rho_w <= 0.0 || self.cec < 0.0 {
            return Err(Error::Domain(format!(
                "invalid rock parameters: m={}, n={}, rho_w={}, cec={}",
                self.m, self.n, self.rho_w, self.cec
            )));
        }
        Ok(())
    }

    pub fn sigma_w(&self) -> f64 {
        1.0 / self.rho_w
    }

    /// Exchange capacity as used by the equation (zero for Archie).
    pub fn effective_cec(&self) -> f64 {
        match self.equation {
            Equation::Archie => 0.0,
            _ => self.cec,
        }
    }

    /// Conductivity of a point under this realization's equation.
    pub fn sigma(&self, phi: f64, sw: f64, f_clay: f64) -> f64 {
        match self.equation {
            Equation::Archie => sigma_archie(phi, sw, self),
            Equation::Ws => sigma_ws(phi, sw, f_clay, self),
            Equation::Sgs => sigma_sgs(phi, sw, f_clay, self),
        }
    }
}

/// One depth sample: inputs and observed conductivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogPoint {
    pub phi: f64,
    pub sw: f64,
    pub f_clay: f64,
    pub sigma_o: f64,
}

impl LogPoint {
    pub fn new(phi: f64, sw: f64, f_clay: f64, sigma_o: f64) -> Result<Self> {
        let p = LogPoint {
            phi,
            sw,
            f_clay,
            sigma_o,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.phi, self.sw, self.f_clay, self.sigma_o]
            .iter()
            .all(|v| v.is_finite())
            && self.phi > 0.0
            && self.phi < 1.0
            && self.sw > 0.0
            && self.sw <= 1.0
            && (0.0..1.0).contains(&self.f_clay)
            && self.sigma_o > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid log point {self:?}")))
        }
    }

    pub fn inputs(&self) -> [f64; 3] {
        [self.phi, self.sw, self.f_clay]
    }
}

/// Clay exchange cations per unit pore volume (meq/ml).
pub fn qv(phi: f64, f_clay: f64, cec: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Domain(format!("porosity {phi} outside (0, 1)")));
    }
    Ok(qv_unchecked(phi, f_clay, cec))
}

#[inline]
fn qv_unchecked(phi: f64, f_clay: f64, cec: f64) -> f64 {
    cec * f_clay * (1.0 - phi) / phi
}

/// Effective mobility of double-layer cations.
pub fn mu_t(temperature_c: f64) -> f64 {
    1.0 + 0.0414 * (temperature_c - 22.0)
}

pub fn sigma_archie(phi: f64, sw: f64, params: &RockParams) -> f64 {
    phi.powf(params.m) * sw.powf(params.n) * params.sigma_w()
}

pub fn sigma_ws(phi: f64, sw: f64, f_clay: f64, params: &RockParams) -> f64 {
    let q = qv_unchecked(phi, f_clay, params.effective_cec());
    let clay = params.b_coeff * q / sw;
    phi.powf(params.m) * sw.powf(params.n) * (params.sigma_w() + clay)
}

pub fn sigma_sgs(phi: f64, sw: f64, f_clay: f64, params: &RockParams) -> f64 {
    let q = qv_unchecked(phi, f_clay, params.effective_cec());
    let mu = mu_t(params.temperature_c);
    let sigma_w = params.sigma_w();
    let sw_n = sw.powf(params.n);
    let phi_m = phi.powf(params.m);
    let clay = 1.93 * params.m * mu * q / (1.0 + 0.7 * mu / sw_n / sigma_w);
    phi_m * sw_n * (sigma_w + clay) + 1.3 * mu * phi_m * q
}
