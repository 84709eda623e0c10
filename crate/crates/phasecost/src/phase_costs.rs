//! Phase-field costs `c`, mass-specific costs `z(phi) = c(phi)/phi`, and the
//! transform `g = (z^-1)^{3/2}` linking `z` to the deconvolution problem.

use crate::error::{Error, Result};
use crate::monotone::{SampledFn, StepFn};
use crate::quad;
use serde::{Deserialize, Serialize};

/// Closed-form mass-specific costs.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticZ {
    /// `z(phi) = coeff * phi^exponent`, `exponent <= 0`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// Smooth urban planning: `z(phi) = max(a - C phi^3, b)` with
    /// `C = (2 pi^2 / 9) ((a-b)/d)^2`, i.e. `c(phi) = max(a phi - C phi^4, b phi)`.
    UrbanPlanningSmooth { a: f64, b: f64, d: f64 },
}

impl AnalyticZ {
    fn cubic_coeff(a: f64, b: f64, d: f64) -> f64 {
        (2.0 * std::f64::consts::PI.powi(2) / 9.0) * ((a - b) / d).powi(2)
    }

    pub fn eval(&self, phi: f64) -> f64 {
        match *self {
            Self::PowerLaw { coeff, exponent } => {
                if phi == 0.0 {
                    if exponent == 0.0 {
                        coeff
                    } else {
                        f64::INFINITY
                    }
                } else {
                    coeff * phi.powf(exponent)
                }
            }
            Self::UrbanPlanningSmooth { a, b, d } => {
                (a - Self::cubic_coeff(a, b, d) * phi.powi(3)).max(b)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::PowerLaw { coeff, exponent } => {
                if !(coeff >= 0.0) || !(exponent <= 0.0) {
                    return Err(Error::Validation(format!(
                        "power-law z needs coeff >= 0 and exponent <= 0, got {coeff} * phi^{exponent}"
                    )));
                }
            }
            Self::UrbanPlanningSmooth { a, b, d } => {
                if !(a > b && b >= 0.0 && d > 0.0) {
                    return Err(Error::Validation(format!(
                        "smooth urban planning needs a > b >= 0 and d > 0, got a={a} b={b} d={d}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The mass-specific cost `z(phi) = c(phi)/phi`: nonincreasing, lower
/// semi-continuous, values in `[0, inf]` with `inf` only as `phi -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum MassSpecificCost {
    Step(StepFn),
    Sampled(SampledFn),
    Analytic(AnalyticZ),
}

/// `g(s) = (z^-1(s))^{3/2}`, same representational union as the cost it
/// came from.
#[derive(Debug, Clone, PartialEq)]
pub enum GTransform {
    Step(StepFn),
    Sampled(SampledFn),
    Analytic(AnalyticG),
}

/// Closed-form transforms.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticG {
    /// `g(s) = coeff * s^exponent` for `s > 0`, `exponent < 0`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// `g(s) = coeff * sqrt(a - s)` on `[b, a)`, `inf` below `b`, 0 at and
    /// above `a`.
    SqrtBand { a: f64, b: f64, coeff: f64 },
}

impl AnalyticG {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Self::PowerLaw { coeff, exponent } => {
                if s == 0.0 {
                    f64::INFINITY
                } else {
                    coeff * s.powf(exponent)
                }
            }
            Self::SqrtBand { a, b, coeff } => {
                if s < b {
                    f64::INFINITY
                } else if s < a {
                    coeff * (a - s).sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

impl MassSpecificCost {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Step(_) | Self::Sampled(_) => Ok(()), // validated on construction
            Self::Analytic(a) => a.validate(),
        }
    }

    /// Evaluate `z(phi)`; may be infinite at 0.
    pub fn eval(&self, phi: f64) -> Result<f64> {
        if phi < 0.0 {
            return Err(Error::Domain(format!("density must be nonnegative, got {phi}")));
        }
        Ok(match self {
            Self::Step(f) => f.eval(phi),
            Self::Sampled(f) => f.eval(phi),
            Self::Analytic(a) => a.eval(phi),
        })
    }

    pub fn limit_at_zero(&self) -> f64 {
        match self {
            Self::Step(f) => f.limit_at_zero(),
            Self::Sampled(f) => f.limit_at_zero(),
            Self::Analytic(AnalyticZ::PowerLaw { coeff, exponent }) => {
                if *exponent == 0.0 {
                    *coeff
                } else {
                    f64::INFINITY
                }
            }
            Self::Analytic(AnalyticZ::UrbanPlanningSmooth { a, .. }) => *a,
        }
    }

    pub fn limit_at_infinity(&self) -> f64 {
        match self {
            Self::Step(f) => f.limit_at_infinity(),
            Self::Sampled(f) => f.limit_at_infinity(),
            Self::Analytic(AnalyticZ::PowerLaw { coeff, exponent }) => {
                if *exponent == 0.0 {
                    *coeff
                } else {
                    0.0
                }
            }
            Self::Analytic(AnalyticZ::UrbanPlanningSmooth { b, .. }) => *b,
        }
    }

    /// The generalized inverse `z^-1(s) = inf { phi | z(phi) <= s }` at a
    /// single point; exact for every form.
    pub fn inverse_at(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("slope must be nonnegative, got {s}")));
        }
        Ok(match self {
            Self::Step(f) => f.generalized_inverse().eval(s),
            Self::Sampled(f) => f.generalized_inverse().eval(s),
            Self::Analytic(AnalyticZ::PowerLaw { coeff, exponent }) => {
                if *exponent == 0.0 {
                    if s >= *coeff {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else if s == 0.0 {
                    f64::INFINITY
                } else {
                    (s / coeff).powf(1.0 / exponent)
                }
            }
            Self::Analytic(AnalyticZ::UrbanPlanningSmooth { a, b, d }) => {
                if s < *b {
                    f64::INFINITY
                } else if s >= *a {
                    0.0
                } else {
                    ((a - s) / AnalyticZ::cubic_coeff(*a, *b, *d)).cbrt()
                }
            }
        })
    }

    /// Structural generalized inverse (step -> step exactly, sampled ->
    /// sampled by reflection). Analytic forms are not required here; use
    /// [`Self::inverse_at`] for pointwise values instead.
    pub fn generalized_inverse(&self) -> Result<MassSpecificCost> {
        match self {
            Self::Step(f) => Ok(Self::Step(f.generalized_inverse())),
            Self::Sampled(f) => Ok(Self::Sampled(f.generalized_inverse())),
            Self::Analytic(_) => Err(Error::UnsupportedForm(
                "structural inverse needs a step or sampled form; use inverse_at for analytic z"
                    .into(),
            )),
        }
    }
}

/// `g = (z^-1)^{3/2}`. Step in, step out; analytic forms map to analytic
/// forms in closed form.
pub fn g_from_z(z: &MassSpecificCost) -> Result<GTransform> {
    z.validate()?;
    Ok(match z {
        MassSpecificCost::Step(f) => {
            GTransform::Step(f.generalized_inverse().map_levels(|l| l.powf(1.5))?)
        }
        MassSpecificCost::Sampled(f) => {
            let inv = f.generalized_inverse();
            GTransform::Sampled(SampledFn::new(
                inv.x().to_vec(),
                inv.y().iter().map(|&v| v.powf(1.5)).collect(),
            )?)
        }
        MassSpecificCost::Analytic(AnalyticZ::PowerLaw { coeff, exponent }) => {
            if *exponent == 0.0 {
                // constant z == a: inverse is inf below a, 0 after
                GTransform::Step(StepFn::constant(*coeff).generalized_inverse())
            } else {
                // z^-1(s) = (s/coeff)^{1/e}; raise to 3/2
                GTransform::Analytic(AnalyticG::PowerLaw {
                    coeff: coeff.powf(-1.5 / exponent),
                    exponent: 1.5 / exponent,
                })
            }
        }
        MassSpecificCost::Analytic(AnalyticZ::UrbanPlanningSmooth { a, b, d }) => {
            // z^-1(s) = ((a-s)/C)^{1/3} on [b,a)  =>  g(s) = sqrt((a-s)/C)
            GTransform::Analytic(AnalyticG::SqrtBand {
                a: *a,
                b: *b,
                coeff: AnalyticZ::cubic_coeff(*a, *b, *d).powf(-0.5),
            })
        }
    })
}

/// `z = g^-1((.)^{3/2})`, inverse of [`g_from_z`] on every form.
pub fn z_from_g(g: &GTransform) -> Result<MassSpecificCost> {
    Ok(match g {
        GTransform::Step(f) => MassSpecificCost::Step(
            f.generalized_inverse().map_thresholds(|t| t.powf(2.0 / 3.0))?,
        ),
        GTransform::Sampled(f) => {
            let inv = f.generalized_inverse();
            MassSpecificCost::Sampled(SampledFn::new(
                inv.x().iter().map(|&x| x.powf(2.0 / 3.0)).collect(),
                inv.y().to_vec(),
            )?)
        }
        GTransform::Analytic(AnalyticG::PowerLaw { coeff, exponent }) => {
            if !(*exponent < 0.0) {
                return Err(Error::Validation(format!(
                    "power-law g must decay, got exponent {exponent}"
                )));
            }
            // g^-1(x) = (x/coeff)^{1/e}; compose with phi^{3/2}
            MassSpecificCost::Analytic(AnalyticZ::PowerLaw {
                coeff: coeff.powf(-1.0 / exponent),
                exponent: 1.5 / exponent,
            })
        }
        GTransform::Analytic(AnalyticG::SqrtBand { a, b, coeff }) => {
            // g^-1(x) = a - (x/coeff)^2 capped below at b; x = phi^{3/2}
            let big_c = coeff.powi(-2);
            let d = (a - b) * (9.0 * big_c / (2.0 * std::f64::consts::PI.powi(2))).sqrt();
            MassSpecificCost::Analytic(AnalyticZ::UrbanPlanningSmooth { a: *a, b: *b, d })
        }
    })
}

impl GTransform {
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("slope must be nonnegative, got {s}")));
        }
        Ok(match self {
            Self::Step(f) => f.eval(s),
            Self::Sampled(f) => f.eval(s),
            Self::Analytic(a) => a.eval(s),
        })
    }

    /// The slope below which g is infinite (0 if g is finite on (0, inf)).
    pub fn infinite_below(&self) -> f64 {
        match self {
            Self::Step(f) => {
                if f.limit_at_zero().is_infinite() {
                    f.thresholds().first().copied().unwrap_or(0.0)
                } else {
                    0.0
                }
            }
            Self::Sampled(_) => 0.0,
            Self::Analytic(AnalyticG::PowerLaw { .. }) => 0.0,
            Self::Analytic(AnalyticG::SqrtBand { b, .. }) => *b,
        }
    }

    /// The slope at and above which g vanishes (`inf` if it never does).
    pub fn zero_from(&self) -> f64 {
        match self {
            Self::Step(f) => {
                if f.limit_at_infinity() == 0.0 {
                    f.thresholds().last().copied().unwrap_or(0.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Sampled(f) => {
                if f.limit_at_infinity() == 0.0 {
                    f.x()
                        .iter()
                        .zip(f.y())
                        .find(|(_, &y)| y == 0.0)
                        .map(|(&x, _)| x)
                        .unwrap_or(*f.x().last().unwrap())
                } else {
                    f64::INFINITY
                }
            }
            Self::Analytic(AnalyticG::PowerLaw { .. }) => f64::INFINITY,
            Self::Analytic(AnalyticG::SqrtBand { a, .. }) => *a,
        }
    }
}

/// A phase-field potential `c(phi) = phi * z(phi)`, `c(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFieldCost {
    pub z: MassSpecificCost,
}

/// Result of the admissibility integral `int_0^1 sqrt(c)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub finite: bool,
    /// The integral value; infinite when divergence was detected.
    pub value: f64,
}

impl PhaseFieldCost {
    pub fn new(z: MassSpecificCost) -> Result<Self> {
        z.validate()?;
        Ok(Self { z })
    }

    /// `c(phi) = phi * z(phi)`, with `c(0) = 0` regardless of the limit of z.
    pub fn eval_c(&self, phi: f64) -> Result<f64> {
        if phi < 0.0 {
            return Err(Error::Domain(format!("density must be nonnegative, got {phi}")));
        }
        if phi == 0.0 {
            return Ok(0.0);
        }
        let z = self.z.eval(phi)?;
        Ok(if z.is_infinite() { f64::INFINITY } else { phi * z })
    }

    /// Check `int_0^1 sqrt(c(phi)) dphi < inf` by dyadic endpoint refinement.
    pub fn check_integrability(&self) -> Result<IntegrabilityReport> {
        let c = |phi: f64| self.eval_c(phi).unwrap_or(f64::INFINITY);
        Ok(match quad::sqrt_integral_with_divergence_check(&c, 1e-9) {
            Some(value) => IntegrabilityReport { finite: true, value },
            None => IntegrabilityReport { finite: false, value: f64::INFINITY },
        })
    }
}

// --- serde: tagged union matching the documented JSON schema ---

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ZRepr {
    Step {
        thresholds: Vec<f64>,
        #[serde(with = "crate::infjson::vec")]
        levels: Vec<f64>,
        #[serde(with = "crate::infjson::scalar")]
        final_level: f64,
    },
    Sampled {
        phi: Vec<f64>,
        z: Vec<f64>,
    },
    PowerLaw {
        coeff: f64,
        exponent: f64,
    },
    UrbanPlanningSmooth {
        a: f64,
        b: f64,
        d: f64,
    },
}

impl Serialize for MassSpecificCost {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Self::Step(f) => ZRepr::Step {
                thresholds: f.thresholds().to_vec(),
                levels: f.levels().to_vec(),
                final_level: f.final_level(),
            },
            Self::Sampled(f) => ZRepr::Sampled { phi: f.x().to_vec(), z: f.y().to_vec() },
            Self::Analytic(AnalyticZ::PowerLaw { coeff, exponent }) => {
                ZRepr::PowerLaw { coeff: *coeff, exponent: *exponent }
            }
            Self::Analytic(AnalyticZ::UrbanPlanningSmooth { a, b, d }) => {
                ZRepr::UrbanPlanningSmooth { a: *a, b: *b, d: *d }
            }
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for MassSpecificCost {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let out = match ZRepr::deserialize(de)? {
            ZRepr::Step { thresholds, levels, final_level } => Self::Step(
                StepFn::new(thresholds, levels, final_level).map_err(D::Error::custom)?,
            ),
            ZRepr::Sampled { phi, z } => {
                Self::Sampled(SampledFn::new(phi, z).map_err(D::Error::custom)?)
            }
            ZRepr::PowerLaw { coeff, exponent } => {
                Self::Analytic(AnalyticZ::PowerLaw { coeff, exponent })
            }
            ZRepr::UrbanPlanningSmooth { a, b, d } => {
                Self::Analytic(AnalyticZ::UrbanPlanningSmooth { a, b, d })
            }
        };
        out.validate().map_err(D::Error::custom)?;
        Ok(out)
    }
}

impl Serialize for PhaseFieldCost {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.z.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PhaseFieldCost {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(Self { z: MassSpecificCost::deserialize(de)? })
    }
}
