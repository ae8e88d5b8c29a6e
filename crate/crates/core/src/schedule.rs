//! Curriculum schedules for the global distortion strength.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::EpsilonDict;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Linear warm-up to a plateau, hold, then a linear ramp to the end value.
    WarmupPlateauRamp,
    LinearRamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub eps_start: f64,
    #[serde(default)]
    pub eps_plateau: Option<f64>,
    pub eps_end: f64,
    pub total_steps: u64,
    /// Inclusive step range of the plateau.
    #[serde(default)]
    pub plateau_span: Option<[u64; 2]>,
}

impl Schedule {
    /// 0.1 rising linearly to 4.0.
    pub fn v2(total_steps: u64) -> Self {
        Schedule {
            kind: ScheduleKind::LinearRamp,
            eps_start: 0.1,
            eps_plateau: None,
            eps_end: 4.0,
            total_steps,
            plateau_span: None,
        }
    }

    /// 0.5 to 4.0 with a plateau at 2.0 over epochs 4-6 of 10, i.e. the
    /// step fractions 0.3..=0.6.
    pub fn v1(total_steps: u64) -> Self {
        let lo = (total_steps as f64 * 0.3).round() as u64;
        let hi = (total_steps as f64 * 0.6).round() as u64;
        Schedule {
            kind: ScheduleKind::WarmupPlateauRamp,
            eps_start: 0.5,
            eps_plateau: Some(2.0),
            eps_end: 4.0,
            total_steps,
            plateau_span: Some([lo, hi]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |r: String| Err(Error::invalid("schedule", r));
        if self.total_steps == 0 {
            return bad("total_steps must be >= 1".into());
        }
        if !(self.eps_start.is_finite() && self.eps_end.is_finite() && self.eps_start >= 0.0 && self.eps_start <= self.eps_end) {
            return bad(format!("need 0 <= eps_start <= eps_end, got {} and {}", self.eps_start, self.eps_end));
        }
        if self.kind == ScheduleKind::WarmupPlateauRamp {
            let (Some(p), Some([lo, hi])) = (self.eps_plateau, self.plateau_span) else {
                return bad("warmup_plateau_ramp needs eps_plateau and plateau_span".into());
            };
            if !(self.eps_start <= p && p <= self.eps_end) {
                return bad(format!("plateau {p} must lie in [{}, {}]", self.eps_start, self.eps_end));
            }
            if !(lo <= hi && hi <= self.total_steps) {
                return bad(format!("plateau span [{lo}, {hi}] must lie in [0, {}]", self.total_steps));
            }
        }
        Ok(())
    }

    /// Piecewise-linear strength at `step`. The endpoints always return
    /// `eps_start` and `eps_end`, even when a plateau span touches them.
    pub fn eps_at(&self, step: u64) -> Result<f64> {
        self.validate()?;
        if step > self.total_steps {
            return Err(Error::StepOutOfRange { step, total: self.total_steps });
        }
        if step == 0 {
            return Ok(self.eps_start);
        }
        if step == self.total_steps {
            return Ok(self.eps_end);
        }
        let lerp = |a: f64, b: f64, s0: u64, s1: u64| {
            if s1 == s0 {
                b
            } else {
                a + (b - a) * (step - s0) as f64 / (s1 - s0) as f64
            }
        };
        Ok(match self.kind {
            ScheduleKind::LinearRamp => lerp(self.eps_start, self.eps_end, 0, self.total_steps),
            ScheduleKind::WarmupPlateauRamp => {
                let p = self.eps_plateau.expect("validated");
                let [lo, hi] = self.plateau_span.expect("validated");
                if step < lo {
                    lerp(self.eps_start, p, 0, lo)
                } else if step <= hi {
                    p
                } else {
                    lerp(p, self.eps_end, hi, self.total_steps)
                }
            }
        })
    }
}

/// Rescales every strength by `eps / base.reference`, keeping per-mode ratios.
pub fn scale_eps_dict(base: &EpsilonDict, eps: f64) -> Result<EpsilonDict> {
    base.validate()?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::invalid("eps", format!("{eps} must be finite and >= 0")));
    }
    if eps == base.reference {
        return Ok(*base);
    }
    let k = eps / base.reference;
    Ok(EpsilonDict {
        t_stretch: base.t_stretch * k,
        f_stretch: base.f_stretch * k,
        warp_2d: base.warp_2d * k,
        amplitude: base.amplitude * k,
        reference: base.reference,
    })
}
