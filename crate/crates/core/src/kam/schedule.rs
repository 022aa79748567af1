use serde::{Deserialize, Serialize};

use crate::error::KamError;

/// Base constants of the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamSchedule {
    pub r: f64,
    pub s: f64,
    pub rho: f64,
    pub gamma: f64,
    pub tau: f64,
    pub eps0: f64,
    pub l: f64,
    /// constant in the predicted update ε₊ = c γ⁻⁵ δ⁻¹ K^{5τ+19} ε^{5/3} + ε^{7/6}
    pub c: f64,
}

/// Constants of step ν.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConstants {
    pub nu: usize,
    pub delta: f64,
    pub r: f64,
    pub r_next: f64,
    pub rho: f64,
    pub rho_next: f64,
    pub eps: f64,
    pub k: u32,
    pub eta: f64,
    pub s: f64,
    pub s_next: f64,
    pub l: f64,
    pub l_next: f64,
    /// log10 of the predicted ε_{ν+1}; the value itself overflows for realistic τ
    pub log10_eps_predicted: f64,
}

impl StepConstants {
    pub fn eps_predicted(&self) -> f64 {
        10f64.powf(self.log10_eps_predicted)
    }
}

impl KamSchedule {
    pub fn validate(&self) -> Result<(), KamError> {
        let all = [self.r, self.s, self.rho, self.gamma, self.tau, self.eps0, self.c];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) || !(self.l >= 0.0) {
            return Err(KamError::Config(format!("schedule constants must be positive: {self:?}")));
        }
        Ok(())
    }

    /// δ_ν = r/2^{ν+3}
    pub fn delta(&self, nu: usize) -> f64 {
        self.r / 2f64.powi(nu as i32 + 3)
    }

    /// r_ν by the recursion r_{ν+1} = r_ν − 2δ_ν.
    pub fn r_at(&self, nu: usize) -> f64 {
        (0..nu).fold(self.r, |r, i| r - 2.0 * self.delta(i))
    }

    /// ρ_ν = ρ(1 − Σ_{i=2}^{ν+1} 2^{−i})
    pub fn rho_at(&self, nu: usize) -> f64 {
        let sum: f64 = (2..=nu + 1).map(|i| 2f64.powi(-(i as i32))).sum();
        self.rho * (1.0 - sum)
    }

    /// Cutoff with e^{−Kδ} = ε^{1/2}, rounded up.
    pub fn cutoff(eps: f64, delta: f64) -> u32 {
        let eps = eps.max(f64::MIN_POSITIVE);
        let k = (-eps.sqrt().ln() / delta).ceil();
        k.clamp(1.0, u32::MAX as f64) as u32
    }

    /// Constants of step ν given the measured ε_ν, s_ν and L_ν.
    pub fn at(&self, nu: usize, eps: f64, s: f64, l: f64) -> StepConstants {
        let delta = self.delta(nu);
        let r = self.r_at(nu);
        let k = Self::cutoff(eps, delta);
        let e = eps.max(f64::MIN_POSITIVE);
        let eta = e.cbrt();
        let log_a = self.c.log10() - 5.0 * self.gamma.log10() - delta.log10()
            + (5.0 * self.tau + 19.0) * (k as f64).log10()
            + 5.0 / 3.0 * e.log10();
        let log_b = 7.0 / 6.0 * e.log10();
        let (hi, lo) = if log_a > log_b { (log_a, log_b) } else { (log_b, log_a) };
        StepConstants {
            nu,
            delta,
            r,
            r_next: r - 2.0 * delta,
            rho: self.rho_at(nu),
            rho_next: self.rho_at(nu + 1),
            eps,
            k,
            eta,
            s,
            s_next: eta * s / 4.0,
            l,
            l_next: l + eps,
            log10_eps_predicted: hi + (1.0 + 10f64.powf(lo - hi)).log10(),
        }
    }
}

/// Step-ν constants along the predicted chain ε_{ν+1} = c γ⁻⁵ δ⁻¹ K^{5τ+19} ε^{5/3} + ε^{7/6}.
pub fn schedule_step(base: &KamSchedule, nu: usize) -> StepConstants {
    let mut c = base.at(0, base.eps0, base.s, base.l);
    for i in 1..=nu {
        c = base.at(i, c.eps_predicted(), c.s_next, c.l_next);
    }
    c
}
