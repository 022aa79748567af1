use std::fmt::Write as _;

use cnls_kam::kam::{schedule_step, KamOptions, KamSchedule};
use cnls_kam::lattice::LatticeConfig;
use cnls_kam::nls::{ExpansionOptions, ParamPoint};
use cnls_kam::resonance::{mea4_tau_bound, Window};
use cnls_kam::KamError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// I⁰ = ratio · s on every tangential site
    pub amplitude_ratio: f64,
    pub action_degree: u32,
    pub normal_cap: usize,
    pub max_degree: u32,
    pub tail_tol: f64,
    /// constant c in the size check ‖P‖ ≤ c s^{1/2}
    pub size_constant: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let e = ExpansionOptions::default();
        ModelSection {
            amplitude_ratio: 1.9,
            action_degree: e.action_degree,
            normal_cap: e.normal_cap,
            max_degree: e.max_degree,
            tail_tol: e.tail_tol,
            size_constant: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub r: f64,
    pub s: f64,
    pub rho: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { r: 0.5, s: 1.6e-10, rho: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedField {
    Nls,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KamSection {
    pub gamma: f64,
    pub tau: f64,
    /// 0 means use the measured ‖P₀‖
    pub eps0: f64,
    pub c: f64,
    pub l: f64,
    pub nu_max: usize,
    pub target: f64,
    pub lie_order: usize,
    pub max_degree: u32,
    pub max_normal_degree: u32,
    pub prune_rel: f64,
    pub imag_tol: f64,
    /// parameter points (ξ followed by ξ̃), each in [0,1]
    pub zeta: Vec<Vec<f64>>,
    /// extra uniformly drawn parameter points
    pub random_zeta: usize,
    pub seed_field: SeedField,
}

impl Default for KamSection {
    fn default() -> Self {
        let o = KamOptions::default();
        KamSection {
            gamma: 1e-4,
            tau: 50.0,
            eps0: 0.0,
            c: 1.0,
            l: 1.0,
            nu_max: o.nu_max,
            target: o.target,
            lie_order: o.lie_order,
            max_degree: o.max_degree,
            max_normal_degree: o.max_normal_degree,
            prune_rel: o.prune_rel,
            imag_tol: o.imag_tol,
            zeta: vec![vec![0.3, 0.6, 0.2, 0.8]],
            random_zeta: 0,
            seed_field: SeedField::Nls,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceSection {
    pub samples: usize,
    pub gammas: Vec<f64>,
    pub k_lo: u32,
    pub k_hi: u32,
    pub nu: usize,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        ResonanceSection { samples: 10_000, gammas: vec![0.0, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8], k_lo: 0, k_hi: 1, nu: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub t_end: f64,
    pub dt: f64,
    pub order: u32,
    pub sample_every: usize,
    /// relative frequency tolerance
    pub tolerance: f64,
    pub residual_power: f64,
    /// torus distance must stay below this multiple of ‖P_final‖
    pub torus_factor: f64,
    /// absolute allowance added to the torus bound for rounding in the simulation
    pub roundoff_floor: f64,
    pub stability_t: f64,
    pub stability_dt: f64,
    pub growth_tol: f64,
    /// normal directions with |h| up to this radius enter the stability test
    pub normal_radius: f64,
    /// initial angles on the torus (θ followed by φ)
    pub angles: Vec<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            t_end: 50.0,
            dt: 0.05,
            order: 4,
            sample_every: 1,
            tolerance: 1e-3,
            residual_power: 1e-3,
            torus_factor: 10.0,
            roundoff_floor: 1e-14,
            stability_t: 200.0,
            stability_dt: 0.1,
            growth_tol: 1e-3,
            normal_radius: 1.0,
            angles: vec![0.1, 0.7, 1.3, 2.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub lattice: LatticeConfig,
    pub model: ModelSection,
    pub domain: DomainSection,
    pub kam: KamSection,
    pub resonance: ResonanceSection,
    pub sim: SimSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            output_dir: "out".into(),
            lattice: LatticeConfig::default(),
            model: ModelSection::default(),
            domain: DomainSection::default(),
            kam: KamSection::default(),
            resonance: ResonanceSection::default(),
            sim: SimSection::default(),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<(), KamError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(KamError::Config(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, KamError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| KamError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), KamError> {
        self.lattice.validate()?;
        let (n, m) = (self.lattice.n(), self.lattice.m());
        if self.domain.s == 0.0 {
            return Err(KamError::Precondition("zero amplitude: s must be positive".into()));
        }
        positive("domain.s", self.domain.s)?;
        positive("domain.r", self.domain.r)?;
        positive("domain.rho", self.domain.rho)?;
        let ratio = self.model.amplitude_ratio;
        if !(ratio > 1.0 && ratio < 2.0) {
            return Err(KamError::Config(format!("model.amplitude_ratio must lie in (1, 2) so that s < I⁰ < 2s, got {ratio}")));
        }
        positive("model.tail_tol", self.model.tail_tol)?;
        positive("model.size_constant", self.model.size_constant)?;
        positive("kam.gamma", self.kam.gamma)?;
        positive("kam.c", self.kam.c)?;
        positive("kam.target", self.kam.target)?;
        positive("kam.prune_rel", self.kam.prune_rel)?;
        positive("kam.imag_tol", self.kam.imag_tol)?;
        if !(self.kam.eps0 >= 0.0 && self.kam.l >= 0.0) {
            return Err(KamError::Config("kam.eps0 and kam.l must be nonnegative".into()));
        }
        let bound = mea4_tau_bound(self.lattice.d, n, m);
        if !(self.kam.tau > bound) {
            return Err(KamError::Config(format!("kam.tau = {} must exceed {bound} for d = {}, n = {n}, m = {m}", self.kam.tau, self.lattice.d)));
        }
        if self.kam.nu_max == 0 || self.kam.lie_order == 0 {
            return Err(KamError::Config("kam.nu_max and kam.lie_order must be positive".into()));
        }
        if self.kam.zeta.is_empty() && self.kam.random_zeta == 0 {
            return Err(KamError::Config("no parameter points: give kam.zeta or kam.random_zeta".into()));
        }
        for z in &self.kam.zeta {
            self.param_point(z)?;
        }
        if self.resonance.samples < 100 {
            return Err(KamError::Config("resonance.samples must be at least 100".into()));
        }
        if self.resonance.gammas.is_empty() || self.resonance.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(KamError::Config("resonance.gammas must be a nonempty list of nonnegative numbers".into()));
        }
        if self.resonance.k_hi <= self.resonance.k_lo {
            return Err(KamError::Config("resonance window needs k_lo < k_hi".into()));
        }
        positive("sim.t_end", self.sim.t_end)?;
        positive("sim.dt", self.sim.dt)?;
        positive("sim.tolerance", self.sim.tolerance)?;
        positive("sim.residual_power", self.sim.residual_power)?;
        positive("sim.torus_factor", self.sim.torus_factor)?;
        if !(self.sim.roundoff_floor >= 0.0) {
            return Err(KamError::Config("sim.roundoff_floor must be nonnegative".into()));
        }
        positive("sim.stability_t", self.sim.stability_t)?;
        positive("sim.stability_dt", self.sim.stability_dt)?;
        positive("sim.growth_tol", self.sim.growth_tol)?;
        if self.sim.order != 2 && self.sim.order != 4 {
            return Err(KamError::Config(format!("sim.order must be 2 or 4, got {}", self.sim.order)));
        }
        if self.sim.angles.len() != n + m {
            return Err(KamError::Config(format!("sim.angles needs {} entries", n + m)));
        }
        if self.output_dir.is_empty() {
            return Err(KamError::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn param_point(&self, z: &[f64]) -> Result<ParamPoint, KamError> {
        let n = self.lattice.n();
        if z.len() != n + self.lattice.m() {
            return Err(KamError::Config(format!("parameter point {z:?} needs {} entries", n + self.lattice.m())));
        }
        ParamPoint::new(z[..n].to_vec(), z[n..].to_vec()).map_err(|e| KamError::Config(e.to_string()))
    }

    pub fn expansion(&self) -> ExpansionOptions {
        ExpansionOptions {
            action_degree: self.model.action_degree,
            normal_cap: self.model.normal_cap,
            max_degree: self.model.max_degree,
            tail_tol: self.model.tail_tol,
        }
    }

    pub fn kam_options(&self) -> KamOptions {
        KamOptions {
            nu_max: self.kam.nu_max,
            target: self.kam.target,
            lie_order: self.kam.lie_order,
            max_degree: self.kam.max_degree,
            max_normal_degree: self.kam.max_normal_degree,
            prune_rel: self.kam.prune_rel,
            imag_tol: self.kam.imag_tol,
            ..KamOptions::default()
        }
    }

    /// Schedule constants; `eps0` replaces the configured estimate when that is zero.
    pub fn schedule(&self, eps0: f64) -> KamSchedule {
        KamSchedule {
            r: self.domain.r,
            s: self.domain.s,
            rho: self.domain.rho,
            gamma: self.kam.gamma,
            tau: self.kam.tau,
            eps0: if self.kam.eps0 > 0.0 { self.kam.eps0 } else { eps0 },
            l: self.kam.l,
            c: self.kam.c,
        }
    }

    pub fn window(&self) -> Window {
        Window { k_lo: self.resonance.k_lo, k_hi: self.resonance.k_hi, nu: self.resonance.nu }
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&RunConfig { output_dir: String::new(), ..self.clone() }).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Comment block carried by every output file.
    pub fn manifest(&self, command: &str, eps0: Option<f64>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# cnls-kam {command} {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# config_hash={}", self.hash());
        let _ = writeln!(out, "# seed={}", self.seed);
        let base = self.schedule(eps0.unwrap_or(self.kam.eps0));
        let _ = writeln!(
            out,
            "# schedule r={} s={:e} rho={} gamma={:e} tau={} c={} eps0={:e}",
            base.r, base.s, base.rho, base.gamma, base.tau, base.c, base.eps0
        );
        for nu in 0..self.kam.nu_max {
            let _ = writeln!(out, "# schedule nu={nu} delta={:e} r={} rho={}", base.delta(nu), base.r_at(nu), base.rho_at(nu));
        }
        if base.eps0 > 0.0 {
            let c = schedule_step(&base, 0);
            let _ = writeln!(
                out,
                "# schedule nu=0 K={} eta={:e} s_next={:e} log10_eps1_predicted={:.3}",
                c.k, c.eta, c.s_next, c.log10_eps_predicted
            );
        }
        out
    }
}
