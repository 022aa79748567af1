use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::model::{cubic_coefficient, quintic_coefficient, NlsModel, ParamPoint};
use crate::error::KamError;
use crate::lattice::{Block, Lattice, SiteId};
use crate::vfield::C64;

/// Lattice amplitudes q_h, p_h indexed by site id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: Vec<C64>,
    pub p: Vec<C64>,
    pub time: f64,
}

impl SimState {
    pub fn zero(len: usize) -> Self {
        SimState { q: vec![C64::default(); len], p: vec![C64::default(); len], time: 0.0 }
    }

    /// (Σ|q_h|², Σ|p_h|²)
    pub fn mass(&self) -> (f64, f64) {
        (self.q.iter().map(|c| c.norm_sqr()).sum(), self.p.iter().map(|c| c.norm_sqr()).sum())
    }

    pub fn dist(&self, other: &SimState) -> f64 {
        self.q.iter().zip(&other.q).chain(self.p.iter().zip(&other.p)).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    fn flat(&self) -> Vec<C64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    fn from_flat(y: &[C64], time: f64) -> Self {
        let l = y.len() / 2;
        SimState { q: y[..l].to_vec(), p: y[l..].to_vec(), time }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimOptions {
    /// 2 (Strang) or 4 (triple-jump composition of Strang)
    pub order: u32,
    /// keep every n-th state
    pub sample_every: usize,
    /// multiplies both nonlinear coefficients; 0 gives the linear flow
    pub nonlinearity: f64,
    /// relative mass growth treated as an instability
    pub blowup_factor: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { order: 4, sample_every: 1, nonlinearity: 1.0, blowup_factor: 10.0 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<SimState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> Option<&SimState> {
        self.states.last()
    }

    /// Signal of one mode over the samples.
    pub fn mode(&self, block: Block, h: SiteId) -> Vec<C64> {
        self.states
            .iter()
            .map(|s| match block {
                Block::Z => s.q[h as usize],
                Block::W => s.p[h as usize],
            })
            .collect()
    }

    /// CSV with columns t, then re/im of q_h and p_h for every site.
    pub fn to_csv(&self, lat: &Lattice) -> String {
        let mut out = String::from("t");
        for name in ["q", "p"] {
            for s in lat.sites() {
                let tag = s.0.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":");
                let _ = write!(out, ",{name}[{tag}].re,{name}[{tag}].im");
            }
        }
        out.push('\n');
        for st in &self.states {
            let _ = write!(out, "{}", st.time);
            for c in st.q.iter().chain(&st.p) {
                let _ = write!(out, ",{},{}", c.re, c.im);
            }
            out.push('\n');
        }
        out
    }
}

/// d-dimensional periodic grid holding the box of lattice modes without aliasing
/// for quintic products.
struct Spectral {
    d: usize,
    n: usize,
    total: usize,
    index: Vec<usize>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    line: Vec<C64>,
    scratch: Vec<C64>,
}

impl Spectral {
    fn new(lat: &Lattice) -> Self {
        let radius = lat.config().radius as usize;
        // products of five modes reach 5R; aliases stay outside the box when n > 6R
        let n = (6 * radius + 1).next_power_of_two().max(8);
        let d = lat.d();
        let total = n.pow(d as u32);
        let index = lat
            .sites()
            .iter()
            .map(|s| s.0.iter().rev().fold(0usize, |acc, &x| acc * n + x.rem_euclid(n as i32) as usize))
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch = vec![C64::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
        Spectral { d, n, total, index, fwd, inv, line: vec![C64::default(); n], scratch }
    }

    fn transform(&mut self, buf: &mut [C64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { self.inv.clone() } else { self.fwd.clone() };
        for axis in 0..self.d {
            let stride = n.pow(axis as u32);
            for base in 0..self.total {
                if (base / stride) % n != 0 {
                    continue;
                }
                for t in 0..n {
                    self.line[t] = buf[base + t * stride];
                }
                plan.process_with_scratch(&mut self.line, &mut self.scratch);
                for t in 0..n {
                    buf[base + t * stride] = self.line[t];
                }
            }
        }
    }

    /// Σ_h c_h e^{i⟨h,x⟩} on the grid.
    fn to_grid(&mut self, c: &[C64], out: &mut Vec<C64>) {
        out.clear();
        out.resize(self.total, C64::default());
        for (h, &v) in c.iter().enumerate() {
            out[self.index[h]] = v;
        }
        self.transform(out, true);
    }

    /// Fourier coefficients on the box, overwriting `out`.
    fn from_grid(&mut self, g: &mut [C64], out: &mut [C64], scale: C64) {
        self.transform(g, false);
        let f = scale / self.total as f64;
        for (h, o) in out.iter_mut().enumerate() {
            *o = g[self.index[h]] * f;
        }
    }
}

/// Right-hand side of the lattice equations with optional tangent vectors.
pub(crate) struct Flow {
    sp: Spectral,
    len: usize,
    lambda: Vec<f64>,
    cq: C64,
    cc: C64,
    u: Vec<C64>,
    v: Vec<C64>,
    du: Vec<C64>,
    dv: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
    carry: Vec<C64>,
}

impl Flow {
    pub(crate) fn new(model: &NlsModel, zeta: &ParamPoint, nonlinearity: f64) -> Result<Self, KamError> {
        let lat = &model.lattice;
        if zeta.xi.len() != lat.n() || zeta.xitilde.len() != lat.m() {
            return Err(KamError::Precondition("parameter dimension differs from the tangential sets".into()));
        }
        let mut lambda = Vec::with_capacity(2 * lat.len());
        for block in [Block::Z, Block::W] {
            for h in 0..lat.len() as SiteId {
                lambda.push(model.eigenvalue(zeta, block, h));
            }
        }
        let d = lat.d();
        Ok(Flow {
            sp: Spectral::new(lat),
            len: lat.len(),
            lambda,
            cq: quintic_coefficient(d) * nonlinearity,
            cc: cubic_coefficient(d) * nonlinearity,
            u: Vec::new(),
            v: Vec::new(),
            du: Vec::new(),
            dv: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            carry: Vec::new(),
        })
    }

    fn rotate(&self, y: &mut [C64], t: f64) {
        for (c, &l) in y.iter_mut().zip(&self.lambda) {
            *c *= C64::from_polar(1.0, l * t);
        }
    }

    /// Nonlinear part of the vector field at y, and its derivative applied to each tangent.
    fn nonlinear(&mut self, y: &[C64], tangents: &[Vec<C64>], out: &mut [C64], dout: &mut [Vec<C64>]) {
        let l = self.len;
        self.sp.to_grid(&y[..l], &mut self.u);
        self.sp.to_grid(&y[l..], &mut self.v);
        self.a.clear();
        self.b.clear();
        for (u, v) in self.u.iter().zip(&self.v) {
            let (uu, vv) = (u.norm_sqr(), v.norm_sqr());
            self.a.push(u * (uu * vv));
            self.b.push(v * uu);
        }
        let (cq, cc) = (self.cq, self.cc);
        let (head, tail) = out.split_at_mut(l);
        self.sp.from_grid(&mut self.a, head, cq);
        self.sp.from_grid(&mut self.b, tail, cc);
        for (t, o) in tangents.iter().zip(dout.iter_mut()) {
            self.sp.to_grid(&t[..l], &mut self.du);
            self.sp.to_grid(&t[l..], &mut self.dv);
            self.a.clear();
            self.b.clear();
            for g in 0..self.u.len() {
                let (u, v, du, dv) = (self.u[g], self.v[g], self.du[g], self.dv[g]);
                let (uu, vv) = (u.norm_sqr(), v.norm_sqr());
                let d_uu = 2.0 * (u.conj() * du).re;
                let d_vv = 2.0 * (v.conj() * dv).re;
                self.a.push(du * (uu * vv) + u * (d_uu * vv + uu * d_vv));
                self.b.push(dv * uu + v * d_uu);
            }
            let (head, tail) = o.split_at_mut(l);
            self.sp.from_grid(&mut self.a, head, cq);
            self.sp.from_grid(&mut self.b, tail, cc);
        }
    }

    /// Classical RK4 increments of the nonlinear part, tangents carried along.
    fn rk4(&mut self, y: &[C64], tangents: &[Vec<C64>], h: f64) -> (Vec<C64>, Vec<Vec<C64>>) {
        let n = y.len();
        let nt = tangents.len();
        let zero = || vec![C64::default(); n];
        let mut k = [zero(), zero(), zero(), zero()];
        let mut dk: Vec<[Vec<C64>; 4]> = (0..nt).map(|_| [zero(), zero(), zero(), zero()]).collect();
        let mut ys = y.to_vec();
        let mut ts: Vec<Vec<C64>> = tangents.to_vec();
        let coef = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            if stage > 0 {
                let c = coef[stage] * h;
                for i in 0..n {
                    ys[i] = y[i] + k[stage - 1][i] * c;
                }
                for (j, t) in ts.iter_mut().enumerate() {
                    for i in 0..n {
                        t[i] = tangents[j][i] + dk[j][stage - 1][i] * c;
                    }
                }
            }
            let mut kout = zero();
            let mut dout: Vec<Vec<C64>> = (0..nt).map(|_| zero()).collect();
            self.nonlinear(&ys, &ts, &mut kout, &mut dout);
            k[stage] = kout;
            for (j, d) in dout.into_iter().enumerate() {
                dk[j][stage] = d;
            }
        }
        let w = h / 6.0;
        let dy = (0..n).map(|i| (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * w).collect();
        let dt = dk
            .iter()
            .map(|d| (0..n).map(|i| (d[0][i] + d[1][i] * 2.0 + d[2][i] * 2.0 + d[3][i]) * w).collect())
            .collect();
        (dy, dt)
    }

    /// Strang step in the frame rotating with the linear flow: `u` holds e^{-iλt}y at
    /// time `t`. Only the nonlinear increment is rotated back, so rounding in the phase
    /// factors does not accumulate in the amplitudes.
    fn strang(&mut self, u: &mut [C64], tangents: &mut [Vec<C64>], t: f64, h: f64) {
        let tm = t + h / 2.0;
        let mut y = u.to_vec();
        self.rotate(&mut y, tm);
        let mut ts: Vec<Vec<C64>> = tangents.to_vec();
        for v in ts.iter_mut() {
            self.rotate(v, tm);
        }
        let (dy, dts) = self.rk4(&y, &ts, h);
        let back: Vec<C64> = self.lambda.iter().map(|&l| C64::from_polar(1.0, -l * tm)).collect();
        if self.carry.len() != u.len() {
            self.carry = vec![C64::default(); u.len()];
        }
        // compensated sum keeps the amplitudes at working precision over long runs
        for i in 0..u.len() {
            let inc = dy[i] * back[i] - self.carry[i];
            let next = u[i] + inc;
            self.carry[i] = (next - u[i]) - inc;
            u[i] = next;
        }
        for (v, d) in tangents.iter_mut().zip(&dts) {
            for i in 0..v.len() {
                v[i] += d[i] * back[i];
            }
        }
    }

    /// One step of length h from time t on rotating-frame data.
    pub(crate) fn step(&mut self, u: &mut [C64], tangents: &mut [Vec<C64>], t: f64, h: f64, order: u32) {
        if order == 4 {
            let c = 2f64.powf(1.0 / 3.0);
            let w1 = 1.0 / (2.0 - c);
            let w0 = -c * w1;
            self.strang(u, tangents, t, w1 * h);
            self.strang(u, tangents, t + w1 * h, w0 * h);
            self.strang(u, tangents, t + (w1 + w0) * h, w1 * h);
        } else {
            self.strang(u, tangents, t, h);
        }
    }
}

/// Q^{(q_h)} and Q̃^{(p_h)} at a lattice state.
pub fn nonlinearity(model: &NlsModel, st: &SimState) -> Result<(Vec<C64>, Vec<C64>), KamError> {
    let lat = &model.lattice;
    let zeta = ParamPoint { xi: vec![0.0; lat.n()], xitilde: vec![0.0; lat.m()] };
    let mut flow = Flow::new(model, &zeta, 1.0)?;
    let y = st.flat();
    let mut out = vec![C64::default(); y.len()];
    flow.nonlinear(&y, &[], &mut out, &mut []);
    let l = lat.len();
    Ok((out[..l].to_vec(), out[l..].to_vec()))
}

fn check_opts(opts: &SimOptions, dt: f64, st: &SimState, len: usize) -> Result<(), KamError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KamError::Precondition(format!("time step must be positive, got {dt}")));
    }
    if opts.order != 2 && opts.order != 4 {
        return Err(KamError::Config(format!("integrator order must be 2 or 4, got {}", opts.order)));
    }
    if st.q.len() != len || st.p.len() != len {
        return Err(KamError::Precondition("state does not match the lattice".into()));
    }
    Ok(())
}

fn steps_for(t_end: f64, dt: f64) -> (usize, f64) {
    let steps = ((t_end.abs() / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

fn blown_up(y: &[C64], m0: f64, factor: f64) -> bool {
    let m: f64 = y.iter().map(|c| c.norm_sqr()).sum();
    !m.is_finite() || m > factor * m0.max(1e-300)
}

/// Integrates q̇ = iλq + Q, ṗ = iλ̃p + Q̃ over [0, t_end] (t_end may be negative).
pub fn simulate(
    model: &NlsModel,
    zeta: &ParamPoint,
    state0: &SimState,
    t_end: f64,
    dt: f64,
    opts: &SimOptions,
) -> Result<Trajectory, KamError> {
    check_opts(opts, dt, state0, model.lattice.len())?;
    let mut flow = Flow::new(model, zeta, opts.nonlinearity)?;
    let (steps, h) = steps_for(t_end, dt);
    let mut u = state0.flat();
    let m0: f64 = u.iter().map(|c| c.norm_sqr()).sum();
    let every = opts.sample_every.max(1);
    let mut traj = Trajectory { states: vec![state0.clone()] };
    for i in 1..=steps {
        flow.step(&mut u, &mut [], (i - 1) as f64 * h, h, opts.order);
        if blown_up(&u, m0, opts.blowup_factor) {
            return Err(KamError::Numerical(format!("mass blow-up at step {i} (t = {:.6})", state0.time + i as f64 * h)));
        }
        if i % every == 0 || i == steps {
            let mut y = u.clone();
            flow.rotate(&mut y, i as f64 * h);
            traj.states.push(SimState::from_flat(&y, state0.time + i as f64 * h));
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthExponent {
    pub label: String,
    pub exponent: f64,
}

/// Unit perturbations: real and imaginary directions at each tangential site and at
/// normal sites with |h| ≤ `normal_radius`.
pub fn default_directions(model: &NlsModel, normal_radius: f64) -> Vec<(String, SimState)> {
    let lat = &model.lattice;
    let mut out = Vec::new();
    for (block, name) in [(Block::Z, "q"), (Block::W, "p")] {
        for h in 0..lat.len() as SiteId {
            if lat.is_normal(block, h) && lat.norm(h) > normal_radius {
                continue;
            }
            for (part, c) in [("re", C64::new(1.0, 0.0)), ("im", C64::new(0.0, 1.0))] {
                let mut st = SimState::zero(lat.len());
                match block {
                    Block::Z => st.q[h as usize] = c,
                    Block::W => st.p[h as usize] = c,
                }
                out.push((format!("{name}{}.{part}", lat.site(h)), st));
            }
        }
    }
    out
}

/// Finite-time growth exponents log‖δy(T)‖/T of the linearized flow along the orbit of y0.
pub fn linear_stability(
    model: &NlsModel,
    zeta: &ParamPoint,
    y0: &SimState,
    t_end: f64,
    dt: f64,
    directions: &[(String, SimState)],
    opts: &SimOptions,
) -> Result<Vec<GrowthExponent>, KamError> {
    check_opts(opts, dt, y0, model.lattice.len())?;
    if t_end <= 0.0 {
        return Err(KamError::Precondition("stability horizon must be positive".into()));
    }
    let mut flow = Flow::new(model, zeta, opts.nonlinearity)?;
    let (steps, h) = steps_for(t_end, dt);
    let mut y = y0.flat();
    let m0: f64 = y.iter().map(|c| c.norm_sqr()).sum();
    let mut tangents: Vec<Vec<C64>> = Vec::with_capacity(directions.len());
    for (label, d) in directions {
        let v = d.flat();
        let n: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 || v.len() != y.len() {
            return Err(KamError::Precondition(format!("direction {label} is zero or has the wrong size")));
        }
        tangents.push(v.into_iter().map(|c| c / n).collect());
    }
    for i in 1..=steps {
        flow.step(&mut y, &mut tangents, (i - 1) as f64 * h, h, opts.order);
        if blown_up(&y, m0, opts.blowup_factor) {
            return Err(KamError::Numerical(format!("mass blow-up at step {i}")));
        }
    }
    Ok(directions
        .iter()
        .zip(&tangents)
        .map(|((label, _), t)| {
            let n: f64 = t.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            GrowthExponent { label: label.clone(), exponent: n.ln() / t_end }
        })
        .collect())
}
