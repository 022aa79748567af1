use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::sim::Trajectory;
use crate::error::KamError;
use crate::lattice::{Block, Lattice, SiteId};
use crate::vfield::C64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeSpec {
    pub block: Block,
    pub site: SiteId,
    pub expected: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiagTolerance {
    pub freq_rel: f64,
    /// largest fraction of windowed power left after removing the peak tone
    pub residual: f64,
}

impl Default for DiagTolerance {
    fn default() -> Self {
        DiagTolerance { freq_rel: 1e-3, residual: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeFrequency {
    pub label: String,
    pub expected: f64,
    pub measured: f64,
    pub rel_dev: f64,
    pub residual_power: f64,
    pub resolved: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub modes: Vec<ModeFrequency>,
    pub max_rel_dev: f64,
    pub max_residual_power: f64,
    pub unresolved: Vec<String>,
    /// the record is shorter than 50 / (smallest gap between expected frequencies)
    pub short_record: bool,
    pub pass: bool,
}

fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos())).collect()
}

fn windowed_dtft(x: &[C64], w: &[f64], t0: f64, dt: f64, omega: f64) -> C64 {
    x.iter()
        .zip(w)
        .enumerate()
        .map(|(i, (&xi, &wi))| xi * wi * C64::from_polar(1.0, -omega * (t0 + i as f64 * dt)))
        .sum()
}

/// Dominant angular frequency of a uniformly sampled complex signal: Hann window,
/// zero-padded FFT peak, quadratic interpolation, then golden-section refinement of
/// the windowed transform modulus. Returns (ω, complex amplitude, residual power fraction).
pub fn peak_frequency(times: &[f64], x: &[C64]) -> Result<(f64, C64, f64), KamError> {
    let n = x.len();
    if n < 8 || times.len() != n {
        return Err(KamError::Precondition("signal too short for frequency extraction".into()));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|p| ((p[1] - p[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(KamError::Precondition("frequency extraction needs uniform increasing samples".into()));
    }
    let w = hann(n);
    let pad = (4 * n).next_power_of_two();
    let mut buf = vec![C64::default(); pad];
    for i in 0..n {
        buf[i] = x[i] * w[i];
    }
    FftPlanner::new().plan_fft_forward(pad).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let kmax = (0..pad).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap_or(0);
    let (l, c, r) = (mag[(kmax + pad - 1) % pad], mag[kmax], mag[(kmax + 1) % pad]);
    let denom = l - 2.0 * c + r;
    let shift = if denom.abs() > 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let signed = if kmax >= pad / 2 { kmax as f64 - pad as f64 } else { kmax as f64 };
    let bin = 2.0 * PI / (pad as f64 * dt);
    let guess = (signed + shift) * bin;
    let f = |om: f64| -windowed_dtft(x, &w, times[0], dt, om).norm();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (guess - bin, guess + bin);
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(c1), f(c2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * guess.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = f(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = f(c2);
        }
    }
    let omega = 0.5 * (a + b);
    let wsum: f64 = w.iter().sum();
    let amp = windowed_dtft(x, &w, times[0], dt, omega) / wsum;
    let mut res = 0.0;
    let mut tot = 0.0;
    for i in 0..n {
        let t = times[0] + i as f64 * dt;
        res += w[i] * (x[i] - amp * C64::from_polar(1.0, omega * t)).norm_sqr();
        tot += w[i] * x[i].norm_sqr();
    }
    let frac = if tot > 0.0 { res / tot } else { 1.0 };
    Ok((omega, amp, frac))
}

/// Frequencies of the listed modes compared with the expected values.
pub fn quasiperiodicity_diagnostic(
    traj: &Trajectory,
    lat: &Lattice,
    modes: &[ModeSpec],
    tol: &DiagTolerance,
) -> Result<DiagnosticReport, KamError> {
    let times = traj.times();
    let span = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
    let mut expected: Vec<f64> = modes.iter().map(|m| m.expected).collect();
    expected.sort_by(f64::total_cmp);
    let gap = expected.windows(2).map(|p| p[1] - p[0]).filter(|&g| g > 1e-12).fold(f64::INFINITY, f64::min);
    let short_record = gap.is_finite() && span < 50.0 / gap;
    let mut out = Vec::new();
    let mut unresolved = Vec::new();
    for m in modes {
        let name = match m.block {
            Block::Z => "q",
            Block::W => "p",
        };
        let label = format!("{name}{}", lat.site(m.site));
        let x = traj.mode(m.block, m.site);
        let (omega, amp, frac) = peak_frequency(&times, &x)?;
        let resolved = amp.norm() > 0.0 && frac <= tol.residual;
        if !resolved {
            unresolved.push(label.clone());
        }
        let rel_dev = (omega - m.expected).abs() / m.expected.abs().max(1e-12);
        out.push(ModeFrequency { label, expected: m.expected, measured: omega, rel_dev, residual_power: frac, resolved });
    }
    let max_rel_dev = out.iter().map(|m| m.rel_dev).fold(0.0, f64::max);
    let max_residual_power = out.iter().map(|m| m.residual_power).fold(0.0, f64::max);
    let pass = unresolved.is_empty() && max_rel_dev <= tol.freq_rel && max_residual_power <= tol.residual;
    Ok(DiagnosticReport { modes: out, max_rel_dev, max_residual_power, unresolved, short_record, pass })
}
