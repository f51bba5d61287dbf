use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{SignalWindow, SynthError};

/// Per-level RMS of the injected disturbance for each channel, and the
/// energy split between wander, bursts and white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactParams {
    /// L/s, indexed by level 0..=3.
    pub resp_rms: [f64; 4],
    /// bpm, indexed by level 0..=3.
    pub heart_rms: [f64; 4],
    pub mix: [f64; 3],
}

impl Default for ArtifactParams {
    fn default() -> Self {
        ArtifactParams {
            resp_rms: [0.0, 0.08, 0.20, 0.40],
            heart_rms: [0.0, 3.0, 6.0, 12.0],
            mix: [0.3, 0.3, 0.4],
        }
    }
}

impl ArtifactParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        for table in [&self.resp_rms, &self.heart_rms] {
            if table[0] != 0.0 {
                return Err(SynthError::InvalidInput("level 0 must carry no artifact".into()));
            }
            if table.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(SynthError::InvalidInput(format!(
                    "artifact RMS table {table:?} must strictly increase with level"
                )));
            }
        }
        let total: f64 = self.mix.iter().sum();
        if self.mix.iter().any(|&m| m < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(SynthError::InvalidInput(format!(
                "artifact mix {:?} must be non-negative and sum to 1",
                self.mix
            )));
        }
        Ok(())
    }
}

fn unit_rms(mut v: Vec<f64>) -> Vec<f64> {
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    if rms > 0.0 {
        v.iter_mut().for_each(|x| *x /= rms);
    }
    v
}

fn disturbance<R: Rng + ?Sized>(n: usize, fs_hz: f64, mix: &[f64; 3], rng: &mut R) -> Vec<f64> {
    let t = |i: usize| i as f64 / fs_hz;
    let seconds = n as f64 / fs_hz;

    let tones: Vec<(f64, f64)> = (0..2)
        .map(|_| (rng.gen_range(0.03..0.3), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let wander = (0..n)
        .map(|i| tones.iter().map(|(f, p)| (2.0 * PI * f * t(i) + p).sin()).sum())
        .collect();

    let bursts: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (rng.gen_range(0.0..seconds), rng.gen_range(0.2..1.0), sign * rng.gen_range(0.5..1.0))
        })
        .collect();
    let burst = (0..n)
        .map(|i| {
            bursts
                .iter()
                .map(|(c, w, a)| a * (-0.5 * ((t(i) - c) / w).powi(2)).exp())
                .sum()
        })
        .collect();

    let white = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let parts = [unit_rms(wander), unit_rms(burst), unit_rms(white)];
    let mixed = (0..n)
        .map(|i| parts.iter().zip(mix).map(|(p, m)| m.sqrt() * p[i]).sum())
        .collect();
    unit_rms(mixed)
}

/// Adds wander, burst transients and white noise to both channels, scaled so
/// the disturbance RMS matches the level table exactly. Level 0 is a no-op and
/// the label is never touched.
pub fn inject_artifacts<R: Rng + ?Sized>(
    window: &SignalWindow,
    level: u8,
    fs_hz: f64,
    params: &ArtifactParams,
    rng: &mut R,
) -> Result<SignalWindow, SynthError> {
    if level > 3 {
        return Err(SynthError::InvalidInput(format!("artifact level {level} is not in 0..=3")));
    }
    if level == 0 {
        return Ok(window.clone());
    }
    let n = window.len();
    let mut out = window.clone();
    out.artifact_level = level;
    for (channel, rms) in [
        (&mut out.resp_flow, params.resp_rms[level as usize]),
        (&mut out.heart_series, params.heart_rms[level as usize]),
    ] {
        let noise = disturbance(n, fs_hz, &params.mix, rng);
        for (x, d) in channel.iter_mut().zip(noise) {
            *x = (*x as f64 + rms * d) as f32;
        }
    }
    Ok(out)
}
