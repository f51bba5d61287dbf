use std::f64::consts::PI;

use rand::Rng;

use super::profile::GeneratorParams;
use super::{SubjectProfile, SynthError};

#[derive(Debug, Clone, PartialEq)]
pub struct BreathWaveform {
    /// L/s, positive while inhaling.
    pub resp_flow: Vec<f32>,
    /// Inspired volume inside the window scaled to one minute.
    pub mv_true: f64,
}

struct Breath {
    start: f64,
    period: f64,
    t_in: f64,
    volume: f64,
}

impl Breath {
    fn flow(&self, t: f64) -> f64 {
        let tau = t - self.start;
        if tau < self.t_in {
            PI * self.volume / (2.0 * self.t_in) * (PI * tau / self.t_in).sin()
        } else {
            let t_ex = self.period - self.t_in;
            -PI * self.volume / (2.0 * t_ex) * (PI * (tau - self.t_in) / t_ex).sin()
        }
    }

    /// Volume inhaled by this breath inside `[a, b]`.
    fn inspired_between(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.start);
        let hi = b.min(self.start + self.t_in);
        if hi <= lo {
            return 0.0;
        }
        let phase = |t: f64| (PI * (t - self.start) / self.t_in).cos();
        self.volume / 2.0 * (phase(lo) - phase(hi))
    }
}

/// Half-sine inspiration and expiration lobes of equal volume. Breath period
/// and depth are jittered per breath and the label is integrated from the
/// jittered breaths, so waveform and label always agree.
pub fn synth_breath_waveform<R: Rng + ?Sized>(
    profile: &SubjectProfile,
    window_seconds: f64,
    fs_hz: f64,
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<BreathWaveform, SynthError> {
    let vt = profile.base_tidal_volume;
    let rr = profile.base_resp_rate;
    if !(vt >= 0.0 && vt.is_finite()) {
        return Err(SynthError::InvalidInput(format!("tidal volume must be >= 0, got {vt}")));
    }
    if !(rr > 0.0 && rr.is_finite()) {
        return Err(SynthError::InvalidInput(format!("respiratory rate must be > 0, got {rr}")));
    }
    if !(fs_hz > 0.0 && window_seconds > 0.0) {
        return Err(SynthError::InvalidInput(format!(
            "fs_hz {fs_hz} and window_seconds {window_seconds} must be positive"
        )));
    }
    let max_rate_hz = rr / 60.0 * (1.0 + params.breath_jitter);
    if fs_hz < 4.0 * max_rate_hz {
        return Err(SynthError::InvalidInput(format!(
            "fs_hz {fs_hz} is below 4x the breathing frequency {max_rate_hz:.3} Hz"
        )));
    }
    let base_period = 60.0 / rr;
    if window_seconds < base_period * (1.0 + params.breath_jitter) {
        return Err(SynthError::InvalidInput(format!(
            "window of {window_seconds} s is shorter than one breath ({base_period:.2} s)"
        )));
    }

    let n = (window_seconds * fs_hz).round() as usize;
    let jitter = params.breath_jitter;
    let draw = |rng: &mut R| 1.0 + if jitter > 0.0 { rng.gen_range(-jitter..jitter) } else { 0.0 };

    let mut breaths = Vec::new();
    let mut t = -rng.gen_range(0.0..base_period);
    while t < window_seconds {
        let period = base_period * draw(rng);
        let volume = vt * draw(rng);
        breaths.push(Breath {
            start: t,
            period,
            t_in: params.ie_fraction * period,
            volume,
        });
        t += period;
    }

    let mut resp_flow = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let ti = i as f64 / fs_hz;
        while breaths[k].start + breaths[k].period <= ti {
            k += 1;
        }
        resp_flow.push(breaths[k].flow(ti) as f32);
    }
    let inspired: f64 = breaths.iter().map(|b| b.inspired_between(0.0, window_seconds)).sum();
    Ok(BreathWaveform {
        resp_flow,
        mv_true: inspired * 60.0 / window_seconds,
    })
}

/// Inspired volume per minute estimated from sampled flow (rectangle rule
/// over positive samples).
pub fn inspired_minute_volume(flow: &[f32], fs_hz: f64) -> f64 {
    if flow.is_empty() {
        return 0.0;
    }
    let positive: f64 = flow.iter().map(|&v| (v as f64).max(0.0)).sum();
    let seconds = flow.len() as f64 / fs_hz;
    positive / fs_hz * 60.0 / seconds
}

/// Heart rate = base + stress offset + RSA depth x breathing phase, where the
/// phase is flow normalized to unit peak and delayed by a random lag. RSA
/// depth shrinks with stress and scales with ventilation^`hrv_coupling`.
pub fn synth_heart_series<R: Rng + ?Sized>(
    profile: &SubjectProfile,
    resp_flow: &[f32],
    fs_hz: f64,
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<Vec<f32>, SynthError> {
    if resp_flow.is_empty() {
        return Err(SynthError::InvalidInput("empty respiratory flow".into()));
    }
    if !(profile.base_heart_rate > 0.0) {
        return Err(SynthError::InvalidInput(format!(
            "heart rate must be > 0, got {}",
            profile.base_heart_rate
        )));
    }
    if !(0.0..=1.0).contains(&profile.stress_level) || profile.rsa_gain < 0.0 {
        return Err(SynthError::InvalidInput(format!(
            "stress {} must lie in [0, 1] and rsa_gain {} must be >= 0",
            profile.stress_level, profile.rsa_gain
        )));
    }
    let peak = resp_flow.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
    let ratio = (inspired_minute_volume(resp_flow, fs_hz) / params.hrv_reference_mv).clamp(0.1, 10.0);
    let rsa = profile.rsa_gain
        * (1.0 - params.stress_rsa_damping * profile.stress_level)
        * ratio.powf(params.hrv_coupling);
    let max_lag = (params.max_rsa_lag_s * fs_hz).round() as usize;
    let lag = rng.gen_range(0..=max_lag);
    let mean = profile.base_heart_rate + profile.stress_level * params.stress_hr_boost;
    Ok((0..resp_flow.len())
        .map(|i| {
            let phase = if peak > 0.0 {
                resp_flow[i.saturating_sub(lag)] as f64 / peak
            } else {
                0.0
            };
            (mean + rsa * phase) as f32
        })
        .collect())
}

/// Sample standard deviation of a rate series.
pub fn sdnn(series: &[f32]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.0;
    }
    let mean = series.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let ss: f64 = series.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}
