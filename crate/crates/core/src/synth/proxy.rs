use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::artifacts::inject_artifacts;
use super::profile::{draw_profile, GeneratorParams};
use super::waveform::{synth_breath_waveform, synth_heart_series};
use super::{Sex, SignalWindow, SynthError};

pub const PROXY_CLASSES: usize = 4;

/// Classification stand-in used for pretraining: class = 2 x depth bucket +
/// rate bucket, drawn from the same generator as the regression cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySet {
    pub windows: Vec<SignalWindow>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl ProxySet {
    /// Splits off the last `holdout` fraction.
    pub fn split(&self, holdout: f64) -> (ProxySet, ProxySet) {
        let n_hold = ((self.windows.len() as f64 * holdout).round() as usize).min(self.windows.len());
        let cut = self.windows.len() - n_hold;
        let part = |r: std::ops::Range<usize>| ProxySet {
            windows: self.windows[r.clone()].to_vec(),
            labels: self.labels[r].to_vec(),
            n_classes: self.n_classes,
        };
        (part(0..cut), part(cut..self.windows.len()))
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

pub fn generate_proxy(
    n: usize,
    window_seconds: f64,
    fs_hz: f64,
    params: &GeneratorParams,
    seed: u64,
) -> Result<ProxySet, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 40);
    let mut windows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = rng.gen_range(0..PROXY_CLASSES);
        let (deep, fast) = (class / 2 == 1, class % 2 == 1);
        let sex = if rng.gen_bool(0.5) { Sex::Female } else { Sex::Male };
        let mut p = draw_profile(i as u32, sex, params, &mut rng);
        p.base_tidal_volume = if deep { rng.gen_range(0.65..0.9) } else { rng.gen_range(0.25..0.45) };
        p.base_resp_rate = if fast { rng.gen_range(18.0..24.0) } else { rng.gen_range(8.0..13.0) };
        let level = rng.gen_range(0..=3);
        let breath = synth_breath_waveform(&p, window_seconds, fs_hz, params, &mut rng)?;
        let heart = synth_heart_series(&p, &breath.resp_flow, fs_hz, params, &mut rng)?;
        let clean = SignalWindow {
            subject_id: i as u32,
            window_id: 0,
            sex,
            age_years: p.age_years,
            resp_flow: breath.resp_flow,
            heart_series: heart,
            artifact_level: 0,
            mv_true: breath.mv_true as f32,
        };
        windows.push(inject_artifacts(&clean, level, fs_hz, &params.artifacts, &mut rng)?);
        labels.push(class);
    }
    Ok(ProxySet {
        windows,
        labels,
        n_classes: PROXY_CLASSES,
    })
}
