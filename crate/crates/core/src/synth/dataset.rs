use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::artifacts::inject_artifacts;
use super::profile::{draw_profile, DatasetManifest};
use super::waveform::{synth_breath_waveform, synth_heart_series};
use super::{Sex, SignalWindow, SubjectProfile, SynthError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

impl SplitPart {
    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Val => "val",
            SplitPart::Test => "test",
        }
    }
}

/// Subject ids per partition. Partitions never share a subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl Split {
    pub fn ids(&self, part: SplitPart) -> &[u32] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Val => &self.val,
            SplitPart::Test => &self.test,
        }
    }

    pub fn part_of(&self, subject: u32) -> Option<SplitPart> {
        [SplitPart::Train, SplitPart::Val, SplitPart::Test]
            .into_iter()
            .find(|&p| self.ids(p).contains(&subject))
    }
}

/// Shuffles subject ids with `seed` and cuts them by `fractions`. Sizes are
/// rounded; the test part takes the remainder.
pub fn split_subjects(subject_ids: &[u32], fractions: [f64; 3], seed: u64) -> Result<Split, SynthError> {
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(SynthError::InvalidInput(format!(
            "split fractions {fractions:?} must lie in [0, 1] and sum to 1"
        )));
    }
    let mut ids = subject_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let sorted = |s: &[u32]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: sorted(&ids[..n_train]),
        val: sorted(&ids[n_train..n_train + n_val]),
        test: sorted(&ids[n_train + n_val..]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub profiles: Vec<SubjectProfile>,
    /// Subject-major, window ids ascending.
    pub windows: Vec<SignalWindow>,
    pub split: Split,
}

impl Dataset {
    pub fn part(&self, part: SplitPart) -> Vec<&SignalWindow> {
        let ids = self.split.ids(part);
        self.windows.iter().filter(|w| ids.contains(&w.subject_id)).collect()
    }
}

fn subject_rng(seed: u64, subject: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subject as u64);
    rng
}

fn subject_windows(
    profile: &SubjectProfile,
    manifest: &DatasetManifest,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SignalWindow>, SynthError> {
    let g = &manifest.generator;
    let vt_drift = Normal::new(0.0, g.window_vt_spread).map_err(|e| SynthError::InvalidInput(e.to_string()))?;
    let rr_drift = Normal::new(0.0, g.window_rr_spread).map_err(|e| SynthError::InvalidInput(e.to_string()))?;
    let mut out = Vec::with_capacity(manifest.windows_per_subject);
    for w in 0..manifest.windows_per_subject {
        let level: u8 = rng.gen_range(0..=3);
        let mut state = profile.clone();
        state.base_tidal_volume *= vt_drift.sample(rng).exp().clamp(0.4, 2.5);
        state.base_resp_rate *= rr_drift.sample(rng).exp().clamp(0.5, 2.0);
        let mut clean_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let mut artifact_rng = ChaCha8Rng::seed_from_u64(rng.gen());

        let breath = synth_breath_waveform(&state, manifest.window_seconds, manifest.fs_hz, g, &mut clean_rng)?;
        let heart = synth_heart_series(&state, &breath.resp_flow, manifest.fs_hz, g, &mut clean_rng)?;
        let clean = SignalWindow {
            subject_id: profile.subject_id,
            window_id: w as u32,
            sex: profile.sex,
            age_years: profile.age_years,
            resp_flow: breath.resp_flow,
            heart_series: heart,
            artifact_level: 0,
            mv_true: breath.mv_true as f32,
        };
        out.push(inject_artifacts(&clean, level, manifest.fs_hz, &g.artifacts, &mut artifact_rng)?);
    }
    Ok(out)
}

/// Generates the whole cohort. Each subject draws from its own ChaCha
/// stream, so subjects are generated in parallel with identical results.
pub fn build_dataset(manifest: &DatasetManifest) -> Result<Dataset, SynthError> {
    manifest.validate()?;
    let mut sexes: Vec<Sex> = std::iter::repeat_n(Sex::Female, manifest.n_female)
        .chain(std::iter::repeat_n(Sex::Male, manifest.n_male))
        .collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(manifest.rng_seed);
    order_rng.set_stream(u64::MAX - 1);
    sexes.shuffle(&mut order_rng);

    let per_subject: Vec<(SubjectProfile, Vec<SignalWindow>)> = sexes
        .par_iter()
        .enumerate()
        .map(|(i, &sex)| {
            let mut rng = subject_rng(manifest.rng_seed, i as u32);
            let profile = draw_profile(i as u32, sex, &manifest.generator, &mut rng);
            let windows = subject_windows(&profile, manifest, &mut rng)?;
            Ok((profile, windows))
        })
        .collect::<Result<_, SynthError>>()?;

    let ids: Vec<u32> = (0..manifest.n_subjects as u32).collect();
    let split = split_subjects(&ids, manifest.split, manifest.rng_seed)?;
    let mut profiles = Vec::with_capacity(per_subject.len());
    let mut windows = Vec::with_capacity(manifest.n_subjects * manifest.windows_per_subject);
    for (p, w) in per_subject {
        profiles.push(p);
        windows.extend(w);
    }
    Ok(Dataset {
        manifest: manifest.clone(),
        profiles,
        windows,
        split,
    })
}
