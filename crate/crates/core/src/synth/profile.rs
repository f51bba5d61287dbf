use rand::Rng;

use super::artifacts::ArtifactParams;
use super::{Sex, SubjectProfile, SynthError};

/// Knobs of the physiological generator. Everything here lands in the
/// manifest sidecar so a dataset can be regenerated from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub age_min: u16,
    pub age_max: u16,
    pub disorder_fraction: f64,
    /// Uniform breath-to-breath spread of period and depth (0.1 = +-10%).
    pub breath_jitter: f64,
    /// Inspiration share of each breath period.
    pub ie_fraction: f64,
    /// Log-normal sigma of the per-window tidal volume drift.
    pub window_vt_spread: f64,
    /// Log-normal sigma of the per-window rate drift.
    pub window_rr_spread: f64,
    /// Mean heart-rate rise (bpm) at stress 1.
    pub stress_hr_boost: f64,
    /// Fraction of RSA depth removed at stress 1.
    pub stress_rsa_damping: f64,
    /// Exponent tying RSA depth to ventilation; its sign is the sign of the
    /// SDNN / minute-ventilation rank correlation.
    pub hrv_coupling: f64,
    /// Ventilation (L/min) at which the coupling factor is 1.
    pub hrv_reference_mv: f64,
    pub max_rsa_lag_s: f64,
    pub artifacts: ArtifactParams,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            age_min: 8,
            age_max: 75,
            disorder_fraction: 0.3,
            breath_jitter: 0.1,
            ie_fraction: 0.4,
            window_vt_spread: 0.3,
            window_rr_spread: 0.2,
            stress_hr_boost: 15.0,
            stress_rsa_damping: 0.6,
            hrv_coupling: 1.0,
            hrv_reference_mv: 6.0,
            max_rsa_lag_s: 1.0,
            artifacts: ArtifactParams::default(),
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidInput(msg));
        if self.age_min > self.age_max {
            return bad(format!("age range {}..{} is empty", self.age_min, self.age_max));
        }
        if !(0.0..=1.0).contains(&self.disorder_fraction) {
            return bad(format!("disorder_fraction {} outside [0, 1]", self.disorder_fraction));
        }
        if !(0.0..0.5).contains(&self.breath_jitter) {
            return bad(format!("breath_jitter {} outside [0, 0.5)", self.breath_jitter));
        }
        if !(self.ie_fraction > 0.05 && self.ie_fraction < 0.95) {
            return bad(format!("ie_fraction {} outside (0.05, 0.95)", self.ie_fraction));
        }
        for (name, v) in [
            ("window_vt_spread", self.window_vt_spread),
            ("window_rr_spread", self.window_rr_spread),
            ("stress_hr_boost", self.stress_hr_boost),
            ("max_rsa_lag_s", self.max_rsa_lag_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.stress_rsa_damping) {
            return bad(format!("stress_rsa_damping {} outside [0, 1]", self.stress_rsa_damping));
        }
        if !self.hrv_coupling.is_finite() {
            return bad("hrv_coupling must be finite".into());
        }
        if !(self.hrv_reference_mv > 0.0) {
            return bad(format!("hrv_reference_mv must be > 0, got {}", self.hrv_reference_mv));
        }
        self.artifacts.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub n_subjects: usize,
    pub n_female: usize,
    pub n_male: usize,
    pub windows_per_subject: usize,
    pub fs_hz: f64,
    pub window_seconds: f64,
    pub rng_seed: u64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub generator: GeneratorParams,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest {
            n_subjects: 103,
            n_female: 53,
            n_male: 50,
            windows_per_subject: 400,
            fs_hz: 25.0,
            window_seconds: 60.0,
            rng_seed: 0,
            split: [0.7, 0.15, 0.15],
            generator: GeneratorParams::default(),
        }
    }
}

impl DatasetManifest {
    /// Desk-scale cohort: 20 subjects with 100 windows each.
    pub fn desk(seed: u64) -> Self {
        DatasetManifest {
            n_subjects: 20,
            n_female: 10,
            n_male: 10,
            windows_per_subject: 100,
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn window_len(&self) -> usize {
        (self.window_seconds * self.fs_hz).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidInput(msg));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".into());
        }
        if self.n_female + self.n_male != self.n_subjects {
            return bad(format!(
                "n_female ({}) + n_male ({}) != n_subjects ({})",
                self.n_female, self.n_male, self.n_subjects
            ));
        }
        if self.windows_per_subject == 0 {
            return bad("windows_per_subject must be positive".into());
        }
        if !(self.fs_hz > 0.0 && self.fs_hz.is_finite()) {
            return bad(format!("fs_hz must be positive, got {}", self.fs_hz));
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return bad(format!("window_seconds must be positive, got {}", self.window_seconds));
        }
        if self.split.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad(format!("split fractions {:?} must each lie in [0, 1]", self.split));
        }
        let total: f64 = self.split.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions sum to {total}, not 1"));
        }
        self.generator.validate()
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let g = &self.generator;
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("n_subjects", self.n_subjects.to_string()),
            ("n_female", self.n_female.to_string()),
            ("n_male", self.n_male.to_string()),
            ("windows_per_subject", self.windows_per_subject.to_string()),
            ("fs_hz", self.fs_hz.to_string()),
            ("window_seconds", self.window_seconds.to_string()),
            ("rng_seed", self.rng_seed.to_string()),
            ("split", list(&self.split)),
            ("age_min", g.age_min.to_string()),
            ("age_max", g.age_max.to_string()),
            ("disorder_fraction", g.disorder_fraction.to_string()),
            ("breath_jitter", g.breath_jitter.to_string()),
            ("ie_fraction", g.ie_fraction.to_string()),
            ("window_vt_spread", g.window_vt_spread.to_string()),
            ("window_rr_spread", g.window_rr_spread.to_string()),
            ("stress_hr_boost", g.stress_hr_boost.to_string()),
            ("stress_rsa_damping", g.stress_rsa_damping.to_string()),
            ("hrv_coupling", g.hrv_coupling.to_string()),
            ("hrv_reference_mv", g.hrv_reference_mv.to_string()),
            ("max_rsa_lag_s", g.max_rsa_lag_s.to_string()),
            ("artifact_resp_rms", list(&g.artifacts.resp_rms)),
            ("artifact_heart_rms", list(&g.artifacts.heart_rms)),
            ("artifact_mix", list(&g.artifacts.mix)),
        ]
    }

    pub fn to_kv(&self) -> String {
        crate::kv::render(&self.to_pairs())
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys that do
    /// not belong to the manifest.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, SynthError> {
        fn num<N: std::str::FromStr>(key: &str, v: &str) -> Result<N, SynthError> {
            v.trim()
                .parse()
                .map_err(|_| SynthError::Manifest(format!("bad value for {key}: {v:?}")))
        }
        fn list<const K: usize>(key: &str, v: &str) -> Result<[f64; K], SynthError> {
            let items: Vec<f64> = v.split(',').map(|x| num(key, x)).collect::<Result<_, _>>()?;
            items
                .try_into()
                .map_err(|_| SynthError::Manifest(format!("{key} needs {K} comma-separated numbers, got {v:?}")))
        }
        let g = &mut self.generator;
        match key {
            "n_subjects" => self.n_subjects = num(key, value)?,
            "n_female" => self.n_female = num(key, value)?,
            "n_male" => self.n_male = num(key, value)?,
            "windows_per_subject" => self.windows_per_subject = num(key, value)?,
            "fs_hz" => self.fs_hz = num(key, value)?,
            "window_seconds" => self.window_seconds = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "split" => self.split = list(key, value)?,
            "age_min" => g.age_min = num(key, value)?,
            "age_max" => g.age_max = num(key, value)?,
            "disorder_fraction" => g.disorder_fraction = num(key, value)?,
            "breath_jitter" => g.breath_jitter = num(key, value)?,
            "ie_fraction" => g.ie_fraction = num(key, value)?,
            "window_vt_spread" => g.window_vt_spread = num(key, value)?,
            "window_rr_spread" => g.window_rr_spread = num(key, value)?,
            "stress_hr_boost" => g.stress_hr_boost = num(key, value)?,
            "stress_rsa_damping" => g.stress_rsa_damping = num(key, value)?,
            "hrv_coupling" => g.hrv_coupling = num(key, value)?,
            "hrv_reference_mv" => g.hrv_reference_mv = num(key, value)?,
            "max_rsa_lag_s" => g.max_rsa_lag_s = num(key, value)?,
            "artifact_resp_rms" => g.artifacts.resp_rms = list(key, value)?,
            "artifact_heart_rms" => g.artifacts.heart_rms = list(key, value)?,
            "artifact_mix" => g.artifacts.mix = list(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn from_kv(text: &str) -> Result<Self, SynthError> {
        let mut m = DatasetManifest::default();
        for (k, v) in crate::kv::parse(text).map_err(SynthError::Manifest)? {
            if !m.set(&k, &v)? {
                return Err(SynthError::Manifest(format!("unknown key {k:?}")));
            }
        }
        Ok(m)
    }
}

/// Draws one subject. Sex is assigned by the caller so cohort counts are exact.
pub fn draw_profile<R: Rng + ?Sized>(
    subject_id: u32,
    sex: Sex,
    params: &GeneratorParams,
    rng: &mut R,
) -> SubjectProfile {
    let age_years = rng.gen_range(params.age_min..=params.age_max);
    let has_disorder = rng.gen_bool(params.disorder_fraction);
    let mut vt = match sex {
        Sex::Female => rng.gen_range(0.35..0.55),
        Sex::Male => rng.gen_range(0.45..0.70),
    };
    let mut rr = rng.gen_range(10.0..18.0);
    if has_disorder {
        // shallow, fast breathing
        vt *= 0.8;
        rr *= 1.25;
    }
    SubjectProfile {
        subject_id,
        sex,
        age_years,
        has_disorder,
        base_tidal_volume: vt,
        base_resp_rate: rr,
        base_heart_rate: rng.gen_range(60.0..85.0),
        rsa_gain: rng.gen_range(2.0..8.0),
        stress_level: rng.gen_range(0.0..1.0),
    }
}
