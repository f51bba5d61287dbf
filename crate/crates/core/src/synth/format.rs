//! `VNTD` dataset files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "VNTD" | version u16 | n_windows u32 | fs_hz f32 | window_len u32 | n_channels u16
//! per record: subject u32 | window u32 | artifact_level u8 | sex u8 | age u16 | mv_true f32
//!             | n_channels x window_len f32 samples, channel-major
//! CRC32 of everything above, u32
//! ```

use std::path::{Path, PathBuf};

use super::{Sex, SignalWindow, SynthError};
use crate::crc;

const MAGIC: &[u8; 4] = b"VNTD";
const VERSION: u16 = 1;
const CHANNELS: u16 = 2;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 2;
const RECORD_META: usize = 4 + 4 + 1 + 1 + 2 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub fs_hz: f32,
    pub window_len: usize,
    pub windows: Vec<SignalWindow>,
}

fn record_len(window_len: usize) -> usize {
    RECORD_META + CHANNELS as usize * window_len * 4
}

pub fn encode_dataset(fs_hz: f32, windows: &[SignalWindow]) -> Result<Vec<u8>, SynthError> {
    let window_len = windows.first().map_or(0, |w| w.len());
    let mut out = Vec::with_capacity(HEADER_LEN + windows.len() * record_len(window_len) + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(windows.len() as u32).to_le_bytes());
    out.extend_from_slice(&fs_hz.to_le_bytes());
    out.extend_from_slice(&(window_len as u32).to_le_bytes());
    out.extend_from_slice(&CHANNELS.to_le_bytes());
    for (i, w) in windows.iter().enumerate() {
        if w.resp_flow.len() != window_len || w.heart_series.len() != window_len {
            return Err(SynthError::InvalidInput(format!(
                "window {i} has channel lengths {}/{}, expected {window_len}",
                w.resp_flow.len(),
                w.heart_series.len()
            )));
        }
        out.extend_from_slice(&w.subject_id.to_le_bytes());
        out.extend_from_slice(&w.window_id.to_le_bytes());
        out.push(w.artifact_level);
        out.push(w.sex.code());
        out.extend_from_slice(&w.age_years.to_le_bytes());
        out.extend_from_slice(&w.mv_true.to_le_bytes());
        for v in w.resp_flow.iter().chain(&w.heart_series) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = crc::crc32(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked up front");
        self.pos += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
}

/// Checks run in order: header shape, file length against the header, CRC,
/// then record contents.
pub fn decode_dataset(bytes: &[u8]) -> Result<DatasetFile, SynthError> {
    if bytes.len() < HEADER_LEN {
        return Err(SynthError::MalformedHeader(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>() != MAGIC {
        return Err(SynthError::MalformedHeader("bad magic, expected \"VNTD\"".into()));
    }
    let version = r.u16();
    if version != VERSION {
        return Err(SynthError::MalformedHeader(format!("unsupported version {version}")));
    }
    let n_windows = r.u32() as usize;
    let fs_hz = r.f32();
    let window_len = r.u32() as usize;
    let channels = r.u16();
    if channels != CHANNELS {
        return Err(SynthError::MalformedHeader(format!("expected {CHANNELS} channels, got {channels}")));
    }
    let rec = record_len(window_len);
    let expected = HEADER_LEN + n_windows * rec + 4;
    if bytes.len() < expected {
        let body = bytes.len().saturating_sub(HEADER_LEN);
        let record = body / rec;
        return Err(SynthError::Truncated {
            record,
            offset: HEADER_LEN + record * rec,
            len: bytes.len(),
            expected,
        });
    }
    if bytes.len() > expected {
        return Err(SynthError::MalformedHeader(format!(
            "{} trailing bytes after the declared {n_windows} records",
            bytes.len() - expected
        )));
    }
    crc::verify_trailer(bytes).map_err(|(stored, computed)| SynthError::Checksum { stored, computed })?;
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(SynthError::MalformedHeader(format!("sample rate {fs_hz}")));
    }

    let mut windows = Vec::with_capacity(n_windows);
    for record in 0..n_windows {
        let subject_id = r.u32();
        let window_id = r.u32();
        let artifact_level = r.u8();
        let sex_code = r.u8();
        let age_years = r.u16();
        let mv_true = r.f32();
        let bad = |msg: String| SynthError::MalformedRecord { record, msg };
        if artifact_level > 3 {
            return Err(bad(format!("artifact level {artifact_level}")));
        }
        let sex = Sex::from_code(sex_code).ok_or_else(|| bad(format!("sex code {sex_code}")))?;
        let resp_flow = (0..window_len).map(|_| r.f32()).collect();
        let heart_series = (0..window_len).map(|_| r.f32()).collect();
        windows.push(SignalWindow {
            subject_id,
            window_id,
            sex,
            age_years,
            resp_flow,
            heart_series,
            artifact_level,
            mv_true,
        });
    }
    Ok(DatasetFile {
        fs_hz,
        window_len,
        windows,
    })
}

pub fn export_dataset(path: &Path, fs_hz: f32, windows: &[SignalWindow]) -> Result<(), SynthError> {
    std::fs::write(path, encode_dataset(fs_hz, windows)?)?;
    Ok(())
}

pub fn import_dataset(path: &Path) -> Result<DatasetFile, SynthError> {
    decode_dataset(&std::fs::read(path)?)
}

/// Sidecar location: `<dataset>.manifest`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}
