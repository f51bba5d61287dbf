use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ventnet_core::stats::Predictions;
use ventnet_core::synth::{decode_dataset, manifest_path, DatasetFile, DatasetManifest};
use ventnet_core::trainer::{decode_checkpoint, Checkpoint, EpochRecord, LoadMode, TrainError};

use crate::error::{config, fail, from_dataset, from_train, read_error, Class, Result};

/// Refuses to start when any output already exists, unless forced.
pub fn check_outputs(paths: &[&Path], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(config(format!("{} exists; pass --force to overwrite", p.display()))),
        None => Ok(()),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so the final name never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io_fail = |e: std::io::Error| fail(Class::Io, format!("writing {}: {e}", path.display()));
    std::fs::create_dir_all(&dir).map_err(io_fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_fail)?;
    tmp.write_all(bytes).map_err(io_fail)?;
    tmp.as_file().sync_all().map_err(io_fail)?;
    tmp.persist(path).map_err(|e| io_fail(e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| read_error(path, &e))
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| fail(Class::DataFormat, format!("{}: not UTF-8 text", path.display())))
}

pub struct LoadedData {
    pub file: DatasetFile,
    pub manifest: DatasetManifest,
}

/// A dataset file and the manifest written next to it.
pub fn load_dataset(path: &Path) -> Result<LoadedData> {
    let file = decode_dataset(&read_bytes(path)?).map_err(|e| from_dataset(path, e))?;
    let mpath = manifest_path(path);
    let manifest = DatasetManifest::from_kv(&read_text(&mpath)?)
        .map_err(|e| fail(Class::DataFormat, format!("{}: {e}", mpath.display())))?;
    if manifest.window_len() != file.window_len || (manifest.fs_hz as f32) != file.fs_hz {
        return Err(fail(
            Class::DataFormat,
            format!(
                "{} describes {} Hz x {} samples, but {} holds {} Hz x {} samples",
                mpath.display(),
                manifest.fs_hz,
                manifest.window_len(),
                path.display(),
                file.fs_hz,
                file.window_len
            ),
        ));
    }
    Ok(LoadedData { file, manifest })
}

pub fn load_checkpoint(path: &Path, mode: LoadMode) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?, mode).map_err(|e| match e {
        // An architecture that fails to rebuild is a damaged file here.
        TrainError::Graph(g) => fail(Class::DataFormat, format!("{}: {g}", path.display())),
        other => from_train(&path.display().to_string(), other),
    })
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_rmse,val_rmse,wall_seconds\n");
    for r in history {
        let _ = writeln!(s, "{},{},{},{:.3}", r.epoch, r.train_rmse, r.val_rmse, r.wall_seconds);
    }
    s
}

pub const PREDICTIONS_HEADER: &str = "subject,window,level,reference,predicted";

/// `# key=value` preamble (model, split, effective_params, connectivity)
/// followed by one CSV row per window.
pub fn predictions_text(p: &Predictions) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# model={}", p.model_name);
    let _ = writeln!(s, "# split={}", p.split);
    let _ = writeln!(s, "# effective_params={}", p.effective_params);
    let _ = writeln!(s, "# connectivity={:e}", p.connectivity);
    let _ = writeln!(s, "{PREDICTIONS_HEADER}");
    for i in 0..p.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.subject_ids[i], p.window_ids[i], p.levels[i], p.reference[i], p.predicted[i]
        );
    }
    s
}

pub fn parse_predictions(path: &Path, text: &str) -> Result<Predictions> {
    let bad = |line: usize, msg: &str| fail(Class::DataFormat, format!("{}:{line}: {msg}", path.display()));
    let mut meta = std::collections::BTreeMap::new();
    let mut p = Predictions {
        model_name: String::new(),
        split: String::new(),
        subject_ids: Vec::new(),
        window_ids: Vec::new(),
        levels: Vec::new(),
        reference: Vec::new(),
        predicted: Vec::new(),
        effective_params: 0,
        connectivity: 0.0,
    };
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.split_once('=').ok_or_else(|| bad(n, "expected # key=value"))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        if !header_seen {
            if line.trim() != PREDICTIONS_HEADER {
                return Err(bad(n, &format!("expected header {PREDICTIONS_HEADER:?}")));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(bad(n, "expected 5 fields"));
        }
        let field = |j: usize| cells[j].trim();
        p.subject_ids.push(field(0).parse().map_err(|_| bad(n, "bad subject id"))?);
        p.window_ids.push(field(1).parse().map_err(|_| bad(n, "bad window id"))?);
        p.levels.push(field(2).parse().map_err(|_| bad(n, "bad artifact level"))?);
        p.reference.push(field(3).parse().map_err(|_| bad(n, "bad reference value"))?);
        p.predicted.push(field(4).parse().map_err(|_| bad(n, "bad predicted value"))?);
    }
    if !header_seen {
        return Err(bad(1, "no CSV header"));
    }
    let get = |k: &str| meta.get(k).ok_or_else(|| bad(1, &format!("missing # {k}=")));
    p.model_name = get("model")?.clone();
    p.split = get("split")?.clone();
    p.effective_params = get("effective_params")?.parse().map_err(|_| bad(1, "bad effective_params"))?;
    p.connectivity = get("connectivity")?.parse().map_err(|_| bad(1, "bad connectivity"))?;
    if p.is_empty() {
        return Err(bad(1, "no predictions"));
    }
    Ok(p)
}

pub fn load_predictions(path: &Path) -> Result<Predictions> {
    parse_predictions(path, &read_text(path)?)
}
