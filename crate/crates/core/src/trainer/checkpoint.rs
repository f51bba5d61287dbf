//! `VNTC` checkpoints.
//!
//! ```text
//! "VNTC" | version u16 | arch length u32 | arch text (UTF-8) | tensor count u32
//! per tensor: name length u16 | name | dtype u8 (0 = f32, 1 = f64) | rank u8 | dims u32 x rank | payload
//! CRC32 of everything above
//! ```
//!
//! Tensor names: `w.<layer>`, `b.<layer>`, `skip.<edge>`, `skipmask.<edge>`,
//! `mask.<layer>`, `norm.input` ([2, C]: means then stds), `norm.target`
//! ([mean, std]), optimizer buffers (`adam.step`, `adam.m.<param>`,
//! `adam.v.<param>` or `sgd.v.<param>`), `meta.epoch` and `history`
//! ([n, 4]: epoch, train_rmse, val_rmse, wall_seconds). Counters and the
//! history are f64, everything else f32.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::Normalizer;
use super::fit::EpochRecord;
use super::optim::OptimizerState;
use super::TrainError;
use crate::crc;
use crate::graph::{ArchSpec, NetworkGraph, ParamKey};
use crate::pruning::PruneMask;

const MAGIC: &[u8; 4] = b"VNTC";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;
const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub graph: NetworkGraph<f32>,
    pub norm: Option<Normalizer>,
    pub optimizer: Option<OptimizerState>,
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    Full,
    /// Drops optimizer buffers; weights, masks and history are kept.
    EvalOnly,
}

/// A decoded or pending tensor. f32 payloads are widened losslessly.
struct Record {
    name: String,
    dtype: u8,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Record {
    fn f32s(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

fn push_record(out: &mut Vec<u8>, r: &Record) {
    out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
    out.extend_from_slice(r.name.as_bytes());
    out.push(r.dtype);
    out.push(r.dims.len() as u8);
    for &d in &r.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &r.data {
        if r.dtype == DTYPE_F64 {
            out.extend_from_slice(&v.to_le_bytes());
        } else {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

fn bools(v: &[bool]) -> Vec<f32> {
    v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

impl Checkpoint {
    fn records(&self) -> Vec<Record> {
        let g = &self.graph;
        let mut out = Vec::new();
        let mut rec = |name: String, dims: Vec<usize>, data: Vec<f32>| {
            let data = data.into_iter().map(f64::from).collect();
            out.push(Record { name, dtype: DTYPE_F32, dims, data })
        };
        let mut wide = Vec::new();
        for key in g.param_keys() {
            let t = g.param(key).expect("listed key");
            rec(key.name(), t.shape().to_vec(), t.data().to_vec());
        }
        for (i, s) in g.skips().iter().enumerate() {
            rec(format!("skipmask.{i}"), s.weight.shape().to_vec(), bools(&s.pattern));
        }
        for (id, m) in g.masks() {
            rec(format!("mask.{id}"), m.shape().to_vec(), bools(m.keep()));
        }
        if let Some(n) = &self.norm {
            let c = n.input_mean.len();
            rec("norm.input".into(), vec![2, c], [n.input_mean.clone(), n.input_std.clone()].concat());
            rec("norm.target".into(), vec![2], vec![n.target_mean, n.target_std]);
        }
        match &self.optimizer {
            Some(OptimizerState::Adam { step, m, v }) => {
                wide.push(Record {
                    name: "adam.step".into(),
                    dtype: DTYPE_F64,
                    dims: vec![1],
                    data: vec![*step as f64],
                });
                for (k, buf) in m {
                    rec(format!("adam.m.{}", k.name()), vec![buf.len()], buf.clone());
                }
                for (k, buf) in v {
                    rec(format!("adam.v.{}", k.name()), vec![buf.len()], buf.clone());
                }
            }
            Some(OptimizerState::Sgd { velocity }) => {
                for (k, buf) in velocity {
                    rec(format!("sgd.v.{}", k.name()), vec![buf.len()], buf.clone());
                }
            }
            None => {}
        }
        wide.push(Record {
            name: "meta.epoch".into(),
            dtype: DTYPE_F64,
            dims: vec![1],
            data: vec![self.epoch as f64],
        });
        wide.push(Record {
            name: "history".into(),
            dtype: DTYPE_F64,
            dims: vec![self.history.len(), 4],
            data: self
                .history
                .iter()
                .flat_map(|h| [h.epoch as f64, h.train_rmse, h.val_rmse, h.wall_seconds])
                .collect(),
        });
        out.extend(wide);
        out
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let arch = ckpt.graph.arch().render();
    let records = ckpt.records();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    out.extend_from_slice(arch.as_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in &records {
        push_record(&mut out, r);
    }
    let sum = crc::crc32(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.bytes.len() - self.pos < n {
            return Err(TrainError::Format(format!("unexpected end of payload at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, TrainError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, TrainError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn take(tensors: &mut BTreeMap<String, Record>, name: &str, dims: Option<&[usize]>) -> Result<Record, TrainError> {
    let r = tensors
        .remove(name)
        .ok_or_else(|| TrainError::Format(format!("missing tensor {name}")))?;
    if let Some(d) = dims {
        if r.dims != d {
            return Err(TrainError::Format(format!("tensor {name} has dims {:?}, expected {d:?}", r.dims)));
        }
    }
    Ok(r)
}

fn take_bools(data: &[f64], name: &str) -> Result<Vec<bool>, TrainError> {
    data.iter()
        .map(|&v| match v {
            1.0 => Ok(true),
            0.0 => Ok(false),
            _ => Err(TrainError::Format(format!("{name} holds non-binary value {v}"))),
        })
        .collect()
}

/// Verifies magic, version and CRC before interpreting anything else.
pub fn decode_checkpoint(bytes: &[u8], mode: LoadMode) -> Result<Checkpoint, TrainError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(TrainError::BadMagic);
    }
    if bytes.len() < 10 {
        return Err(TrainError::Format(format!("{} bytes is too short", bytes.len())));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(TrainError::Version(version));
    }
    let payload =
        crc::verify_trailer(bytes).map_err(|(stored, computed)| TrainError::Checksum { stored, computed })?;

    let mut c = Cursor { bytes: payload, pos: 6 };
    let arch_len = c.u32()? as usize;
    let arch_text = std::str::from_utf8(c.take(arch_len)?)
        .map_err(|e| TrainError::Format(format!("arch text is not UTF-8: {e}")))?;
    let arch = ArchSpec::parse(arch_text)?;
    let n = c.u32()? as usize;
    let mut tensors: BTreeMap<String, Record> = BTreeMap::new();
    for _ in 0..n {
        let name_len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|e| TrainError::Format(format!("tensor name is not UTF-8: {e}")))?
            .to_string();
        let dtype = c.u8()?;
        let rank = c.u8()? as usize;
        let dims = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let count: usize = dims.iter().product();
        let data = match dtype {
            DTYPE_F32 => c
                .take(count * 4)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect(),
            DTYPE_F64 => c
                .take(count * 8)?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
            _ => return Err(TrainError::Format(format!("tensor {name}: unsupported dtype {dtype}"))),
        };
        if tensors.insert(name.clone(), Record { name: name.clone(), dtype, dims, data }).is_some() {
            return Err(TrainError::Format(format!("duplicate tensor {name}")));
        }
    }
    if c.pos != payload.len() {
        return Err(TrainError::Format(format!("{} unread bytes", payload.len() - c.pos)));
    }

    let mut graph: NetworkGraph<f32> = NetworkGraph::from_arch(&arch, &mut ChaCha8Rng::seed_from_u64(0))?;
    for key in graph.param_keys() {
        let shape = graph.param(key).expect("listed key").shape().to_vec();
        let r = take(&mut tensors, &key.name(), Some(&shape))?;
        graph.param_mut(key).expect("listed key").data_mut().copy_from_slice(&r.f32s());
    }
    for i in 0..graph.skips().len() {
        let shape = graph.skips()[i].weight.shape().to_vec();
        let r = take(&mut tensors, &format!("skipmask.{i}"), Some(&shape))?;
        graph.skips_mut()[i].pattern = take_bools(&r.data, &r.name)?;
    }
    let mask_names: Vec<String> = tensors.keys().filter(|k| k.starts_with("mask.")).cloned().collect();
    for name in mask_names {
        let r = take(&mut tensors, &name, None)?;
        let id: usize = name["mask.".len()..]
            .parse()
            .map_err(|_| TrainError::Format(format!("bad mask name {name}")))?;
        let keep = take_bools(&r.data, &name)?;
        graph.set_mask(PruneMask::new(id, r.dims.clone(), keep))?;
    }

    let norm = if tensors.contains_key("norm.input") {
        let input = take(&mut tensors, "norm.input", None)?;
        let target = take(&mut tensors, "norm.target", Some(&[2]))?;
        if input.dims.len() != 2 || input.dims[0] != 2 {
            return Err(TrainError::Format(format!("norm.input has dims {:?}", input.dims)));
        }
        let c = input.dims[1];
        let (input, target) = (input.f32s(), target.f32s());
        Some(Normalizer {
            input_mean: input[..c].to_vec(),
            input_std: input[c..].to_vec(),
            target_mean: target[0],
            target_std: target[1],
        })
    } else {
        None
    };

    let buffers = |tensors: &mut BTreeMap<String, Record>, prefix: &str| -> Result<BTreeMap<ParamKey, Vec<f32>>, TrainError> {
        let names: Vec<String> = tensors.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        let mut out = BTreeMap::new();
        for name in names {
            let key = ParamKey::from_name(&name[prefix.len()..])
                .ok_or_else(|| TrainError::Format(format!("bad optimizer tensor {name}")))?;
            out.insert(key, tensors.remove(&name).expect("listed").f32s());
        }
        Ok(out)
    };
    let optimizer = if let Some(step) = tensors.remove("adam.step") {
        let m = buffers(&mut tensors, "adam.m.")?;
        let v = buffers(&mut tensors, "adam.v.")?;
        Some(OptimizerState::Adam {
            step: step.data[0] as u64,
            m,
            v,
        })
    } else {
        let velocity = buffers(&mut tensors, "sgd.v.")?;
        (!velocity.is_empty()).then_some(OptimizerState::Sgd { velocity })
    };

    let epoch = tensors
        .remove("meta.epoch")
        .ok_or_else(|| TrainError::Format("missing tensor meta.epoch".into()))?
        .data[0] as usize;
    let hist = tensors
        .remove("history")
        .ok_or_else(|| TrainError::Format("missing tensor history".into()))?;
    if hist.dims.len() != 2 || hist.dims[1] != 4 {
        return Err(TrainError::Format(format!("history has dims {:?}", hist.dims)));
    }
    let history = hist
        .data
        .chunks_exact(4)
        .map(|r| EpochRecord {
            epoch: r[0] as usize,
            train_rmse: r[1],
            val_rmse: r[2],
            wall_seconds: r[3],
        })
        .collect();
    if let Some(name) = tensors.keys().next() {
        return Err(TrainError::Format(format!("unexpected tensor {name}")));
    }
    Ok(Checkpoint {
        graph,
        norm,
        optimizer: match mode {
            LoadMode::Full => optimizer,
            LoadMode::EvalOnly => None,
        },
        epoch,
        history,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), TrainError> {
    std::fs::write(path, encode_checkpoint(ckpt))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, mode: LoadMode) -> Result<Checkpoint, TrainError> {
    decode_checkpoint(&std::fs::read(path)?, mode)
}
