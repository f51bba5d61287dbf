use std::fmt::Write;

use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// 2-D convolution, only meaningful to the parameter calculator.
    Conv2dRef {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    Dense {
        in_features: usize,
        units: usize,
    },
    Relu,
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: usize,
    /// 1-based block the layer belongs to; the dense head is the last block.
    pub block: usize,
    pub kind: LayerKind,
}

impl LayerSpec {
    /// Weight and bias shapes for layers that carry parameters.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match self.kind {
            LayerKind::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, in_channels, kernel], vec![out_channels])),
            LayerKind::Conv2dRef {
                in_channels,
                out_channels,
                kernel,
            } => Some((
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            )),
            LayerKind::Dense { in_features, units } => Some((vec![units, in_features], vec![units])),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .unwrap_or(0)
    }

    /// Conv and dense weights are subject to magnitude pruning.
    pub fn is_prunable(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::Conv1d { .. } | LayerKind::Dense { .. }
        )
    }

    fn validate(&self) -> Result<(), GraphError> {
        let ok = match self.kind {
            LayerKind::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0,
            LayerKind::Conv2dRef {
                in_channels,
                out_channels,
                kernel,
            } => in_channels > 0 && out_channels > 0 && kernel > 0,
            LayerKind::MaxPool { kernel, stride } => kernel > 0 && stride > 0,
            LayerKind::Dense { in_features, units } => in_features > 0 && units > 0,
            LayerKind::Relu | LayerKind::Flatten => true,
        };
        if ok && self.block > 0 {
            Ok(())
        } else {
            Err(GraphError::Construction(format!(
                "layer {} has incomplete or non-positive hyperparameters: {:?}",
                self.id, self
            )))
        }
    }
}

/// Per-sample activation shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Seq { channels: usize, len: usize },
    Flat { features: usize },
}

/// Output shape of every layer for the given input, checking each layer's
/// hyperparameters against what it receives.
pub fn infer_shapes(
    input_channels: usize,
    input_len: usize,
    layers: &[LayerSpec],
) -> Result<Vec<ActShape>, GraphError> {
    let mut cur = ActShape::Seq {
        channels: input_channels,
        len: input_len,
    };
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        layer.validate()?;
        let fail = |msg: String| GraphError::Construction(format!("layer {}: {msg}", layer.id));
        cur = match (layer.kind, cur) {
            (
                LayerKind::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                },
                ActShape::Seq { channels, len },
            ) => {
                if in_channels != channels {
                    return Err(fail(format!("expects {in_channels} channels, receives {channels}")));
                }
                if len + 2 * padding < kernel {
                    return Err(fail(format!("kernel {kernel} exceeds padded length {}", len + 2 * padding)));
                }
                ActShape::Seq {
                    channels: out_channels,
                    len: (len + 2 * padding - kernel) / stride + 1,
                }
            }
            (LayerKind::MaxPool { kernel, stride }, ActShape::Seq { channels, len }) => {
                if len < kernel {
                    return Err(fail(format!("pool window {kernel} exceeds length {len}")));
                }
                ActShape::Seq {
                    channels,
                    len: (len - kernel) / stride + 1,
                }
            }
            (LayerKind::Relu, s) => s,
            (LayerKind::Flatten, ActShape::Seq { channels, len }) => ActShape::Flat {
                features: channels * len,
            },
            (LayerKind::Flatten, s @ ActShape::Flat { .. }) => s,
            (LayerKind::Dense { in_features, units }, ActShape::Flat { features }) => {
                if in_features != features {
                    return Err(fail(format!("expects {in_features} features, receives {features}")));
                }
                ActShape::Flat { features: units }
            }
            (LayerKind::Conv2dRef { .. }, _) => {
                return Err(fail("conv2d_ref layers are not executable".into()));
            }
            (kind, s) => return Err(fail(format!("{kind:?} cannot consume {s:?}"))),
        };
        out.push(cur);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipSpec {
    pub src: usize,
    pub dst: usize,
    pub density: f64,
}

/// Text-serializable topology: one layer per line, then `---`, then skips.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub input_channels: usize,
    pub input_len: usize,
    pub layers: Vec<LayerSpec>,
    pub skips: Vec<SkipSpec>,
}

impl ArchSpec {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "input channels={} length={}",
            self.input_channels, self.input_len
        );
        for l in &self.layers {
            let b = l.block;
            let _ = match l.kind {
                LayerKind::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => writeln!(
                    s,
                    "conv1d block={b} in={in_channels} out={out_channels} kernel={kernel} stride={stride} padding={padding}"
                ),
                LayerKind::Conv2dRef {
                    in_channels,
                    out_channels,
                    kernel,
                } => writeln!(s, "conv2d_ref block={b} in={in_channels} out={out_channels} kernel={kernel}"),
                LayerKind::MaxPool { kernel, stride } => {
                    writeln!(s, "maxpool block={b} kernel={kernel} stride={stride}")
                }
                LayerKind::Dense { in_features, units } => {
                    writeln!(s, "dense block={b} in={in_features} units={units}")
                }
                LayerKind::Relu => writeln!(s, "relu block={b}"),
                LayerKind::Flatten => writeln!(s, "flatten block={b}"),
            };
        }
        s.push_str("---\n");
        for e in &self.skips {
            let _ = writeln!(s, "skip src={} dst={} density={}", e.src, e.dst, e.density);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut input = None;
        let mut layers = Vec::new();
        let mut skips = Vec::new();
        let mut in_skips = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "---" {
                in_skips = true;
                continue;
            }
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap_or_default();
            let fields = Fields::parse(parts, lineno)?;
            if in_skips {
                if kind != "skip" {
                    return Err(GraphError::Parse {
                        line: lineno,
                        msg: format!("expected a skip line after ---, got {kind:?}"),
                    });
                }
                skips.push(SkipSpec {
                    src: fields.usize("src")?,
                    dst: fields.usize("dst")?,
                    density: fields.f64("density")?,
                });
                continue;
            }
            if kind == "input" {
                input = Some((fields.usize("channels")?, fields.usize("length")?));
                continue;
            }
            let block = fields.usize("block")?;
            let kind = match kind {
                "conv1d" => LayerKind::Conv1d {
                    in_channels: fields.usize("in")?,
                    out_channels: fields.usize("out")?,
                    kernel: fields.usize("kernel")?,
                    stride: fields.usize("stride")?,
                    padding: fields.usize("padding")?,
                },
                "conv2d_ref" => LayerKind::Conv2dRef {
                    in_channels: fields.usize("in")?,
                    out_channels: fields.usize("out")?,
                    kernel: fields.usize("kernel")?,
                },
                "maxpool" => LayerKind::MaxPool {
                    kernel: fields.usize("kernel")?,
                    stride: fields.usize("stride")?,
                },
                "dense" => LayerKind::Dense {
                    in_features: fields.usize("in")?,
                    units: fields.usize("units")?,
                },
                "relu" => LayerKind::Relu,
                "flatten" => LayerKind::Flatten,
                other => {
                    return Err(GraphError::Parse {
                        line: lineno,
                        msg: format!("unknown layer kind {other:?}"),
                    })
                }
            };
            layers.push(LayerSpec {
                id: layers.len(),
                block,
                kind,
            });
        }
        let (input_channels, input_len) = input.ok_or(GraphError::Parse {
            line: 0,
            msg: "missing `input channels=.. length=..` line".into(),
        })?;
        Ok(ArchSpec {
            input_channels,
            input_len,
            layers,
            skips,
        })
    }
}

struct Fields {
    line: usize,
    pairs: Vec<(String, String)>,
}

impl Fields {
    fn parse<'a>(parts: impl Iterator<Item = &'a str>, line: usize) -> Result<Self, GraphError> {
        let mut pairs = Vec::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| GraphError::Parse {
                line,
                msg: format!("expected key=value, got {p:?}"),
            })?;
            pairs.push((k.to_string(), v.to_string()));
        }
        Ok(Fields { line, pairs })
    }

    fn raw(&self, key: &str) -> Result<&str, GraphError> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| GraphError::Parse {
                line: self.line,
                msg: format!("missing field {key:?}"),
            })
    }

    fn usize(&self, key: &str) -> Result<usize, GraphError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| GraphError::Parse {
            line: self.line,
            msg: format!("field {key:?} is not a non-negative integer: {v:?}"),
        })
    }

    fn f64(&self, key: &str) -> Result<f64, GraphError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| GraphError::Parse {
            line: self.line,
            msg: format!("field {key:?} is not a number: {v:?}"),
        })
    }
}
