//! Serializable architecture descriptions and their closed-form complexity.
//!
//! Counting conventions:
//! - `params` are trainable scalars; batch-norm running statistics are
//!   reported separately as `non_trainable`.
//! - `macs_per_frame` counts multiply-accumulates for one input frame.
//!   Convolutions count the full temporal kernel at every frame.
//! - `flops_per_frame` is `2 · MACs` plus one addition per bias element.
//!   Normalisation, activations and pooling are not counted.
//! - The receptive field grows by `(k - 1) · jump` at each convolution, and
//!   pooling multiplies the jump by its stride without widening the field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of the convolutional stage. Convolutions use 'same' padding in
/// time; spatial padding and stride are explicit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvSpec {
    Conv {
        filters: usize,
        /// `[frames, rows, cols]`.
        kernel: [usize; 3],
        stride: usize,
        padding: [usize; 2],
    },
    BatchNorm,
    Relu,
    MaxPool {
        window: [usize; 2],
        stride: usize,
        padding: usize,
    },
    /// Residual bottleneck: 1×1 (strided), 3×3, 1×1, each with batch norm;
    /// the shortcut is a strided 1×1 convolution with batch norm when
    /// `projection` is set.
    Bottleneck {
        filters: [usize; 3],
        stride: usize,
        projection: bool,
    },
    GlobalAvgPool,
}

/// One layer of the per-frame sequence stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeqSpec {
    Lstm { units: usize, bidirectional: bool },
    Gru { units: usize, bidirectional: bool },
    Dense { units: usize },
    /// 1-D convolution over frames with 'same' padding.
    TemporalConv { filters: usize, kernel: usize },
    Relu,
    Sigmoid,
    Softmax,
}

/// Full network: a convolutional stage applied to `[channels, frames, rows,
/// cols]` input, flattened per frame, then a sequence stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// `[channels, rows, cols]` of one input frame.
    pub input: [usize; 3],
    pub conv: Vec<ConvSpec>,
    pub seq: Vec<SeqSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerComplexity {
    pub name: String,
    /// Per-frame output shape: `[channels, rows, cols]` or `[features]`.
    pub output: Vec<usize>,
    pub params: u64,
    pub non_trainable: u64,
    pub macs_per_frame: u64,
    pub flops_per_frame: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Complexity {
    pub layers: Vec<LayerComplexity>,
    pub params: u64,
    pub non_trainable: u64,
    pub macs_per_frame: u64,
    pub flops_per_frame: u64,
    /// MACs of the convolutional stage alone, per frame.
    pub conv_macs_per_frame: u64,
    /// `[frames, rows, cols]` receptive field of the convolutional stage.
    pub receptive_field: [usize; 3],
    /// Features per frame entering the sequence stage.
    pub flat_features: usize,
    pub output_features: usize,
}

/// Spatial output size of a strided window; errors when the window does not fit.
pub(crate) fn out_size(n: usize, k: usize, stride: usize, pad: usize, what: &str) -> Result<usize> {
    if stride == 0 || n + 2 * pad < k {
        return Err(Error::Config(format!("{what}: window {k} does not fit input {n}")));
    }
    Ok((n + 2 * pad - k) / stride + 1)
}

pub(crate) fn conv_counts(cin: usize, cout: usize, kernel: [usize; 3], ho: usize, wo: usize) -> (u64, u64) {
    let k = (cin * kernel.iter().product::<usize>()) as u64;
    let params = k * cout as u64 + cout as u64;
    let macs = k * cout as u64 * (ho * wo) as u64;
    (params, macs)
}

pub(crate) fn lstm_params(input: usize, units: usize) -> u64 {
    (4 * (units * (input + units) + units)) as u64
}

pub(crate) fn gru_params(input: usize, units: usize) -> u64 {
    (3 * (units * (input + units) + 2 * units)) as u64
}

struct Walker {
    layers: Vec<LayerComplexity>,
    rf: [usize; 3],
    jump: usize,
}

impl Walker {
    fn push(&mut self, name: String, output: Vec<usize>, params: u64, non_trainable: u64, macs: u64, bias: u64) {
        self.layers.push(LayerComplexity {
            name,
            output,
            params,
            non_trainable,
            macs_per_frame: macs,
            flops_per_frame: 2 * macs + bias,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        name: String,
        shape: [usize; 3],
        filters: usize,
        kernel: [usize; 3],
        stride: usize,
        padding: [usize; 2],
    ) -> Result<[usize; 3]> {
        let [c, h, w] = shape;
        if kernel[0].is_multiple_of(2) {
            return Err(Error::Config(format!("{name}: temporal kernel must be odd")));
        }
        let ho = out_size(h, kernel[1], stride, padding[0], &name)?;
        let wo = out_size(w, kernel[2], stride, padding[1], &name)?;
        let (params, macs) = conv_counts(c, filters, kernel, ho, wo);
        self.rf[0] += kernel[0] - 1;
        self.rf[1] += (kernel[1] - 1) * self.jump;
        self.rf[2] += (kernel[2] - 1) * self.jump;
        self.jump *= stride;
        self.push(name, vec![filters, ho, wo], params, 0, macs, (filters * ho * wo) as u64);
        Ok([filters, ho, wo])
    }

    fn bn(&mut self, name: String, shape: [usize; 3]) {
        self.push(name, shape.to_vec(), 2 * shape[0] as u64, 2 * shape[0] as u64, 0, 0);
    }
}

impl ArchSpec {
    /// Validates shapes and computes the closed-form complexity summary.
    pub fn complexity(&self) -> Result<Complexity> {
        let mut wk = Walker {
            layers: Vec::new(),
            rf: [1, 1, 1],
            jump: 1,
        };
        let mut shape = self.input;
        if shape.contains(&0) {
            return Err(Error::Config("input dimensions must be positive".into()));
        }
        let mut flat: Option<usize> = None;
        for (i, layer) in self.conv.iter().enumerate() {
            if flat.is_some() {
                return Err(Error::Config("global pooling must be the last convolutional layer".into()));
            }
            match *layer {
                ConvSpec::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    shape = wk.conv(format!("conv{i}"), shape, filters, kernel, stride, padding)?;
                }
                ConvSpec::BatchNorm => wk.bn(format!("bn{i}"), shape),
                ConvSpec::Relu => wk.push(format!("relu{i}"), shape.to_vec(), 0, 0, 0, 0),
                ConvSpec::MaxPool { window, stride, padding } => {
                    let [c, h, w] = shape;
                    if padding == 0 && window == [stride, stride] && (h % stride != 0 || w % stride != 0) {
                        return Err(Error::Config(format!(
                            "pool{i}: input {h}x{w} is not divisible by {stride}"
                        )));
                    }
                    let ho = out_size(h, window[0], stride, padding, "pool")?;
                    let wo = out_size(w, window[1], stride, padding, "pool")?;
                    wk.jump *= stride;
                    shape = [c, ho, wo];
                    wk.push(format!("pool{i}"), shape.to_vec(), 0, 0, 0, 0);
                }
                ConvSpec::Bottleneck {
                    filters,
                    stride,
                    projection,
                } => {
                    let input = shape;
                    if !projection && (stride != 1 || input[0] != filters[2]) {
                        return Err(Error::Config(format!(
                            "block{i}: identity shortcut needs stride 1 and {} input channels",
                            filters[2]
                        )));
                    }
                    let (rf, jump) = (wk.rf, wk.jump);
                    let s = wk.conv(format!("block{i}.a"), input, filters[0], [1, 1, 1], stride, [0, 0])?;
                    wk.bn(format!("block{i}.a_bn"), s);
                    let s = wk.conv(format!("block{i}.b"), s, filters[1], [1, 3, 3], 1, [1, 1])?;
                    wk.bn(format!("block{i}.b_bn"), s);
                    let s = wk.conv(format!("block{i}.c"), s, filters[2], [1, 1, 1], 1, [0, 0])?;
                    wk.bn(format!("block{i}.c_bn"), s);
                    if projection {
                        let (rf2, jump2) = (wk.rf, wk.jump);
                        wk.rf = rf;
                        wk.jump = jump;
                        let p = wk.conv(format!("block{i}.proj"), input, filters[2], [1, 1, 1], stride, [0, 0])?;
                        wk.bn(format!("block{i}.proj_bn"), p);
                        if p != s {
                            return Err(Error::Config(format!("block{i}: shortcut shape mismatch")));
                        }
                        wk.rf = rf2;
                        wk.jump = jump2;
                    }
                    shape = s;
                }
                ConvSpec::GlobalAvgPool => {
                    flat = Some(shape[0]);
                    wk.push(format!("gap{i}"), vec![shape[0]], 0, 0, 0, 0);
                }
            }
        }
        let flat_features = flat.unwrap_or(shape.iter().product());
        let conv_macs: u64 = wk.layers.iter().map(|l| l.macs_per_frame).sum();
        let mut f = flat_features;
        for (i, layer) in self.seq.iter().enumerate() {
            match *layer {
                SeqSpec::Lstm { units, bidirectional } | SeqSpec::Gru { units, bidirectional } => {
                    let dirs = if bidirectional { 2 } else { 1 };
                    let is_lstm = matches!(layer, SeqSpec::Lstm { .. });
                    let (name, per_dir, gates, bias) = if is_lstm {
                        ("lstm", lstm_params(f, units), 4, 4 * units)
                    } else {
                        ("gru", gru_params(f, units), 3, 6 * units)
                    };
                    let macs = (gates * units * (f + units)) as u64;
                    wk.push(
                        format!("{name}{i}"),
                        vec![units * dirs],
                        per_dir * dirs as u64,
                        0,
                        macs * dirs as u64,
                        (bias * dirs) as u64,
                    );
                    f = units * dirs;
                }
                SeqSpec::Dense { units } => {
                    let macs = (f * units) as u64;
                    wk.push(format!("dense{i}"), vec![units], macs + units as u64, 0, macs, units as u64);
                    f = units;
                }
                SeqSpec::TemporalConv { filters, kernel } => {
                    if kernel % 2 == 0 {
                        return Err(Error::Config(format!("tconv{i}: kernel must be odd")));
                    }
                    let macs = (kernel * f * filters) as u64;
                    wk.push(
                        format!("tconv{i}"),
                        vec![filters],
                        macs + filters as u64,
                        0,
                        macs,
                        filters as u64,
                    );
                    f = filters;
                }
                SeqSpec::Relu | SeqSpec::Sigmoid | SeqSpec::Softmax => {
                    wk.push(format!("act{i}"), vec![f], 0, 0, 0, 0);
                }
            }
        }
        let sum = |g: fn(&LayerComplexity) -> u64| wk.layers.iter().map(g).sum::<u64>();
        Ok(Complexity {
            params: sum(|l| l.params),
            non_trainable: sum(|l| l.non_trainable),
            macs_per_frame: sum(|l| l.macs_per_frame),
            flops_per_frame: sum(|l| l.flops_per_frame),
            conv_macs_per_frame: conv_macs,
            receptive_field: wk.rf,
            flat_features,
            output_features: f,
            layers: wk.layers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_counts() {
        let spec = ArchSpec {
            input: [10, 1, 1],
            conv: vec![],
            seq: vec![SeqSpec::Dense { units: 5 }],
        };
        let c = spec.complexity().unwrap();
        assert_eq!(c.params, 55);
        assert_eq!(c.flops_per_frame, 105);
        assert_eq!(c.macs_per_frame, 50);
    }

    #[test]
    fn receptive_field_convention() {
        let conv3 = |filters| ConvSpec::Conv {
            filters,
            kernel: [3, 3, 3],
            stride: 1,
            padding: [1, 1],
        };
        let one = ArchSpec {
            input: [1, 8, 8],
            conv: vec![conv3(2)],
            seq: vec![],
        };
        assert_eq!(one.complexity().unwrap().receptive_field, [3, 3, 3]);
        let two = ArchSpec {
            input: [1, 8, 8],
            conv: vec![
                conv3(2),
                ConvSpec::MaxPool {
                    window: [2, 2],
                    stride: 2,
                    padding: 0,
                },
                conv3(2),
            ],
            seq: vec![],
        };
        assert_eq!(two.complexity().unwrap().receptive_field[1..], [7, 7]);
    }

    #[test]
    fn recurrent_cell_formulas() {
        assert_eq!(lstm_params(4096, 32), 528_512);
        assert_eq!(lstm_params(32, 32), 8_320);
        assert_eq!(gru_params(4096, 32), 3 * (32 * (4096 + 32) + 64));
    }

    #[test]
    fn indivisible_pooling_is_a_config_error() {
        let spec = ArchSpec {
            input: [1, 6, 6],
            conv: vec![
                ConvSpec::MaxPool {
                    window: [2, 2],
                    stride: 2,
                    padding: 0,
                };
                2
            ],
            seq: vec![],
        };
        assert!(matches!(spec.complexity(), Err(Error::Config(_))));
    }
}
