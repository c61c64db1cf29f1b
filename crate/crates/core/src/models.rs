//! The two network designs and their complexity metrics.
//!
//! The classification network stacks 3-D convolution blocks (conv, batch
//! norm, ReLU, 2×2 spatial max pooling), flattens each frame, runs two
//! recurrent layers and ends in a kernel-3 temporal convolution with a
//! per-frame softmax over phases. The regression network runs a per-frame
//! 2-D backbone, two recurrent layers with a ReLU dense layer between them,
//! and a sigmoid dense output with one curve per event.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ArchSpec, Complexity, ConvSpec, Network, Scalar, SeqSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellType {
    #[default]
    Lstm,
    Gru,
}

fn recurrent(cell: CellType, units: usize, bidirectional: bool) -> SeqSpec {
    match cell {
        CellType::Lstm => SeqSpec::Lstm { units, bidirectional },
        CellType::Gru => SeqSpec::Gru { units, bidirectional },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationNetConfig {
    /// Square input side in pixels; must be divisible by `2^n_blocks`.
    pub input_size: usize,
    pub n_blocks: usize,
    pub base_filters: usize,
    pub temporal_kernel: usize,
    pub first_spatial_kernel: usize,
    pub spatial_kernel: usize,
    pub cell: CellType,
    pub recurrent_units: usize,
    pub recurrent_layers: usize,
    pub bidirectional: bool,
    pub head_kernel: usize,
    pub n_classes: usize,
}

impl Default for ClassificationNetConfig {
    fn default() -> Self {
        ClassificationNetConfig::full()
    }
}

impl ClassificationNetConfig {
    /// Full-size network: five blocks from 16 filters on 128×128 frames,
    /// two unidirectional 32-unit LSTMs.
    pub fn full() -> Self {
        ClassificationNetConfig {
            input_size: 128,
            n_blocks: 5,
            base_filters: 16,
            temporal_kernel: 3,
            first_spatial_kernel: 7,
            spatial_kernel: 3,
            cell: CellType::Lstm,
            recurrent_units: 32,
            recurrent_layers: 2,
            bidirectional: false,
            head_kernel: 3,
            n_classes: 6,
        }
    }

    /// Desk-scale network: four blocks from 4 filters on 64×64 frames.
    pub fn toy() -> Self {
        ClassificationNetConfig {
            input_size: 64,
            n_blocks: 4,
            base_filters: 4,
            bidirectional: true,
            ..ClassificationNetConfig::full()
        }
    }

    pub fn filters(&self, block: usize) -> usize {
        self.base_filters << block
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.base_filters == 0 || self.n_classes < 2 {
            return Err(Error::Config(
                "classification net needs blocks, filters and at least two classes".into(),
            ));
        }
        let div = 1usize << self.n_blocks;
        if self.input_size == 0 || !self.input_size.is_multiple_of(div) {
            return Err(Error::Config(format!(
                "input size {} is not divisible by 2^{} = {div}",
                self.input_size, self.n_blocks
            )));
        }
        for k in [self.temporal_kernel, self.first_spatial_kernel, self.spatial_kernel, self.head_kernel] {
            if k % 2 == 0 {
                return Err(Error::Config(format!("kernel sizes must be odd, got {k}")));
            }
        }
        Ok(())
    }

    pub fn arch(&self) -> Result<ArchSpec> {
        self.validate()?;
        let mut conv = Vec::new();
        for b in 0..self.n_blocks {
            let k = if b == 0 {
                self.first_spatial_kernel
            } else {
                self.spatial_kernel
            };
            conv.push(ConvSpec::Conv {
                filters: self.filters(b),
                kernel: [self.temporal_kernel, k, k],
                stride: 1,
                padding: [k / 2, k / 2],
            });
            conv.push(ConvSpec::BatchNorm);
            conv.push(ConvSpec::Relu);
            conv.push(ConvSpec::MaxPool {
                window: [2, 2],
                stride: 2,
                padding: 0,
            });
        }
        let mut seq: Vec<SeqSpec> = (0..self.recurrent_layers)
            .map(|_| recurrent(self.cell, self.recurrent_units, self.bidirectional))
            .collect();
        seq.push(SeqSpec::TemporalConv {
            filters: self.n_classes,
            kernel: self.head_kernel,
        });
        seq.push(SeqSpec::Softmax);
        Ok(ArchSpec {
            input: [1, self.input_size, self.input_size],
            conv,
            seq,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Backbone {
    /// 50-layer residual network (bottleneck blocks 3-4-6-3).
    Resnet50,
    /// Per-frame 3×3 conv/BN/ReLU layers; a 2×2 max pool follows each of the
    /// first `pooled` layers; ends in global average pooling.
    SmallCnn { filters: Vec<usize>, pooled: usize },
}

impl Backbone {
    fn layers(&self) -> Vec<ConvSpec> {
        match self {
            Backbone::Resnet50 => {
                let mut v = vec![
                    ConvSpec::Conv {
                        filters: 64,
                        kernel: [1, 7, 7],
                        stride: 2,
                        padding: [3, 3],
                    },
                    ConvSpec::BatchNorm,
                    ConvSpec::Relu,
                    ConvSpec::MaxPool {
                        window: [3, 3],
                        stride: 2,
                        padding: 1,
                    },
                ];
                for (stage, (blocks, width)) in [(3, 64), (4, 128), (6, 256), (3, 512)].into_iter().enumerate() {
                    for b in 0..blocks {
                        v.push(ConvSpec::Bottleneck {
                            filters: [width, width, 4 * width],
                            stride: if b == 0 && stage > 0 { 2 } else { 1 },
                            projection: b == 0,
                        });
                    }
                }
                v.push(ConvSpec::GlobalAvgPool);
                v
            }
            Backbone::SmallCnn { filters, pooled } => {
                let mut v = Vec::new();
                for (i, &f) in filters.iter().enumerate() {
                    v.push(ConvSpec::Conv {
                        filters: f,
                        kernel: [1, 3, 3],
                        stride: 1,
                        padding: [1, 1],
                    });
                    v.push(ConvSpec::BatchNorm);
                    v.push(ConvSpec::Relu);
                    if i < *pooled {
                        v.push(ConvSpec::MaxPool {
                            window: [2, 2],
                            stride: 2,
                            padding: 0,
                        });
                    }
                }
                v.push(ConvSpec::GlobalAvgPool);
                v
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionNetConfig {
    pub input_size: usize,
    pub channels: usize,
    pub backbone: Backbone,
    pub cell: CellType,
    pub recurrent1_units: usize,
    pub dense_units: usize,
    pub recurrent2_units: usize,
    pub bidirectional: bool,
    pub n_outputs: usize,
}

impl Default for RegressionNetConfig {
    fn default() -> Self {
        RegressionNetConfig::full()
    }
}

impl RegressionNetConfig {
    /// Full-size network on 112×112×3 frames with a ResNet-50 backbone.
    pub fn full() -> Self {
        RegressionNetConfig {
            input_size: 112,
            channels: 3,
            backbone: Backbone::Resnet50,
            cell: CellType::Lstm,
            recurrent1_units: 2048,
            dense_units: 512,
            recurrent2_units: 512,
            bidirectional: false,
            n_outputs: 6,
        }
    }

    /// Desk-scale network with a six-layer CNN backbone.
    pub fn toy() -> Self {
        RegressionNetConfig {
            input_size: 64,
            channels: 3,
            backbone: Backbone::SmallCnn {
                filters: vec![8, 16, 16, 32, 32, 64],
                pooled: 4,
            },
            cell: CellType::Lstm,
            recurrent1_units: 64,
            dense_units: 32,
            recurrent2_units: 32,
            bidirectional: true,
            n_outputs: 6,
        }
    }

    pub fn arch(&self) -> Result<ArchSpec> {
        if self.n_outputs == 0 || self.channels == 0 {
            return Err(Error::Config("regression net needs outputs and input channels".into()));
        }
        Ok(ArchSpec {
            input: [self.channels, self.input_size, self.input_size],
            conv: self.backbone.layers(),
            seq: vec![
                recurrent(self.cell, self.recurrent1_units, self.bidirectional),
                SeqSpec::Dense {
                    units: self.dense_units,
                },
                SeqSpec::Relu,
                recurrent(self.cell, self.recurrent2_units, self.bidirectional),
                SeqSpec::Dense { units: self.n_outputs },
                SeqSpec::Sigmoid,
            ],
        })
    }
}

/// Either network design.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Classification(ClassificationNetConfig),
    Regression(RegressionNetConfig),
}

impl ModelConfig {
    pub fn arch(&self) -> Result<ArchSpec> {
        match self {
            ModelConfig::Classification(c) => c.arch(),
            ModelConfig::Regression(c) => c.arch(),
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            ModelConfig::Classification(c) => c.input_size,
            ModelConfig::Regression(c) => c.input_size,
        }
    }

    pub fn input_channels(&self) -> usize {
        match self {
            ModelConfig::Classification(_) => 1,
            ModelConfig::Regression(c) => c.channels,
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            ModelConfig::Classification(c) => c.n_classes,
            ModelConfig::Regression(c) => c.n_outputs,
        }
    }

    pub fn build<S: Scalar>(&self, seed: u64) -> Result<Network<S>> {
        Network::new(&self.arch()?, seed)
    }
}

pub fn build_classification_net<S: Scalar>(cfg: &ClassificationNetConfig, seed: u64) -> Result<Network<S>> {
    Network::new(&cfg.arch()?, seed)
}

pub fn build_regression_net<S: Scalar>(cfg: &RegressionNetConfig, seed: u64) -> Result<Network<S>> {
    Network::new(&cfg.arch()?, seed)
}

/// Trainable parameters of a built network.
pub fn count_parameters<S: Scalar>(net: &mut Network<S>) -> usize {
    net.count_parameters()
}

/// Compute estimate for one input of `n_frames` frames.
///
/// `macs` counts multiply-accumulates; `flops` counts two operations per
/// MAC plus one per bias addition. Per-frame figures divide out the
/// sequence length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlopEstimate {
    pub n_frames: usize,
    pub macs: u64,
    pub flops: u64,
    pub conv_macs: u64,
    pub conv_flops: u64,
    pub macs_per_frame: u64,
    pub flops_per_frame: u64,
}

/// Estimates compute for `arch` on an input of shape `[frames, rows, cols, channels]`.
pub fn estimate_flops(arch: &ArchSpec, input_shape: [usize; 4]) -> Result<FlopEstimate> {
    let [t, h, w, c] = input_shape;
    if [c, h, w] != arch.input {
        return Err(Error::InvalidArgument(format!(
            "input shape {h}x{w}x{c} does not match the network's {:?}",
            arch.input
        )));
    }
    let cx: Complexity = arch.complexity()?;
    let conv_flops: u64 = cx.layers[..conv_layer_count(&cx, arch)]
        .iter()
        .map(|l| l.flops_per_frame)
        .sum();
    let t64 = t as u64;
    Ok(FlopEstimate {
        n_frames: t,
        macs: cx.macs_per_frame * t64,
        flops: cx.flops_per_frame * t64,
        conv_macs: cx.conv_macs_per_frame * t64,
        conv_flops: conv_flops * t64,
        macs_per_frame: cx.macs_per_frame,
        flops_per_frame: cx.flops_per_frame,
    })
}

fn conv_layer_count(cx: &Complexity, arch: &ArchSpec) -> usize {
    cx.layers.len() - arch.seq.len()
}

/// `(frames, rows, cols)` receptive field of the convolutional stage.
pub fn receptive_field(cfg: &ClassificationNetConfig) -> Result<(usize, usize, usize)> {
    let rf = cfg.arch()?.complexity()?.receptive_field;
    Ok((rf[0], rf[1], rf[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn full_classification_complexity() {
        let cfg = ClassificationNetConfig::full();
        assert_eq!(receptive_field(&cfg).unwrap(), (11, 67, 67));
        let cx = cfg.arch().unwrap().complexity().unwrap();
        assert_eq!(cx.flat_features, 4096);
        // Per-layer oracle: 3-D convs with bias, BN scale/shift, Keras LSTM
        // (4·(H·(I+H)+H)), temporal conv head.
        let convs: u64 = [(1, 16, 147), (16, 32, 27), (32, 64, 27), (64, 128, 27), (128, 256, 27)]
            .iter()
            .map(|&(i, o, k)| i * o * k + o + 2 * o)
            .sum();
        let lstm = 4 * (32 * (4096 + 32) + 32) + 4 * (32 * (32 + 32) + 32);
        let head = 3 * 32 * 6 + 6;
        assert_eq!(cx.params, convs + lstm + head);
        assert_eq!(cx.params, 1_716_294);
        assert_eq!(cx.conv_macs_per_frame, 265_027_584);
    }

    #[test]
    fn resnet_regression_parameter_count() {
        let cx = RegressionNetConfig::full().arch().unwrap().complexity().unwrap();
        assert_eq!(cx.flat_features, 2048);
        let backbone: u64 = cx.layers[..cx.layers.len() - 6].iter().map(|l| l.params).sum();
        let running: u64 = cx.non_trainable;
        // Reference backbone without the classifier: 23,587,712 scalars of
        // which 53,120 are running statistics.
        assert_eq!(backbone + running, 23_587_712);
        assert_eq!(running, 53_120);
        let head = 4 * (2048 * (2048 + 2048) + 2048) + (2048 * 512 + 512) + 4 * (512 * (512 + 512) + 512) + (512 * 6 + 6);
        assert_eq!(cx.params, backbone + head);
        assert!((59.0e6..61.5e6).contains(&(cx.params as f64)));
    }

    #[test]
    fn indivisible_input_is_a_config_error() {
        let cfg = ClassificationNetConfig {
            input_size: 100,
            ..ClassificationNetConfig::full()
        };
        assert!(matches!(build_classification_net::<f32>(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn flops_scale_with_frames() {
        let arch = ClassificationNetConfig::full().arch().unwrap();
        let a = estimate_flops(&arch, [10, 128, 128, 1]).unwrap();
        let b = estimate_flops(&arch, [20, 128, 128, 1]).unwrap();
        assert_eq!(2 * a.conv_flops, b.conv_flops);
        assert_eq!(a.macs_per_frame, b.macs_per_frame);
        assert!(estimate_flops(&arch, [10, 64, 64, 1]).is_err());
    }

    #[test]
    fn built_models_match_closed_form_counts() {
        for cfg in [ClassificationNetConfig::toy(), ClassificationNetConfig::full()] {
            let mut net = build_classification_net::<f32>(&cfg, 1).unwrap();
            let cx = cfg.arch().unwrap().complexity().unwrap();
            assert_eq!(count_parameters(&mut net) as u64, cx.params);
        }
        let cfg = RegressionNetConfig::toy();
        let mut net = build_regression_net::<f32>(&cfg, 1).unwrap();
        assert_eq!(count_parameters(&mut net) as u64, cfg.arch().unwrap().complexity().unwrap().params);
    }

    #[test]
    fn toy_shapes_and_ranges() {
        let cfg = ClassificationNetConfig::toy();
        let mut net = build_classification_net::<f32>(&cfg, 3).unwrap();
        let x = Tensor::from_vec(&[2, 1, 5, 64, 64], (0..2 * 5 * 4096).map(|i| (i % 7) as f32 / 7.0).collect());
        let y = net.predict(x, &[5, 5]).unwrap();
        assert_eq!(y.shape, vec![2, 5, 6]);
        for row in y.data.chunks(6) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
        let cfg = RegressionNetConfig::toy();
        let mut net = build_regression_net::<f32>(&cfg, 3).unwrap();
        let x = Tensor::from_vec(&[1, 3, 4, 64, 64], vec![0.5; 3 * 4 * 4096]);
        let y = net.predict(x, &[4]).unwrap();
        assert_eq!(y.shape, vec![1, 4, 6]);
        assert!(y.data.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
