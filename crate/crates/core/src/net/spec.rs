use alloc::vec::Vec;

use crate::error::{bail_validation, Result};

/// One layer descriptor. Convolution and dense layers always carry a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum Layer {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense {
        inputs: usize,
        outputs: usize,
    },
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Conv2d { in_channels, out_channels, kernel, .. } => {
                out_channels * in_channels * kernel * kernel + out_channels
            }
            Layer::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, Layer::Conv2d { .. })
    }
}

/// Per-sample activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Spatial { channels: usize, height: usize, width: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Spatial { channels, height, width } => channels * height * width,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Batched tensor shape with leading batch extent `n`.
    pub fn batched(&self, n: usize) -> Vec<usize> {
        match *self {
            Shape::Spatial { channels, height, width } => alloc::vec![n, channels, height, width],
            Shape::Flat(k) => alloc::vec![n, k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NetworkSpec {
    /// `(channels, height, width)` of one input image.
    pub input: [usize; 3],
    pub layers: Vec<Layer>,
    pub classes: usize,
}

impl NetworkSpec {
    /// Conv(c→c1) ReLU MaxPool(2) Conv(c1→c2) ReLU GAP Dense(c2→classes).
    pub fn small_cnn(input: [usize; 3], c1: usize, c2: usize, classes: usize) -> Self {
        Self {
            input,
            layers: alloc::vec![
                Layer::Conv2d { in_channels: input[0], out_channels: c1, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool { kernel: 2, stride: 2 },
                Layer::Conv2d { in_channels: c1, out_channels: c2, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::GlobalAvgPool,
                Layer::Dense { inputs: c2, outputs: classes },
            ],
            classes,
        }
    }

    /// Validates the layer chain and returns the activation shape before
    /// the first layer followed by the shape after each layer.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 {
            bail_validation!("input shape must be positive, got {:?}", self.input);
        }
        if self.classes < 2 {
            bail_validation!("need at least two classes, got {}", self.classes);
        }
        if !self.layers.iter().any(Layer::is_conv) {
            bail_validation!("network needs at least one Conv2d layer");
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut cur = Shape::Spatial { channels: c, height: h, width: w };
        shapes.push(cur);
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (*layer, cur) {
                (
                    Layer::Conv2d { in_channels, out_channels, kernel, stride, padding },
                    Shape::Spatial { channels, height, width },
                ) => {
                    if in_channels != channels {
                        bail_validation!(
                            "layer {i}: conv expects {in_channels} channels, input has {channels}"
                        );
                    }
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        bail_validation!("layer {i}: conv extents must be positive");
                    }
                    if kernel > height + 2 * padding || kernel > width + 2 * padding {
                        bail_validation!("layer {i}: kernel {kernel} larger than padded input");
                    }
                    Shape::Spatial {
                        channels: out_channels,
                        height: (height + 2 * padding - kernel) / stride + 1,
                        width: (width + 2 * padding - kernel) / stride + 1,
                    }
                }
                (Layer::Relu, s) => s,
                (Layer::MaxPool { kernel, stride }, Shape::Spatial { channels, height, width }) => {
                    if kernel == 0 || stride == 0 || kernel > height || kernel > width {
                        bail_validation!("layer {i}: invalid pooling window {kernel}/{stride}");
                    }
                    Shape::Spatial {
                        channels,
                        height: (height - kernel) / stride + 1,
                        width: (width - kernel) / stride + 1,
                    }
                }
                (Layer::GlobalAvgPool, Shape::Spatial { channels, .. }) => Shape::Flat(channels),
                (Layer::Dense { inputs, outputs }, s) => {
                    if inputs != s.len() {
                        bail_validation!(
                            "layer {i}: dense expects {inputs} inputs, previous layer gives {}",
                            s.len()
                        );
                    }
                    if outputs == 0 {
                        bail_validation!("layer {i}: dense needs at least one output");
                    }
                    Shape::Flat(outputs)
                }
                (l, s) => bail_validation!("layer {i}: {l:?} cannot follow activation shape {s:?}"),
            };
            shapes.push(cur);
        }
        if cur != Shape::Flat(self.classes) {
            bail_validation!("network output {cur:?} does not match {} classes", self.classes);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Offset of each layer's parameter block in the flat vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = off;
                off += l.param_count();
                o
            })
            .collect()
    }

    pub fn conv_layers(&self) -> Vec<usize> {
        self.layers.iter().enumerate().filter(|(_, l)| l.is_conv()).map(|(i, _)| i).collect()
    }

    pub fn last_conv(&self) -> Option<usize> {
        self.conv_layers().last().copied()
    }
}
