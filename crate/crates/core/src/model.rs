//! Declarative network topologies and the networks built from them.
//!
//! A [`ModelConfig`] is an ordered list of [`LayerSpec`]s over a square
//! single-channel input. ReLU follows every convolution and every dense layer
//! except the last; the last dense layer produces the class logits that feed
//! the softmax/cross-entropy head. Dropout, when enabled on a hidden dense
//! layer, is applied after its ReLU. Flattening is row-major over
//! `[height, width, channels]`, which fixes the column order of the first
//! dense layer's weights.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_forward, dense_backward, dense_forward, dropout_backward, dropout_forward,
    maxpool_backward, maxpool_forward, relu_backward, relu_forward, softmax, softmax_xent,
    ConvCache, ConvParams, DenseCache, DenseParams, DropoutCache, DropoutMode, PoolCache,
    PoolParams, ReluCache,
};
use crate::rng::{Prng, Stream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Admissible ranges for configurations drawn from the topology search space.
pub mod bounds {
    use core::ops::RangeInclusive;
    pub const CONV_LAYERS: RangeInclusive<usize> = 1..=5;
    pub const FILTERS: RangeInclusive<usize> = 8..=256;
    pub const KERNEL: RangeInclusive<usize> = 2..=5;
    pub const FC_LAYERS: RangeInclusive<usize> = 1..=4;
    pub const FC_SIZE: RangeInclusive<usize> = 16..=512;
    pub const INPUT_SIZE: RangeInclusive<usize> = 100..=300;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Square kernel and stride, valid padding.
    Conv {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        units: usize,
        dropout: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Side of the square grayscale input in pixels.
    pub input_size: usize,
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
    pub seed: u64,
    /// Images were sharpened before training; apply the same at inference.
    pub sharpen: bool,
}

/// Shape of the activations after a stage of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageShape {
    Spatial([usize; 3]),
    Flat(usize),
}

impl StageShape {
    pub fn len(&self) -> usize {
        match *self {
            StageShape::Spatial([h, w, c]) => h * w * c,
            StageShape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Name, shape and whether the tensor is a weight (L2-regularized) rather
/// than a bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub is_weight: bool,
}

fn check_classes(num_classes: usize) -> Result<()> {
    if num_classes == 2 || num_classes == 3 {
        Ok(())
    } else {
        Err(Error::InvalidClasses(num_classes))
    }
}

impl ModelConfig {
    /// The reference network: 300x300 input, conv 16@2x2, pool 2x2/2,
    /// conv 64@3x3, pool 2x2/2, two dense layers of 32 with dropout, and a
    /// softmax output of `num_classes`.
    pub fn canonical(num_classes: usize) -> Result<Self> {
        Self::canonical_at(300, num_classes)
    }

    /// The canonical layer stack at another input resolution.
    pub fn canonical_at(input_size: usize, num_classes: usize) -> Result<Self> {
        check_classes(num_classes)?;
        let cfg = Self {
            input_size,
            layers: vec![
                LayerSpec::Conv {
                    filters: 16,
                    kernel: 2,
                    stride: 1,
                },
                LayerSpec::MaxPool {
                    window: 2,
                    stride: 2,
                },
                LayerSpec::Conv {
                    filters: 64,
                    kernel: 3,
                    stride: 1,
                },
                LayerSpec::MaxPool {
                    window: 2,
                    stride: 2,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 32,
                    dropout: true,
                },
                LayerSpec::Dense {
                    units: 32,
                    dropout: true,
                },
                LayerSpec::Dense {
                    units: num_classes,
                    dropout: false,
                },
            ],
            num_classes,
            seed: 0,
            sharpen: false,
        };
        cfg.shape_chain()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Output shape of every stage, starting with the input.
    pub fn shape_chain(&self) -> Result<Vec<StageShape>> {
        check_classes(self.num_classes)?;
        if self.input_size == 0 {
            return Err(Error::Topology("input size must be positive".into()));
        }
        let Some(LayerSpec::Dense { units, dropout }) = self.layers.last() else {
            return Err(Error::Topology("the last layer must be dense".into()));
        };
        if *units != self.num_classes || *dropout {
            return Err(Error::Topology(format!(
                "output layer must have {} units and no dropout",
                self.num_classes
            )));
        }
        let mut cur = StageShape::Spatial([self.input_size, self.input_size, 1]);
        let mut chain = vec![cur];
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (*layer, cur) {
                (
                    LayerSpec::Conv {
                        filters,
                        kernel,
                        stride,
                    },
                    StageShape::Spatial([h, w, _]),
                ) => {
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(Error::Topology(format!(
                            "layer {i}: conv extents must be positive"
                        )));
                    }
                    if h < kernel || w < kernel {
                        return Err(Error::Topology(format!(
                            "layer {i}: {kernel}x{kernel} kernel does not fit {h}x{w} input"
                        )));
                    }
                    StageShape::Spatial([
                        (h - kernel) / stride + 1,
                        (w - kernel) / stride + 1,
                        filters,
                    ])
                }
                (LayerSpec::MaxPool { window, stride }, StageShape::Spatial([h, w, c])) => {
                    if window == 0 || stride == 0 {
                        return Err(Error::Topology(format!(
                            "layer {i}: pool extents must be positive"
                        )));
                    }
                    if h < window || w < window {
                        return Err(Error::Topology(format!(
                            "layer {i}: {window}x{window} pool does not fit {h}x{w} input"
                        )));
                    }
                    StageShape::Spatial([(h - window) / stride + 1, (w - window) / stride + 1, c])
                }
                (LayerSpec::Flatten, StageShape::Spatial(_)) => StageShape::Flat(cur.len()),
                (LayerSpec::Dense { units, .. }, StageShape::Flat(_)) => {
                    if units == 0 {
                        return Err(Error::Topology(format!(
                            "layer {i}: dense layer needs units"
                        )));
                    }
                    StageShape::Flat(units)
                }
                (layer, shape) => {
                    return Err(Error::Topology(format!(
                        "layer {i}: {layer:?} cannot follow {shape:?}"
                    )));
                }
            };
            chain.push(cur);
        }
        Ok(chain)
    }

    /// Enforces the topology search ranges (conv layers, filters, kernel
    /// sizes, hidden dense layers and sizes, input resolution).
    pub fn check_search_bounds(&self) -> Result<()> {
        self.shape_chain()?;
        let fail = |what: String| Err(Error::Topology(what));
        if !bounds::INPUT_SIZE.contains(&self.input_size) {
            return fail(format!(
                "input size {} outside {:?}",
                self.input_size,
                bounds::INPUT_SIZE
            ));
        }
        let mut convs = 0;
        let mut hidden = 0;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv {
                    filters, kernel, ..
                } => {
                    convs += 1;
                    if !bounds::FILTERS.contains(&filters) {
                        return fail(format!(
                            "layer {i}: {filters} filters outside {:?}",
                            bounds::FILTERS
                        ));
                    }
                    if !bounds::KERNEL.contains(&kernel) {
                        return fail(format!(
                            "layer {i}: kernel {kernel} outside {:?}",
                            bounds::KERNEL
                        ));
                    }
                }
                LayerSpec::Dense { units, .. } if i != last => {
                    hidden += 1;
                    if !bounds::FC_SIZE.contains(&units) {
                        return fail(format!(
                            "layer {i}: {units} units outside {:?}",
                            bounds::FC_SIZE
                        ));
                    }
                }
                _ => {}
            }
        }
        if !bounds::CONV_LAYERS.contains(&convs) {
            return fail(format!(
                "{convs} conv layers outside {:?}",
                bounds::CONV_LAYERS
            ));
        }
        if !bounds::FC_LAYERS.contains(&hidden) {
            return fail(format!(
                "{hidden} hidden dense layers outside {:?}",
                bounds::FC_LAYERS
            ));
        }
        Ok(())
    }

    /// Every trainable tensor in construction order.
    pub fn param_specs(&self) -> Result<Vec<ParamSpec>> {
        let chain = self.shape_chain()?;
        let mut specs = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let input = chain[i];
            match (*layer, input) {
                (
                    LayerSpec::Conv {
                        filters, kernel, ..
                    },
                    StageShape::Spatial([_, _, c]),
                ) => {
                    specs.push(ParamSpec {
                        name: format!("layer{i}.kernel"),
                        shape: vec![filters, kernel, kernel, c],
                        is_weight: true,
                    });
                    specs.push(ParamSpec {
                        name: format!("layer{i}.bias"),
                        shape: vec![filters],
                        is_weight: false,
                    });
                }
                (LayerSpec::Dense { units, .. }, StageShape::Flat(n)) => {
                    specs.push(ParamSpec {
                        name: format!("layer{i}.weight"),
                        shape: vec![units, n],
                        is_weight: true,
                    });
                    specs.push(ParamSpec {
                        name: format!("layer{i}.bias"),
                        shape: vec![units],
                        is_weight: false,
                    });
                }
                _ => {}
            }
        }
        Ok(specs)
    }

    /// Total number of trainable scalars, weights and biases together.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self
            .param_specs()?
            .iter()
            .map(|p| p.shape.iter().product::<usize>())
            .sum())
    }

    /// Canonical `key=value` text form; [`ModelConfig::from_text`] inverts it.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "input_size={}", self.input_size);
        let _ = writeln!(s, "num_classes={}", self.num_classes);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "sharpen={}", self.sharpen);
        for layer in &self.layers {
            let _ = match *layer {
                LayerSpec::Conv {
                    filters,
                    kernel,
                    stride,
                } => {
                    writeln!(
                        s,
                        "layer=conv filters={filters} kernel={kernel} stride={stride}"
                    )
                }
                LayerSpec::MaxPool { window, stride } => {
                    writeln!(s, "layer=maxpool window={window} stride={stride}")
                }
                LayerSpec::Flatten => writeln!(s, "layer=flatten"),
                LayerSpec::Dense { units, dropout } => {
                    writeln!(s, "layer=dense units={units} dropout={dropout}")
                }
            };
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        fn num<V: core::str::FromStr>(line: usize, key: &str, v: &str) -> Result<V> {
            v.parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad value {v:?} for {key}")))
        }
        fn fields<'a>(line: usize, parts: &[&'a str], keys: &[&str]) -> Result<Vec<&'a str>> {
            if parts.len() != keys.len() {
                return Err(Error::Parse(format!(
                    "line {line}: expected fields {keys:?}"
                )));
            }
            parts
                .iter()
                .zip(keys)
                .map(|(p, k)| match p.split_once('=') {
                    Some((pk, v)) if pk == *k => Ok(v),
                    _ => Err(Error::Parse(format!(
                        "line {line}: expected {k}=..., got {p:?}"
                    ))),
                })
                .collect()
        }
        let (mut input_size, mut num_classes, mut seed, mut sharpen) = (None, None, None, None);
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {line}: expected key=value")))?;
            match key {
                "input_size" => input_size = Some(num(line, key, value)?),
                "num_classes" => num_classes = Some(num(line, key, value)?),
                "seed" => seed = Some(num(line, key, value)?),
                "sharpen" => sharpen = Some(num(line, key, value)?),
                "layer" => {
                    let parts: Vec<&str> = value.split(' ').collect();
                    let layer = match parts[0] {
                        "conv" => {
                            let f = fields(line, &parts[1..], &["filters", "kernel", "stride"])?;
                            LayerSpec::Conv {
                                filters: num(line, "filters", f[0])?,
                                kernel: num(line, "kernel", f[1])?,
                                stride: num(line, "stride", f[2])?,
                            }
                        }
                        "maxpool" => {
                            let f = fields(line, &parts[1..], &["window", "stride"])?;
                            LayerSpec::MaxPool {
                                window: num(line, "window", f[0])?,
                                stride: num(line, "stride", f[1])?,
                            }
                        }
                        "flatten" if parts.len() == 1 => LayerSpec::Flatten,
                        "dense" => {
                            let f = fields(line, &parts[1..], &["units", "dropout"])?;
                            LayerSpec::Dense {
                                units: num(line, "units", f[0])?,
                                dropout: num(line, "dropout", f[1])?,
                            }
                        }
                        other => {
                            return Err(Error::Parse(format!(
                                "line {line}: unknown layer {other:?}"
                            )))
                        }
                    };
                    layers.push(layer);
                }
                other => return Err(Error::Parse(format!("line {line}: unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing {k}"));
        let cfg = Self {
            input_size: input_size.ok_or_else(|| missing("input_size"))?,
            num_classes: num_classes.ok_or_else(|| missing("num_classes"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            sharpen: sharpen.ok_or_else(|| missing("sharpen"))?,
            layers,
        };
        cfg.shape_chain()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(ConvParams<T>),
    MaxPool(PoolParams),
    Flatten,
    Dense {
        params: DenseParams<T>,
        relu: bool,
        dropout: bool,
    },
}

/// A network built from a [`ModelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: ModelConfig,
    layers: Vec<Layer<T>>,
}

/// Dropout behaviour for a forward pass.
pub enum ForwardMode<'a> {
    Infer,
    Train {
        dropout_rate: f64,
        rng: &'a mut Prng,
    },
}

#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Conv(ConvCache<T>, ReluCache),
    MaxPool(PoolCache),
    Flatten([usize; 3]),
    Dense(DenseCache<T>, Option<ReluCache>, Option<DropoutCache<T>>),
}

#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub logits: Tensor<T>,
    /// Present only for training-mode passes.
    pub caches: Option<Vec<LayerCache<T>>>,
}

fn glorot<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut Prng,
) -> Result<Tensor<T>> {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.uniform(-limit, limit).map(T::from_f64))
        .collect::<Result<Vec<T>>>()?;
    Tensor::from_vec(shape, data)
}

/// Builds a network with Glorot-uniform weights drawn from the config seed's
/// initialization substream and zero biases. Weights are drawn in `f64`, so
/// `f32` and `f64` builds of one config hold the same values up to rounding.
pub fn build_model<T: Scalar>(config: &ModelConfig) -> Result<Model<T>> {
    let chain = config.shape_chain()?;
    let mut rng = Prng::substream(config.seed, Stream::Init, 0);
    let last = config.layers.len() - 1;
    let mut layers = Vec::with_capacity(config.layers.len());
    for (i, spec) in config.layers.iter().enumerate() {
        let layer = match (*spec, chain[i]) {
            (
                LayerSpec::Conv {
                    filters,
                    kernel,
                    stride,
                },
                StageShape::Spatial([_, _, c]),
            ) => {
                let k = glorot(
                    &[filters, kernel, kernel, c],
                    kernel * kernel * c,
                    kernel * kernel * filters,
                    &mut rng,
                )?;
                Layer::Conv(ConvParams::new(
                    k,
                    Tensor::zeros(&[filters])?,
                    (stride, stride),
                )?)
            }
            (LayerSpec::MaxPool { window, stride }, _) => {
                Layer::MaxPool(PoolParams::new((window, window), (stride, stride))?)
            }
            (LayerSpec::Flatten, _) => Layer::Flatten,
            (LayerSpec::Dense { units, dropout }, StageShape::Flat(n)) => {
                let w = glorot(&[units, n], n, units, &mut rng)?;
                Layer::Dense {
                    params: DenseParams::new(w, Tensor::zeros(&[units])?)?,
                    relu: i != last,
                    dropout,
                }
            }
            (spec, shape) => {
                return Err(Error::Topology(format!(
                    "layer {i}: {spec:?} cannot follow {shape:?}"
                )))
            }
        };
        layers.push(layer);
    }
    Ok(Model {
        config: config.clone(),
        layers,
    })
}

impl<T: Scalar> Model<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn set_sharpen(&mut self, sharpen: bool) {
        self.config.sharpen = sharpen;
    }

    /// Reassembles a model from named tensors, e.g. after deserialization.
    /// Names and shapes must match [`ModelConfig::param_specs`] exactly.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let specs = config.param_specs()?;
        if specs.len() != tensors.len() {
            return Err(Error::Topology(format!(
                "config needs {} tensors, got {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (spec, (name, t)) in specs.iter().zip(&tensors) {
            if &spec.name != name || spec.shape.as_slice() != t.shape() {
                return Err(Error::Topology(format!(
                    "expected {} {:?}, got {name} {:?}",
                    spec.name,
                    spec.shape,
                    t.shape()
                )));
            }
        }
        let mut model = build_model::<T>(&ModelConfig {
            seed: config.seed,
            ..config.clone()
        })?;
        for ((_, dst), (_, src)) in model.parameters_mut().into_iter().zip(tensors) {
            *dst = src;
        }
        Ok(model)
    }

    pub fn parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(p) => {
                    out.push((format!("layer{i}.kernel"), &p.kernel));
                    out.push((format!("layer{i}.bias"), &p.bias));
                }
                Layer::Dense { params, .. } => {
                    out.push((format!("layer{i}.weight"), &params.weights));
                    out.push((format!("layer{i}.bias"), &params.bias));
                }
                _ => {}
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Conv(p) => {
                    out.push((format!("layer{i}.kernel"), &mut p.kernel));
                    out.push((format!("layer{i}.bias"), &mut p.bias));
                }
                Layer::Dense { params, .. } => {
                    out.push((format!("layer{i}.weight"), &mut params.weights));
                    out.push((format!("layer{i}.bias"), &mut params.bias));
                }
                _ => {}
            }
        }
        out
    }

    /// Whether each entry of [`Model::parameters`] is a weight tensor.
    pub fn weight_mask(&self) -> Vec<bool> {
        self.parameters()
            .iter()
            .map(|(n, _)| !n.ends_with(".bias"))
            .collect()
    }

    /// Total element count of the built parameter tensors.
    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(p) => Layer::Conv(ConvParams {
                    kernel: p.kernel.cast(),
                    bias: p.bias.cast(),
                    stride: p.stride,
                }),
                Layer::MaxPool(p) => Layer::MaxPool(*p),
                Layer::Flatten => Layer::Flatten,
                Layer::Dense {
                    params,
                    relu,
                    dropout,
                } => Layer::Dense {
                    params: DenseParams {
                        weights: params.weights.cast(),
                        bias: params.bias.cast(),
                    },
                    relu: *relu,
                    dropout: *dropout,
                },
            })
            .collect();
        Model {
            config: self.config.clone(),
            layers,
        }
    }

    /// Runs the network on one `[size, size, 1]` image with values in `[0, 1]`.
    pub fn forward(&self, image: &Tensor<T>, mode: ForwardMode<'_>) -> Result<ForwardPass<T>> {
        let s = self.config.input_size;
        if image.shape() != [s, s, 1] {
            return Err(Error::Shape(format!(
                "model expects [{s}, {s}, 1] input, got {:?}",
                image.shape()
            )));
        }
        let (train, rate, mut rng) = match mode {
            ForwardMode::Infer => (false, 0.0, None),
            ForwardMode::Train { dropout_rate, rng } => (true, dropout_rate, Some(rng)),
        };
        let mut caches = Vec::with_capacity(if train { self.layers.len() } else { 0 });
        let mut x = image.clone();
        for layer in &self.layers {
            let cache = match layer {
                Layer::Conv(p) => {
                    let (y, cc) = conv2d_forward(&x, p)?;
                    let (y, rc) = relu_forward(&y);
                    x = y;
                    LayerCache::Conv(cc, rc)
                }
                Layer::MaxPool(p) => {
                    let (y, pc) = maxpool_forward(&x, p)?;
                    x = y;
                    LayerCache::MaxPool(pc)
                }
                Layer::Flatten => {
                    let shape: [usize; 3] = x
                        .shape()
                        .try_into()
                        .map_err(|_| Error::Shape("flatten needs 3-D input".into()))?;
                    let n = x.len();
                    x = x.reshape(&[n])?;
                    LayerCache::Flatten(shape)
                }
                Layer::Dense {
                    params,
                    relu,
                    dropout,
                } => {
                    let (y, dc) = dense_forward(&x, params)?;
                    let (y, rc) = if *relu {
                        let (y, rc) = relu_forward(&y);
                        (y, Some(rc))
                    } else {
                        (y, None)
                    };
                    let (y, doc) = match (dropout, rng.as_deref_mut()) {
                        (true, Some(rng)) => {
                            let (y, c) = dropout_forward(&y, rate, DropoutMode::Train, rng)?;
                            (y, Some(c))
                        }
                        _ => (y, None),
                    };
                    x = y;
                    LayerCache::Dense(dc, rc, doc)
                }
            };
            if train {
                caches.push(cache);
            }
        }
        Ok(ForwardPass {
            logits: x,
            caches: train.then_some(caches),
        })
    }

    /// Gradients of `sum(grad_logits * logits)` for every parameter tensor,
    /// in [`Model::parameters`] order.
    pub fn backward(
        &self,
        caches: &[LayerCache<T>],
        grad_logits: &Tensor<T>,
    ) -> Result<Vec<Tensor<T>>> {
        if caches.len() != self.layers.len() {
            return Err(Error::CacheMismatch(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.parameters().len()];
        let mut slot = grads.len();
        let mut g = grad_logits.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            match (layer, cache) {
                (Layer::Conv(p), LayerCache::Conv(cc, rc)) => {
                    let gr = relu_backward(&g, rc)?;
                    let cg = crate::layers::conv_backward_partial(&gr, cc, p, i != 0)?;
                    slot -= 2;
                    grads[slot] = Some(cg.kernel);
                    grads[slot + 1] = Some(cg.bias);
                    match cg.input {
                        Some(gi) => g = gi,
                        None => break,
                    }
                }
                (Layer::MaxPool(_), LayerCache::MaxPool(pc)) => g = maxpool_backward(&g, pc)?,
                (Layer::Flatten, LayerCache::Flatten(shape)) => g = g.reshape(shape)?,
                (Layer::Dense { params, .. }, LayerCache::Dense(dc, rc, doc)) => {
                    if let Some(doc) = doc {
                        g = dropout_backward(&g, doc)?;
                    }
                    if let Some(rc) = rc {
                        g = relu_backward(&g, rc)?;
                    }
                    let dg = dense_backward(&g, dc, params)?;
                    slot -= 2;
                    grads[slot] = Some(dg.weights);
                    grads[slot + 1] = Some(dg.bias);
                    g = dg.input;
                }
                _ => {
                    return Err(Error::CacheMismatch(format!(
                        "layer {i}: cache of the wrong kind"
                    )))
                }
            }
        }
        grads
            .into_iter()
            .map(|g| g.ok_or_else(|| Error::CacheMismatch("missing gradient".into())))
            .collect()
    }

    /// Data loss and parameter gradients for one labelled image. The mode
    /// must be `Train` so caches are kept; pass a zero dropout rate for a
    /// deterministic pass.
    pub fn loss_and_grads(
        &self,
        image: &Tensor<T>,
        class: usize,
        mode: ForwardMode<'_>,
    ) -> Result<(T, Vec<Tensor<T>>, Tensor<T>)> {
        let pass = self.forward(image, mode)?;
        let caches = pass
            .caches
            .ok_or_else(|| Error::CacheMismatch("gradients need a training-mode pass".into()))?;
        let head = softmax_xent(&pass.logits, class)?;
        let grads = self.backward(&caches, &head.grad_logits)?;
        Ok((head.loss, grads, head.probs))
    }

    /// Class probabilities at inference.
    pub fn predict(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(softmax(&self.forward(image, ForwardMode::Infer)?.logits))
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict_class(&self, image: &Tensor<T>) -> Result<usize> {
        Ok(argmax(self.predict(image)?.data()))
    }
}

/// Index of the largest value, first one on ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl core::fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match *self {
            LayerSpec::Conv {
                filters,
                kernel,
                stride,
            } => write!(f, "conv {filters}@{kernel}x{kernel}/{stride}"),
            LayerSpec::MaxPool { window, stride } => {
                write!(f, "maxpool {window}x{window}/{stride}")
            }
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Dense {
                units,
                dropout: true,
            } => write!(f, "dense {units} +dropout"),
            LayerSpec::Dense {
                units,
                dropout: false,
            } => write!(f, "dense {units}"),
        }
    }
}

impl ModelConfig {
    /// One-line summary such as `100px conv 16@2x2/1 > maxpool 2x2/2 > ... > dense 3`.
    pub fn summary(&self) -> String {
        let mut s = format!("{}px", self.input_size);
        for l in &self.layers {
            s.push_str(" > ");
            s.push_str(&l.to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, relative_error};

    #[test]
    fn canonical_topology() {
        let c = ModelConfig::canonical(3).unwrap();
        assert_eq!(c.input_size, 300);
        assert_eq!(c.layers.len() + 1, 9);
        assert_eq!(
            c.layers[0],
            LayerSpec::Conv {
                filters: 16,
                kernel: 2,
                stride: 1
            }
        );
        assert_eq!(
            c.layers[1],
            LayerSpec::MaxPool {
                window: 2,
                stride: 2
            }
        );
        assert_eq!(
            c.layers[2],
            LayerSpec::Conv {
                filters: 64,
                kernel: 3,
                stride: 1
            }
        );
        assert_eq!(
            c.layers[7],
            LayerSpec::Dense {
                units: 3,
                dropout: false
            }
        );
        let c2 = ModelConfig::canonical(2).unwrap();
        assert_eq!(
            c2.layers[7],
            LayerSpec::Dense {
                units: 2,
                dropout: false
            }
        );
        assert_eq!(ModelConfig::canonical(4), Err(Error::InvalidClasses(4)));
        c.check_search_bounds().unwrap();
    }

    #[test]
    fn canonical_shape_chain() {
        let chain = ModelConfig::canonical(3).unwrap().shape_chain().unwrap();
        assert_eq!(
            chain[..6],
            [
                StageShape::Spatial([300, 300, 1]),
                StageShape::Spatial([299, 299, 16]),
                StageShape::Spatial([149, 149, 16]),
                StageShape::Spatial([147, 147, 64]),
                StageShape::Spatial([73, 73, 64]),
                StageShape::Flat(341_056),
            ]
        );
    }

    #[test]
    fn parameter_counts() {
        let c = ModelConfig::canonical(3).unwrap();
        let per_tensor: Vec<usize> = c
            .param_specs()
            .unwrap()
            .iter()
            .map(|p| p.shape.iter().product())
            .collect();
        assert_eq!(
            per_tensor,
            vec![64, 16, 9216, 64, 10_913_792, 32, 1024, 32, 96, 3]
        );
        assert_eq!(c.param_count().unwrap(), 10_924_339);
        let c2 = ModelConfig::canonical(2).unwrap();
        assert_eq!(c.param_count().unwrap() - c2.param_count().unwrap(), 33);
    }

    #[test]
    fn dense_two_to_two_counts_six() {
        let cfg = ModelConfig {
            input_size: 2,
            layers: vec![
                LayerSpec::MaxPool {
                    window: 2,
                    stride: 1,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 2,
                    dropout: false,
                },
                LayerSpec::Dense {
                    units: 2,
                    dropout: false,
                },
            ],
            num_classes: 2,
            seed: 0,
            sharpen: false,
        };
        let specs = cfg.param_specs().unwrap();
        assert_eq!(specs[2].shape, vec![2, 2]);
        assert_eq!(
            specs[2].shape.iter().product::<usize>() + specs[3].shape[0],
            6
        );
    }

    #[test]
    fn invalid_chains() {
        let mut c = ModelConfig::canonical_at(10, 3).unwrap();
        c.input_size = 3;
        assert!(matches!(c.shape_chain(), Err(Error::Topology(_))));
        let mut c = ModelConfig::canonical(3).unwrap();
        c.layers.remove(4);
        assert!(matches!(c.shape_chain(), Err(Error::Topology(_))));
        let mut c = ModelConfig::canonical(3).unwrap();
        c.num_classes = 2;
        assert!(matches!(c.shape_chain(), Err(Error::Topology(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut c = ModelConfig::canonical_at(120, 2).unwrap().with_seed(99);
        c.sharpen = true;
        let text = c.to_text();
        assert_eq!(ModelConfig::from_text(&text).unwrap(), c);
        assert!(ModelConfig::from_text("input_size=abc\n").is_err());
        assert!(ModelConfig::from_text(&text.replace("layer=flatten", "layer=pancake")).is_err());
    }

    #[test]
    fn build_is_deterministic_with_zero_biases() {
        let c = ModelConfig::canonical_at(40, 3).unwrap().with_seed(1);
        let a = build_model::<f32>(&c).unwrap();
        let b = build_model::<f32>(&c).unwrap();
        assert_eq!(a, b);
        for (name, t) in a.parameters() {
            if name.ends_with(".bias") {
                assert!(t.data().iter().all(|v| *v == 0.0));
            }
        }
        let bound = (6.0f64 / (4.0 * 1.0 + 4.0 * 16.0)).sqrt() as f32;
        let k = a.parameters()[0].1;
        assert!(k.data().iter().all(|v| v.abs() <= bound));
        assert!(k.max_abs() > bound * 0.8);
        let other = build_model::<f32>(&c.clone().with_seed(2)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn built_tensors_match_param_count() {
        for n in [2, 3] {
            let c = ModelConfig::canonical_at(64, n).unwrap();
            assert_eq!(
                build_model::<f32>(&c).unwrap().param_count(),
                c.param_count().unwrap()
            );
        }
    }

    #[test]
    fn forward_shapes_and_inference_determinism() {
        let c = ModelConfig::canonical_at(32, 3).unwrap().with_seed(3);
        let m = build_model::<f32>(&c).unwrap();
        let mut rng = Prng::new(1);
        let img = Tensor::from_vec(
            &[32, 32, 1],
            (0..1024).map(|_| rng.next_f64() as f32).collect(),
        )
        .unwrap();
        let a = m.forward(&img, ForwardMode::Infer).unwrap();
        let b = m.forward(&img, ForwardMode::Infer).unwrap();
        assert_eq!(a.logits.shape(), &[3]);
        assert!(a.logits.all_finite());
        assert_eq!(a.logits, b.logits);
        assert!(a.caches.is_none());
        assert!(m
            .forward(&Tensor::zeros(&[31, 32, 1]).unwrap(), ForwardMode::Infer)
            .is_err());
    }

    /// Whole-network check: total loss (cross-entropy plus L2 on weights)
    /// against finite differences over every parameter, dropout disabled.
    #[test]
    fn whole_model_gradient() {
        let cfg = ModelConfig {
            input_size: 10,
            layers: vec![
                LayerSpec::Conv {
                    filters: 3,
                    kernel: 3,
                    stride: 1,
                },
                LayerSpec::MaxPool {
                    window: 2,
                    stride: 2,
                },
                LayerSpec::Conv {
                    filters: 4,
                    kernel: 2,
                    stride: 1,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 5,
                    dropout: true,
                },
                LayerSpec::Dense {
                    units: 3,
                    dropout: false,
                },
            ],
            num_classes: 3,
            seed: 17,
            sharpen: false,
        };
        let model = build_model::<f64>(&cfg).unwrap();
        let mut rng = Prng::new(5);
        let img =
            Tensor::from_vec(&[10, 10, 1], (0..100).map(|_| rng.next_f64()).collect()).unwrap();
        let lambda = 0.01;
        let total = |m: &Model<f64>| -> f64 {
            let logits = m.forward(&img, ForwardMode::Infer).unwrap().logits;
            let mut loss = softmax_xent(&logits, 2).unwrap().loss;
            for ((_, t), w) in m.parameters().iter().zip(m.weight_mask()) {
                if w {
                    loss += crate::optim::l2_apply(*t, lambda).0;
                }
            }
            loss
        };
        let mut dummy = Prng::new(0);
        let (_, mut grads, _) = model
            .loss_and_grads(
                &img,
                2,
                ForwardMode::Train {
                    dropout_rate: 0.0,
                    rng: &mut dummy,
                },
            )
            .unwrap();
        for ((g, (_, t)), w) in grads
            .iter_mut()
            .zip(model.parameters())
            .zip(model.weight_mask())
        {
            if w {
                crate::optim::l2_accumulate(t, lambda, g);
            }
        }
        let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
        for (k, name) in names.iter().enumerate() {
            let base = model.parameters()[k].1.clone();
            let num = finite_diff_grad(
                |t| {
                    let mut m = model.clone();
                    *m.parameters_mut()[k].1 = t.clone();
                    total(&m)
                },
                &base,
                1e-5,
            )
            .unwrap();
            let err = relative_error(grads[k].data(), num.data());
            assert!(err < 1e-3, "{name}: {err}");
        }
    }
}
