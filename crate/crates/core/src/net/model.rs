use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{
    avgpool2_backward, avgpool2_forward, concat_backward, concat_forward, conv_backward,
    conv_forward, maxpool2_backward, maxpool2_forward, relu_backward, relu_forward,
    sigmoid_backward, sigmoid_forward, upsample_nearest2_backward, upsample_nearest2_forward,
    ConvParams, LayerCache,
};
use crate::error::{Error, Result};
use crate::grid::{CountMap, Grid, Scalar};
use crate::partition::IntervalPartition;
use crate::sdc::DivisionMask;

/// Input pixels per level-0 prediction cell.
pub const OUTPUT_STRIDE: usize = 64;
const ENCODER_BLOCKS: usize = 5;

/// Architecture of the encoder-decoder counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub in_channels: usize,
    /// One width per encoder block (exactly five).
    pub widths: Vec<usize>,
    pub decoder_width: usize,
    pub head_width: usize,
    /// Classifier outputs: number of classes, or 1 for a regression head.
    pub head_outputs: usize,
    /// Number of divisions `N` (0 disables the decoder and the decider).
    pub stages: usize,
}

impl NetworkSpec {
    pub fn toy(head_outputs: usize, stages: usize) -> Self {
        Self {
            in_channels: 1,
            widths: vec![16, 32, 64, 64, 64],
            decoder_width: 64,
            head_width: 64,
            head_outputs,
            stages,
        }
    }

    /// Small enough for exhaustive finite-difference checks.
    pub fn tiny(head_outputs: usize, stages: usize) -> Self {
        Self {
            in_channels: 1,
            widths: vec![2; ENCODER_BLOCKS],
            decoder_width: 2,
            head_width: 2,
            head_outputs,
            stages,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.widths.len() != ENCODER_BLOCKS {
            return bad(format!("expected {ENCODER_BLOCKS} encoder widths, got {}", self.widths.len()));
        }
        if self.in_channels == 0
            || self.widths.iter().any(|&w| w == 0)
            || self.decoder_width == 0
            || self.head_width == 0
            || self.head_outputs == 0
        {
            return bad("zero channel width".into());
        }
        if self.stages > ENCODER_BLOCKS - 1 {
            return bad(format!("at most {} stages, got {}", ENCODER_BLOCKS - 1, self.stages));
        }
        Ok(())
    }

    /// Cell size of level `i` predictions.
    pub fn cell_px(level: usize) -> usize {
        OUTPUT_STRIDE >> level
    }

    /// Encoder block whose pooled output is fused at decoder stage `i`.
    fn skip_block(stage: usize) -> usize {
        ENCODER_BLOCKS - 1 - stage
    }

    /// Width of level `i` features.
    fn feature_width(&self, level: usize) -> usize {
        if level == 0 {
            self.widths[ENCODER_BLOCKS - 1]
        } else {
            self.decoder_width
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<T> {
    pub fc1: ConvParams<T>,
    pub fc2: ConvParams<T>,
}

/// All learnable tensors, structured like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState<T> {
    pub encoder: Vec<[ConvParams<T>; 2]>,
    /// Fusion convolution of decoder stages `1..=N`.
    pub decoder: Vec<ConvParams<T>>,
    pub classifier: HeadParams<T>,
    pub decider: Option<HeadParams<T>>,
}

impl<T: Scalar> NetworkState<T> {
    /// Zero-filled state shaped by `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut encoder = Vec::with_capacity(ENCODER_BLOCKS);
        let mut cin = spec.in_channels;
        for &w in &spec.widths {
            encoder.push([ConvParams::zeros(cin, w, 3), ConvParams::zeros(w, w, 3)]);
            cin = w;
        }
        let mut decoder = Vec::with_capacity(spec.stages);
        for stage in 1..=spec.stages {
            let cin = spec.feature_width(stage - 1) + spec.widths[NetworkSpec::skip_block(stage)];
            decoder.push(ConvParams::zeros(cin, spec.decoder_width, 3));
        }
        // the classifier is shared by every level, so all levels must agree
        if spec.stages > 0 && spec.feature_width(0) != spec.decoder_width {
            return Err(Error::Config(format!(
                "shared classifier needs decoder width {} to equal the last encoder width {}",
                spec.decoder_width,
                spec.feature_width(0)
            )));
        }
        let fw = spec.feature_width(0);
        let classifier = HeadParams {
            fc1: ConvParams::zeros(fw, spec.head_width, 1),
            fc2: ConvParams::zeros(spec.head_width, spec.head_outputs, 1),
        };
        let decider = (spec.stages > 0).then(|| HeadParams {
            fc1: ConvParams::zeros(fw, spec.head_width, 1),
            fc2: ConvParams::zeros(spec.head_width, 1, 1),
        });
        Ok(Self {
            encoder,
            decoder,
            classifier,
            decider,
        })
    }

    /// Every convolution with its path, in canonical order.
    pub fn layers(&self) -> Vec<(String, &ConvParams<T>)> {
        let mut out = Vec::new();
        for (b, [c1, c2]) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{b}.conv1"), c1));
            out.push((format!("encoder.{b}.conv2"), c2));
        }
        for (i, c) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{}.fuse", i + 1), c));
        }
        out.push(("classifier.fc1".into(), &self.classifier.fc1));
        out.push(("classifier.fc2".into(), &self.classifier.fc2));
        if let Some(d) = &self.decider {
            out.push(("decider.fc1".into(), &d.fc1));
            out.push(("decider.fc2".into(), &d.fc2));
        }
        out
    }

    pub fn layers_mut(&mut self) -> Vec<(String, &mut ConvParams<T>)> {
        let mut out = Vec::new();
        for (b, [c1, c2]) in self.encoder.iter_mut().enumerate() {
            out.push((format!("encoder.{b}.conv1"), c1));
            out.push((format!("encoder.{b}.conv2"), c2));
        }
        for (i, c) in self.decoder.iter_mut().enumerate() {
            out.push((format!("decoder.{}.fuse", i + 1), c));
        }
        out.push(("classifier.fc1".into(), &mut self.classifier.fc1));
        out.push(("classifier.fc2".into(), &mut self.classifier.fc2));
        if let Some(d) = &mut self.decider {
            out.push(("decider.fc1".into(), &mut d.fc1));
            out.push(("decider.fc2".into(), &mut d.fc2));
        }
        out
    }

    /// Named tensors (`<layer>.weight`, `<layer>.bias`) in canonical order.
    pub fn tensors(&self) -> Vec<(String, &Grid<T>)> {
        self.layers()
            .into_iter()
            .flat_map(|(name, p)| [(format!("{name}.weight"), &p.weight), (format!("{name}.bias"), &p.bias)])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Grid<T>)> {
        self.layers_mut()
            .into_iter()
            .flat_map(|(name, p)| {
                [
                    (format!("{name}.weight"), &mut p.weight),
                    (format!("{name}.bias"), &mut p.bias),
                ]
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.data().iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &NetworkState<T>, scale: T) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += scale * s;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> NetworkState<U> {
        let conv = |p: &ConvParams<T>| ConvParams {
            weight: p.weight.cast(),
            bias: p.bias.cast(),
        };
        let head = |h: &HeadParams<T>| HeadParams {
            fc1: conv(&h.fc1),
            fc2: conv(&h.fc2),
        };
        NetworkState {
            encoder: self.encoder.iter().map(|[a, b]| [conv(a), conv(b)]).collect(),
            decoder: self.decoder.iter().map(conv).collect(),
            classifier: head(&self.classifier),
            decider: self.decider.as_ref().map(head),
        }
    }
}

/// How weights are drawn at initialization. Biases always start at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitScheme {
    /// Every weight `~ N(0, std^2)`.
    Gaussian { std: f64 },
    /// Encoder weights `~ N(0, 2 / fan_in)`, all other weights `~ N(0, std^2)`.
    /// Stands in for a pretrained encoder when training from scratch.
    HeEncoder { std: f64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Gaussian { std: 0.01 }
    }
}

/// Weights `~ N(0, 0.01^2)`, biases zero, deterministic in `seed`.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<NetworkState<T>> {
    init_params_with(spec, seed, &InitScheme::default())
}

pub fn init_params_with<T: Scalar>(spec: &NetworkSpec, seed: u64, scheme: &InitScheme) -> Result<NetworkState<T>> {
    let mut state = NetworkState::<T>::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, layer) in state.layers_mut() {
        let fan_in = layer.in_ch() * layer.ksize() * layer.ksize();
        let std = match *scheme {
            InitScheme::Gaussian { std } => std,
            InitScheme::HeEncoder { std } => {
                if name.starts_with("encoder.") {
                    (2.0 / fan_in as f64).sqrt()
                } else {
                    std
                }
            }
        };
        let normal = Normal::new(0.0, std).map_err(|e| Error::Config(format!("init std {std}: {e}")))?;
        for v in layer.weight.data_mut() {
            *v = T::from_f64(normal.sample(&mut rng));
        }
    }
    Ok(state)
}

struct HeadCache<T> {
    fc1: LayerCache<T>,
    relu: LayerCache<T>,
    fc2: LayerCache<T>,
}

struct LevelCache<T> {
    pool: LayerCache<T>,
    cls: HeadCache<T>,
    div: Option<(HeadCache<T>, LayerCache<T>)>,
}

struct BlockCache<T> {
    conv1: LayerCache<T>,
    relu1: LayerCache<T>,
    conv2: LayerCache<T>,
    relu2: LayerCache<T>,
    pool: LayerCache<T>,
}

struct StageCache<T> {
    up: LayerCache<T>,
    cat: LayerCache<T>,
    conv: LayerCache<T>,
    relu: LayerCache<T>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache<T> {
    blocks: Vec<BlockCache<T>>,
    stages: Vec<StageCache<T>>,
    levels: Vec<LevelCache<T>>,
}

pub struct ForwardOutputs<T> {
    /// Per level `i`, head outputs `[head_outputs, h_i, w_i]`.
    pub cls: Vec<Grid<T>>,
    /// Division masks `[h_i, w_i]` for levels `1..=N` (`w[0]` is `W_1`).
    pub w: Vec<Grid<T>>,
    pub cache: Option<ForwardCache<T>>,
}

impl<T: Scalar> ForwardOutputs<T> {
    pub fn levels(&self) -> usize {
        self.cls.len()
    }

    pub fn division_masks(&self) -> Result<Vec<DivisionMask>> {
        self.w
            .iter()
            .enumerate()
            .map(|(i, g)| DivisionMask::new(g.cast(), NetworkSpec::cell_px(i + 1)))
            .collect()
    }
}

/// Upstream gradients for the network outputs; `None` means no dependence.
pub struct OutputGrads<T> {
    pub cls: Vec<Option<Grid<T>>>,
    pub w: Vec<Option<Grid<T>>>,
}

fn in_layer<R>(r: Result<R>, path: &str) -> Result<R> {
    r.map_err(|e| match e {
        Error::ShapeMismatch {
            context,
            expected,
            found,
        } => Error::ShapeMismatch {
            context: format!("{path}: {context}"),
            expected,
            found,
        },
        other => other,
    })
}

fn head_forward<T: Scalar>(
    x: &Grid<T>,
    h: &HeadParams<T>,
    path: &str,
) -> Result<(Grid<T>, HeadCache<T>)> {
    let (a, fc1) = in_layer(conv_forward(x, &h.fc1), &format!("{path}.fc1"))?;
    let (r, relu) = relu_forward(&a);
    let (y, fc2) = in_layer(conv_forward(&r, &h.fc2), &format!("{path}.fc2"))?;
    Ok((y, HeadCache { fc1, relu, fc2 }))
}

fn head_backward<T: Scalar>(
    cache: &HeadCache<T>,
    g: &Grid<T>,
    h: &HeadParams<T>,
    grads: &mut HeadParams<T>,
) -> Result<Grid<T>> {
    let (gr, g2) = conv_backward(&cache.fc2, g, &h.fc2, true)?;
    accumulate(&mut grads.fc2, &g2);
    let ga = relu_backward(&cache.relu, &gr.expect("requested"))?;
    let (gx, g1) = conv_backward(&cache.fc1, &ga, &h.fc1, true)?;
    accumulate(&mut grads.fc1, &g1);
    Ok(gx.expect("requested"))
}

fn accumulate<T: Scalar>(dst: &mut ConvParams<T>, src: &ConvParams<T>) {
    for (d, &s) in dst.weight.data_mut().iter_mut().zip(src.weight.data()) {
        *d += s;
    }
    for (d, &s) in dst.bias.data_mut().iter_mut().zip(src.bias.data()) {
        *d += s;
    }
}

fn add_into<T: Scalar>(slot: &mut Option<Grid<T>>, g: Grid<T>) {
    match slot {
        Some(acc) => {
            for (d, &s) in acc.data_mut().iter_mut().zip(g.data()) {
                *d += s;
            }
        }
        None => *slot = Some(g),
    }
}

/// Runs the network on one `[in_channels, H, W]` image with `H` and `W`
/// multiples of 64. With `keep_cache` the activations for
/// [`backward`] are retained.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    state: &NetworkState<T>,
    image: &Grid<T>,
    keep_cache: bool,
) -> Result<ForwardOutputs<T>> {
    spec.validate()?;
    let shape = image.shape();
    if shape.len() != 3 || shape[0] != spec.in_channels {
        return Err(Error::mismatch("network input", &[spec.in_channels, 0, 0], shape));
    }
    let (h, w) = (shape[1], shape[2]);
    if h % OUTPUT_STRIDE != 0 || w % OUTPUT_STRIDE != 0 {
        return Err(Error::InvalidArgument(format!(
            "input {h}x{w} is not padded to a multiple of {OUTPUT_STRIDE}"
        )));
    }
    if state.decoder.len() != spec.stages || state.decider.is_some() != (spec.stages > 0) {
        return Err(Error::Config("network state does not match the NetworkSpec stage count".into()));
    }

    let mut blocks = Vec::new();
    let mut skips: Vec<Grid<T>> = Vec::with_capacity(ENCODER_BLOCKS);
    let mut x = image.clone();
    for (b, [c1, c2]) in state.encoder.iter().enumerate() {
        let (a1, conv1) = in_layer(conv_forward(&x, c1), &format!("encoder.{b}.conv1"))?;
        let (r1, relu1) = relu_forward(&a1);
        let (a2, conv2) = in_layer(conv_forward(&r1, c2), &format!("encoder.{b}.conv2"))?;
        let (r2, relu2) = relu_forward(&a2);
        let (p, pool) = maxpool2_forward(&r2)?;
        if keep_cache {
            blocks.push(BlockCache {
                conv1,
                relu1,
                conv2,
                relu2,
                pool,
            });
        }
        skips.push(p.clone());
        x = p;
    }

    let mut features = vec![x];
    let mut stages = Vec::new();
    for (i, fuse) in state.decoder.iter().enumerate() {
        let stage = i + 1;
        let (u, up) = upsample_nearest2_forward(features.last().expect("level 0"))?;
        let (c, cat) = in_layer(
            concat_forward(&u, &skips[NetworkSpec::skip_block(stage)]),
            &format!("decoder.{stage}.skip"),
        )?;
        let (a, conv) = in_layer(conv_forward(&c, fuse), &format!("decoder.{stage}.fuse"))?;
        let (f, relu) = relu_forward(&a);
        if keep_cache {
            stages.push(StageCache { up, cat, conv, relu });
        }
        features.push(f);
    }

    let mut cls = Vec::with_capacity(features.len());
    let mut masks = Vec::with_capacity(spec.stages);
    let mut levels = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let (pooled, pool) = avgpool2_forward(f)?;
        let (logits, cls_cache) = head_forward(&pooled, &state.classifier, "classifier")?;
        cls.push(logits);
        let div = if i > 0 {
            let decider = state.decider.as_ref().expect("checked above");
            let (z, dc) = head_forward(&pooled, decider, "decider")?;
            let (wv, sig) = sigmoid_forward(&z);
            let [_, mh, mw] = [wv.shape()[0], wv.shape()[1], wv.shape()[2]];
            masks.push(wv.reshape(vec![mh, mw])?);
            Some((dc, sig))
        } else {
            None
        };
        if keep_cache {
            levels.push(LevelCache {
                pool,
                cls: cls_cache,
                div,
            });
        }
    }

    Ok(ForwardOutputs {
        cls,
        w: masks,
        cache: keep_cache.then_some(ForwardCache {
            blocks,
            stages,
            levels,
        }),
    })
}

/// Exact parameter gradients given upstream output gradients.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    state: &NetworkState<T>,
    outputs: &ForwardOutputs<T>,
    grads_out: &OutputGrads<T>,
) -> Result<NetworkState<T>> {
    let cache = outputs
        .cache
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("forward pass ran without a cache".into()))?;
    let levels = spec.stages + 1;
    if grads_out.cls.len() != levels || grads_out.w.len() != spec.stages {
        return Err(Error::InvalidArgument("output gradient count does not match levels".into()));
    }
    let mut grads = NetworkState::<T>::zeros(spec)?;

    let mut grad_feat: Vec<Option<Grid<T>>> = (0..levels).map(|_| None).collect();
    for (i, lc) in cache.levels.iter().enumerate() {
        let mut g_pooled: Option<Grid<T>> = None;
        if let Some(g) = &grads_out.cls[i] {
            let gx = head_backward(&lc.cls, g, &state.classifier, &mut grads.classifier)?;
            add_into(&mut g_pooled, gx);
        }
        if i > 0 {
            if let (Some(g), Some((dc, sig))) = (&grads_out.w[i - 1], &lc.div) {
                let g3 = g.clone().reshape(vec![1, g.shape()[0], g.shape()[1]])?;
                let gz = sigmoid_backward(sig, &g3)?;
                let decider = state.decider.as_ref().expect("stages > 0");
                let gd = grads.decider.as_mut().expect("stages > 0");
                let gx = head_backward(dc, &gz, decider, gd)?;
                add_into(&mut g_pooled, gx);
            }
        }
        if let Some(gp) = g_pooled {
            grad_feat[i] = Some(avgpool2_backward(&lc.pool, &gp)?);
        }
    }

    let mut grad_skip: Vec<Option<Grid<T>>> = (0..ENCODER_BLOCKS).map(|_| None).collect();
    for stage in (1..=spec.stages).rev() {
        let Some(g) = grad_feat[stage].take() else {
            continue;
        };
        let sc = &cache.stages[stage - 1];
        let ga = relu_backward(&sc.relu, &g)?;
        let (gc, gp) = conv_backward(&sc.conv, &ga, &state.decoder[stage - 1], true)?;
        accumulate(&mut grads.decoder[stage - 1], &gp);
        let (gu, gs) = concat_backward(&sc.cat, &gc.expect("requested"))?;
        add_into(&mut grad_skip[NetworkSpec::skip_block(stage)], gs);
        let gprev = upsample_nearest2_backward(&sc.up, &gu)?;
        add_into(&mut grad_feat[stage - 1], gprev);
    }
    if let Some(g) = grad_feat[0].take() {
        add_into(&mut grad_skip[ENCODER_BLOCKS - 1], g);
    }

    let mut carry: Option<Grid<T>> = None;
    for b in (0..ENCODER_BLOCKS).rev() {
        if let Some(g) = grad_skip[b].take() {
            add_into(&mut carry, g);
        }
        let Some(g) = carry.take() else {
            continue;
        };
        let bc = &cache.blocks[b];
        let [c1, c2] = &state.encoder[b];
        let g = maxpool2_backward(&bc.pool, &g)?;
        let g = relu_backward(&bc.relu2, &g)?;
        let (g, gp2) = conv_backward(&bc.conv2, &g, c2, true)?;
        accumulate(&mut grads.encoder[b][1], &gp2);
        let g = relu_backward(&bc.relu1, &g.expect("requested"))?;
        let (g, gp1) = conv_backward(&bc.conv1, &g, c1, b > 0)?;
        accumulate(&mut grads.encoder[b][0], &gp1);
        carry = g;
    }
    Ok(grads)
}

/// Index of the largest logit per cell, lowest index on ties.
pub fn argmax_classes<T: Scalar>(logits: &Grid<T>) -> Vec<usize> {
    let (k, h, w) = (logits.shape()[0], logits.shape()[1], logits.shape()[2]);
    let hw = h * w;
    let d = logits.data();
    (0..hw)
        .map(|cell| {
            let mut best = 0;
            for c in 1..k {
                if d[c * hw + cell] > d[best * hw + cell] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Recovers `C_0..C_N` from classifier logits.
pub fn predict_counts<T: Scalar>(outputs: &ForwardOutputs<T>, p: &IntervalPartition) -> Result<Vec<CountMap>> {
    outputs
        .cls
        .iter()
        .enumerate()
        .map(|(i, logits)| {
            if logits.shape()[0] != p.num_classes() {
                return Err(Error::mismatch(
                    "classifier outputs vs partition classes",
                    &[p.num_classes()],
                    &[logits.shape()[0]],
                ));
            }
            let (h, w) = (logits.shape()[1], logits.shape()[2]);
            let counts = argmax_classes(logits)
                .into_iter()
                .map(|c| p.count_of(c))
                .collect::<Result<Vec<_>>>()?;
            CountMap::new(Grid::new(vec![h, w], counts)?, NetworkSpec::cell_px(i))
        })
        .collect()
}

/// Counts from a one-output regression head, clamped to `[0, clip]`.
pub fn regress_counts<T: Scalar>(outputs: &ForwardOutputs<T>, clip: Option<f64>) -> Result<Vec<CountMap>> {
    outputs
        .cls
        .iter()
        .enumerate()
        .map(|(i, y)| {
            if y.shape()[0] != 1 {
                return Err(Error::mismatch("regression head outputs", &[1], &[y.shape()[0]]));
            }
            let hi = clip.unwrap_or(f64::INFINITY);
            let (h, w) = (y.shape()[1], y.shape()[2]);
            let g = Grid::new(vec![h, w], y.data().iter().map(|v| v.to_f64().clamp(0.0, hi)).collect())?;
            CountMap::new(g, NetworkSpec::cell_px(i))
        })
        .collect()
}
