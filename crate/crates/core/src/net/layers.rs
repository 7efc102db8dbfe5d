//! Layer primitives on `[channels, height, width]` tensors with exact
//! analytic backward passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv3x3 { in_ch: usize, out_ch: usize },
    Conv1x1 { in_ch: usize, out_ch: usize },
    Relu,
    Sigmoid,
    MaxPool2,
    AvgPool2s2,
    UpsampleNearest2,
    ConcatSkip,
}

/// Weights `[out, in, k, k]` and biases `[out]` of a convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weight: Grid<T>,
    pub bias: Grid<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn zeros(in_ch: usize, out_ch: usize, ksize: usize) -> Self {
        Self {
            weight: Grid::zeros(&[out_ch, in_ch, ksize, ksize]),
            bias: Grid::zeros(&[out_ch]),
        }
    }

    pub fn in_ch(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_ch(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn ksize(&self) -> usize {
        self.weight.shape()[2]
    }
}

/// Whatever a layer needs to run its backward pass.
#[derive(Clone, Debug)]
pub enum LayerCache<T> {
    /// Column matrix `[in * k * k, h * w]` (for 1x1 this is the input).
    Conv { cols: Vec<T>, in_shape: [usize; 3] },
    /// Output of the activation.
    Activation(Grid<T>),
    MaxPool { argmax: Vec<u32>, in_shape: [usize; 3] },
    Shape([usize; 3]),
    Concat { first_ch: usize },
}

fn chw<T: Scalar>(g: &Grid<T>, what: &str) -> Result<[usize; 3]> {
    match *g.shape() {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(Error::mismatch(format!("{what} expects [c, h, w]"), &[0, 0, 0], g.shape())),
    }
}

fn im2col3<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut cols = vec![T::ZERO; c * 9 * hw];
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                let dy = ky as isize - 1;
                let dx = kx as isize - 1;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    let sx0 = (x0 as isize + dx) as usize;
                    dst[x0..x1].copy_from_slice(&src[sx0..sx0 + (x1 - x0)]);
                }
            }
        }
    }
    cols
}

fn col2im3<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut x = vec![T::ZERO; c * hw];
    for ch in 0..c {
        let plane = &mut x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                let dy = ky as isize - 1;
                let dx = kx as isize - 1;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    let sx0 = (x0 as isize + dx) as usize;
                    for (d, &s) in dst[sx0..sx0 + (x1 - x0)].iter_mut().zip(&src[x0..x1]) {
                        *d += s;
                    }
                }
            }
        }
    }
    x
}

/// Stride-1 convolution with same padding (`ksize` 1 or 3).
pub fn conv_forward<T: Scalar>(x: &Grid<T>, p: &ConvParams<T>) -> Result<(Grid<T>, LayerCache<T>)> {
    let [c, h, w] = chw(x, "conv")?;
    if c != p.in_ch() {
        return Err(Error::mismatch("conv input channels", &[p.in_ch()], &[c]));
    }
    let k = p.ksize();
    let cols = match k {
        1 => x.data().to_vec(),
        3 => im2col3(x.data(), c, h, w),
        _ => return Err(Error::InvalidArgument(format!("unsupported kernel size {k}"))),
    };
    let (oc, hw) = (p.out_ch(), h * w);
    let mut out = vec![T::ZERO; oc * hw];
    for (o, b) in p.bias.data().iter().enumerate() {
        out[o * hw..(o + 1) * hw].fill(*b);
    }
    T::gemm(oc, c * k * k, hw, T::ONE, p.weight.data(), false, &cols, false, T::ONE, &mut out);
    Ok((
        Grid::new(vec![oc, h, w], out)?,
        LayerCache::Conv {
            cols,
            in_shape: [c, h, w],
        },
    ))
}

/// Returns `(grad_input, grad_params)`; the input gradient is skipped when
/// `need_input` is false.
pub fn conv_backward<T: Scalar>(
    cache: &LayerCache<T>,
    grad_out: &Grid<T>,
    p: &ConvParams<T>,
    need_input: bool,
) -> Result<(Option<Grid<T>>, ConvParams<T>)> {
    let LayerCache::Conv { cols, in_shape } = cache else {
        return Err(Error::InvalidArgument("conv backward needs a conv cache".into()));
    };
    let [c, h, w] = *in_shape;
    let (oc, k, hw) = (p.out_ch(), p.ksize(), h * w);
    if grad_out.shape() != [oc, h, w] {
        return Err(Error::mismatch("conv grad", &[oc, h, w], grad_out.shape()));
    }
    let ck = c * k * k;
    let g = grad_out.data();
    let mut gw = vec![T::ZERO; oc * ck];
    T::gemm(oc, hw, ck, T::ONE, g, false, cols, true, T::ZERO, &mut gw);
    let gb: Vec<T> = (0..oc).map(|o| g[o * hw..(o + 1) * hw].iter().copied().sum()).collect();
    let grads = ConvParams {
        weight: Grid::new(p.weight.shape().to_vec(), gw)?,
        bias: Grid::new(vec![oc], gb)?,
    };
    if !need_input {
        return Ok((None, grads));
    }
    let mut gcols = vec![T::ZERO; ck * hw];
    T::gemm(ck, oc, hw, T::ONE, p.weight.data(), true, g, false, T::ZERO, &mut gcols);
    let gx = if k == 1 { gcols } else { col2im3(&gcols, c, h, w) };
    Ok((Some(Grid::new(vec![c, h, w], gx)?), grads))
}

pub fn relu_forward<T: Scalar>(x: &Grid<T>) -> (Grid<T>, LayerCache<T>) {
    let y = x.map(|v| if v > T::ZERO { v } else { T::ZERO });
    (y.clone(), LayerCache::Activation(y))
}

pub fn relu_backward<T: Scalar>(cache: &LayerCache<T>, grad_out: &Grid<T>) -> Result<Grid<T>> {
    let LayerCache::Activation(y) = cache else {
        return Err(Error::InvalidArgument("relu backward needs its output".into()));
    };
    y.zip_map(grad_out, |v, g| if v > T::ZERO { g } else { T::ZERO })
}

pub fn sigmoid_forward<T: Scalar>(x: &Grid<T>) -> (Grid<T>, LayerCache<T>) {
    let y = x.map(|v| T::ONE / (T::ONE + (-v).exp()));
    (y.clone(), LayerCache::Activation(y))
}

pub fn sigmoid_backward<T: Scalar>(cache: &LayerCache<T>, grad_out: &Grid<T>) -> Result<Grid<T>> {
    let LayerCache::Activation(y) = cache else {
        return Err(Error::InvalidArgument("sigmoid backward needs its output".into()));
    };
    y.zip_map(grad_out, |v, g| g * v * (T::ONE - v))
}

fn even_chw<T: Scalar>(x: &Grid<T>, what: &str) -> Result<[usize; 3]> {
    let [c, h, w] = chw(x, what)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::mismatch(format!("{what} needs even extent"), &[c, h + h % 2, w + w % 2], x.shape()));
    }
    Ok([c, h, w])
}

pub fn maxpool2_forward<T: Scalar>(x: &Grid<T>) -> Result<(Grid<T>, LayerCache<T>)> {
    let [c, h, w] = even_chw(x, "maxpool2")?;
    let (oh, ow) = (h / 2, w / 2);
    let src = x.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for r in 0..oh {
            for col in 0..ow {
                let base = ch * h * w + 2 * r * w + 2 * col;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                out.push(src[best]);
                argmax.push(best as u32);
            }
        }
    }
    Ok((
        Grid::new(vec![c, oh, ow], out)?,
        LayerCache::MaxPool {
            argmax,
            in_shape: [c, h, w],
        },
    ))
}

pub fn maxpool2_backward<T: Scalar>(cache: &LayerCache<T>, grad_out: &Grid<T>) -> Result<Grid<T>> {
    let LayerCache::MaxPool { argmax, in_shape } = cache else {
        return Err(Error::InvalidArgument("maxpool backward needs argmax".into()));
    };
    if grad_out.len() != argmax.len() {
        return Err(Error::mismatch("maxpool grad", &[argmax.len()], &[grad_out.len()]));
    }
    let mut gx = vec![T::ZERO; in_shape.iter().product()];
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        gx[i as usize] += g;
    }
    Grid::new(in_shape.to_vec(), gx)
}

pub fn avgpool2_forward<T: Scalar>(x: &Grid<T>) -> Result<(Grid<T>, LayerCache<T>)> {
    let [c, h, w] = even_chw(x, "avgpool2")?;
    let quarter = T::from_f64(0.25);
    let summed = crate::grid::block_sum(x, 2)?;
    Ok((summed.map(|v| v * quarter), LayerCache::Shape([c, h, w])))
}

pub fn avgpool2_backward<T: Scalar>(cache: &LayerCache<T>, grad_out: &Grid<T>) -> Result<Grid<T>> {
    let LayerCache::Shape(in_shape) = cache else {
        return Err(Error::InvalidArgument("avgpool backward needs its input shape".into()));
    };
    let quarter = T::from_f64(0.25);
    Ok(upsample2(grad_out, *in_shape)?.map(|v| v * quarter))
}

fn upsample2<T: Scalar>(x: &Grid<T>, out_shape: [usize; 3]) -> Result<Grid<T>> {
    let [c, h, w] = out_shape;
    let [xc, xh, xw] = chw(x, "upsample")?;
    if [xc, 2 * xh, 2 * xw] != out_shape {
        return Err(Error::mismatch("upsample", &[c, h / 2, w / 2], x.shape()));
    }
    let src = x.data();
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for r in 0..h {
            let row = &src[ch * xh * xw + (r / 2) * xw..][..xw];
            for &v in row {
                out.push(v);
                out.push(v);
            }
        }
    }
    Grid::new(out_shape.to_vec(), out)
}

pub fn upsample_nearest2_forward<T: Scalar>(x: &Grid<T>) -> Result<(Grid<T>, LayerCache<T>)> {
    let [c, h, w] = chw(x, "upsample")?;
    Ok((upsample2(x, [c, 2 * h, 2 * w])?, LayerCache::Shape([c, h, w])))
}

pub fn upsample_nearest2_backward<T: Scalar>(cache: &LayerCache<T>, grad_out: &Grid<T>) -> Result<Grid<T>> {
    let LayerCache::Shape(in_shape) = cache else {
        return Err(Error::InvalidArgument("upsample backward needs its input shape".into()));
    };
    let g = crate::grid::block_sum(grad_out, 2)?;
    if g.shape() != in_shape {
        return Err(Error::mismatch("upsample grad", in_shape, g.shape()));
    }
    Ok(g)
}

/// Concatenates along channels.
pub fn concat_forward<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> Result<(Grid<T>, LayerCache<T>)> {
    let [ca, ha, wa] = chw(a, "concat")?;
    let [cb, hb, wb] = chw(b, "concat")?;
    if (ha, wa) != (hb, wb) {
        return Err(Error::mismatch("concat skip", &[cb, ha, wa], b.shape()));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok((
        Grid::new(vec![ca + cb, ha, wa], data)?,
        LayerCache::Concat { first_ch: ca },
    ))
}

pub fn concat_backward<T: Scalar>(cache: &LayerCache<T>, grad_out: &Grid<T>) -> Result<(Grid<T>, Grid<T>)> {
    let LayerCache::Concat { first_ch } = cache else {
        return Err(Error::InvalidArgument("concat backward needs the split point".into()));
    };
    let [c, h, w] = chw(grad_out, "concat grad")?;
    let split = first_ch * h * w;
    Ok((
        Grid::new(vec![*first_ch, h, w], grad_out.data()[..split].to_vec())?,
        Grid::new(vec![c - first_ch, h, w], grad_out.data()[split..].to_vec())?,
    ))
}

impl LayerKind {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv3x3 { .. } | LayerKind::Conv1x1 { .. })
    }

    /// Single entry point over every layer kind; `concat_skip` takes two
    /// inputs, everything else one.
    pub fn forward<T: Scalar>(
        &self,
        inputs: &[&Grid<T>],
        params: Option<&ConvParams<T>>,
    ) -> Result<(Grid<T>, LayerCache<T>)> {
        let need = if *self == LayerKind::ConcatSkip { 2 } else { 1 };
        if inputs.len() != need {
            return Err(Error::InvalidArgument(format!(
                "{self:?} takes {need} input(s), got {}",
                inputs.len()
            )));
        }
        let x = inputs[0];
        match *self {
            LayerKind::Conv3x3 { in_ch, out_ch } | LayerKind::Conv1x1 { in_ch, out_ch } => {
                let p = params.ok_or_else(|| Error::InvalidArgument("convolution without parameters".into()))?;
                let k = if matches!(self, LayerKind::Conv3x3 { .. }) { 3 } else { 1 };
                if p.weight.shape() != [out_ch, in_ch, k, k] {
                    return Err(Error::mismatch("conv weight", &[out_ch, in_ch, k, k], p.weight.shape()));
                }
                conv_forward(x, p)
            }
            LayerKind::Relu => Ok(relu_forward(x)),
            LayerKind::Sigmoid => Ok(sigmoid_forward(x)),
            LayerKind::MaxPool2 => maxpool2_forward(x),
            LayerKind::AvgPool2s2 => avgpool2_forward(x),
            LayerKind::UpsampleNearest2 => upsample_nearest2_forward(x),
            LayerKind::ConcatSkip => concat_forward(x, inputs[1]),
        }
    }

    /// Returns input gradients (two for `concat_skip`) and parameter
    /// gradients for convolutions.
    pub fn backward<T: Scalar>(
        &self,
        cache: &LayerCache<T>,
        grad_out: &Grid<T>,
        params: Option<&ConvParams<T>>,
    ) -> Result<(Vec<Grid<T>>, Option<ConvParams<T>>)> {
        Ok(match *self {
            LayerKind::Conv3x3 { .. } | LayerKind::Conv1x1 { .. } => {
                let p = params.ok_or_else(|| Error::InvalidArgument("convolution without parameters".into()))?;
                let (gx, gp) = conv_backward(cache, grad_out, p, true)?;
                (vec![gx.expect("input gradient requested")], Some(gp))
            }
            LayerKind::Relu => (vec![relu_backward(cache, grad_out)?], None),
            LayerKind::Sigmoid => (vec![sigmoid_backward(cache, grad_out)?], None),
            LayerKind::MaxPool2 => (vec![maxpool2_backward(cache, grad_out)?], None),
            LayerKind::AvgPool2s2 => (vec![avgpool2_backward(cache, grad_out)?], None),
            LayerKind::UpsampleNearest2 => (vec![upsample_nearest2_backward(cache, grad_out)?], None),
            LayerKind::ConcatSkip => {
                let (a, b) = concat_backward(cache, grad_out)?;
                (vec![a, b], None)
            }
        })
    }
}
