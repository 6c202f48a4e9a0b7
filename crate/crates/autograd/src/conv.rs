//! im2col convolution kernels and the fixed-stencil image operators.

use crate::scalar::matmul_acc;
use crate::Scalar;

/// Geometry of a 2D convolution with square zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Default for ConvGeom {
    fn default() -> Self {
        Self { stride: 1, padding: 0, dilation: 1 }
    }
}

impl ConvGeom {
    /// "Same" padding for an odd kernel at the given dilation.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        Self { stride: 1, padding: dilation * (kernel - 1) / 2, dilation }
    }

    pub fn strided(kernel: usize, stride: usize) -> Self {
        Self { stride, padding: (kernel - 1) / 2, dilation: 1 }
    }

    pub fn out_len(&self, len: usize, kernel: usize) -> Option<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + 2 * self.padding;
        if padded < span {
            return None;
        }
        Some((padded - span) / self.stride + 1)
    }

    fn is_pointwise(&self, kh: usize, kw: usize) -> bool {
        kh == 1 && kw == 1 && self.stride == 1 && self.padding == 0
    }
}

pub(crate) struct ConvDims {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvDims {
    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }
    fn hwo(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col<T: Scalar>(x: &[T], d: &ConvDims, g: &ConvGeom, col: &mut [T]) {
    let hwo = d.hwo();
    let (s, p, dil) = (g.stride as isize, g.padding as isize, g.dilation as isize);
    for c in 0..d.cin {
        let plane = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
        for i in 0..d.kh {
            for j in 0..d.kw {
                let row = &mut col[((c * d.kh + i) * d.kw + j) * hwo..][..hwo];
                let dy = i as isize * dil - p;
                let dx = j as isize * dil - p;
                for oy in 0..d.ho {
                    let iy = oy as isize * s + dy;
                    let out = &mut row[oy * d.wo..(oy + 1) * d.wo];
                    if iy < 0 || iy >= d.h as isize {
                        out.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    if s == 1 {
                        // contiguous run, zero outside [0, w)
                        let lo = (-dx).clamp(0, d.wo as isize) as usize;
                        let hi = (d.w as isize - dx).clamp(0, d.wo as isize) as usize;
                        out[..lo].iter_mut().for_each(|v| *v = T::zero());
                        if hi > lo {
                            let off = (lo as isize + dx) as usize;
                            out[lo..hi].copy_from_slice(&src[off..off + hi - lo]);
                        }
                        out[hi.max(lo)..].iter_mut().for_each(|v| *v = T::zero());
                    } else {
                        for (ox, o) in out.iter_mut().enumerate() {
                            let ix = ox as isize * s + dx;
                            *o = if ix >= 0 && ix < d.w as isize { src[ix as usize] } else { T::zero() };
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], d: &ConvDims, g: &ConvGeom, dx_out: &mut [T]) {
    let hwo = d.hwo();
    let (s, p, dil) = (g.stride as isize, g.padding as isize, g.dilation as isize);
    for c in 0..d.cin {
        let plane = &mut dx_out[c * d.h * d.w..(c + 1) * d.h * d.w];
        for i in 0..d.kh {
            for j in 0..d.kw {
                let row = &col[((c * d.kh + i) * d.kw + j) * hwo..][..hwo];
                let dy = i as isize * dil - p;
                let dx = j as isize * dil - p;
                for oy in 0..d.ho {
                    let iy = oy as isize * s + dy;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    let src = &row[oy * d.wo..(oy + 1) * d.wo];
                    if s == 1 {
                        let lo = (-dx).clamp(0, d.wo as isize) as usize;
                        let hi = (d.w as isize - dx).clamp(0, d.wo as isize) as usize;
                        if hi > lo {
                            let off = (lo as isize + dx) as usize;
                            for (t, &v) in dst[off..off + hi - lo].iter_mut().zip(&src[lo..hi]) {
                                *t += v;
                            }
                        }
                    } else {
                        for (ox, &v) in src.iter().enumerate() {
                            let ix = ox as isize * s + dx;
                            if ix >= 0 && ix < d.w as isize {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<T: Scalar>(
    x: &[T],
    w: &[T],
    b: Option<&[T]>,
    d: &ConvDims,
    g: &ConvGeom,
) -> Vec<T> {
    let (k, hwo) = (d.k(), d.hwo());
    let mut out = vec![T::zero(); d.n * d.cout * hwo];
    let pointwise = g.is_pointwise(d.kh, d.kw);
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); k * hwo] };
    for n in 0..d.n {
        let xn = &x[n * d.cin * d.h * d.w..(n + 1) * d.cin * d.h * d.w];
        let on = &mut out[n * d.cout * hwo..(n + 1) * d.cout * hwo];
        if let Some(b) = b {
            for (co, row) in on.chunks_mut(hwo).enumerate() {
                row.iter_mut().for_each(|v| *v = b[co]);
            }
        }
        let src = if pointwise {
            xn
        } else {
            im2col(xn, d, g, &mut col);
            &col
        };
        matmul_acc(d.cout, k, hwo, w, false, src, false, on, T::one());
    }
    out
}

/// Accumulates parameter gradients and (optionally) the input gradient.
pub(crate) fn conv2d_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    d: &ConvDims,
    g: &ConvGeom,
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let (k, hwo) = (d.k(), d.hwo());
    let pointwise = g.is_pointwise(d.kh, d.kw);
    if let Some(db) = db {
        for n in 0..d.n {
            let dyn_ = &dy[n * d.cout * hwo..(n + 1) * d.cout * hwo];
            for (co, row) in dyn_.chunks(hwo).enumerate() {
                db[co] += row.iter().copied().sum::<T>();
            }
        }
    }
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); k * hwo] };
    if let Some(dw) = dw {
        for n in 0..d.n {
            let xn = &x[n * d.cin * d.h * d.w..(n + 1) * d.cin * d.h * d.w];
            let dyn_ = &dy[n * d.cout * hwo..(n + 1) * d.cout * hwo];
            let src = if pointwise {
                xn
            } else {
                im2col(xn, d, g, &mut col);
                &col
            };
            // dW (cout×k) += dY (cout×hwo) · colᵀ (hwo×k)
            matmul_acc(d.cout, hwo, k, dyn_, false, src, true, dw, T::one());
        }
    }
    if let Some(dx) = dx {
        for n in 0..d.n {
            let dyn_ = &dy[n * d.cout * hwo..(n + 1) * d.cout * hwo];
            let dxn = &mut dx[n * d.cin * d.h * d.w..(n + 1) * d.cin * d.h * d.w];
            if pointwise {
                matmul_acc(k, d.cout, hwo, w, true, dyn_, false, dxn, T::one());
            } else {
                col.iter_mut().for_each(|v| *v = T::zero());
                matmul_acc(k, d.cout, hwo, w, true, dyn_, false, &mut col, T::zero());
                col2im(&col, d, g, dxn);
            }
        }
    }
}

/// Interpolation taps for ×2 bilinear upsampling of one axis
/// (half-pixel centers, edge clamped).
pub(crate) fn upsample_taps(len: usize) -> Vec<[(usize, f64); 2]> {
    (0..2 * len)
        .map(|o| {
            let i = o / 2;
            if o % 2 == 0 {
                if i == 0 {
                    [(0, 1.0), (0, 0.0)]
                } else {
                    [(i - 1, 0.25), (i, 0.75)]
                }
            } else if i + 1 == len {
                [(i, 1.0), (i, 0.0)]
            } else {
                [(i, 0.75), (i + 1, 0.25)]
            }
        })
        .collect()
}

pub(crate) fn upsample2_forward<T: Scalar>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let (ty, tx) = (upsample_taps(h), upsample_taps(w));
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); planes * h2 * w2];
    let mut tmp = vec![T::zero(); h * w2];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for (ox, taps) in tx.iter().enumerate() {
                tmp[y * w2 + ox] = T::from_f64(taps[0].1) * src[y * w + taps[0].0]
                    + T::from_f64(taps[1].1) * src[y * w + taps[1].0];
            }
        }
        let dst = &mut out[p * h2 * w2..(p + 1) * h2 * w2];
        for (oy, taps) in ty.iter().enumerate() {
            let (a, wa) = (taps[0].0, T::from_f64(taps[0].1));
            let (b, wb) = (taps[1].0, T::from_f64(taps[1].1));
            for ox in 0..w2 {
                dst[oy * w2 + ox] = wa * tmp[a * w2 + ox] + wb * tmp[b * w2 + ox];
            }
        }
    }
    out
}

pub(crate) fn upsample2_backward<T: Scalar>(
    dy: &[T],
    planes: usize,
    h: usize,
    w: usize,
    dx: &mut [T],
) {
    let (ty, tx) = (upsample_taps(h), upsample_taps(w));
    let (h2, w2) = (2 * h, 2 * w);
    let mut tmp = vec![T::zero(); h * w2];
    for p in 0..planes {
        tmp.iter_mut().for_each(|v| *v = T::zero());
        let g = &dy[p * h2 * w2..(p + 1) * h2 * w2];
        for (oy, taps) in ty.iter().enumerate() {
            for &(iy, wt) in taps {
                let wt = T::from_f64(wt);
                for ox in 0..w2 {
                    tmp[iy * w2 + ox] += wt * g[oy * w2 + ox];
                }
            }
        }
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for (ox, taps) in tx.iter().enumerate() {
                let v = tmp[y * w2 + ox];
                for &(ix, wt) in taps {
                    dst[y * w + ix] += T::from_f64(wt) * v;
                }
            }
        }
    }
}

/// Classical unnormalized 3×3 Sobel kernels, cross-correlation form.
pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

#[inline]
fn clamp_idx(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// 3×3 stencil with replicate padding, applied per plane.
pub(crate) fn stencil_forward<T: Scalar>(
    x: &[T],
    planes: usize,
    h: usize,
    w: usize,
    k: &[[f64; 3]; 3],
) -> Vec<T> {
    let mut out = vec![T::zero(); planes * h * w];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let mut acc = T::zero();
                for (i, krow) in k.iter().enumerate() {
                    let sy = clamp_idx(y as isize + i as isize - 1, h);
                    for (j, &kv) in krow.iter().enumerate() {
                        if kv != 0.0 {
                            let sx = clamp_idx(xx as isize + j as isize - 1, w);
                            acc += T::from_f64(kv) * src[sy * w + sx];
                        }
                    }
                }
                dst[y * w + xx] = acc;
            }
        }
    }
    out
}

pub(crate) fn stencil_backward<T: Scalar>(
    dy: &[T],
    planes: usize,
    h: usize,
    w: usize,
    k: &[[f64; 3]; 3],
    dx: &mut [T],
) {
    for p in 0..planes {
        let g = &dy[p * h * w..(p + 1) * h * w];
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let gv = g[y * w + xx];
                for (i, krow) in k.iter().enumerate() {
                    let sy = clamp_idx(y as isize + i as isize - 1, h);
                    for (j, &kv) in krow.iter().enumerate() {
                        if kv != 0.0 {
                            let sx = clamp_idx(xx as isize + j as isize - 1, w);
                            dst[sy * w + sx] += T::from_f64(kv) * gv;
                        }
                    }
                }
            }
        }
    }
}
