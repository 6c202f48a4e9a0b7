use crate::conv::{self, ConvDims, ConvGeom, SOBEL_X, SOBEL_Y};
use crate::scalar::matmul_acc;
use crate::{GraphError, Scalar, Tensor};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sigmoid(Var),
    LeakyRelu(Var, T),
    Clamp01(Var),
    Concat(Vec<Var>),
    AvgPool2(Var),
    Upsample2(Var),
    Sobel(Var, bool),
    MeanAbsDiff(Var, Var),
    MeanSquaredDiff(Var, Var),
    GlobalAvgPool(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    SoftmaxCrossEntropy { logits: Var, targets: Vec<usize> },
    WeightedSum(Vec<(Var, T)>),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Define-by-run tape. Every op evaluates eagerly and records how to
/// propagate its gradient.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Grads<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Grads<T> {
    /// `None` when the variable did not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn shape_err<R>(msg: impl Into<String>) -> Result<R, GraphError> {
    Err(GraphError::Shape(msg.into()))
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Constant input; no gradient is propagated to it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Cross-correlation with weight layout `[cout, cin, kh, kw]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    ) -> Result<Var, GraphError> {
        let d = self.conv_dims(x, w, &geom)?;
        if let Some(b) = b {
            if self.shape(b) != [d.cout] {
                return shape_err(format!("conv bias {:?} for {} outputs", self.shape(b), d.cout));
            }
        }
        let out = conv::conv2d_forward(
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &d,
            &geom,
        );
        let t = Tensor::new(&[d.n, d.cout, d.ho, d.wo], out)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        let ng = self.ng(&parents);
        Ok(self.push(t, Op::Conv2d { x, w, b, geom }, ng))
    }

    fn conv_dims(&self, x: Var, w: Var, g: &ConvGeom) -> Result<ConvDims, GraphError> {
        let (n, cin, h, wd) = self.value(x).dims4()?;
        let (cout, wcin, kh, kw) = self.value(w).dims4()?;
        if wcin != cin {
            return shape_err(format!("conv expects {wcin} input channels, got {cin}"));
        }
        let (Some(ho), Some(wo)) = (g.out_len(h, kh), g.out_len(wd, kw)) else {
            return shape_err(format!("input {h}×{wd} too small for {kh}×{kw} kernel"));
        };
        Ok(ConvDims { n, cin, h, w: wd, cout, kh, kw, ho, wo })
    }

    fn binary(&mut self, a: Var, b: Var, what: &str) -> Result<(), GraphError> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("{what}: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary(a, b, "add")?;
        let t = self.zip_map(a, b, |x, y| x + y);
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary(a, b, "sub")?;
        let t = self.zip_map(a, b, |x, y| x - y);
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary(a, b, "mul")?;
        let t = self.zip_map(a, b, |x, y| x * y);
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let t = self.value(a).map(|v| v * k);
        let ng = self.ng(&[a]);
        self.push(t, Op::Scale(a, k), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|v| T::one() / (T::one() + (-v).exp()));
        let ng = self.ng(&[a]);
        self.push(t, Op::Sigmoid(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let t = self.value(a).map(|v| if v > T::zero() { v } else { v * slope });
        let ng = self.ng(&[a]);
        self.push(t, Op::LeakyRelu(a, slope), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, T::zero())
    }

    /// Clamp to `[0, 1]`; the gradient is zero outside the open interval.
    pub fn clamp01(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|v| v.max(T::zero()).min(T::one()));
        let ng = self.ng(&[a]);
        self.push(t, Op::Clamp01(a), ng)
    }

    /// Concatenate along axis 1 (channels for NCHW, features for 2D).
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, GraphError> {
        let Some(&first) = parts.first() else {
            return shape_err("concat of zero tensors");
        };
        let s0 = self.shape(first).to_vec();
        if s0.len() < 2 {
            return shape_err("concat needs rank >= 2");
        }
        let inner: usize = s0[2..].iter().product();
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != s0.len() || s[0] != s0[0] || s[2..] != s0[2..] {
                return shape_err(format!("concat: {:?} vs {:?}", s, s0));
            }
            total += s[1];
        }
        let n = s0[0];
        let mut data = Vec::with_capacity(n * total * inner);
        for i in 0..n {
            for &p in parts {
                let v = self.value(p);
                let c = v.shape()[1];
                data.extend_from_slice(&v.data()[i * c * inner..(i + 1) * c * inner]);
            }
        }
        let mut shape = s0.clone();
        shape[1] = total;
        let t = Tensor::new(&shape, data)?;
        let ng = self.ng(parts);
        Ok(self.push(t, Op::Concat(parts.to_vec()), ng))
    }

    /// 2×2 average pooling with stride 2.
    pub fn avg_pool2(&mut self, a: Var) -> Result<Var, GraphError> {
        let (n, c, h, w) = self.value(a).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return shape_err(format!("avg_pool2 needs even dims, got {h}×{w}"));
        }
        let (h2, w2) = (h / 2, w / 2);
        let src = self.value(a).data();
        let mut out = vec![T::zero(); n * c * h2 * w2];
        let quarter = T::from_f64(0.25);
        for p in 0..n * c {
            let s = &src[p * h * w..(p + 1) * h * w];
            let d = &mut out[p * h2 * w2..(p + 1) * h2 * w2];
            for y in 0..h2 {
                for x in 0..w2 {
                    let i = 2 * y * w + 2 * x;
                    d[y * w2 + x] = (s[i] + s[i + 1] + s[i + w] + s[i + w + 1]) * quarter;
                }
            }
        }
        let t = Tensor::new(&[n, c, h2, w2], out)?;
        let ng = self.ng(&[a]);
        Ok(self.push(t, Op::AvgPool2(a), ng))
    }

    /// ×2 bilinear upsampling, half-pixel centers with clamped edges.
    pub fn upsample2(&mut self, a: Var) -> Result<Var, GraphError> {
        let (n, c, h, w) = self.value(a).dims4()?;
        let out = conv::upsample2_forward(self.value(a).data(), n * c, h, w);
        let t = Tensor::new(&[n, c, 2 * h, 2 * w], out)?;
        let ng = self.ng(&[a]);
        Ok(self.push(t, Op::Upsample2(a), ng))
    }

    /// Per-channel Sobel response (replicate padding). `horizontal` selects ∇x.
    pub fn sobel(&mut self, a: Var, horizontal: bool) -> Result<Var, GraphError> {
        let (n, c, h, w) = self.value(a).dims4()?;
        if h < 3 || w < 3 {
            return shape_err(format!("sobel needs at least 3×3, got {h}×{w}"));
        }
        let k = if horizontal { &SOBEL_X } else { &SOBEL_Y };
        let out = conv::stencil_forward(self.value(a).data(), n * c, h, w, k);
        let t = Tensor::new(&[n, c, h, w], out)?;
        let ng = self.ng(&[a]);
        Ok(self.push(t, Op::Sobel(a, horizontal), ng))
    }

    /// `mean(|a - b|)` as a scalar.
    pub fn mean_abs_diff(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary(a, b, "mean_abs_diff")?;
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let s: f64 = va.iter().zip(vb).map(|(&x, &y)| (x - y).abs().as_f64()).sum();
        let t = Tensor::scalar(T::from_f64(s / va.len() as f64));
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::MeanAbsDiff(a, b), ng))
    }

    /// `mean((a - b)^2)` as a scalar.
    pub fn mean_squared_diff(&mut self, a: Var, b: Var) -> Result<Var, GraphError> {
        self.binary(a, b, "mean_squared_diff")?;
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let s: f64 = va.iter().zip(vb).map(|(&x, &y)| (x - y).as_f64().powi(2)).sum();
        let t = Tensor::scalar(T::from_f64(s / va.len() as f64));
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::MeanSquaredDiff(a, b), ng))
    }

    /// `[n, c, h, w] -> [n, c]`.
    pub fn global_avg_pool(&mut self, a: Var) -> Result<Var, GraphError> {
        let (n, c, h, w) = self.value(a).dims4()?;
        let hw = h * w;
        let src = self.value(a).data();
        let inv = T::from_f64(1.0 / hw as f64);
        let out = (0..n * c).map(|p| src[p * hw..(p + 1) * hw].iter().copied().sum::<T>() * inv).collect();
        let t = Tensor::new(&[n, c], out)?;
        let ng = self.ng(&[a]);
        Ok(self.push(t, Op::GlobalAvgPool(a), ng))
    }

    /// `x [n, in] · wᵀ + b` with `w` laid out `[out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, GraphError> {
        let (n, fin) = self.value(x).dims2()?;
        let (fout, win) = self.value(w).dims2()?;
        if win != fin {
            return shape_err(format!("linear expects {win} features, got {fin}"));
        }
        let mut out = vec![T::zero(); n * fout];
        if let Some(b) = b {
            if self.shape(b) != [fout] {
                return shape_err(format!("linear bias {:?} for {fout} outputs", self.shape(b)));
            }
            let bias = self.value(b).data();
            for row in out.chunks_mut(fout) {
                row.copy_from_slice(bias);
            }
        }
        matmul_acc(n, fin, fout, self.value(x).data(), false, self.value(w).data(), true, &mut out, T::one());
        let t = Tensor::new(&[n, fout], out)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        let ng = self.ng(&parents);
        Ok(self.push(t, Op::Linear { x, w, b }, ng))
    }

    /// Mean cross-entropy of row-wise softmax against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, GraphError> {
        let (n, k) = self.value(logits).dims2()?;
        if targets.len() != n || targets.iter().any(|&t| t >= k) {
            return shape_err(format!("{} targets for {n}×{k} logits", targets.len()));
        }
        let src = self.value(logits).data();
        let mut loss = 0.0;
        for (row, &t) in src.chunks(k).zip(targets) {
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b.as_f64()));
            let lse = m + row.iter().map(|&v| (v.as_f64() - m).exp()).sum::<f64>().ln();
            loss += lse - row[t].as_f64();
        }
        let t = Tensor::scalar(T::from_f64(loss / n as f64));
        let ng = self.ng(&[logits]);
        Ok(self.push(t, Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec() }, ng))
    }

    /// `Σ wᵢ·xᵢ` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Result<Var, GraphError> {
        let mut s = T::zero();
        for &(v, w) in terms {
            if self.value(v).numel() != 1 {
                return shape_err("weighted_sum expects scalar terms");
            }
            s += self.value(v).item() * w;
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let ng = self.ng(&vars);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(terms.to_vec()), ng))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>, GraphError> {
        if self.value(loss).numel() != 1 {
            return shape_err(format!("backward from non-scalar {:?}", self.shape(loss)));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Grads { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    /// Mutable accumulator for `v`, created zeroed on first use.
    fn slot<'a>(&self, grads: &'a mut [Option<Tensor<T>>], v: Var) -> &'a mut Tensor<T> {
        grads[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)))
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let d = self.conv_dims(*x, *w, geom).expect("validated in forward");
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                let mut dx = self.nodes[x.0].needs_grad.then(|| Tensor::zeros(self.shape(*x)));
                let mut dw = self.nodes[w.0].needs_grad.then(|| Tensor::zeros(self.shape(*w)));
                let mut db = b
                    .filter(|b| self.nodes[b.0].needs_grad)
                    .map(|b| Tensor::zeros(self.shape(b)));
                conv::conv2d_backward(
                    xv,
                    wv,
                    gd,
                    &d,
                    geom,
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                    db.as_mut().map(|t| t.data_mut()),
                );
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
                if let (Some(db), Some(b)) = (db, b) {
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    let t = self.elementwise(g, self.value(*b), |gv, bv| gv * bv);
                    self.accumulate(grads, *a, t);
                }
                if self.nodes[b.0].needs_grad {
                    let t = self.elementwise(g, self.value(*a), |gv, av| gv * av);
                    self.accumulate(grads, *b, t);
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.map(|v| v * *k)),
            Op::Sigmoid(a) => {
                let t = self.elementwise(g, &node.value, |gv, s| gv * s * (T::one() - s));
                self.accumulate(grads, *a, t);
            }
            Op::LeakyRelu(a, slope) => {
                let t = self.elementwise(g, self.value(*a), |gv, x| if x > T::zero() { gv } else { gv * *slope });
                self.accumulate(grads, *a, t);
            }
            Op::Clamp01(a) => {
                let t = self.elementwise(g, self.value(*a), |gv, x| {
                    if x > T::zero() && x < T::one() {
                        gv
                    } else {
                        T::zero()
                    }
                });
                self.accumulate(grads, *a, t);
            }
            Op::Concat(parts) => {
                let shape = node.value.shape();
                let (n, total) = (shape[0], shape[1]);
                let inner: usize = shape[2..].iter().product();
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p)[1];
                    if self.nodes[p.0].needs_grad {
                        let mut data = Vec::with_capacity(n * c * inner);
                        for i in 0..n {
                            let start = (i * total + offset) * inner;
                            data.extend_from_slice(&gd[start..start + c * inner]);
                        }
                        let t = Tensor::new(self.shape(p), data).expect("concat part");
                        self.accumulate(grads, p, t);
                    }
                    offset += c;
                }
            }
            Op::AvgPool2(a) => {
                let (n, c, h, w) = self.value(*a).dims4().expect("4d");
                let (h2, w2) = (h / 2, w / 2);
                let quarter = T::from_f64(0.25);
                let dst = self.slot(grads, *a).data_mut();
                for p in 0..n * c {
                    for y in 0..h2 {
                        for x in 0..w2 {
                            let v = gd[p * h2 * w2 + y * w2 + x] * quarter;
                            let i = p * h * w + 2 * y * w + 2 * x;
                            dst[i] += v;
                            dst[i + 1] += v;
                            dst[i + w] += v;
                            dst[i + w + 1] += v;
                        }
                    }
                }
            }
            Op::Upsample2(a) => {
                let (n, c, h, w) = self.value(*a).dims4().expect("4d");
                let dst = self.slot(grads, *a).data_mut();
                conv::upsample2_backward(gd, n * c, h, w, dst);
            }
            Op::Sobel(a, horizontal) => {
                let (n, c, h, w) = self.value(*a).dims4().expect("4d");
                let k = if *horizontal { &SOBEL_X } else { &SOBEL_Y };
                let dst = self.slot(grads, *a).data_mut();
                conv::stencil_backward(gd, n * c, h, w, k, dst);
            }
            Op::MeanAbsDiff(a, b) => {
                let scale = gd[0] / T::from_f64(self.value(*a).numel() as f64);
                let sign = self.elementwise(self.value(*a), self.value(*b), |x, y| {
                    let d = x - y;
                    if d > T::zero() {
                        scale
                    } else if d < T::zero() {
                        -scale
                    } else {
                        T::zero()
                    }
                });
                if self.nodes[b.0].needs_grad {
                    self.accumulate(grads, *b, sign.map(|v| -v));
                }
                self.accumulate(grads, *a, sign);
            }
            Op::MeanSquaredDiff(a, b) => {
                let scale = gd[0] * T::from_f64(2.0 / self.value(*a).numel() as f64);
                let diff = self.elementwise(self.value(*a), self.value(*b), |x, y| (x - y) * scale);
                if self.nodes[b.0].needs_grad {
                    self.accumulate(grads, *b, diff.map(|v| -v));
                }
                self.accumulate(grads, *a, diff);
            }
            Op::GlobalAvgPool(a) => {
                let (_, _, h, w) = self.value(*a).dims4().expect("4d");
                let hw = h * w;
                let inv = T::from_f64(1.0 / hw as f64);
                let dst = self.slot(grads, *a).data_mut();
                for (p, &gv) in gd.iter().enumerate() {
                    dst[p * hw..(p + 1) * hw].iter_mut().for_each(|v| *v += gv * inv);
                }
            }
            Op::Linear { x, w, b } => {
                let (n, fin) = self.value(*x).dims2().expect("2d");
                let fout = self.shape(*w)[0];
                if self.nodes[x.0].needs_grad {
                    let mut dx = vec![T::zero(); n * fin];
                    matmul_acc(n, fout, fin, gd, false, self.value(*w).data(), false, &mut dx, T::zero());
                    self.accumulate(grads, *x, Tensor::new(&[n, fin], dx).expect("dx"));
                }
                if self.nodes[w.0].needs_grad {
                    let mut dw = vec![T::zero(); fout * fin];
                    matmul_acc(fout, n, fin, gd, true, self.value(*x).data(), false, &mut dw, T::zero());
                    self.accumulate(grads, *w, Tensor::new(&[fout, fin], dw).expect("dw"));
                }
                if let Some(b) = b {
                    if self.nodes[b.0].needs_grad {
                        let mut db = vec![T::zero(); fout];
                        for row in gd.chunks(fout) {
                            for (d, &v) in db.iter_mut().zip(row) {
                                *d += v;
                            }
                        }
                        self.accumulate(grads, *b, Tensor::new(&[fout], db).expect("db"));
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, targets } => {
                let (n, k) = self.value(*logits).dims2().expect("2d");
                let src = self.value(*logits).data();
                let scale = gd[0].as_f64() / n as f64;
                let mut out = Vec::with_capacity(n * k);
                for (row, &t) in src.chunks(k).zip(targets) {
                    let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b.as_f64()));
                    let z: f64 = row.iter().map(|&v| (v.as_f64() - m).exp()).sum();
                    for (j, &v) in row.iter().enumerate() {
                        let p = (v.as_f64() - m).exp() / z;
                        let onehot = if j == t { 1.0 } else { 0.0 };
                        out.push(T::from_f64((p - onehot) * scale));
                    }
                }
                self.accumulate(grads, *logits, Tensor::new(&[n, k], out).expect("logits"));
            }
            Op::WeightedSum(terms) => {
                for &(v, w) in terms {
                    self.accumulate(grads, v, Tensor::scalar(gd[0] * w));
                }
            }
        }
    }

    fn elementwise(&self, a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(a.shape(), data).expect("same shape")
    }
}
