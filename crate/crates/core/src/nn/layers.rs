use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{gemm, MatRef, Scalar, Tensor};
use super::NnError;

/// Architecture of a single layer. Shapes use the row-vector convention:
/// dense `y = x W + b` with `W: [inputs, units]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        units: usize,
    },
    /// Valid (no padding), stride 1. Input `[n, length, in_channels]`.
    Conv1d {
        in_channels: usize,
        filters: usize,
        kernel: usize,
    },
    /// Drops the trailing remainder window.
    MaxPool1d {
        window: usize,
    },
    /// Input `[n, steps, inputs]`, output the last hidden state `[n, units]`.
    Lstm {
        inputs: usize,
        units: usize,
    },
    Dropout {
        rate: f64,
    },
    Relu,
    Tanh,
    Sigmoid,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { .. } | LayerSpec::Conv1d { .. } | LayerSpec::Lstm { .. }
        )
    }

    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { inputs, units } => Some((vec![inputs, units], vec![units])),
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
            } => Some((vec![kernel, in_channels, filters], vec![filters])),
            LayerSpec::Lstm { inputs, units } => {
                Some((vec![inputs + units, 4 * units], vec![4 * units]))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// One layer: its spec plus weights and biases. Parameter-free layers hold
/// empty tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

fn glorot<T: Scalar, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of_f64(rng.gen_range(-limit..limit))).collect();
    Tensor::from_vec(shape, data).expect("glorot shape")
}

impl<T: Scalar> Layer<T> {
    /// Glorot-uniform weights, zero biases; LSTM forget-gate biases start at 1.
    pub fn init<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Self {
        let empty = || Tensor::zeros(&[0]);
        match spec {
            LayerSpec::Dense { inputs, units } => Self {
                spec,
                weights: glorot(&[inputs, units], inputs, units, rng),
                biases: Tensor::zeros(&[units]),
            },
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
            } => Self {
                spec,
                weights: glorot(
                    &[kernel, in_channels, filters],
                    kernel * in_channels,
                    kernel * filters,
                    rng,
                ),
                biases: Tensor::zeros(&[filters]),
            },
            LayerSpec::Lstm { inputs, units } => {
                let mut biases = Tensor::zeros(&[4 * units]);
                biases.data_mut()[units..2 * units].fill(T::one());
                Self {
                    spec,
                    weights: glorot(&[inputs + units, 4 * units], inputs + units, 4 * units, rng),
                    biases,
                }
            }
            _ => Self {
                spec,
                weights: empty(),
                biases: empty(),
            },
        }
    }

    /// Builds a layer from explicit parameters, validating shapes.
    pub fn with_params(spec: LayerSpec, weights: Tensor<T>, biases: Tensor<T>) -> Result<Self, NnError> {
        match spec.param_shapes() {
            Some((ws, bs)) => {
                if weights.shape() != ws.as_slice() || biases.shape() != bs.as_slice() {
                    return Err(NnError::ShapeMismatch {
                        context: "layer parameters",
                        expected: format!("weights {ws:?}, biases {bs:?}"),
                        found: format!("weights {:?}, biases {:?}", weights.shape(), biases.shape()),
                    });
                }
                Ok(Self {
                    spec,
                    weights,
                    biases,
                })
            }
            None => Ok(Self {
                spec,
                weights: Tensor::zeros(&[0]),
                biases: Tensor::zeros(&[0]),
            }),
        }
    }
}

pub(crate) struct LstmCache<T> {
    input: Tensor<T>,
    /// Activated gates `[n, steps, 4u]` in order i, f, g, o.
    gates: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    c: Vec<T>,
}

pub(crate) enum Cache<T> {
    Input(Tensor<T>),
    Output(Tensor<T>),
    Pool {
        argmax: Vec<usize>,
        in_shape: Vec<usize>,
    },
    Lstm(Box<LstmCache<T>>),
    Mask(Option<Vec<T>>),
}

fn expect_rank<T: Scalar>(x: &Tensor<T>, rank: usize, context: &'static str) -> Result<(), NnError> {
    if x.rank() != rank {
        return Err(NnError::ShapeMismatch {
            context,
            expected: format!("rank {rank}"),
            found: format!("shape {:?}", x.shape()),
        });
    }
    Ok(())
}

fn expect_dim(found: usize, expected: usize, context: &'static str) -> Result<(), NnError> {
    if found != expected {
        return Err(NnError::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Layer<T> {
    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, Cache<T>), NnError> {
        match self.spec {
            LayerSpec::Dense { inputs, units } => {
                expect_rank(x, 2, "dense input")?;
                expect_dim(x.shape()[1], inputs, "dense input width")?;
                let n = x.shape()[0];
                let mut y = Tensor::zeros(&[n, units]);
                let bias = self.biases.data();
                for row in y.data_mut().chunks_exact_mut(units) {
                    row.copy_from_slice(bias);
                }
                gemm(
                    MatRef::new(x.data(), n, inputs),
                    MatRef::new(self.weights.data(), inputs, units),
                    T::one(),
                    y.data_mut(),
                    units,
                    1,
                );
                Ok((y, Cache::Input(x.clone())))
            }
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
            } => {
                expect_rank(x, 3, "conv1d input")?;
                let (n, len, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                expect_dim(cin, in_channels, "conv1d input channels")?;
                if kernel > len {
                    return Err(NnError::KernelTooWide { kernel, length: len });
                }
                let out_len = len - kernel + 1;
                let mut y = Tensor::zeros(&[n, out_len, filters]);
                let w = MatRef::new(self.weights.data(), kernel * cin, filters);
                let bias = self.biases.data();
                for b in 0..n {
                    let xb = &x.data()[b * len * cin..(b + 1) * len * cin];
                    let yb = &mut y.data_mut()[b * out_len * filters..(b + 1) * out_len * filters];
                    for row in yb.chunks_exact_mut(filters) {
                        row.copy_from_slice(bias);
                    }
                    // Overlapping windows: row t starts at t * cin.
                    let windows = MatRef::strided(xb, out_len, kernel * cin, cin, 1);
                    gemm(windows, w, T::one(), yb, filters, 1);
                }
                Ok((y, Cache::Input(x.clone())))
            }
            LayerSpec::MaxPool1d { window } => {
                expect_rank(x, 3, "max-pool input")?;
                let (n, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                if window == 0 || window > len {
                    return Err(NnError::ShapeMismatch {
                        context: "max-pool window",
                        expected: format!("1..={len}"),
                        found: window.to_string(),
                    });
                }
                let out_len = len / window;
                let mut y = Tensor::zeros(&[n, out_len, ch]);
                let mut argmax = vec![0usize; n * out_len * ch];
                let xd = x.data();
                for b in 0..n {
                    for p in 0..out_len {
                        for c in 0..ch {
                            let mut best = (b * len + p * window) * ch + c;
                            for j in 1..window {
                                let idx = (b * len + p * window + j) * ch + c;
                                if xd[idx] > xd[best] {
                                    best = idx;
                                }
                            }
                            let o = (b * out_len + p) * ch + c;
                            y.data_mut()[o] = xd[best];
                            argmax[o] = best;
                        }
                    }
                }
                Ok((
                    y,
                    Cache::Pool {
                        argmax,
                        in_shape: x.shape().to_vec(),
                    },
                ))
            }
            LayerSpec::Lstm { inputs, units } => self.lstm_forward(x, inputs, units),
            LayerSpec::Dropout { rate } => {
                if mode == Mode::Infer || rate <= 0.0 {
                    return Ok((x.clone(), Cache::Mask(None)));
                }
                let keep = T::of_f64(1.0 / (1.0 - rate));
                let mask: Vec<T> = (0..x.len())
                    .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
                    .collect();
                let mut y = x.clone();
                for (v, m) in y.data_mut().iter_mut().zip(&mask) {
                    *v *= *m;
                }
                Ok((y, Cache::Mask(Some(mask))))
            }
            LayerSpec::Relu => {
                let y = relu(x);
                Ok((y.clone(), Cache::Output(y)))
            }
            LayerSpec::Tanh => {
                let y = x.map(|v| v.tanh());
                Ok((y.clone(), Cache::Output(y)))
            }
            LayerSpec::Sigmoid => {
                let y = x.map(sigmoid);
                Ok((y.clone(), Cache::Output(y)))
            }
        }
    }

    fn lstm_forward(&self, x: &Tensor<T>, inputs: usize, units: usize) -> Result<(Tensor<T>, Cache<T>), NnError> {
        expect_rank(x, 3, "lstm input")?;
        let (n, steps, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        expect_dim(d, inputs, "lstm input width")?;
        let u = units;
        let g4 = 4 * u;
        let w = self.weights.data();
        let (wx, wh) = w.split_at(inputs * g4);
        // Input projections for every step at once: [n * steps, 4u].
        let mut z = vec![T::zero(); n * steps * g4];
        for row in z.chunks_exact_mut(g4) {
            row.copy_from_slice(self.biases.data());
        }
        gemm(
            MatRef::new(x.data(), n * steps, d),
            MatRef::new(wx, d, g4),
            T::one(),
            &mut z,
            g4,
            1,
        );
        let mut h_prev = vec![T::zero(); n * steps * u];
        let mut c_prev = vec![T::zero(); n * steps * u];
        let mut c_all = vec![T::zero(); n * steps * u];
        let mut h = vec![T::zero(); n * u];
        let mut c = vec![T::zero(); n * u];
        for t in 0..steps {
            // z[:, t, :] += h Wh (row stride steps * 4u).
            gemm(
                MatRef::new(&h, n, u),
                MatRef::new(wh, u, g4),
                T::one(),
                &mut z[t * g4..],
                steps * g4,
                1,
            );
            for b in 0..n {
                let zr = &mut z[(b * steps + t) * g4..(b * steps + t + 1) * g4];
                let off = (b * steps + t) * u;
                for j in 0..u {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[u + j]);
                    let g_g = zr[2 * u + j].tanh();
                    let o_g = sigmoid(zr[3 * u + j]);
                    zr[j] = i_g;
                    zr[u + j] = f_g;
                    zr[2 * u + j] = g_g;
                    zr[3 * u + j] = o_g;
                    let cp = c[b * u + j];
                    h_prev[off + j] = h[b * u + j];
                    c_prev[off + j] = cp;
                    let cn = f_g * cp + i_g * g_g;
                    c[b * u + j] = cn;
                    c_all[off + j] = cn;
                    h[b * u + j] = o_g * cn.tanh();
                }
            }
        }
        let out = Tensor::from_vec(&[n, u], h)?;
        Ok((
            out,
            Cache::Lstm(Box::new(LstmCache {
                input: x.clone(),
                gates: z,
                h_prev,
                c_prev,
                c: c_all,
            })),
        ))
    }

    /// Returns the input gradient and (weights, biases) gradients.
    pub(crate) fn backward(
        &self,
        cache: &Cache<T>,
        dy: &Tensor<T>,
    ) -> Result<(Tensor<T>, Option<(Tensor<T>, Tensor<T>)>), NnError> {
        match (self.spec, cache) {
            (LayerSpec::Dense { inputs, units }, Cache::Input(x)) => {
                let n = x.shape()[0];
                expect_dim(dy.len(), n * units, "dense output gradient")?;
                let mut dw = Tensor::zeros(&[inputs, units]);
                gemm(
                    MatRef::new(x.data(), n, inputs).t(),
                    MatRef::new(dy.data(), n, units),
                    T::zero(),
                    dw.data_mut(),
                    units,
                    1,
                );
                let mut db = Tensor::zeros(&[units]);
                for row in dy.data().chunks_exact(units) {
                    for (acc, &g) in db.data_mut().iter_mut().zip(row) {
                        *acc += g;
                    }
                }
                let mut dx = Tensor::zeros(&[n, inputs]);
                gemm(
                    MatRef::new(dy.data(), n, units),
                    MatRef::new(self.weights.data(), inputs, units).t(),
                    T::zero(),
                    dx.data_mut(),
                    inputs,
                    1,
                );
                Ok((dx, Some((dw, db))))
            }
            (
                LayerSpec::Conv1d {
                    filters, kernel, ..
                },
                Cache::Input(x),
            ) => {
                let (n, len, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let out_len = len - kernel + 1;
                expect_dim(dy.len(), n * out_len * filters, "conv1d output gradient")?;
                let kc = kernel * cin;
                let mut dw = Tensor::zeros(&[kernel, cin, filters]);
                let mut db = Tensor::zeros(&[filters]);
                let mut dx = Tensor::zeros(&[n, len, cin]);
                let mut dwin = vec![T::zero(); out_len * kc];
                let w = MatRef::new(self.weights.data(), kc, filters);
                for b in 0..n {
                    let xb = &x.data()[b * len * cin..(b + 1) * len * cin];
                    let dyb = &dy.data()[b * out_len * filters..(b + 1) * out_len * filters];
                    let windows = MatRef::strided(xb, out_len, kc, cin, 1);
                    gemm(
                        windows.t(),
                        MatRef::new(dyb, out_len, filters),
                        T::one(),
                        dw.data_mut(),
                        filters,
                        1,
                    );
                    for row in dyb.chunks_exact(filters) {
                        for (acc, &g) in db.data_mut().iter_mut().zip(row) {
                            *acc += g;
                        }
                    }
                    gemm(
                        MatRef::new(dyb, out_len, filters),
                        w.t(),
                        T::zero(),
                        &mut dwin,
                        kc,
                        1,
                    );
                    let dxb = &mut dx.data_mut()[b * len * cin..(b + 1) * len * cin];
                    for t in 0..out_len {
                        for (j, &g) in dwin[t * kc..(t + 1) * kc].iter().enumerate() {
                            dxb[t * cin + j] += g;
                        }
                    }
                }
                Ok((dx, Some((dw, db))))
            }
            (LayerSpec::MaxPool1d { .. }, Cache::Pool { argmax, in_shape }) => {
                expect_dim(dy.len(), argmax.len(), "max-pool output gradient")?;
                let mut dx = Tensor::zeros(in_shape);
                for (&src, &g) in argmax.iter().zip(dy.data()) {
                    dx.data_mut()[src] += g;
                }
                Ok((dx, None))
            }
            (LayerSpec::Lstm { inputs, units }, Cache::Lstm(cache)) => {
                let (dx, dw, db) = self.lstm_backward(cache, dy, inputs, units)?;
                Ok((dx, Some((dw, db))))
            }
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                let mut dx = dy.clone();
                if let Some(mask) = mask {
                    for (v, m) in dx.data_mut().iter_mut().zip(mask) {
                        *v *= *m;
                    }
                }
                Ok((dx, None))
            }
            (LayerSpec::Relu, Cache::Output(y)) => {
                let mut dx = dy.clone();
                for (g, &o) in dx.data_mut().iter_mut().zip(y.data()) {
                    if o <= T::zero() {
                        *g = T::zero();
                    }
                }
                Ok((dx, None))
            }
            (LayerSpec::Tanh, Cache::Output(y)) => {
                let mut dx = dy.clone();
                for (g, &o) in dx.data_mut().iter_mut().zip(y.data()) {
                    *g *= T::one() - o * o;
                }
                Ok((dx, None))
            }
            (LayerSpec::Sigmoid, Cache::Output(y)) => {
                let mut dx = dy.clone();
                for (g, &o) in dx.data_mut().iter_mut().zip(y.data()) {
                    *g *= o * (T::one() - o);
                }
                Ok((dx, None))
            }
            _ => Err(NnError::CalledBeforeForward),
        }
    }

    fn lstm_backward(
        &self,
        cache: &LstmCache<T>,
        dy: &Tensor<T>,
        inputs: usize,
        units: usize,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
        let x = &cache.input;
        let (n, steps, d) = (x.shape()[0], x.shape()[1], inputs);
        let u = units;
        let g4 = 4 * u;
        expect_dim(dy.len(), n * u, "lstm output gradient")?;
        let (wx, wh) = self.weights.data().split_at(d * g4);
        let mut dz = vec![T::zero(); n * steps * g4];
        let mut dh = dy.data().to_vec();
        let mut dc = vec![T::zero(); n * u];
        let mut dh_next = vec![T::zero(); n * u];
        for t in (0..steps).rev() {
            for b in 0..n {
                let off = (b * steps + t) * u;
                let gr = &cache.gates[(b * steps + t) * g4..(b * steps + t + 1) * g4];
                let dzr = &mut dz[(b * steps + t) * g4..(b * steps + t + 1) * g4];
                for j in 0..u {
                    let (i_g, f_g, g_g, o_g) = (gr[j], gr[u + j], gr[2 * u + j], gr[3 * u + j]);
                    let tc = cache.c[off + j].tanh();
                    let dhj = dh[b * u + j];
                    let dcj = dc[b * u + j] + dhj * o_g * (T::one() - tc * tc);
                    dzr[j] = dcj * g_g * i_g * (T::one() - i_g);
                    dzr[u + j] = dcj * cache.c_prev[off + j] * f_g * (T::one() - f_g);
                    dzr[2 * u + j] = dcj * i_g * (T::one() - g_g * g_g);
                    dzr[3 * u + j] = dhj * tc * o_g * (T::one() - o_g);
                    dc[b * u + j] = dcj * f_g;
                }
            }
            // dh_{t-1} = dz_t Wh^T
            gemm(
                MatRef::strided(&dz[t * g4..], n, g4, steps * g4, 1),
                MatRef::new(wh, u, g4).t(),
                T::zero(),
                &mut dh_next,
                u,
                1,
            );
            std::mem::swap(&mut dh, &mut dh_next);
        }
        let mut dw = Tensor::zeros(&[d + u, g4]);
        {
            let (dwx, dwh) = dw.data_mut().split_at_mut(d * g4);
            gemm(
                MatRef::new(x.data(), n * steps, d).t(),
                MatRef::new(&dz, n * steps, g4),
                T::zero(),
                dwx,
                g4,
                1,
            );
            gemm(
                MatRef::new(&cache.h_prev, n * steps, u).t(),
                MatRef::new(&dz, n * steps, g4),
                T::zero(),
                dwh,
                g4,
                1,
            );
        }
        let mut db = Tensor::zeros(&[g4]);
        for row in dz.chunks_exact(g4) {
            for (acc, &g) in db.data_mut().iter_mut().zip(row) {
                *acc += g;
            }
        }
        let mut dx = Tensor::zeros(&[n, steps, d]);
        gemm(
            MatRef::new(&dz, n * steps, g4),
            MatRef::new(wx, d, g4).t(),
            T::zero(),
            dx.data_mut(),
            d,
            1,
        );
        Ok((dx, dw, db))
    }
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn tanh_act<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

pub fn sigmoid_act<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid)
}

/// Row-wise softmax over the last axis, with max subtraction.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let width = *x.shape().last().unwrap_or(&1);
    let mut y = x.clone();
    if width == 0 {
        return y;
    }
    for row in y.data_mut().chunks_exact_mut(width) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    y
}
