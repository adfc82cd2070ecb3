use rand::Rng;

use super::layers::{Cache, Layer, LayerSpec, Mode};
use super::tensor::{Scalar, Tensor};
use super::NnError;

/// Per-parameter gradients aligned 1:1 with [`Sequential::params`], plus the
/// gradient with respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape<T> {
    pub params: Vec<Tensor<T>>,
    pub input: Tensor<T>,
}

/// A fixed stack of layers. `forward` in train mode records what `backward`
/// needs; `predict` is side-effect free.
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
    caches: Option<Vec<Cache<T>>>,
}

impl<T: Scalar> Clone for Sequential<T> {
    /// Clones parameters only; the copy must run `forward` before `backward`.
    fn clone(&self) -> Self {
        Self::new(self.layers.clone())
    }
}

impl<T: Scalar> std::fmt::Debug for Sequential<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sequential").field("layers", &self.specs()).finish()
    }
}

impl<T: Scalar> PartialEq for Sequential<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

fn check_finite<T: Scalar>(t: &Tensor<T>, layer: usize, pass: &'static str) -> Result<(), NnError> {
    if cfg!(debug_assertions) && !t.is_finite() {
        return Err(NnError::NonFinite { layer, pass });
    }
    Ok(())
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self {
            layers,
            caches: None,
        }
    }

    pub fn init<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Self {
        Self::new(specs.iter().map(|&s| Layer::init(s, rng)).collect())
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.caches = None;
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>, NnError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, cache) = layer.forward(&cur, mode, rng)?;
            check_finite(&y, i, "forward")?;
            caches.push(cache);
            cur = y;
        }
        self.caches = Some(caches);
        Ok(cur)
    }

    /// Inference-mode forward pass without recording caches.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur, Mode::Infer, &mut rng)?.0;
            check_finite(&cur, i, "forward")?;
        }
        Ok(cur)
    }

    /// Reverse-mode pass through the stack using the last `forward` caches.
    /// Parameters are not modified.
    pub fn backward(&self, grad_output: &Tensor<T>) -> Result<GradientTape<T>, NnError> {
        let caches = self.caches.as_ref().ok_or(NnError::CalledBeforeForward)?;
        let mut grads: Vec<Option<(Tensor<T>, Tensor<T>)>> = Vec::with_capacity(self.layers.len());
        let mut cur = grad_output.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let (dx, pg) = layer.backward(cache, &cur)?;
            check_finite(&dx, i, "backward")?;
            grads.push(pg);
            cur = dx;
        }
        grads.reverse();
        let mut params = Vec::new();
        for (w, b) in grads.into_iter().flatten() {
            params.push(w);
            params.push(b);
        }
        Ok(GradientTape { params, input: cur })
    }

    /// Weights and biases of every parametric layer, in layer order.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .filter(|l| l.spec.has_params())
            .flat_map(|l| [&l.weights, &l.biases])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .filter(|l| l.spec.has_params())
            .flat_map(|l| [&mut l.weights, &mut l.biases])
            .collect()
    }

    /// `(name, tensor)` pairs: `{prefix}.{layer}.w` / `{prefix}.{layer}.b`.
    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.spec.has_params())
            .flat_map(|(i, l)| {
                [
                    (format!("{prefix}.{i}.w"), &l.weights),
                    (format!("{prefix}.{i}.b"), &l.biases),
                ]
            })
            .collect()
    }

    /// Rebuilds a network from specs and a name lookup of tensors produced
    /// by [`Self::named_params`].
    pub fn from_named(
        specs: &[LayerSpec],
        prefix: &str,
        mut lookup: impl FnMut(&str) -> Option<Tensor<T>>,
    ) -> Result<Self, NnError> {
        let mut layers = Vec::with_capacity(specs.len());
        for (i, &spec) in specs.iter().enumerate() {
            if spec.has_params() {
                let get = |suffix: &str, lookup: &mut dyn FnMut(&str) -> Option<Tensor<T>>| {
                    let name = format!("{prefix}.{i}.{suffix}");
                    lookup(&name).ok_or(NnError::MissingParameter(name))
                };
                let w = get("w", &mut lookup)?;
                let b = get("b", &mut lookup)?;
                layers.push(Layer::with_params(spec, w, b)?);
            } else {
                layers.push(Layer::with_params(spec, Tensor::zeros(&[0]), Tensor::zeros(&[0]))?);
            }
        }
        Ok(Self::new(layers))
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        let conv = |t: &Tensor<T>| {
            Tensor::from_vec(t.shape(), t.data().iter().map(|v| U::of_f64(v.as_f64())).collect())
                .expect("same shape")
        };
        Sequential::new(
            self.layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    weights: conv(&l.weights),
                    biases: conv(&l.biases),
                })
                .collect(),
        )
    }
}

/// `theta <- theta - lr * g` for every parameter.
pub fn sgd_step<T: Scalar>(net: &mut Sequential<T>, tape: &GradientTape<T>, lr: f64) -> Result<(), NnError> {
    Sgd::new(lr, 0.0).step(net, tape)
}

/// Stochastic gradient descent with optional classical momentum.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut Sequential<T>, tape: &GradientTape<T>) -> Result<(), NnError> {
        let mut params = net.params_mut();
        if params.len() != tape.params.len() {
            return Err(NnError::ShapeMismatch {
                context: "gradient tape",
                expected: format!("{} tensors", params.len()),
                found: format!("{} tensors", tape.params.len()),
            });
        }
        for (p, g) in params.iter().zip(&tape.params) {
            if p.shape() != g.shape() {
                return Err(NnError::ShapeMismatch {
                    context: "gradient tape",
                    expected: format!("{:?}", p.shape()),
                    found: format!("{:?}", g.shape()),
                });
            }
        }
        let lr = T::of_f64(self.lr);
        if self.momentum == 0.0 {
            for (p, g) in params.iter_mut().zip(&tape.params) {
                for (v, &d) in p.data_mut().iter_mut().zip(g.data()) {
                    *v -= lr * d;
                }
            }
            return Ok(());
        }
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        }
        let mu = T::of_f64(self.momentum);
        for ((p, g), vel) in params.iter_mut().zip(&tape.params).zip(&mut self.velocity) {
            for ((v, &d), m) in p.data_mut().iter_mut().zip(g.data()).zip(vel.data_mut()) {
                *m = mu * *m - lr * d;
                *v += *m;
            }
        }
        Ok(())
    }
}
