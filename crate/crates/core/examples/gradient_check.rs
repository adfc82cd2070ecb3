//! Train a tiny network on XOR with the from-scratch engine, then compare its
//! backpropagated gradients with central finite differences in f64.

use std::error::Error;

use iot_anomaly::nn::{loss_mse, LayerSpec, Mode, Sequential, Sgd, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let specs = [
        LayerSpec::Dense { inputs: 2, units: 8 },
        LayerSpec::Tanh,
        LayerSpec::Dense { inputs: 8, units: 1 },
        LayerSpec::Sigmoid,
    ];
    let mut net: Sequential<f64> = Sequential::init(&specs, &mut rng);
    let x = Tensor::from_vec(&[4, 2], vec![0., 0., 0., 1., 1., 0., 1., 1.])?;
    let y = Tensor::from_vec(&[4, 1], vec![0., 1., 1., 0.])?;

    let mut opt = Sgd::new(0.5, 0.9);
    for epoch in 0..=2000 {
        let out = net.forward(&x, Mode::Train, &mut rng)?;
        let (loss, grad) = loss_mse(&out, &y)?;
        let tape = net.backward(&grad)?;
        opt.step(&mut net, &tape)?;
        if epoch % 500 == 0 {
            println!("epoch {epoch:>4}  mse {loss:.6}");
        }
    }
    println!("xor predictions: {:.3?}", net.predict(&x)?.data());

    // Analytic vs numeric gradient for every parameter.
    let out = net.forward(&x, Mode::Train, &mut rng)?;
    let tape = net.backward(&loss_mse(&out, &y)?.1)?;
    let loss_at = |net: &Sequential<f64>| loss_mse(&net.predict(&x).unwrap(), &y).unwrap().0;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (p, grads) in tape.params.iter().enumerate() {
        for i in 0..grads.len() {
            let mut plus = net.clone();
            plus.params_mut()[p].data_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[p].data_mut()[i] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let analytic = grads.data()[i];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    println!("largest relative gradient error: {worst:.2e}");
    Ok(())
}
