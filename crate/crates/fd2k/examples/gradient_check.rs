//! Compares backpropagated gradients of an actor-shaped network against
//! central finite differences.

use fd2k::nn::{Activation, Mlp};
use ndarray::Array2;

fn main() -> fd2k::Result<()> {
    let net = Mlp::new(&[6, 10, 10, 6], Activation::Sigmoid, 3)?;
    let x = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
    let c = Array2::from_shape_fn((4, 6), |(i, j)| if (i + j) % 2 == 0 { 1.0 } else { -0.5 });
    let loss = |n: &Mlp| -> f64 { (n.predict_batch(&x).expect("shape fixed") * &c).sum() };

    let cache = net.forward_batch(&x)?;
    let (grads, _) = net.backward(&cache, &c)?;
    let analytic = grads.to_flat();
    let flat = net.to_flat();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for i in 0..flat.len() {
        let mut v = flat.clone();
        v[i] += h;
        probe.set_flat(&v)?;
        let up = loss(&probe);
        v[i] -= 2.0 * h;
        probe.set_flat(&v)?;
        let numeric = (up - loss(&probe)) / (2.0 * h);
        worst = worst.max((analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6));
    }
    println!("{} parameters, max relative error {worst:.2e}", flat.len());
    Ok(())
}
