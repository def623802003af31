//! Compares backpropagation through time against central finite
//! differences on a small stacked LSTM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reid_lab::model::Network;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (steps, label, h) = (5, 1, 1e-5);
    let net = Network::<f64>::init(6, &[8, 4], 4, 0);
    let xs: Vec<f64> = (0..steps * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (loss, grad) = net.sample_loss_and_grad(&xs, steps, label);
    println!("{} parameters, loss {loss:.6}", net.num_params());

    let names = ["layer 0 weights", "layer 0 bias", "layer 1 weights", "layer 1 bias", "head weights", "head bias"];
    let mut probe = net.clone();
    for (k, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..probe.tensors()[k].len() {
            let orig = probe.tensors()[k][i];
            probe.tensors_mut()[k][i] = orig + h;
            let up = -probe.log_probs(&xs, steps)[label];
            probe.tensors_mut()[k][i] = orig - h;
            let down = -probe.log_probs(&xs, steps)[label];
            probe.tensors_mut()[k][i] = orig;
            worst = worst.max(((up - down) / (2.0 * h) - grad.tensors()[k][i]).abs());
        }
        println!("{name:<16} max |analytic - numeric| = {worst:.2e}");
    }
}
