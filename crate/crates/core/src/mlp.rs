//! Three-layer score head: `C -> C/2 -> C/4 -> 1`, ReLU hidden, sigmoid output.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::layers::Dense;
use crate::scalar::{sigmoid, Scalar};

const MIN_WIDTH: usize = 4;

pub fn hidden_widths(in_dim: usize) -> [usize; 2] {
    [(in_dim / 2).max(MIN_WIDTH), (in_dim / 4).max(MIN_WIDTH)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: [Dense<T>; 3],
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace<T> {
    input: Vec<T>,
    hidden: [Vec<T>; 2],
    pub output: T,
}

impl<T: Scalar> MlpTrace<T> {
    pub fn activation_pattern(&self, out: &mut Vec<u8>) {
        for h in &self.hidden {
            out.extend(h.iter().map(|&v| u8::from(v > T::zero())));
        }
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(in_dim: usize) -> Self {
        let [h1, h2] = hidden_widths(in_dim);
        Self {
            layers: [Dense::zeros(in_dim, h1), Dense::zeros(h1, h2), Dense::zeros(h2, 1)],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, in_dim: usize) -> Self {
        let [h1, h2] = hidden_widths(in_dim);
        Self {
            layers: [
                Dense::random(rng, in_dim, h1),
                Dense::random(rng, h1, h2),
                Dense::random(rng, h2, 1),
            ],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, x: &[T]) -> T {
        self.forward_traced(x).output
    }

    pub fn forward_traced(&self, x: &[T]) -> MlpTrace<T> {
        let relu = |mut v: Vec<T>| {
            v.iter_mut().for_each(|a| *a = a.max(T::zero()));
            v
        };
        let h1 = relu(self.layers[0].forward(x));
        let h2 = relu(self.layers[1].forward(&h1));
        let z = self.layers[2].forward(&h2)[0];
        MlpTrace {
            input: x.to_vec(),
            hidden: [h1, h2],
            output: sigmoid(z),
        }
    }

    /// Backpropagates `d loss / d output`; returns `d loss / d input`.
    pub fn backward(&self, trace: &MlpTrace<T>, grad_out: T, grads: &mut Self) -> Vec<T> {
        let s = trace.output;
        let dz = vec![grad_out * s * (T::one() - s)];
        let mut g2 = self.layers[2].backward(&trace.hidden[1], &dz, &mut grads.layers[2]);
        mask(&trace.hidden[1], &mut g2);
        let mut g1 = self.layers[1].backward(&trace.hidden[0], &g2, &mut grads.layers[1]);
        mask(&trace.hidden[0], &mut g1);
        self.layers[0].backward(&trace.input, &g1, &mut grads.layers[0])
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Vec<usize>, &'a [T])) {
        for (i, l) in self.layers.iter().enumerate() {
            f(format!("{prefix}.fc{}.weight", i + 1), vec![l.out_dim, l.in_dim], &l.weight);
            f(format!("{prefix}.fc{}.bias", i + 1), vec![l.out_dim], &l.bias);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, Vec<usize>, &'a mut [T])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            let (o, n) = (l.out_dim, l.in_dim);
            f(format!("{prefix}.fc{}.weight", i + 1), vec![o, n], &mut l.weight);
            f(format!("{prefix}.fc{}.bias", i + 1), vec![o], &mut l.bias);
        }
    }
}

fn mask<T: Scalar>(act: &[T], g: &mut [T]) {
    for (gv, &a) in g.iter_mut().zip(act) {
        if a <= T::zero() {
            *gv = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn widths_follow_halving_with_floor() {
        assert_eq!(hidden_widths(64), [32, 16]);
        assert_eq!(hidden_widths(8), [4, 4]);
        assert_eq!(hidden_widths(512), [256, 128]);
    }

    #[test]
    fn zero_head_outputs_half() {
        let head = Mlp::<f64>::zeros(16);
        assert_eq!(head.forward(&[3.0; 16]), 0.5);
    }

    #[test]
    fn output_strictly_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = Mlp::<f64>::random(&mut rng, 8);
        for k in 0..50 {
            let x: Vec<f64> = (0..8).map(|i| ((i * 31 + k * 17) % 13) as f64 - 6.0).collect();
            let s = head.forward(&x);
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let head = Mlp::<f64>::random(&mut rng, 8);
        let x: Vec<f64> = (0..8).map(|i| 0.3 * i as f64 - 1.0).collect();
        let trace = head.forward_traced(&x);
        let mut grads = Mlp::zeros(8);
        let gx = head.backward(&trace, 1.0, &mut grads);
        let h = 1e-5;
        for i in 0..8 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (head.forward(&xp) - head.forward(&xm)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-8, "input {i}: {fd} vs {}", gx[i]);
        }
        for l in 0..3 {
            for j in 0..head.layers[l].weight.len() {
                let mut p = head.clone();
                p.layers[l].weight[j] += h;
                let mut m = head.clone();
                m.layers[l].weight[j] -= h;
                let fd = (p.forward(&x) - m.forward(&x)) / (2.0 * h);
                assert!((fd - grads.layers[l].weight[j]).abs() < 1e-8);
            }
        }
    }
}
