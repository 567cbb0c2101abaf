use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Tanh,
    Linear,
}

/// Fully connected network with rectifier hidden layers. Parameters are kept
/// in one flat vector, layer by layer, each as a row-major `out x in` weight
/// matrix followed by the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, input first.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has an input layer")
    }
}

impl Mlp {
    /// Hidden layers get `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights and
    /// biases; the output layer gets `U(-final_scale, final_scale)`.
    pub fn new<R: Rng>(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let count = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let mut params = Vec::with_capacity(count);
        let layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = if l + 1 == layers { final_scale } else { 1.0 / (w[0] as f64).sqrt() };
            params.extend((0..w[1] * (w[0] + 1)).map(|_| rng.random_range(-bound..=bound)));
        }
        Self { sizes: sizes.to_vec(), output, params }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `self = tau * live + (1 - tau) * self`.
    pub fn soft_update(&mut self, live: &Mlp, tau: f64) {
        for (t, l) in self.params.iter_mut().zip(&live.params) {
            *t = tau * l + (1.0 - tau) * *t;
        }
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward(&self, input: &[f64], batch: usize) -> Tape {
        assert_eq!(input.len(), batch * self.input_dim(), "input shape");
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_out * n_in];
            let bias = &self.params[offset + n_out * n_in..offset + n_out * (n_in + 1)];
            offset += n_out * (n_in + 1);
            let x = &acts[l];
            let mut y = vec![0.0; batch * n_out];
            for b in 0..batch {
                let xb = &x[b * n_in..(b + 1) * n_in];
                for o in 0..n_out {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + row.iter().zip(xb).map(|(p, q)| p * q).sum::<f64>();
                    y[b * n_out + o] = if l + 1 < layers {
                        z.max(0.0)
                    } else {
                        match self.output {
                            OutputActivation::Tanh => z.tanh(),
                            OutputActivation::Linear => z,
                        }
                    };
                }
            }
            acts.push(y);
        }
        Tape { batch, acts }
    }

    /// Backpropagates `grad_output` (d loss / d output, batch-major). Returns
    /// the parameter gradient and d loss / d input.
    pub fn backward(&self, tape: &Tape, grad_output: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let layers = self.sizes.len() - 1;
        let batch = tape.batch;
        let mut grad = vec![0.0; self.params.len()];
        let mut delta: Vec<f64> = grad_output
            .iter()
            .zip(tape.output())
            .map(|(g, y)| match self.output {
                OutputActivation::Tanh => g * (1.0 - y * y),
                OutputActivation::Linear => *g,
            })
            .collect();
        let mut offset = self.params.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= n_out * (n_in + 1);
            let w = &self.params[offset..offset + n_out * n_in];
            let x = &tape.acts[l];
            let (gw, gb) = grad[offset..offset + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
            let mut dx = vec![0.0; batch * n_in];
            for b in 0..batch {
                let xb = &x[b * n_in..(b + 1) * n_in];
                let dxb = &mut dx[b * n_in..(b + 1) * n_in];
                for o in 0..n_out {
                    let d = delta[b * n_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let grow = &mut gw[o * n_in..(o + 1) * n_in];
                    let wrow = &w[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        grow[i] += d * xb[i];
                        dxb[i] += d * wrow[i];
                    }
                }
            }
            if l > 0 {
                // rectifier derivative from the stored post-activation
                for (g, a) in dx.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = dx;
        }
        (grad, delta)
    }
}

/// Adaptive-moment optimizer for minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(net: &Mlp, x: &[f64], batch: usize, target: &[f64]) -> f64 {
        let t = net.forward(x, batch);
        t.output().iter().zip(target).map(|(a, b)| 0.5 * (a - b).powi(2)).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for output in [OutputActivation::Tanh, OutputActivation::Linear] {
            let net = Mlp::new(&[4, 7, 5, 3], output, 0.5, &mut rng);
            let batch = 3;
            let x: Vec<f64> = (0..batch * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..batch * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tape = net.forward(&x, batch);
            let g_out: Vec<f64> = tape.output().iter().zip(&target).map(|(a, b)| a - b).collect();
            let (gp, gx) = net.backward(&tape, &g_out);
            let h = 1e-6;
            for k in 0..net.params().len() {
                let mut up = net.clone();
                up.params_mut()[k] += h;
                let mut dn = net.clone();
                dn.params_mut()[k] -= h;
                let fd = (loss(&up, &x, batch, &target) - loss(&dn, &x, batch, &target)) / (2.0 * h);
                assert!((fd - gp[k]).abs() < 1e-6, "param {k}: {fd} vs {}", gp[k]);
            }
            for k in 0..x.len() {
                let mut up = x.clone();
                up[k] += h;
                let mut dn = x.clone();
                dn[k] -= h;
                let fd = (loss(&net, &up, batch, &target) - loss(&net, &dn, batch, &target)) / (2.0 * h);
                assert!((fd - gx[k]).abs() < 1e-6, "input {k}");
            }
        }
    }

    #[test]
    fn tanh_output_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[2, 8, 3], OutputActivation::Tanh, 10.0, &mut rng);
        let t = net.forward(&[100.0, -50.0], 1);
        assert!(t.output().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn soft_update_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let live = Mlp::new(&[3, 4, 2], OutputActivation::Linear, 0.1, &mut rng);
        let mut target = Mlp::new(&[3, 4, 2], OutputActivation::Linear, 0.1, &mut rng);
        let before = target.clone();
        target.soft_update(&live, 0.0);
        assert_eq!(target, before);
        target.soft_update(&live, 1.0);
        assert_eq!(target, live);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(0.05, 2);
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            opt.step(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3);
    }
}
