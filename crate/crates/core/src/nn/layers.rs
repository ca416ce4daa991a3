use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    #[default]
    Elu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative from the pre-activation and the activation output.
    pub fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if pre > 0.0 {
                    1.0
                } else {
                    post + 1.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }

    pub fn forward(self, pre: &[f64]) -> Vec<f64> {
        pre.iter().map(|&x| self.apply(x)).collect()
    }

    /// Gradient w.r.t. the pre-activation.
    pub fn backward(self, pre: &[f64], post: &[f64], g_post: &[f64]) -> Vec<f64> {
        pre.iter()
            .zip(post)
            .zip(g_post)
            .map(|((&a, &b), &g)| g * self.derivative(a, b))
            .collect()
    }
}

/// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
fn init_uniform<R: Rng + ?Sized>(values: &mut [f64], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in values {
        *v = rng.random_range(-bound..bound);
    }
}

/// `y = W x + b` with `W` stored `[output, input]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    w: usize,
    b: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(ps: &mut ParamSet, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let w = ps.alloc(&format!("{name}.w"), &[output, input]);
        let b = ps.alloc(&format!("{name}.b"), &[output]);
        init_uniform(&mut ps.values_mut()[w..w + output * input], input, rng);
        init_uniform(&mut ps.values_mut()[b..b + output], input, rng);
        Self { input, output, w, b }
    }

    pub fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input);
        let w = &p[self.w..self.w + self.output * self.input];
        (0..self.output)
            .map(|o| {
                let row = &w[o * self.input..(o + 1) * self.input];
                p[self.b + o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `g` and returns `dL/dx`.
    pub fn backward(&self, p: &[f64], x: &[f64], gy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let mut gx = vec![0.0; self.input];
        for (o, &go) in gy.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            g[self.b + o] += go;
            let base = self.w + o * self.input;
            for i in 0..self.input {
                g[base + i] += go * x[i];
                gx[i] += go * p[base + i];
            }
        }
        gx
    }
}

/// 1-D convolution over a channel-major `[cin, in_len]` input; weights are
/// `[cout, cin, kernel]`, zero padding on both sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_len: usize,
    pub out_len: usize,
    w: usize,
    b: usize,
}

impl Conv1d {
    pub fn output_len(in_len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
        (in_len + 2 * padding >= kernel && stride > 0).then(|| (in_len + 2 * padding - kernel) / stride + 1)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamSet,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        in_len: usize,
        rng: &mut R,
    ) -> Self {
        let out_len = Self::output_len(in_len, kernel, stride, padding).expect("validated by NetSpec");
        let w = ps.alloc(&format!("{name}.w"), &[cout, cin, kernel]);
        let b = ps.alloc(&format!("{name}.b"), &[cout]);
        let fan_in = cin * kernel;
        init_uniform(&mut ps.values_mut()[w..w + cout * cin * kernel], fan_in, rng);
        init_uniform(&mut ps.values_mut()[b..b + cout], fan_in, rng);
        Self { cin, cout, kernel, stride, padding, in_len, out_len, w, b }
    }

    /// Input position feeding output `o` through tap `k`, if inside the input.
    #[inline]
    fn source(&self, o: usize, k: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(self.padding).filter(|&i| i < self.in_len)
    }

    pub fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cin * self.in_len);
        let mut y = vec![0.0; self.cout * self.out_len];
        for co in 0..self.cout {
            let bias = p[self.b + co];
            let yrow = &mut y[co * self.out_len..(co + 1) * self.out_len];
            yrow.fill(bias);
            for ci in 0..self.cin {
                let xrow = &x[ci * self.in_len..(ci + 1) * self.in_len];
                let wbase = self.w + (co * self.cin + ci) * self.kernel;
                for k in 0..self.kernel {
                    let wk = p[wbase + k];
                    for (o, yo) in yrow.iter_mut().enumerate() {
                        if let Some(i) = self.source(o, k) {
                            *yo += wk * xrow[i];
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, p: &[f64], x: &[f64], gy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let mut gx = vec![0.0; self.cin * self.in_len];
        for co in 0..self.cout {
            let gyrow = &gy[co * self.out_len..(co + 1) * self.out_len];
            g[self.b + co] += gyrow.iter().sum::<f64>();
            for ci in 0..self.cin {
                let xrow = &x[ci * self.in_len..(ci + 1) * self.in_len];
                let wbase = self.w + (co * self.cin + ci) * self.kernel;
                for k in 0..self.kernel {
                    let wk = p[wbase + k];
                    let mut gw = 0.0;
                    for (o, &go) in gyrow.iter().enumerate() {
                        if let Some(i) = self.source(o, k) {
                            gw += go * xrow[i];
                            gx[ci * self.in_len + i] += go * wk;
                        }
                    }
                    g[wbase + k] += gw;
                }
            }
        }
        gx
    }
}

/// Transposed 1-D convolution; weights are `[cin, cout, kernel]`. Input
/// position `i` scatters into output `i * stride + k - padding`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose1d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_len: usize,
    pub out_len: usize,
    w: usize,
    b: usize,
}

impl ConvTranspose1d {
    /// `out_len` must be reachable: `(in_len - 1) * stride + kernel - 2 * padding`
    /// plus an output padding in `0..stride`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamSet,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        in_len: usize,
        out_len: usize,
        rng: &mut R,
    ) -> Self {
        let w = ps.alloc(&format!("{name}.w"), &[cin, cout, kernel]);
        let b = ps.alloc(&format!("{name}.b"), &[cout]);
        let fan_in = cout * kernel;
        init_uniform(&mut ps.values_mut()[w..w + cin * cout * kernel], fan_in, rng);
        init_uniform(&mut ps.values_mut()[b..b + cout], fan_in, rng);
        Self { cin, cout, kernel, stride, padding, in_len, out_len, w, b }
    }

    #[inline]
    fn target(&self, i: usize, k: usize) -> Option<usize> {
        (i * self.stride + k).checked_sub(self.padding).filter(|&o| o < self.out_len)
    }

    pub fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cin * self.in_len);
        let mut y = vec![0.0; self.cout * self.out_len];
        for co in 0..self.cout {
            y[co * self.out_len..(co + 1) * self.out_len].fill(p[self.b + co]);
        }
        for ci in 0..self.cin {
            let xrow = &x[ci * self.in_len..(ci + 1) * self.in_len];
            for co in 0..self.cout {
                let wbase = self.w + (ci * self.cout + co) * self.kernel;
                let yrow = &mut y[co * self.out_len..(co + 1) * self.out_len];
                for k in 0..self.kernel {
                    let wk = p[wbase + k];
                    for (i, &xi) in xrow.iter().enumerate() {
                        if let Some(o) = self.target(i, k) {
                            yrow[o] += wk * xi;
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, p: &[f64], x: &[f64], gy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let mut gx = vec![0.0; self.cin * self.in_len];
        for co in 0..self.cout {
            g[self.b + co] += gy[co * self.out_len..(co + 1) * self.out_len].iter().sum::<f64>();
        }
        for ci in 0..self.cin {
            let xrow = &x[ci * self.in_len..(ci + 1) * self.in_len];
            for co in 0..self.cout {
                let gyrow = &gy[co * self.out_len..(co + 1) * self.out_len];
                let wbase = self.w + (ci * self.cout + co) * self.kernel;
                for k in 0..self.kernel {
                    let wk = p[wbase + k];
                    let mut gw = 0.0;
                    for (i, &xi) in xrow.iter().enumerate() {
                        if let Some(o) = self.target(i, k) {
                            gw += gyrow[o] * xi;
                            gx[ci * self.in_len + i] += gyrow[o] * wk;
                        }
                    }
                    g[wbase + k] += gw;
                }
            }
        }
        gx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central differences of `sum(forward(x) * probe)` w.r.t. every parameter
    /// and input element.
    fn check_layer(
        ps: &mut ParamSet,
        x: &mut [f64],
        probe: &[f64],
        forward: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
        backward: &dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) -> Vec<f64>,
    ) {
        let mut g = vec![0.0; ps.len()];
        let gx = backward(ps.values(), x, probe, &mut g);
        let objective = |p: &[f64], x: &[f64]| -> f64 {
            forward(p, x).iter().zip(probe).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in 0..ps.len() {
            let v = ps.values()[i];
            ps.values_mut()[i] = v + h;
            let up = objective(ps.values(), x);
            ps.values_mut()[i] = v - h;
            let down = objective(ps.values(), x);
            ps.values_mut()[i] = v;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
        for i in 0..x.len() {
            let v = x[i];
            x[i] = v + h;
            let up = objective(ps.values(), x);
            x[i] = v - h;
            let down = objective(ps.values(), x);
            x[i] = v;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-7 * (1.0 + fd.abs()), "input {i}: {fd} vs {}", gx[i]);
        }
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn linear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ps = ParamSet::new();
        let l = Linear::new(&mut ps, "l", 5, 3, &mut rng);
        let mut x = random_vec(5, &mut rng);
        let probe = random_vec(3, &mut rng);
        check_layer(&mut ps, &mut x, &probe, &|p, x| l.forward(p, x), &|p, x, gy, g| l.backward(p, x, gy, g));
    }

    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ps = ParamSet::new();
        let c = Conv1d::new(&mut ps, "c", 2, 3, 5, 2, 2, 11, &mut rng);
        assert_eq!(c.out_len, 6);
        let mut x = random_vec(22, &mut rng);
        let probe = random_vec(18, &mut rng);
        check_layer(&mut ps, &mut x, &probe, &|p, x| c.forward(p, x), &|p, x, gy, g| c.backward(p, x, gy, g));
    }

    #[test]
    fn transposed_conv_gradients_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new();
        let t = ConvTranspose1d::new(&mut ps, "t", 3, 2, 5, 2, 2, 6, 11, &mut rng);
        let mut x = random_vec(18, &mut rng);
        let probe = random_vec(22, &mut rng);
        check_layer(&mut ps, &mut x, &probe, &|p, x| t.forward(p, x), &|p, x, gy, g| t.backward(p, x, gy, g));
    }

    #[test]
    fn transposed_conv_is_the_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> with shared weights and zero biases
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pc = ParamSet::new();
        let c = Conv1d::new(&mut pc, "c", 2, 3, 3, 2, 1, 9, &mut rng);
        let mut pt = ParamSet::new();
        let t = ConvTranspose1d::new(&mut pt, "t", 3, 2, 3, 2, 1, c.out_len, 9, &mut rng);
        // conv w [cout=3, cin=2, k] and convT w [cin=3, cout=2, k] share layout
        let wc = pc.tensor("c.w").unwrap().to_vec();
        pt.tensor_mut("t.w").unwrap().copy_from_slice(&wc);
        pc.zero_tensor("c.b");
        pt.zero_tensor("t.b");
        let x = random_vec(18, &mut rng);
        let y = random_vec(3 * c.out_len, &mut rng);
        let lhs: f64 = c.forward(pc.values(), &x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = t.forward(pt.values(), &y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn activation_derivatives() {
        for act in [Activation::Relu, Activation::Elu, Activation::Tanh, Activation::Identity] {
            for &x in &[-1.3, -0.2, 0.4, 2.0] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x, act.apply(x))).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }
}
