use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

/// One affine layer; `w` is `inputs x outputs` so a batch is `x.dot(w) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Fully connected network with ReLU hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
}

/// Gradients with the same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// He-uniform hidden layers, a small uniform output layer, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        check_sizes(sizes)?;
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, io)| {
                let (i, o) = (io[0], io[1]);
                let bound = if l == last {
                    (1.0 / i as f64).sqrt()
                } else {
                    (6.0 / i as f64).sqrt()
                };
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    w: Array2::from_shape_simple_fn((i, o), || dist.sample(rng)),
                    b: Array1::zeros(o),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|io| Layer {
                w: Array2::zeros((io[0], io[1])),
                b: Array1::zeros(io[1]),
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.w.ncols() != layer.b.len() {
                return Err(Error::Contract(format!(
                    "layer {l}: {} outputs but {} biases",
                    layer.w.ncols(),
                    layer.b.len()
                )));
            }
            if l > 0 && layers[l - 1].w.ncols() != layer.w.nrows() {
                return Err(Error::Contract(format!(
                    "layer {l} expects {} inputs, previous layer gives {}",
                    layer.w.nrows(),
                    layers[l - 1].w.ncols()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").w.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Contract(format!(
                "network expects {} features, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Output for a single feature vector.
    pub fn forward_one(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x.len())?;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.w) + &layer.b;
            if l + 1 < self.layers.len() {
                h.mapv_inplace(relu);
            }
        }
        Ok(h)
    }

    /// Batch forward pass (one row per sample).
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w) + &layer.b;
            if l + 1 < self.layers.len() {
                z.mapv_inplace(relu);
            }
            inputs.push(h);
            h = z;
        }
        Ok((h, ForwardCache { inputs }))
    }

    /// Backpropagate `d_out` (gradient of the loss with respect to the
    /// output batch) through the cached pass.
    pub fn backward(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Gradients {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut dz = d_out;
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            let w_grad = input.t().dot(&dz);
            let b_grad = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut dx = dz.dot(&self.layers[l].w.t());
                // cached inputs of layer l are the ReLU outputs of layer l-1
                dx.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = dx;
            }
            grads.push(Layer {
                w: w_grad,
                b: b_grad,
            });
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// Parameters flattened layer by layer (weights row-major, then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Contract(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                p.len()
            )));
        }
        let mut it = p.iter().copied();
        for layer in &mut self.layers {
            layer
                .w
                .iter_mut()
                .for_each(|w| *w = it.next().expect("counted"));
            layer
                .b
                .iter_mut()
                .for_each(|b| *b = it.next().expect("counted"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// Little-endian layout: `u64` number of widths, the widths as `u64`,
    /// then per layer the row-major `inputs x outputs` weights and the biases
    /// as `f64`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let sizes = self.sizes();
        w.write_all(&(sizes.len() as u64).to_le_bytes())?;
        for s in sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for v in self.flat_params() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let count = read_u64(r)? as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::Parse(format!("implausible layer count {count}")));
        }
        let sizes = (0..count)
            .map(|_| read_u64(r).map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
            return Err(Error::Parse(format!("implausible layer widths {sizes:?}")));
        }
        let mut net = Self::zeros(&sizes)?;
        let params = (0..net.param_count())
            .map(|_| read_f64(r))
            .collect::<Result<Vec<_>>>()?;
        net.set_flat_params(&params)?;
        Ok(net)
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
        .collect()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Contract(format!("bad layer widths {sizes:?}")));
    }
    Ok(())
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: i32,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros: Vec<Layer> = net
            .layers
            .iter()
            .map(|l| Layer {
                w: Array2::zeros(l.w.raw_dim()),
                b: Array1::zeros(l.b.raw_dim()),
            })
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        let eps_hat = self.eps * c2.sqrt();
        for ((layer, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step * *m / (v.sqrt() + eps_hat);
            };
            ndarray::Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(sizes: &[usize], seed: u64) -> Mlp {
        Mlp::new(sizes, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[3, 4, 2]).unwrap();
        let y = m.forward_one(array![1.0, -2.0, 3.0].view()).unwrap();
        assert_eq!(y, array![0.0, 0.0]);
    }

    #[test]
    fn batch_and_single_agree() {
        let m = net(&[4, 6, 6, 3], 1);
        let x = array![[0.1, 0.2, -0.3, 0.4], [1.0, 0.0, 0.5, -1.0]];
        let yb = m.forward(x.view()).unwrap();
        for r in 0..2 {
            let y1 = m.forward_one(x.row(r)).unwrap();
            for c in 0..3 {
                assert!((yb[[r, c]] - y1[c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = net(&[4, 3, 1], 0);
        assert!(m.forward_one(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut m = net(&[3, 5, 4, 2], 7);
        let x = array![[0.3, -0.7, 0.2], [0.9, 0.1, -0.4], [-0.2, 0.5, 0.8]];
        // loss = sum of (output * coefficient)
        let coef = array![[0.5, -1.0], [2.0, 0.3], [-0.7, 1.1]];
        let loss = |m: &Mlp| (m.forward(x.view()).unwrap() * &coef).sum();
        let (_, cache) = m.forward_cached(x.view()).unwrap();
        let g = m.backward(&cache, coef.clone()).flat();
        let p0 = m.flat_params();
        let h = 1e-6;
        for j in 0..p0.len() {
            let mut p = p0.clone();
            p[j] += h;
            m.set_flat_params(&p).unwrap();
            let up = loss(&m);
            p[j] -= 2.0 * h;
            m.set_flat_params(&p).unwrap();
            let down = loss(&m);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - g[j]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {j}: {fd} vs {}",
                g[j]
            );
        }
    }

    #[test]
    fn binary_round_trip() {
        let m = net(&[5, 7, 2], 3);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (1 + 3 + m.param_count()));
        let back = Mlp::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(Mlp::read_from(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut m = net(&[2, 3, 1], 2);
        let before = m.clone();
        let mut opt = Adam::new(&m, 0.01);
        let zero = Gradients {
            layers: m
                .layers()
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect(),
        };
        opt.step(&mut m, &zero);
        assert_eq!(m, before);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut m = Mlp::zeros(&[1, 1]).unwrap();
        let mut opt = Adam::new(&m, 0.1);
        let g = Gradients {
            layers: vec![Layer {
                w: array![[2.0]],
                b: array![-3.0],
            }],
        };
        opt.step(&mut m, &g);
        assert!((m.layers()[0].w[[0, 0]] + 0.1).abs() < 1e-6);
        assert!((m.layers()[0].b[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn output_change_is_lipschitz_bounded() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for seed in 0..20 {
            let m = net(&[6, 9, 9, 3], seed);
            let bound: f64 = m
                .layers()
                .iter()
                .map(|l| l.w.iter().map(|w| w * w).sum::<f64>().sqrt())
                .product();
            let x = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
            let d: Array1<f64> = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
            let d = &d * (1e-6 / d.dot(&d).sqrt());
            let y0 = m.forward_one(x.view()).unwrap();
            let y1 = m.forward_one((&x + &d).view()).unwrap();
            let change = (&y1 - &y0).mapv(|v| v * v).sum().sqrt();
            assert!(
                change <= bound * 1e-6 * (1.0 + 1e-9),
                "{change} > {bound}e-6"
            );
        }
    }
}
