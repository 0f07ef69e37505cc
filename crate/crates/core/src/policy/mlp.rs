use rand::Rng;
use rand_distr::StandardNormal;

/// Fully connected network with tanh hidden layers and a linear output layer.
///
/// Parameters live in one flat vector; layer `l` contributes its weights
/// (`out x in`, row-major) followed by its biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Per-sample activations kept from a forward pass for backward and JVP passes.
#[derive(Clone, Debug, Default)]
pub struct Activations {
    /// Input followed by each hidden layer's tanh output, concatenated.
    values: Vec<f64>,
    output: Vec<f64>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

impl Mlp {
    /// Zero-initialized network with layer widths `sizes` (input first, output last).
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut n = 0;
        for w in sizes.windows(2) {
            offsets.push(n);
            n += w[0] * w[1] + w[1];
        }
        offsets.push(n);
        Self { sizes: sizes.to_vec(), params: vec![0.0; n], offsets }
    }

    /// Orthogonal initialization: hidden layers with `hidden_gain`, output layer with
    /// `output_gain`, zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = net.num_layers();
        for l in 0..layers {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            let w = orthogonal_matrix(fan_out, fan_in, rng);
            let off = net.offsets[l];
            for (dst, src) in net.params[off..off + fan_in * fan_out].iter_mut().zip(w) {
                *dst = gain * src;
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offsets[l];
        (&self.params[off..off + i * o], &self.params[off + i * o..off + i * o + o])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offsets[l];
        let (w, b) = self.params[off..off + i * o + o].split_at_mut(i * o);
        (w, b)
    }

    pub fn forward(&self, x: &[f64], act: &mut Activations) {
        debug_assert_eq!(x.len(), self.input_dim());
        let hidden_total: usize = self.sizes[..self.sizes.len() - 1].iter().sum();
        act.values.clear();
        act.values.reserve(hidden_total);
        act.values.extend_from_slice(x);
        let mut start = 0;
        for l in 0..self.num_layers() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer(l);
            let last = l + 1 == self.num_layers();
            let mut out = Vec::with_capacity(o);
            {
                let input = &act.values[start..start + i];
                for r in 0..o {
                    let row = &w[r * i..(r + 1) * i];
                    let z = b[r] + dot(row, input);
                    out.push(if last { z } else { z.tanh() });
                }
            }
            if last {
                act.output = out;
            } else {
                start += i;
                act.values.extend_from_slice(&out);
            }
        }
    }

    /// Convenience forward pass returning only the output.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut act = Activations::default();
        self.forward(x, &mut act);
        act.output
    }

    /// Accumulates `d(grad_out . output) / d params` into `grad`.
    pub fn backward(&self, act: &Activations, grad_out: &[f64], grad: &mut [f64]) {
        self.backward_impl(act, grad_out, grad, None);
    }

    /// Like [`Mlp::backward`], additionally returning the gradient with respect to the input.
    pub fn backward_with_input(&self, act: &Activations, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut gin = Vec::new();
        self.backward_impl(act, grad_out, grad, Some(&mut gin));
        gin
    }

    fn backward_impl(&self, act: &Activations, grad_out: &[f64], grad: &mut [f64], input_grad: Option<&mut Vec<f64>>) {
        let layers = self.num_layers();
        let mut starts = Vec::with_capacity(layers);
        let mut s = 0;
        for l in 0..layers {
            starts.push(s);
            s += self.sizes[l];
        }
        // Gradient w.r.t. the pre-activation of the current layer.
        let mut delta: Vec<f64> = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let input = &act.values[starts[l]..starts[l] + i];
            let off = self.offsets[l];
            {
                let (gw, gb) = grad[off..off + i * o + o].split_at_mut(i * o);
                for r in 0..o {
                    let d = delta[r];
                    if d == 0.0 {
                        continue;
                    }
                    gb[r] += d;
                    for (g, &x) in gw[r * i..(r + 1) * i].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l == 0 && input_grad.is_none() {
                break;
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; i];
            for r in 0..o {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                for (p, &wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                    *p += d * wv;
                }
            }
            if l == 0 {
                if let Some(gin) = input_grad {
                    *gin = prev;
                }
                break;
            }
            // Through tanh: d/dz tanh = 1 - h^2.
            for (p, &h) in prev.iter_mut().zip(input) {
                *p *= 1.0 - h * h;
            }
            delta = prev;
        }
    }

    /// Directional derivative of the output along parameter direction `tangent`.
    pub fn jvp(&self, act: &Activations, tangent: &[f64]) -> Vec<f64> {
        let layers = self.num_layers();
        let mut start = 0;
        // Tangent of the current layer's input (zero for the network input).
        let mut dx = vec![0.0; self.sizes[0]];
        let mut out = Vec::new();
        for l in 0..layers {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let input = &act.values[start..start + i];
            let (w, _) = self.layer(l);
            let off = self.offsets[l];
            let (tw, tb) = tangent[off..off + i * o + o].split_at(i * o);
            let last = l + 1 == layers;
            let mut dz = Vec::with_capacity(o);
            for r in 0..o {
                let mut v = tb[r] + dot(&tw[r * i..(r + 1) * i], input);
                if l > 0 {
                    v += dot(&w[r * i..(r + 1) * i], &dx);
                }
                dz.push(v);
            }
            if last {
                out = dz;
            } else {
                let h = &act.values[start + i..start + i + o];
                dx = dz.iter().zip(h).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
                start += i;
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `rows x cols` matrix with orthonormal rows (if rows <= cols) or columns, row-major.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (n, m, transpose) = if rows <= cols { (rows, cols, false) } else { (cols, rows, true) };
    // n orthonormal vectors of length m via Gram-Schmidt on Gaussian draws.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (k, b) in basis.iter().enumerate() {
        for (j, &x) in b.iter().enumerate() {
            if transpose {
                out[j * cols + k] = x;
            } else {
                out[k * cols + j] = x;
            }
        }
    }
    out
}
