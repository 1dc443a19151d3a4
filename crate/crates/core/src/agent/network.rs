//! Fully connected Q-value approximator with rectifier hidden layers and a
//! linear output layer, plus the mean-squared TD loss and its gradient.

use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::{Error, Result};

/// One affine layer. `weights` is `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn fan_in_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..=bound));
        let bias = Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..=bound));
        Self { weights, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Stack of dense layers; every layer but the last is followed by a ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Intermediate values of a batched forward pass through the hidden layers.
struct HiddenPass {
    /// Layer inputs: `inputs[0]` is the batch, `inputs[l]` feeds layer `l`.
    inputs: Vec<Array2<f64>>,
}

impl QNetwork {
    /// DQN layout `[input, hidden1, hidden2, actions]`.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        if layer_sizes.len() != 4 {
            return Err(Error::Structural(format!(
                "a Q-network has exactly two hidden layers, got sizes {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Structural(format!("zero-width layer in {layer_sizes:?}")));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense::fan_in_uniform(w[0], w[1], rng))
            .collect();
        Ok(Self { layers })
    }

    /// Arbitrary stack; only checks that consecutive dimensions agree.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structural("network needs at least one layer".into()));
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::Structural("bias length differs from layer width".into()));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::Structural(format!(
                    "layer {i} emits {} values but layer {} takes {}",
                    w[0].outputs(),
                    i + 1,
                    w[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs()];
        sizes.extend(self.layers.iter().map(Dense::outputs));
        sizes
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_actions(&self) -> usize {
        self.layers.last().map(Dense::outputs).unwrap_or(0)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Q-values for a single observation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::Structural(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_len()
            )));
        }
        let mut h = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.dot(&h);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            h = z;
        }
        Ok(h.to_vec())
    }

    /// Q-values for a batch laid out as `batch x features`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let pass = self.hidden_pass(x)?;
        let out = self.layers.last().expect("non-empty");
        let h = pass.inputs.last().expect("non-empty");
        Ok(h.dot(&out.weights.t()) + &out.bias)
    }

    /// `max_a Q(x_i, a)` for every row of `x`, computed over blocks of
    /// output units so the full `batch x actions` matrix is never formed.
    pub fn max_q_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        const BLOCK: usize = 1024;
        let pass = self.hidden_pass(x)?;
        let out = self.layers.last().expect("non-empty");
        let h = pass.inputs.last().expect("non-empty");
        let n_out = out.outputs();
        let mut best = vec![f64::NEG_INFINITY; h.nrows()];
        let mut buf = Array2::<f64>::zeros((h.nrows(), BLOCK.min(n_out)));
        for start in (0..n_out).step_by(BLOCK) {
            let end = (start + BLOCK).min(n_out);
            let w = out.weights.slice(s![start..end, ..]);
            let mut q = buf.slice_mut(s![.., ..end - start]);
            general_mat_mul(1.0, h, &w.t(), 0.0, &mut q);
            let bias = out.bias.slice(s![start..end]);
            for (b, row) in best.iter_mut().zip(q.rows()) {
                for (&v, &c) in row.iter().zip(bias.iter()) {
                    let v = v + c;
                    if v > *b {
                        *b = v;
                    }
                }
            }
        }
        Ok(best)
    }

    fn hidden_pass(&self, x: ArrayView2<f64>) -> Result<HiddenPass> {
        if x.ncols() != self.input_len() {
            return Err(Error::Structural(format!(
                "batch has {} features, network expects {}",
                x.ncols(),
                self.input_len()
            )));
        }
        let mut inputs = vec![x.to_owned()];
        for layer in &self.layers[..self.layers.len() - 1] {
            let prev = inputs.last().expect("non-empty");
            let mut z = prev.dot(&layer.weights.t()) + &layer.bias;
            z.mapv_inplace(relu);
            inputs.push(z);
        }
        Ok(HiddenPass { inputs })
    }

    /// Mean squared error between `targets` and the Q-values of the chosen
    /// actions, and its gradient. Only the chosen outputs receive gradient.
    pub fn loss_and_gradient(
        &self,
        x: ArrayView2<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradient)> {
        let batch = x.nrows();
        if batch == 0 || actions.len() != batch || targets.len() != batch {
            return Err(Error::Structural(format!(
                "batch of {batch} inputs with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let a_max = self.num_actions();
        if let Some(&bad) = actions.iter().find(|&&a| a >= a_max) {
            return Err(Error::Structural(format!("action {bad} outside 0..{a_max}")));
        }
        let pass = self.hidden_pass(x)?;
        let out = self.layers.last().expect("non-empty");
        let h_last = pass.inputs.last().expect("non-empty");

        let mut loss = 0.0;
        let mut output_rows: BTreeMap<usize, (Array1<f64>, f64)> = BTreeMap::new();
        let mut delta = Array2::<f64>::zeros((batch, h_last.ncols()));
        let scale = 2.0 / batch as f64;
        for i in 0..batch {
            let a = actions[i];
            let h = h_last.row(i);
            let q = out.weights.row(a).dot(&h) + out.bias[a];
            let err = q - targets[i];
            loss += err * err;
            let g = scale * err;
            let entry = output_rows
                .entry(a)
                .or_insert_with(|| (Array1::zeros(h.len()), 0.0));
            entry.0.scaled_add(g, &h);
            entry.1 += g;
            delta.row_mut(i).scaled_add(g, &out.weights.row(a));
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite TD loss {loss}")));
        }

        let n_hidden = self.layers.len() - 1;
        let mut hidden = Vec::with_capacity(n_hidden);
        for l in (0..n_hidden).rev() {
            // Gradient wrt the post-activation output of layer l becomes a
            // gradient wrt its pre-activation through the ReLU mask.
            let act = &pass.inputs[l + 1];
            delta.zip_mut_with(act, |d, &h| {
                if h <= 0.0 {
                    *d = 0.0
                }
            });
            let input = &pass.inputs[l];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            let next_delta = if l > 0 {
                Some(delta.dot(&self.layers[l].weights))
            } else {
                None
            };
            hidden.push((gw, gb));
            if let Some(d) = next_delta {
                delta = d;
            }
        }
        hidden.reverse();
        Ok((loss, Gradient { hidden, output_rows }))
    }

    /// Loss only, for checking gradients numerically.
    pub fn loss(&self, x: ArrayView2<f64>, actions: &[usize], targets: &[f64]) -> Result<f64> {
        let q = self.forward_batch(x)?;
        let batch = x.nrows();
        let mut loss = 0.0;
        for i in 0..batch {
            let err = q[[i, actions[i]]] - targets[i];
            loss += err * err;
        }
        Ok(loss / batch as f64)
    }

    /// Plain gradient-descent update.
    pub fn apply_sgd(&mut self, grad: &Gradient, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grad.hidden) {
            layer.weights.scaled_add(-lr, gw);
            layer.bias.scaled_add(-lr, gb);
        }
        let out = self.layers.last_mut().expect("non-empty");
        for (&a, (gw, gb)) in &grad.output_rows {
            out.weights.row_mut(a).scaled_add(-lr, gw);
            out.bias[a] -= lr * gb;
        }
    }
}

/// Gradient of the TD loss. Hidden layers are dense; the output layer is
/// stored by row because only the actions in the batch receive gradient.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub hidden: Vec<(Array2<f64>, Array1<f64>)>,
    pub output_rows: BTreeMap<usize, (Array1<f64>, f64)>,
}

impl Gradient {
    /// Gradient entry for `layer`, weight `(row, col)`; `col == None` selects
    /// the bias.
    pub fn entry(&self, layer: usize, row: usize, col: Option<usize>) -> f64 {
        if layer < self.hidden.len() {
            let (gw, gb) = &self.hidden[layer];
            match col {
                Some(c) => gw[[row, c]],
                None => gb[row],
            }
        } else {
            match self.output_rows.get(&row) {
                Some((gw, gb)) => match col {
                    Some(c) => gw[c],
                    None => *gb,
                },
                None => 0.0,
            }
        }
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(q: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;
    use ndarray::array;

    /// Straight loops over nested vectors, sharing nothing with ndarray.
    fn reference_forward(net: &QNetwork, x: &[f64]) -> Vec<f64> {
        let mut h: Vec<f64> = x.to_vec();
        let n = net.layers().len();
        for (li, layer) in net.layers().iter().enumerate() {
            let mut next = Vec::with_capacity(layer.outputs());
            for o in 0..layer.outputs() {
                let mut acc = layer.bias[o];
                for (i, hi) in h.iter().enumerate() {
                    acc += layer.weights[[o, i]] * hi;
                }
                if li + 1 < n && acc < 0.0 {
                    acc = 0.0;
                }
                next.push(acc);
            }
            h = next;
        }
        h
    }

    #[test]
    fn blocked_max_matches_reference_rows() {
        let mut rng = stream_rng(8, 0);
        let net = QNetwork::new(&[5, 7, 6, 2_500], &mut rng).unwrap();
        let x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let maxes = net.max_q_batch(x.view()).unwrap();
        for (row, m) in x.rows().into_iter().zip(maxes) {
            let q = reference_forward(&net, row.as_slice().unwrap());
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((m - best).abs() < 1e-12, "{m} vs {best}");
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::from_layers(vec![Dense::zeros(4, 6), Dense::zeros(6, 5), Dense::zeros(5, 3)]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = Dense {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let net = QNetwork::from_layers(vec![layer]).unwrap();
        assert_eq!(net.forward(&[0.3, -1.5, 2.0]).unwrap(), vec![0.3, -1.5, 2.0]);
    }

    #[test]
    fn forward_matches_reference_loops() {
        let mut rng = stream_rng(21, 0);
        for trial in 0..20 {
            let sizes = [4 + trial % 5, 7, 9, 3 + trial % 4];
            let net = QNetwork::new(&sizes, &mut rng).unwrap();
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = net.forward(&x).unwrap();
            let want = reference_forward(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1e-300) || g == w, "{g} vs {w}");
            }
            let batch = Array2::from_shape_vec((1, x.len()), x.clone()).unwrap();
            let qb = net.forward_batch(batch.view()).unwrap();
            for (g, w) in qb.row(0).iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn shape_errors() {
        let mut rng = stream_rng(0, 0);
        assert!(QNetwork::new(&[4, 8, 2], &mut rng).is_err());
        let net = QNetwork::new(&[4, 8, 8, 2], &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0; 3]), Err(Error::Structural(_))));
        assert!(QNetwork::from_layers(vec![Dense::zeros(3, 4), Dense::zeros(5, 2)]).is_err());
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut rng = stream_rng(2, 0);
        let net = QNetwork::new(&[3, 5, 5, 4], &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let q = net.forward_batch(x.view()).unwrap();
        let actions = [1, 3];
        let targets = [q[[0, 1]], q[[1, 3]]];
        let (loss, grad) = net.loss_and_gradient(x.view(), &actions, &targets).unwrap();
        assert_eq!(loss, 0.0);
        let mut updated = net.clone();
        updated.apply_sgd(&grad, 0.1);
        assert_eq!(updated, net);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(array![1.0, 5.0, 3.0].view()), 1);
        assert_eq!(argmax(array![2.0, 2.0].view()), 0);
    }
}
