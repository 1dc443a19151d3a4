use ndarray::{Array1, Array2, Zip};

use super::network::{Gradient, QNetwork};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Moments {
    w: (Array2<f64>, Array2<f64>),
    b: (Array1<f64>, Array1<f64>),
}

/// Parameter update rule. Adam on the output layer is lazy: only rows that
/// received gradient in a step have their moments advanced.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam { t: u64, moments: Vec<Moments> },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &QNetwork) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                t: 0,
                moments: net
                    .layers()
                    .iter()
                    .map(|l| Moments {
                        w: (Array2::zeros(l.weights.raw_dim()), Array2::zeros(l.weights.raw_dim())),
                        b: (Array1::zeros(l.bias.len()), Array1::zeros(l.bias.len())),
                    })
                    .collect(),
            },
        }
    }

    pub fn apply(&mut self, net: &mut QNetwork, grad: &Gradient, lr: f64) {
        match self {
            Optimizer::Sgd => net.apply_sgd(grad, lr),
            Optimizer::Adam { t, moments } => {
                *t += 1;
                let step = lr * (1.0 - BETA2.powi(*t as i32)).sqrt() / (1.0 - BETA1.powi(*t as i32));
                let layers = net.layers_mut();
                let n_hidden = grad.hidden.len();
                for (l, (gw, gb)) in grad.hidden.iter().enumerate() {
                    let mom = &mut moments[l];
                    adam_update(&mut layers[l].weights, gw, &mut mom.w.0, &mut mom.w.1, step);
                    adam_update_1d(&mut layers[l].bias, gb, &mut mom.b.0, &mut mom.b.1, step);
                }
                let out = &mut layers[n_hidden];
                let mom = &mut moments[n_hidden];
                for (&a, (gw, gb)) in &grad.output_rows {
                    let mut w = out.weights.row_mut(a);
                    let mut m = mom.w.0.row_mut(a);
                    let mut v = mom.w.1.row_mut(a);
                    Zip::from(&mut w)
                        .and(&mut m)
                        .and(&mut v)
                        .and(gw)
                        .for_each(|w, m, v, &g| adam_scalar(w, m, v, g, step));
                    adam_scalar(&mut out.bias[a], &mut mom.b.0[a], &mut mom.b.1[a], *gb, step);
                }
            }
        }
    }
}

#[inline]
fn adam_scalar(w: &mut f64, m: &mut f64, v: &mut f64, g: f64, step: f64) {
    *m = BETA1 * *m + (1.0 - BETA1) * g;
    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
    *w -= step * *m / (v.sqrt() + EPS);
}

fn adam_update(w: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>, step: f64) {
    Zip::from(w)
        .and(m)
        .and(v)
        .and(g)
        .for_each(|w, m, v, &g| adam_scalar(w, m, v, g, step));
}

fn adam_update_1d(w: &mut Array1<f64>, g: &Array1<f64>, m: &mut Array1<f64>, v: &mut Array1<f64>, step: f64) {
    Zip::from(w)
        .and(m)
        .and(v)
        .and(g)
        .for_each(|w, m, v, &g| adam_scalar(w, m, v, g, step));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;
    use ndarray::array;

    #[test]
    fn adam_reduces_loss_on_fixed_batch() {
        let mut rng = stream_rng(8, 0);
        let mut net = QNetwork::new(&[3, 16, 16, 4], &mut rng).unwrap();
        let x = array![[0.1, 0.9, 0.0], [1.0, 0.0, 0.4], [0.0, 0.3, 0.7]];
        let actions = [0, 2, 3];
        let targets = [5.0, -2.0, 1.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, &net);
        let before = net.loss(x.view(), &actions, &targets).unwrap();
        for _ in 0..300 {
            let (_, g) = net.loss_and_gradient(x.view(), &actions, &targets).unwrap();
            opt.apply(&mut net, &g, 1e-2);
        }
        let after = net.loss(x.view(), &actions, &targets).unwrap();
        assert!(after < 0.01 * before, "{before} -> {after}");
    }
}
