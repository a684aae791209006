use super::{sigmoid, Dataset, MaxentModel};

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weighted negative log-likelihood with an L2 penalty on the weights (not the bias).
///
/// Parameters are laid out as `[w_0, ..., w_{d-1}, bias]`.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    data: &'a Dataset,
    pos_weight: f64,
    l2: f64,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a Dataset, pos_weight: f64, l2: f64) -> Self {
        Self {
            data,
            pos_weight,
            l2,
        }
    }

    pub fn n_params(&self) -> usize {
        self.data.dim() + 1
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.eval(theta, None)
    }

    /// Loss, writing the gradient into `grad`.
    pub fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(theta, Some(grad))
    }

    fn eval(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.data.dim();
        assert_eq!(theta.len(), d + 1);
        let (w, bias) = (&theta[..d], theta[d]);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut loss = 0.0;
        for (row, &y) in self.data.rows().iter().zip(self.data.labels()) {
            let z = bias + row.iter().map(|&(j, x)| w[j] * x).sum::<f64>();
            let c = if y { self.pos_weight } else { 1.0 };
            // -log p(y|x) = softplus(z) - y z
            loss += c * if y { softplus(-z) } else { softplus(z) };
            if let Some(g) = grad.as_deref_mut() {
                let r = c * (sigmoid(z) - if y { 1.0 } else { 0.0 });
                for &(j, x) in row {
                    g[j] += r * x;
                }
                g[d] += r;
            }
        }
        let sq: f64 = w.iter().map(|x| x * x).sum();
        loss += 0.5 * self.l2 * sq;
        if let Some(g) = grad {
            for (gj, wj) in g[..d].iter_mut().zip(w) {
                *gj += self.l2 * wj;
            }
        }
        loss
    }
}

/// Loss and gradient of `model` on `data`. The gradient's last entry is the bias.
pub fn loss_and_gradient(
    model: &MaxentModel,
    data: &Dataset,
    pos_weight: f64,
    l2: f64,
) -> (f64, Vec<f64>) {
    let obj = Objective::new(data, pos_weight, l2);
    let mut theta = model.weights().to_vec();
    theta.push(model.bias());
    let mut grad = vec![0.0; theta.len()];
    let loss = obj.loss_grad(&theta, &mut grad);
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSpace;
    use std::sync::Arc;

    fn data(rows: Vec<Vec<(usize, f64)>>, labels: Vec<bool>) -> Dataset {
        let space = Arc::new(FeatureSpace::new("t", vec!["a".into(), "b".into()]).unwrap());
        Dataset::from_rows(space, rows, labels).unwrap()
    }

    #[test]
    fn balanced_pair_at_zero() {
        let d = data(vec![vec![(0, 1.0)], vec![(1, 2.0)]], vec![true, false]);
        let obj = Objective::new(&d, 1.0, 0.0);
        let loss = obj.loss(&[0.0, 0.0, 0.0]);
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn doubling_positive_weight_doubles_positive_gradient() {
        // one positive example only, so the whole data term is positive
        let d = data(vec![vec![(0, 1.5), (1, -0.5)]], vec![true]);
        let theta = [0.3, -0.2, 0.1];
        let mut g1 = vec![0.0; 3];
        let mut g2 = vec![0.0; 3];
        Objective::new(&d, 2.0, 0.0).loss_grad(&theta, &mut g1);
        Objective::new(&d, 4.0, 0.0).loss_grad(&theta, &mut g2);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }
}
