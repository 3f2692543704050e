//! Linear softmax classifier and its cross-entropy gradient.

/// Weights are `(dim + 1) x classes`, row-major, with the bias in the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    pub dim: usize,
    pub classes: usize,
    pub weights: Vec<f64>,
}

impl LinearSoftmax {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LinearSoftmax {
            dim,
            classes,
            weights: vec![0.0; (dim + 1) * classes],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let k = self.classes;
        let mut out = self.weights[self.dim * k..].to_vec();
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(k)) {
            if *xi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
        }
        out
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Mean cross-entropy over the batch plus `weight_decay / 2 * |W|^2`
    /// (bias excluded), and its gradient in the layout of `weights`.
    pub fn loss_and_grad(&self, xs: &[&[f64]], labels: &[usize], weight_decay: f64) -> (f64, Vec<f64>) {
        assert_eq!(xs.len(), labels.len());
        let k = self.classes;
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        let inv_n = 1.0 / xs.len().max(1) as f64;
        for (x, &y) in xs.iter().zip(labels) {
            let logits = self.logits(x);
            let log_z = log_sum_exp(&logits);
            loss += log_z - logits[y];
            let mut delta: Vec<f64> = logits.iter().map(|l| (l - log_z).exp() * inv_n).collect();
            delta[y] -= inv_n;
            for (xi, g_row) in x.iter().zip(grad.chunks_exact_mut(k)) {
                if *xi != 0.0 {
                    for (g, d) in g_row.iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
            }
            for (g, d) in grad[self.dim * k..].iter_mut().zip(&delta) {
                *g += d;
            }
        }
        loss *= inv_n;
        if weight_decay != 0.0 {
            let body = &self.weights[..self.dim * k];
            loss += 0.5 * weight_decay * body.iter().map(|w| w * w).sum::<f64>();
            for (g, w) in grad.iter_mut().zip(body) {
                *g += weight_decay * w;
            }
        }
        (loss, grad)
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}
