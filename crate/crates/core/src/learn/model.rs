// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::loss::{bce_with_logits, hinge};
use super::{LearnError, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Always predicts the positive label.
    ConstantPositive,
    /// One-vs-rest linear hinge, trained by subgradient steps.
    LinearHinge,
    LogisticMultilabel,
    Mlp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::ConstantPositive => "constant-positive",
            ModelKind::LinearHinge => "linear-hinge",
            ModelKind::LogisticMultilabel => "logistic-multilabel",
            ModelKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_dim: usize, output_dim: usize) -> Self {
        ModelSpec { kind, input_dim, output_dim, hidden: Vec::new(), init_seed: 0 }
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        ModelSpec { kind: ModelKind::Mlp, input_dim, output_dim, hidden, init_seed: 0 }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.output_dim == 0 {
            return Err(LearnError::Spec("output_dim must be at least 1".into()));
        }
        if self.kind != ModelKind::ConstantPositive && self.input_dim == 0 {
            return Err(LearnError::Spec("input_dim must be at least 1".into()));
        }
        match self.kind {
            ModelKind::Mlp if self.hidden.is_empty() || self.hidden.len() > 2 || self.hidden.contains(&0) => {
                Err(LearnError::Spec("mlp needs 1 or 2 non-empty hidden layers".into()))
            }
            k if k != ModelKind::Mlp && !self.hidden.is_empty() => {
                Err(LearnError::Spec(format!("hidden layers are only allowed for mlp, not {k}")))
            }
            _ => Ok(()),
        }
    }

    /// Layer widths from input to output.
    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            ModelKind::ConstantPositive => 0,
            _ => self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.kind != ModelKind::ConstantPositive
    }

    /// Initial flat parameters: He-scaled Gaussian weights. Output biases
    /// start at 0, hidden biases at 0.01 so no unit sits on the ReLU kink.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.init_seed);
        let mut p = Vec::with_capacity(self.n_params());
        if !self.is_trainable() {
            return p;
        }
        let widths = self.widths();
        let n_layers = widths.len() - 1;
        for (l, w) in widths.windows(2).enumerate() {
            let n = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive scale");
            let scale = if self.kind == ModelKind::Mlp { 1.0 } else { 0.1 };
            p.extend((0..w[0] * w[1]).map(|_| scale * n.sample(&mut rng)));
            let bias = if l + 1 < n_layers { 0.01 } else { 0.0 };
            p.extend(std::iter::repeat_n(bias, w[1]));
        }
        p
    }

    fn check_params(&self, params: &[f64], x: &Matrix) -> Result<(), LearnError> {
        if params.len() != self.n_params() {
            return Err(LearnError::Shape(format!("{} params, model has {}", params.len(), self.n_params())));
        }
        if self.is_trainable() && x.cols() != self.input_dim {
            return Err(LearnError::Shape(format!("{} input columns, model expects {}", x.cols(), self.input_dim)));
        }
        Ok(())
    }

    /// Raw outputs (`n x output_dim`). Positive means "predict 1".
    pub fn forward(&self, params: &[f64], x: &Matrix) -> Result<Matrix, LearnError> {
        self.check_params(params, x)?;
        if !self.is_trainable() {
            return Matrix::new(x.rows(), self.output_dim, vec![1.0; x.rows() * self.output_dim]);
        }
        Ok(self.layers(params, x).pop().expect("at least one layer"))
    }

    /// Activations after every layer; hidden ones post-ReLU, last one raw.
    fn layers(&self, params: &[f64], x: &Matrix) -> Vec<Matrix> {
        let widths = self.widths();
        let n_layers = widths.len() - 1;
        let mut out: Vec<Matrix> = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            let (din, dout) = (widths[l], widths[l + 1]);
            let w = &params[offset..offset + din * dout];
            let b = &params[offset + din * dout..offset + din * dout + dout];
            offset += din * dout + dout;
            let input = if l == 0 { x } else { &out[l - 1] };
            let mut z = Matrix::zeros(input.rows(), dout);
            for r in 0..input.rows() {
                let xr = input.row(r);
                let zr = &mut z.as_mut_slice()[r * dout..(r + 1) * dout];
                for (o, zo) in zr.iter_mut().enumerate() {
                    let wo = &w[o * din..(o + 1) * din];
                    *zo = b[o] + wo.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
                }
                if l + 1 < n_layers {
                    zr.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
            out.push(z);
        }
        out
    }

    pub fn loss(&self, params: &[f64], x: &Matrix, y: &[u8]) -> Result<f64, LearnError> {
        Ok(self.loss_and_grad(params, x, y)?.0)
    }

    /// Training loss and its gradient w.r.t. the flat parameters. Hinge
    /// models return a subgradient; BCE-with-logits elsewhere.
    pub fn loss_and_grad(&self, params: &[f64], x: &Matrix, y: &[u8]) -> Result<(f64, Vec<f64>), LearnError> {
        self.check_params(params, x)?;
        if !self.is_trainable() {
            let raw = self.forward(params, x)?;
            return Ok((bce_with_logits(&raw, y)?.0, Vec::new()));
        }
        let acts = self.layers(params, x);
        let raw = acts.last().expect("output layer");
        let (loss, mut delta) = match self.kind {
            ModelKind::LinearHinge => hinge(raw, y)?,
            _ => bce_with_logits(raw, y)?,
        };
        let widths = self.widths();
        let n_layers = widths.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut o = 0;
        for l in 0..n_layers {
            offsets.push(o);
            o += widths[l] * widths[l + 1] + widths[l + 1];
        }
        let mut grad = vec![0.0; params.len()];
        for l in (0..n_layers).rev() {
            let (din, dout) = (widths[l], widths[l + 1]);
            let input = if l == 0 { x } else { &acts[l - 1] };
            let off = offsets[l];
            let (gw, gb) = grad[off..off + din * dout + dout].split_at_mut(din * dout);
            for r in 0..input.rows() {
                let d = delta.row(r);
                let xr = input.row(r);
                for (oo, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    gb[oo] += dv;
                    for (g, xv) in gw[oo * din..(oo + 1) * din].iter_mut().zip(xr) {
                        *g += dv * xv;
                    }
                }
            }
            if l > 0 {
                let w = &params[off..off + din * dout];
                let mut prev = Matrix::zeros(input.rows(), din);
                for r in 0..input.rows() {
                    let d = delta.row(r).to_vec();
                    let pr = &mut prev.as_mut_slice()[r * din..(r + 1) * din];
                    for (oo, dv) in d.iter().enumerate() {
                        for (p, wv) in pr.iter_mut().zip(&w[oo * din..(oo + 1) * din]) {
                            *p += dv * wv;
                        }
                    }
                    // ReLU derivative, taken as 0 at exactly 0
                    for (p, a) in pr.iter_mut().zip(input.row(r)) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok((loss, grad))
    }
}

/// Strict thresholding: 1 iff the raw output is greater than 0.
pub fn threshold(raw: &Matrix) -> Vec<u8> {
    raw.as_slice().iter().map(|&v| u8::from(v > 0.0)).collect()
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(raw: &Matrix) -> Vec<usize> {
    (0..raw.rows())
        .map(|r| {
            let row = raw.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_case(rng: &mut ChaCha8Rng, d: usize, c: usize, n: usize) -> (Matrix, Vec<u8>) {
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<u8> = (0..n * c).map(|_| rng.random_range(0..2)).collect();
        (Matrix::new(n, d, x).unwrap(), y)
    }

    fn five_point(spec: &ModelSpec, p: &[f64], x: &Matrix, y: &[u8], i: usize, h: f64) -> f64 {
        let at = |d: f64| {
            let mut q = p.to_vec();
            q[i] += d;
            spec.loss(&q, x, y).unwrap()
        };
        (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [
            ModelSpec::new(ModelKind::LogisticMultilabel, 4, 3),
            ModelSpec::mlp(4, vec![6], 3),
            ModelSpec::mlp(4, vec![5, 4], 2),
        ] {
            for case in 0..5 {
                let (x, y) = random_case(&mut rng, 4, spec.output_dim, 5);
                let p = spec.init(case);
                let (_, g) = spec.loss_and_grad(&p, &x, &y).unwrap();
                for i in 0..p.len() {
                    let fd = five_point(&spec, &p, &x, &y, i, 1e-3);
                    let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-7);
                    assert!(rel < 1e-6, "{:?} param {i}: {} vs {fd}", spec.kind, g[i]);
                }
            }
        }
    }

    #[test]
    fn hinge_subgradient_away_from_kinks() {
        let spec = ModelSpec::new(ModelKind::LinearHinge, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y) = random_case(&mut rng, 3, 2, 5);
        let p = spec.init(1);
        let (_, g) = spec.loss_and_grad(&p, &x, &y).unwrap();
        for i in 0..p.len() {
            let fd = five_point(&spec, &p, &x, &y, i, 1e-6);
            assert!((g[i] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_positive() {
        let spec = ModelSpec::new(ModelKind::ConstantPositive, 0, 4);
        let x = Matrix::zeros(3, 7);
        let raw = spec.forward(&[], &x).unwrap();
        assert_eq!(threshold(&raw), vec![1; 12]);
        assert_eq!(argmax_rows(&raw), vec![0, 0, 0]);
    }

    #[test]
    fn zero_output_is_negative() {
        let raw = Matrix::new(1, 3, vec![0.0, 1e-300, -0.0]).unwrap();
        assert_eq!(threshold(&raw), vec![0, 1, 0]);
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(ModelKind::Mlp, 3, 2).validate().is_err());
        assert!(ModelSpec::new(ModelKind::LogisticMultilabel, 3, 0).validate().is_err());
        let mut s = ModelSpec::new(ModelKind::LinearHinge, 3, 2);
        s.hidden = vec![4];
        assert!(s.validate().is_err());
        assert!(ModelSpec::mlp(3, vec![4, 4, 4], 2).validate().is_err());
        assert!(ModelSpec::mlp(3, vec![4, 4], 2).validate().is_ok());
        assert_eq!(ModelSpec::mlp(3, vec![4], 2).n_params(), 3 * 4 + 4 + 4 * 2 + 2);
    }
}
