// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::image::{resize_area, GrayImage};
use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Smoothness weight.
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { alpha: 15.0, iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub strain: Option<Vec<f64>>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self, FeatureError> {
        if width == 0 || height == 0 || u.len() != width * height || v.len() != u.len() {
            return Err(FeatureError::Shape(format!("{width}x{height} flow with {} / {} values", u.len(), v.len())));
        }
        Ok(FlowField { width, height, u, v, strain: None })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> Self {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        FlowField { width, height, u, v, strain: None }
    }

    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }
}

fn sample(data: &[f64], w: usize, h: usize, x: isize, y: isize) -> f64 {
    let x = x.clamp(0, w as isize - 1) as usize;
    let y = y.clamp(0, h as isize - 1) as usize;
    data[y * w + x]
}

/// Horn–Schunck dense flow from `a` to `b`, border pixels replicated.
pub fn compute_flow(a: &GrayImage, b: &GrayImage, params: FlowParams) -> Result<FlowField, FeatureError> {
    if a.width != b.width || a.height != b.height {
        return Err(FeatureError::Shape(format!(
            "frames differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if params.iterations == 0 {
        return Err(FeatureError::Params("iterations must be at least 1".into()));
    }
    let (w, h) = (a.width, a.height);
    let n = w * h;
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let dx = |img: &GrayImage| 0.5 * (img.clamped(xi + 1, yi) - img.clamped(xi - 1, yi));
            let dy = |img: &GrayImage| 0.5 * (img.clamped(xi, yi + 1) - img.clamped(xi, yi - 1));
            let i = y * w + x;
            ix[i] = 0.5 * (dx(a) + dx(b));
            iy[i] = 0.5 * (dy(a) + dy(b));
            it[i] = b.at(x, y) - a.at(x, y);
        }
    }
    let a2 = params.alpha * params.alpha;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut nu = vec![0.0; n];
    let mut nv = vec![0.0; n];
    for _ in 0..params.iterations {
        for y in 0..h {
            for x in 0..w {
                let (xi, yi) = (x as isize, y as isize);
                let avg = |f: &[f64]| {
                    let s = |dx, dy| sample(f, w, h, xi + dx, yi + dy);
                    (s(-1, 0) + s(1, 0) + s(0, -1) + s(0, 1)) / 6.0
                        + (s(-1, -1) + s(1, -1) + s(-1, 1) + s(1, 1)) / 12.0
                };
                let i = y * w + x;
                let (ub, vb) = (avg(&u), avg(&v));
                let k = (ix[i] * ub + iy[i] * vb + it[i]) / (a2 + ix[i] * ix[i] + iy[i] * iy[i]);
                nu[i] = ub - ix[i] * k;
                nv[i] = vb - iy[i] * k;
            }
        }
        std::mem::swap(&mut u, &mut nu);
        std::mem::swap(&mut v, &mut nv);
    }
    FlowField::new(w, h, u, v)
}

/// Central differences inside, one-sided at the borders; 0 along an axis of length 1.
fn derivatives(f: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; w * h];
    let mut dy = vec![0.0; w * h];
    let at = |x: usize, y: usize| f[y * w + x];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            dx[i] = if w < 2 {
                0.0
            } else if x == 0 {
                at(1, y) - at(0, y)
            } else if x == w - 1 {
                at(x, y) - at(x - 1, y)
            } else {
                0.5 * (at(x + 1, y) - at(x - 1, y))
            };
            dy[i] = if h < 2 {
                0.0
            } else if y == 0 {
                at(x, 1) - at(x, 0)
            } else if y == h - 1 {
                at(x, y) - at(x, y - 1)
            } else {
                0.5 * (at(x, y + 1) - at(x, y - 1))
            };
        }
    }
    (dx, dy)
}

/// Adds the optical strain magnitude channel.
pub fn compute_strain(mut flow: FlowField) -> FlowField {
    let (w, h) = (flow.width, flow.height);
    let (ux, uy) = derivatives(&flow.u, w, h);
    let (vx, vy) = derivatives(&flow.v, w, h);
    let strain = (0..w * h)
        .map(|i| {
            let exy = 0.5 * (uy[i] + vx[i]);
            (ux[i] * ux[i] + vy[i] * vy[i] + 2.0 * exy * exy).sqrt()
        })
        .collect();
    flow.strain = Some(strain);
    flow
}

/// The (u, v, strain) stack, each channel area-resized to `side x side`,
/// flattened channel-major. Strain is computed if missing.
pub fn flow_features(flow: FlowField, side: usize) -> Vec<f32> {
    let flow = if flow.strain.is_some() { flow } else { compute_strain(flow) };
    let (w, h) = (flow.width, flow.height);
    let strain = flow.strain.as_deref().expect("strain computed above");
    [&flow.u[..], &flow.v[..], strain]
        .iter()
        .flat_map(|c| resize_area(c, w, h, side, side))
        .map(|x| x as f32)
        .collect()
}

/// Convenience for a frame pair: flow, strain, resize, flatten.
pub fn pair_features(a: &GrayImage, b: &GrayImage, params: FlowParams, side: usize) -> Result<Vec<f32>, FeatureError> {
    Ok(flow_features(compute_flow(a, b, params)?, side))
}

impl FlowField {
    pub fn interior_mean(&self, margin: usize) -> (f64, f64) {
        let mut su = 0.0;
        let mut sv = 0.0;
        let mut n = 0usize;
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                su += self.u[self.idx(x, y)];
                sv += self.v[self.idx(x, y)];
                n += 1;
            }
        }
        (su / n.max(1) as f64, sv / n.max(1) as f64)
    }
}
