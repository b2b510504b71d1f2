//! Input-convex potential networks and the transport maps they induce.
//!
//! The potential is
//!
//! ```text
//! z₁ = σ(W₁ x + b₁)
//! z_l = σ(P_l z_{l-1} + A_l x + b_l)      l = 2..L,  P_l ≥ 0
//! φ(x) = uᵀ z_L + c                                 u ≥ 0
//! ```
//!
//! with `σ` convex and nondecreasing, so `φ` is convex in `x` for every
//! parameter vector. Nonnegative weights are stored unconstrained and mapped
//! through a positivity map, which keeps the parameter space all of `R^m`.
//!
//! Derivatives are hand-derived for this fixed wiring: `T = ∇_x φ` by one
//! backward sweep, and parameter gradients of `⟨e, T(x)⟩` by a reverse sweep
//! over the forward-tangent pass along `e`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::model::MapModel;

/// Convex nondecreasing `C²` activation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Softplus,
}

impl Activation {
    #[inline]
    fn value(self, a: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(a),
        }
    }

    #[inline]
    fn first(self, a: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(a),
        }
    }

    #[inline]
    fn second(self, a: f64) -> f64 {
        match self {
            Activation::Softplus => {
                let s = sigmoid(a);
                s * (1.0 - s)
            }
        }
    }
}

/// Reparameterization `R → (0, ∞)` for the weights that must stay nonnegative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityMap {
    #[default]
    Softplus,
    Exp,
}

impl PositivityMap {
    #[inline]
    fn value(self, r: f64) -> f64 {
        match self {
            PositivityMap::Softplus => softplus(r),
            PositivityMap::Exp => r.exp(),
        }
    }

    #[inline]
    fn derivative(self, r: f64) -> f64 {
        match self {
            PositivityMap::Softplus => sigmoid(r),
            PositivityMap::Exp => r.exp(),
        }
    }

    /// Raw coordinate mapping to the positive weight `w`.
    pub fn inverse(self, w: f64) -> f64 {
        match self {
            // w + log(1 - e^{-w})
            PositivityMap::Softplus => w + (-(-w).exp_m1()).ln(),
            PositivityMap::Exp => w.ln(),
        }
    }
}

/// `log(1 + e^a)` without overflow.
#[inline]
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnnSpec {
    pub input_dim: usize,
    #[serde(default = "default_widths")]
    pub hidden_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub positivity_map: PositivityMap,
}

fn default_widths() -> Vec<usize> {
    vec![20, 20]
}

impl IcnnSpec {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden_widths,
            activation: Activation::default(),
            positivity_map: PositivityMap::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input dimension must be positive".into()));
        }
        if self.hidden_widths.is_empty() {
            return Err(Error::InvalidSpec("need at least one hidden layer".into()));
        }
        if let Some(l) = self.hidden_widths.iter().position(|&w| w == 0) {
            return Err(Error::InvalidSpec(format!("hidden layer {} has zero width", l + 1)));
        }
        Ok(())
    }
}

/// Flat parameter length of the network described by `spec`.
pub fn param_count(spec: &IcnnSpec) -> Result<usize> {
    Ok(Icnn::new(spec.clone())?.param_count())
}

#[derive(Debug, Clone)]
struct LayerLayout {
    width: usize,
    prev_width: usize,
    /// Raw nonnegative `width × prev_width` block; absent on the first layer.
    rec_off: Option<usize>,
    skip_off: usize,
    bias_off: usize,
}

/// Input-convex network with a fixed parameter layout.
#[derive(Debug, Clone)]
pub struct Icnn {
    spec: IcnnSpec,
    layers: Vec<LayerLayout>,
    out_off: usize,
    const_off: usize,
    params: usize,
}

/// Positive weights for one parameter vector, with the positivity-map slopes.
struct Weights<'a> {
    theta: &'a [f64],
    rec: Vec<Vec<f64>>,
    rec_slope: Vec<Vec<f64>>,
    out: Vec<f64>,
    out_slope: Vec<f64>,
}

/// Per-layer pre-activations and activation values at a point.
struct Trace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
}

/// Potentials, maps and optionally parameter Jacobians over a batch.
#[derive(Debug, Clone)]
pub struct MapBatchEval {
    pub potentials: Vec<f64>,
    pub maps: PointCloud,
    pub param_jacobians: Option<Vec<DMatrix<f64>>>,
}

impl Icnn {
    pub fn new(spec: IcnnSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.input_dim;
        let mut layers = Vec::with_capacity(spec.hidden_widths.len());
        let mut off = 0;
        let mut prev = 0;
        for (l, &width) in spec.hidden_widths.iter().enumerate() {
            let rec_off = if l == 0 {
                None
            } else {
                let o = off;
                off += width * prev;
                Some(o)
            };
            let skip_off = off;
            off += width * d;
            let bias_off = off;
            off += width;
            layers.push(LayerLayout { width, prev_width: prev, rec_off, skip_off, bias_off });
            prev = width;
        }
        let out_off = off;
        off += prev;
        let const_off = off;
        off += 1;
        Ok(Self { spec, layers, out_off, const_off, params: off })
    }

    pub fn spec(&self) -> &IcnnSpec {
        &self.spec
    }

    /// Indices of the raw coordinates that pass through the positivity map.
    pub fn positive_coordinates(&self) -> Vec<usize> {
        let mut idx = Vec::new();
        for layer in &self.layers {
            if let Some(o) = layer.rec_off {
                idx.extend(o..o + layer.width * layer.prev_width);
            }
        }
        idx.extend(self.out_off..self.const_off);
        idx
    }

    /// Zero-mean weights scaled by `1/√fan_in`; positive weights drawn
    /// uniformly in `(0, 2/fan_in)` and stored through the inverse positivity map.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.spec.input_dim;
        let pos = self.spec.positivity_map;
        let mut theta = vec![0.0; self.params];
        let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
        let normal = |rng: &mut R, scale: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        };
        for layer in &self.layers {
            if let Some(o) = layer.rec_off {
                let fan_in = layer.prev_width as f64;
                for t in &mut theta[o..o + layer.width * layer.prev_width] {
                    let w = (2.0 / fan_in) * unit.sample(rng).max(1e-3);
                    *t = pos.inverse(w);
                }
            }
            let skip_scale = 1.0 / (d as f64).sqrt();
            for t in &mut theta[layer.skip_off..layer.skip_off + layer.width * d] {
                *t = normal(rng, skip_scale);
            }
            let bias_scale = 1.0 / ((layer.prev_width + d) as f64).sqrt();
            for t in &mut theta[layer.bias_off..layer.bias_off + layer.width] {
                *t = normal(rng, bias_scale);
            }
        }
        let fan_in = self.layers.last().map(|l| l.width).unwrap_or(1) as f64;
        for t in &mut theta[self.out_off..self.const_off] {
            let w = (2.0 / fan_in) * unit.sample(rng).max(1e-3);
            *t = pos.inverse(w);
        }
        theta
    }

    fn weights<'a>(&self, theta: &'a [f64]) -> Result<Weights<'a>> {
        self.check_params(theta)?;
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        let pos = self.spec.positivity_map;
        let mut rec = Vec::with_capacity(self.layers.len());
        let mut rec_slope = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match layer.rec_off {
                Some(o) => {
                    let raw = &theta[o..o + layer.width * layer.prev_width];
                    rec.push(raw.iter().map(|&r| pos.value(r)).collect());
                    rec_slope.push(raw.iter().map(|&r| pos.derivative(r)).collect());
                }
                None => {
                    rec.push(Vec::new());
                    rec_slope.push(Vec::new());
                }
            }
        }
        let raw_out = &theta[self.out_off..self.const_off];
        Ok(Weights {
            theta,
            rec,
            rec_slope,
            out: raw_out.iter().map(|&r| pos.value(r)).collect(),
            out_slope: raw_out.iter().map(|&r| pos.derivative(r)).collect(),
        })
    }

    fn forward(&self, w: &Weights<'_>, x: &[f64]) -> Result<Trace> {
        let d = self.spec.input_dim;
        let act_fn = self.spec.activation;
        let mut trace = Trace {
            pre: Vec::with_capacity(self.layers.len()),
            act: Vec::with_capacity(self.layers.len()),
            slope: Vec::with_capacity(self.layers.len()),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let mut a = w.theta[layer.bias_off..layer.bias_off + layer.width].to_vec();
            for (j, aj) in a.iter_mut().enumerate() {
                let row = &w.theta[layer.skip_off + j * d..layer.skip_off + (j + 1) * d];
                *aj += row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
            }
            if l > 0 {
                let prev = &trace.act[l - 1];
                let rec = &w.rec[l];
                for (j, aj) in a.iter_mut().enumerate() {
                    let row = &rec[j * layer.prev_width..(j + 1) * layer.prev_width];
                    *aj += row.iter().zip(prev).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("hidden layer {}", l + 1)));
            }
            trace.act.push(a.iter().map(|&v| act_fn.value(v)).collect());
            trace.slope.push(a.iter().map(|&v| act_fn.first(v)).collect());
            trace.pre.push(a);
        }
        Ok(trace)
    }

    fn potential_from(&self, w: &Weights<'_>, trace: &Trace) -> Result<f64> {
        let last = trace.act.last().expect("at least one layer");
        let phi = w.out.iter().zip(last).map(|(u, z)| u * z).sum::<f64>() + w.theta[self.const_off];
        if !phi.is_finite() {
            return Err(Error::NonFinite("output layer".into()));
        }
        Ok(phi)
    }

    fn gradient_from(&self, w: &Weights<'_>, trace: &Trace, out: &mut [f64]) -> Result<()> {
        let d = self.spec.input_dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        let top = self.layers.len() - 1;
        let mut delta: Vec<f64> =
            w.out.iter().zip(&trace.slope[top]).map(|(u, s)| u * s).collect();
        for l in (0..=top).rev() {
            let layer = &self.layers[l];
            for (j, dj) in delta.iter().enumerate() {
                let row = &w.theta[layer.skip_off + j * d..layer.skip_off + (j + 1) * d];
                for (o, p) in out.iter_mut().zip(row) {
                    *o += dj * p;
                }
            }
            if l > 0 {
                let rec = &w.rec[l];
                let mut below = vec![0.0; layer.prev_width];
                for (j, dj) in delta.iter().enumerate() {
                    let row = &rec[j * layer.prev_width..(j + 1) * layer.prev_width];
                    for (b, p) in below.iter_mut().zip(row) {
                        *b += dj * p;
                    }
                }
                for (b, s) in below.iter_mut().zip(&trace.slope[l - 1]) {
                    *b *= s;
                }
                delta = below;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input gradient".into()));
        }
        Ok(())
    }

    /// Adds `scale · ∇_θ ⟨e, ∇_x φ_θ(x)⟩` to `grad`.
    fn accumulate_vjp(
        &self,
        w: &Weights<'_>,
        trace: &Trace,
        x: &[f64],
        e: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) {
        let d = self.spec.input_dim;
        let act_fn = self.spec.activation;
        let nl = self.layers.len();

        // forward tangents along e
        let mut tangent_pre: Vec<Vec<f64>> = Vec::with_capacity(nl);
        let mut tangent_act: Vec<Vec<f64>> = Vec::with_capacity(nl);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut ta = vec![0.0; layer.width];
            for (j, t) in ta.iter_mut().enumerate() {
                let row = &w.theta[layer.skip_off + j * d..layer.skip_off + (j + 1) * d];
                *t = row.iter().zip(e).map(|(p, q)| p * q).sum();
                if l > 0 {
                    let rrow = &w.rec[l][j * layer.prev_width..(j + 1) * layer.prev_width];
                    *t += rrow.iter().zip(&tangent_act[l - 1]).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            tangent_act.push(ta.iter().zip(&trace.slope[l]).map(|(t, s)| t * s).collect());
            tangent_pre.push(ta);
        }

        // ψ = uᵀ ż_L
        let top = nl - 1;
        for (j, tz) in tangent_act[top].iter().enumerate() {
            grad[self.out_off + j] += scale * tz * w.out_slope[j];
        }
        let mut bar_tangent_act: Vec<f64> = w.out.clone();
        let mut bar_act: Vec<f64> = vec![0.0; self.layers[top].width];

        for l in (0..nl).rev() {
            let layer = &self.layers[l];
            let width = layer.width;
            let mut bar_tangent_pre = vec![0.0; width];
            let mut bar_pre = vec![0.0; width];
            for j in 0..width {
                let a = trace.pre[l][j];
                let s = trace.slope[l][j];
                bar_tangent_pre[j] = bar_tangent_act[j] * s;
                let bar_slope = bar_tangent_act[j] * tangent_pre[l][j];
                bar_pre[j] = bar_slope * act_fn.second(a) + bar_act[j] * s;
            }
            for j in 0..width {
                let (bt, bp) = (bar_tangent_pre[j], bar_pre[j]);
                let base = layer.skip_off + j * d;
                for k in 0..d {
                    grad[base + k] += scale * (bt * e[k] + bp * x[k]);
                }
                grad[layer.bias_off + j] += scale * bp;
            }
            if let Some(ro) = layer.rec_off {
                let pw = layer.prev_width;
                let rec = &w.rec[l];
                let slope = &w.rec_slope[l];
                let mut next_bar_tangent = vec![0.0; pw];
                let mut next_bar = vec![0.0; pw];
                for j in 0..width {
                    let (bt, bp) = (bar_tangent_pre[j], bar_pre[j]);
                    for i in 0..pw {
                        let idx = j * pw + i;
                        let eff = bt * tangent_act[l - 1][i] + bp * trace.act[l - 1][i];
                        grad[ro + idx] += scale * eff * slope[idx];
                        next_bar_tangent[i] += rec[idx] * bt;
                        next_bar[i] += rec[idx] * bp;
                    }
                }
                bar_tangent_act = next_bar_tangent;
                bar_act = next_bar;
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch { expected: self.spec.input_dim, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input point".into()));
        }
        Ok(())
    }

    pub fn potential(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let w = self.weights(theta)?;
        let trace = self.forward(&w, x)?;
        self.potential_from(&w, &trace)
    }

    pub fn transport(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let w = self.weights(theta)?;
        let trace = self.forward(&w, x)?;
        let mut out = vec![0.0; self.spec.input_dim];
        self.gradient_from(&w, &trace, &mut out)?;
        Ok(out)
    }

    /// `d × m` matrix `∇_θ T_θ(x)`.
    pub fn param_jacobian(&self, theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let w = self.weights(theta)?;
        let trace = self.forward(&w, x)?;
        Ok(self.jacobian_from(&w, &trace, x))
    }

    fn jacobian_from(&self, w: &Weights<'_>, trace: &Trace, x: &[f64]) -> DMatrix<f64> {
        let d = self.spec.input_dim;
        let mut jac = DMatrix::zeros(d, self.params);
        let mut row = vec![0.0; self.params];
        let mut e = vec![0.0; d];
        for k in 0..d {
            row.iter_mut().for_each(|v| *v = 0.0);
            e.iter_mut().for_each(|v| *v = 0.0);
            e[k] = 1.0;
            self.accumulate_vjp(w, trace, x, &e, 1.0, &mut row);
            for (j, v) in row.iter().enumerate() {
                jac[(k, j)] = *v;
            }
        }
        jac
    }

    pub fn transport_batch(
        &self,
        theta: &[f64],
        points: &PointCloud,
        want_jacobians: bool,
    ) -> Result<MapBatchEval> {
        self.check_points(points)?;
        let w = self.weights(theta)?;
        let mut potentials = Vec::with_capacity(points.len());
        let mut maps = PointCloud::zeros(points.len(), self.spec.input_dim);
        let mut jacs = want_jacobians.then(|| Vec::with_capacity(points.len()));
        for (x, t) in points.rows().zip(maps.rows_mut()) {
            self.check_point(x)?;
            let trace = self.forward(&w, x)?;
            potentials.push(self.potential_from(&w, &trace)?);
            self.gradient_from(&w, &trace, t)?;
            if let Some(j) = jacs.as_mut() {
                j.push(self.jacobian_from(&w, &trace, x));
            }
        }
        Ok(MapBatchEval { potentials, maps, param_jacobians: jacs })
    }
}

impl MapModel for Icnn {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn param_count(&self) -> usize {
        self.params
    }

    fn push_forward(&self, theta: &[f64], points: &PointCloud) -> Result<PointCloud> {
        self.check_points(points)?;
        let w = self.weights(theta)?;
        let mut maps = PointCloud::zeros(points.len(), self.spec.input_dim);
        for (x, t) in points.rows().zip(maps.rows_mut()) {
            self.check_point(x)?;
            let trace = self.forward(&w, x)?;
            self.gradient_from(&w, &trace, t)?;
        }
        Ok(maps)
    }

    fn loss_param_gradient(
        &self,
        theta: &[f64],
        points: &PointCloud,
        cotangents: &PointCloud,
    ) -> Result<Vec<f64>> {
        self.check_points(points)?;
        points.check_same_shape(cotangents)?;
        if !cotangents.is_finite() {
            return Err(Error::NonFinite("cotangents".into()));
        }
        let w = self.weights(theta)?;
        let scale = 1.0 / points.len() as f64;
        let mut grad = vec![0.0; self.params];
        for (x, c) in points.rows().zip(cotangents.rows()) {
            self.check_point(x)?;
            let trace = self.forward(&w, x)?;
            self.accumulate_vjp(&w, &trace, x, c, scale, &mut grad);
        }
        Ok(grad)
    }

    fn param_jacobians(&self, theta: &[f64], points: &PointCloud) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.transport_batch(theta, points, true)?.param_jacobians.unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn count_by_hand(d: usize, widths: &[usize]) -> usize {
        let mut total = 0;
        let mut prev = 0;
        for &w in widths {
            total += w * prev + w * d + w;
            prev = w;
        }
        total + prev + 1
    }

    #[test]
    fn param_counts() {
        assert_eq!(param_count(&IcnnSpec::new(2, vec![20, 20])).unwrap(), 541);
        assert_eq!(param_count(&IcnnSpec::new(1, vec![1])).unwrap(), 4);
        assert_eq!(param_count(&IcnnSpec::new(3, vec![5, 5])).unwrap(), 71);
        for (d, w) in [(4, vec![3, 7, 2]), (1, vec![9]), (5, vec![1, 1])] {
            assert_eq!(param_count(&IcnnSpec::new(d, w.clone())).unwrap(), count_by_hand(d, &w));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(param_count(&IcnnSpec::new(2, vec![20, 0])), Err(Error::InvalidSpec(_))));
        assert!(param_count(&IcnnSpec::new(0, vec![3])).is_err());
        assert!(param_count(&IcnnSpec::new(2, vec![])).is_err());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let net = Icnn::new(IcnnSpec::new(2, vec![20, 20])).unwrap();
        let a = net.init_params(&mut ChaCha20Rng::seed_from_u64(0));
        let b = net.init_params(&mut ChaCha20Rng::seed_from_u64(0));
        let c = net.init_params(&mut ChaCha20Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_network_is_constant() {
        let net = Icnn::new(IcnnSpec::new(2, vec![4, 3])).unwrap();
        let mut theta = vec![0.0; net.param_count()];
        for i in net.positive_coordinates() {
            theta[i] = -800.0;
        }
        theta[net.param_count() - 1] = 1.5;
        for x in [[0.0, 0.0], [3.0, -1.0], [-7.0, 2.5]] {
            assert_eq!(net.potential(&theta, &x).unwrap(), 1.5);
            assert_eq!(net.transport(&theta, &x).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn near_identity_map_by_hand() {
        // Two mirrored units give T(x) = u w tanh(w x / 2) ≈ x for small w.
        let net = Icnn::new(IcnnSpec::new(1, vec![2])).unwrap();
        let w = 1e-3;
        let u = PositivityMap::Softplus.inverse(2.0 / (w * w));
        let theta = vec![w, -w, 0.0, 0.0, u, u, 0.0];
        for x in [-2.0, -0.5, 0.0, 0.3, 1.0, 2.0] {
            let t = net.transport(&theta, &[x]).unwrap()[0];
            assert!((t - x).abs() < 1e-6, "T({x}) = {t}");
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let net = Icnn::new(IcnnSpec::new(2, vec![3])).unwrap();
        let theta = vec![0.0; net.param_count()];
        assert!(matches!(
            net.potential(&theta, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn non_finite_intermediate_names_layer() {
        let net = Icnn::new(IcnnSpec::new(1, vec![2, 2])).unwrap();
        let mut theta = vec![0.0; net.param_count()];
        theta[0] = 1e308;
        let err = net.transport(&theta, &[1e10]).unwrap_err();
        assert!(err.to_string().contains("hidden layer 1"), "{err}");
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
        for w in [1e-6, 0.3, 4.0, 40.0] {
            let r = PositivityMap::Softplus.inverse(w);
            assert!((softplus(r) - w).abs() <= 1e-12 * w.max(1.0));
        }
    }
}
