use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::head::{self, HeadLayout, Scratch};
use super::rff::{median_heuristic, RffMap};
use super::standardizer::Standardizer;
use super::{Activation, ModelConfig};
use crate::error::{invalid, Error, Result};
use crate::math::softplus_inverse;
use crate::mixture::{GaussianMixtureDensity, CHOL_DIAG_FLOOR};
use crate::prior::ParamSpace;
use crate::rng::RandomStream;
use crate::trajectory::SummaryVector;

/// Initial per-dimension σ of each component in standardized space.
pub const INIT_SIGMA: f64 = 0.5;
/// Half-width of the uniform draw for initial component means.
pub const INIT_MEAN_SPREAD: f64 = 0.5;
const HEAD_WEIGHT_GAIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Dense {
    input: usize,
    output: usize,
    offset: usize,
}

impl Dense {
    fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.output, self.input), &params[self.offset..self.offset + self.output * self.input])
            .expect("layer shape")
    }

    fn bias<'a>(&self, params: &'a [f64]) -> ArrayView1<'a, f64> {
        let start = self.offset + self.output * self.input;
        ArrayView1::from(&params[start..start + self.output])
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.output * self.input
    }

    fn size(&self) -> usize {
        self.output * (self.input + 1)
    }

    fn apply(&self, params: &[f64], x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights(params).t());
        z += &self.bias(params);
        z
    }
}

/// Conditional Gaussian-mixture density `q(θ | summary)`.
///
/// The network works in standardized coordinates on both sides; [`forward`]
/// maps the resulting mixture back to raw parameter units.
///
/// [`forward`]: ConditionalDensityModel::forward
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDensityModel {
    config: ModelConfig,
    input_dim: usize,
    layout: HeadLayout,
    standardizer: Standardizer,
    summarizer_id: String,
    rff: Option<RffMap>,
    rff_stream: RandomStream,
    /// MLP trunk layers followed by the linear head.
    layers: Vec<Dense>,
    params: Vec<f64>,
}

impl ConditionalDensityModel {
    /// Fresh model with an unfitted standardizer.
    pub fn new(
        config: ModelConfig,
        input_dim: usize,
        space: &ParamSpace,
        summarizer_id: impl Into<String>,
        stream: &RandomStream,
    ) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(invalid("model input dimension must be positive"));
        }
        let d = space.dim();
        let layout = HeadLayout::new(config.components(), d);
        let rff_stream = stream.child("rff");
        let (rff, trunk_out) = match &config {
            ModelConfig::Mdnn(c) => (None, *c.hidden_sizes.last().expect("validated")),
            ModelConfig::Mdrff(c) => (
                Some(RffMap::new(c.n_features, input_dim, c.bandwidth.unwrap_or(1.0), &rff_stream)?),
                c.n_features,
            ),
        };
        let mut layers = Vec::new();
        let mut offset = 0;
        if let ModelConfig::Mdnn(c) = &config {
            let mut input = input_dim;
            for &h in &c.hidden_sizes {
                let layer = Dense {
                    input,
                    output: h,
                    offset,
                };
                offset += layer.size();
                layers.push(layer);
                input = h;
            }
        }
        let head_layer = Dense {
            input: trunk_out,
            output: layout.size(),
            offset,
        };
        offset += head_layer.size();
        layers.push(head_layer);
        let mut model = Self {
            config,
            input_dim,
            layout,
            standardizer: Standardizer::for_space(space),
            summarizer_id: summarizer_id.into(),
            rff,
            rff_stream,
            layers,
            params: vec![0.0; offset],
        };
        model.reinitialize(&stream.child("weights"));
        Ok(model)
    }

    /// New model with its standardizer (and RFF bandwidth, if unset) fitted to `summaries`.
    pub fn init(
        config: ModelConfig,
        summaries: &Array2<f64>,
        space: &ParamSpace,
        summarizer_id: impl Into<String>,
        stream: &RandomStream,
    ) -> Result<Self> {
        let mut model = Self::new(config, summaries.ncols(), space, summarizer_id, stream)?;
        model.fit_standardizer(summaries)?;
        Ok(model)
    }

    pub fn fit_standardizer(&mut self, summaries: &Array2<f64>) -> Result<()> {
        if summaries.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: summaries.ncols(),
            });
        }
        self.standardizer.fit_inputs(summaries)?;
        if let ModelConfig::Mdrff(c) = &self.config {
            if c.bandwidth.is_none() {
                let z = self.standardizer.standardize_inputs(summaries)?;
                let sigma = median_heuristic(&z)?;
                self.rff = Some(RffMap::new(c.n_features, self.input_dim, sigma, &self.rff_stream)?);
            }
        }
        Ok(())
    }

    /// Redraws every trainable weight; the standardizer and RFF map are kept.
    pub fn reinitialize(&mut self, stream: &RandomStream) {
        let mut rng = stream.rng();
        let n_layers = self.layers.len();
        let relu = matches!(&self.config, ModelConfig::Mdnn(c) if c.activation == Activation::Relu);
        for (li, layer) in self.layers.iter().enumerate() {
            let is_head = li + 1 == n_layers;
            let limit = if is_head {
                HEAD_WEIGHT_GAIN * (6.0 / (layer.input + layer.output) as f64).sqrt()
            } else if relu {
                (6.0 / layer.input as f64).sqrt()
            } else {
                (6.0 / (layer.input + layer.output) as f64).sqrt()
            };
            for w in &mut self.params[layer.offset..layer.bias_offset()] {
                *w = rng.gen_range(-limit..=limit);
            }
            for b in &mut self.params[layer.bias_offset()..layer.bias_offset() + layer.output] {
                *b = 0.0;
            }
        }
        let head = *self.layers.last().expect("head layer");
        let layout = self.layout;
        // zero logit rows: uniform initial weights regardless of input
        for k in 0..layout.components {
            let row = head.offset + layout.logit(k) * head.input;
            self.params[row..row + head.input].fill(0.0);
        }
        let bias = head.bias_offset();
        let raw_sigma = softplus_inverse(INIT_SIGMA - CHOL_DIAG_FLOOR);
        for k in 0..layout.components {
            for i in 0..layout.dim {
                self.params[bias + layout.mean(k, i)] = rng.gen_range(-INIT_MEAN_SPREAD..=INIT_MEAN_SPREAD);
                self.params[bias + layout.raw_diag(k, i)] = raw_sigma;
            }
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layout.dim
    }

    pub fn components(&self) -> usize {
        self.layout.components
    }

    pub fn head_layout(&self) -> HeadLayout {
        self.layout
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn summarizer_id(&self) -> &str {
        &self.summarizer_id
    }

    pub fn rff(&self) -> Option<&RffMap> {
        self.rff.as_ref()
    }

    /// Trainable parameters, flattened.
    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_parameters(&self) -> usize {
        self.params.len()
    }

    /// Offset of the head's bias vector inside [`parameters`](Self::parameters);
    /// entry `offset + i` biases head output `i` (see [`HeadLayout`]).
    pub fn head_bias_offset(&self) -> usize {
        self.layers.last().expect("head layer").bias_offset()
    }

    /// Head weight matrix block as `(offset, rows, cols)`, row-major.
    pub fn head_weight_block(&self) -> (usize, usize, usize) {
        let h = self.layers.last().expect("head layer");
        (h.offset, h.output, h.input)
    }

    fn activation(&self) -> Activation {
        match &self.config {
            ModelConfig::Mdnn(c) => c.activation,
            ModelConfig::Mdrff(_) => Activation::Tanh,
        }
    }

    /// Per-layer activations; the last entry is the raw head output.
    fn forward_cache(&self, xs: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let trunk_in = match &self.rff {
            Some(map) => map.transform(xs),
            None => xs.clone(),
        };
        acts.push(trunk_in);
        let act = self.activation();
        let n = self.layers.len();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(&self.params, acts.last().expect("input"));
            if li + 1 < n {
                z.mapv_inplace(|v| act.apply(v));
            }
            acts.push(z);
        }
        Ok(acts)
    }

    fn check_fitted(&self) -> Result<()> {
        if !self.standardizer.is_fitted() {
            return Err(Error::UnfittedStandardizer);
        }
        if self.rff.is_none() && matches!(self.config, ModelConfig::Mdrff(_)) {
            return Err(Error::UnfittedStandardizer);
        }
        Ok(())
    }

    /// Mixture over the standardized output space for an already standardized input.
    pub fn forward_standardized(&self, x_std: ArrayView1<'_, f64>) -> Result<GaussianMixtureDensity> {
        self.check_fitted()?;
        let xs = x_std.to_owned().insert_axis(Axis(0));
        let acts = self.forward_cache(&xs)?;
        let out = acts.last().expect("head output").row(0).to_vec();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output".into()));
        }
        head::to_mixture(&self.layout, &head::decode(&self.layout, &out))
    }

    /// `q(θ | summary)` in raw parameter units.
    pub fn forward(&self, summary: &SummaryVector) -> Result<GaussianMixtureDensity> {
        self.forward_values(ArrayView1::from(&summary.values))
    }

    pub fn forward_values(&self, summary: ArrayView1<'_, f64>) -> Result<GaussianMixtureDensity> {
        self.check_fitted()?;
        let x = self.standardizer.standardize_input(summary)?;
        let std_mix = self.forward_standardized(x.view())?;
        std_mix.affine(self.standardizer.output_scale(), self.standardizer.output_center())
    }

    fn standardize_batch(&self, summaries: &Array2<f64>, thetas: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_fitted()?;
        if summaries.nrows() != thetas.nrows() {
            return Err(invalid("summaries and thetas have different row counts"));
        }
        if summaries.nrows() == 0 {
            return Err(invalid("nll_loss needs a non-empty batch"));
        }
        if thetas.ncols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: thetas.ncols(),
            });
        }
        let xs = self.standardizer.standardize_inputs(summaries)?;
        let mut ys = thetas.clone();
        for mut row in ys.rows_mut() {
            let y = self.standardizer.to_standard(row.as_slice().expect("row"));
            row.assign(&ArrayView1::from(&y));
        }
        Ok((xs, ys))
    }

    /// Mean negative log-likelihood in standardized space.
    pub fn nll_loss(&self, summaries: &Array2<f64>, thetas: &Array2<f64>) -> Result<f64> {
        let (xs, ys) = self.standardize_batch(summaries, thetas)?;
        self.loss_standardized(&xs, &ys, false).map(|(l, _)| l)
    }

    /// Mean NLL and its gradient with respect to [`parameters`](Self::parameters).
    pub fn nll_loss_and_grad(&self, summaries: &Array2<f64>, thetas: &Array2<f64>) -> Result<(f64, Vec<f64>)> {
        let (xs, ys) = self.standardize_batch(summaries, thetas)?;
        self.loss_standardized(&xs, &ys, true)
    }

    pub(crate) fn standardized_data(&self, summaries: &Array2<f64>, thetas: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.standardize_batch(summaries, thetas)
    }

    pub(crate) fn loss_standardized(&self, xs: &Array2<f64>, ys: &Array2<f64>, with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let b = xs.nrows();
        if b == 0 {
            return Err(invalid("nll_loss needs a non-empty batch"));
        }
        let ys = ys.as_standard_layout();
        let acts = self.forward_cache(xs)?;
        let out = acts.last().expect("head output").as_standard_layout();
        let mut scratch = Scratch::new(&self.layout);
        let mut d_out = if with_grad {
            Array2::zeros(out.raw_dim())
        } else {
            Array2::zeros((0, 0))
        };
        let scale = 1.0 / b as f64;
        let mut total = 0.0;
        for i in 0..b {
            let o = out.row(i);
            let y = ys.row(i);
            let grad = if with_grad {
                Some((d_out.row_mut(i).into_slice().expect("row"), scale))
            } else {
                None
            };
            let v = head::nll(
                &self.layout,
                o.as_slice().expect("row"),
                y.as_slice().expect("row"),
                &mut scratch,
                grad,
            );
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss { index: i });
            }
            total += v;
        }
        let loss = total * scale;
        if !with_grad {
            return Ok((loss, Vec::new()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let act = self.activation();
        let mut delta = d_out;
        for li in (0..self.layers.len()).rev() {
            let layer = self.layers[li];
            let input = &acts[li];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            grad[layer.offset..layer.bias_offset()]
                .iter_mut()
                .zip(gw.iter())
                .for_each(|(g, v)| *g = *v);
            grad[layer.bias_offset()..layer.bias_offset() + layer.output]
                .iter_mut()
                .zip(gb.iter())
                .for_each(|(g, v)| *g = *v);
            if li == 0 {
                break;
            }
            let mut d_in = delta.dot(&layer.weights(&self.params));
            // input to this layer is the activated output of the previous one
            d_in.zip_mut_with(input, |d, &h| *d *= act.derivative_from_output(h));
            delta = d_in;
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{MdnnConfig, MdrffConfig};
    use ndarray::array;

    fn space(d: usize) -> ParamSpace {
        ParamSpace::from_bounds((0..d).map(|i| (format!("p{i}"), -1.0, 1.0))).unwrap()
    }

    fn mdnn(hidden: Vec<usize>, k: usize) -> ModelConfig {
        ModelConfig::Mdnn(MdnnConfig {
            hidden_sizes: hidden,
            activation: Activation::Tanh,
            components: k,
        })
    }

    fn toy_data(n: usize, f: usize, d: usize) -> (Array2<f64>, Array2<f64>) {
        let mut rng = RandomStream::new(4, "toy").rng();
        let thetas = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let summaries = Array2::from_shape_fn((n, f), |(i, j)| thetas[[i, j % d]] * (j + 1) as f64 + rng.gen_range(-0.1..0.1));
        (summaries, thetas)
    }

    #[test]
    fn fresh_model_has_uniform_weights() {
        let (x, _) = toy_data(20, 3, 2);
        let m = ConditionalDensityModel::init(mdnn(vec![8], 4), &x, &space(2), "id", &RandomStream::new(1, "m")).unwrap();
        let mix = m.forward_values(x.row(3)).unwrap();
        assert!(mix.weights().iter().all(|w| (w - 0.25).abs() < 1e-6));
        assert_eq!(mix, m.forward_values(x.row(3)).unwrap());
    }

    #[test]
    fn unfitted_model_refuses_forward() {
        let m = ConditionalDensityModel::new(mdnn(vec![4], 1), 2, &space(1), "id", &RandomStream::new(1, "m")).unwrap();
        assert!(matches!(m.forward_values(array![0.0, 1.0].view()), Err(Error::UnfittedStandardizer)));
    }

    #[test]
    fn raw_logpdf_is_standardized_plus_jacobian() {
        let (x, _) = toy_data(30, 3, 2);
        let sp = ParamSpace::from_bounds([("a", 0.5, 2.0), ("b", 0.3, 1.5)]).unwrap();
        let m = ConditionalDensityModel::init(mdnn(vec![8], 3), &x, &sp, "id", &RandomStream::new(2, "m")).unwrap();
        let raw = m.forward_values(x.row(0)).unwrap();
        let xs = m.standardizer().standardize_input(x.row(0)).unwrap();
        let std_mix = m.forward_standardized(xs.view()).unwrap();
        let theta = [1.1, 0.8];
        let y = m.standardizer().to_standard(&theta);
        let jac = (2.0f64 / 1.5).ln() + (2.0f64 / 1.2).ln();
        assert_close!(raw.logpdf(&theta).unwrap(), std_mix.logpdf(&y).unwrap() + jac, 1e-10);
    }

    #[test]
    fn forced_standard_normal_loss() {
        let d = 2;
        let (x, _) = toy_data(10, 3, d);
        let mut m = ConditionalDensityModel::init(mdnn(vec![4], 1), &x, &space(d), "id", &RandomStream::new(3, "m")).unwrap();
        let (w_off, rows, cols) = m.head_weight_block();
        m.parameters_mut()[w_off..w_off + rows * cols].fill(0.0);
        let bias = m.head_bias_offset();
        let layout = m.head_layout();
        for i in 0..d {
            m.parameters_mut()[bias + layout.mean(0, i)] = 0.0;
            m.parameters_mut()[bias + layout.raw_diag(0, i)] = softplus_inverse(1.0 - CHOL_DIAG_FLOOR);
        }
        let thetas = Array2::zeros((10, d));
        let loss = m.nll_loss(&x, &thetas).unwrap();
        assert_close!(loss, d as f64 / 2.0 * crate::math::LN_2PI, 1e-9);
    }

    #[test]
    fn loss_is_mean_of_per_example_logpdf() {
        let (x, t) = toy_data(12, 4, 2);
        let sp = space(2);
        let m = ConditionalDensityModel::init(mdnn(vec![6, 5], 3), &x, &sp, "id", &RandomStream::new(5, "m")).unwrap();
        let loss = m.nll_loss(&x, &t).unwrap();
        let jac = m.standardizer().log_jacobian();
        let mean: f64 = (0..12)
            .map(|i| -(m.forward_values(x.row(i)).unwrap().logpdf(t.row(i).as_slice().unwrap()).unwrap() + jac))
            .sum::<f64>()
            / 12.0;
        assert_close!(loss, mean, 1e-10);

        let dup_x = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let dup_t = ndarray::concatenate(Axis(0), &[t.view(), t.view()]).unwrap();
        assert_close!(m.nll_loss(&dup_x, &dup_t).unwrap(), loss, 1e-12);
    }

    #[test]
    fn mdrff_uses_median_bandwidth_and_frozen_map() {
        let (x, _) = toy_data(40, 3, 1);
        let cfg = ModelConfig::Mdrff(MdrffConfig {
            n_features: 16,
            bandwidth: None,
            components: 2,
        });
        let m = ConditionalDensityModel::init(cfg, &x, &space(1), "id", &RandomStream::new(6, "m")).unwrap();
        let z = m.standardizer().standardize_inputs(&x).unwrap();
        assert_eq!(m.rff().unwrap().bandwidth(), median_heuristic(&z).unwrap());
        assert_eq!(m.n_parameters(), 17 * HeadLayout::new(2, 1).size());
    }

    #[test]
    fn empty_batch_and_shape_errors() {
        let (x, t) = toy_data(10, 3, 2);
        let m = ConditionalDensityModel::init(mdnn(vec![4], 1), &x, &space(2), "id", &RandomStream::new(3, "m")).unwrap();
        assert!(m.nll_loss(&Array2::zeros((0, 3)), &Array2::zeros((0, 2))).is_err());
        assert!(m.nll_loss(&x, &t.slice(ndarray::s![.., ..1]).to_owned()).is_err());
    }
}
