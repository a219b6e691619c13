use ndarray::{Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{ParamTensor, Params};
use crate::error::{Error, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    /// Tanh approximation.
    Gelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalActivation {
    None,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Gelu => {
                let th = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
            }
        }
    }

    fn gain(self) -> f64 {
        match self {
            Activation::Relu | Activation::Gelu => std::f64::consts::SQRT_2,
            Activation::Tanh => 1.0,
        }
    }
}

impl FinalActivation {
    fn as_activation(self) -> Option<Activation> {
        match self {
            FinalActivation::None => None,
            FinalActivation::Tanh => Some(Activation::Tanh),
        }
    }
}

/// Layer widths including the input width, so `[100, 128, 20]` is two affine layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub final_activation: FinalActivation,
}

impl MlpSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        activation: Activation,
        final_activation: FinalActivation,
    ) -> Self {
        Self {
            layer_widths,
            activation,
            final_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config(format!(
                "zero width in {:?}",
                self.layer_widths
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    fn activation_at(&self, layer: usize) -> Option<Activation> {
        if layer + 1 == self.n_layers() {
            self.final_activation.as_activation()
        } else {
            Some(self.activation)
        }
    }

    /// Canonical text used in architecture hashes.
    pub fn describe(&self) -> String {
        let widths: Vec<String> = self.layer_widths.iter().map(|w| w.to_string()).collect();
        format!(
            "{}:{:?}:{:?}",
            widths.join("-"),
            self.activation,
            self.final_activation
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    weights: Vec<ParamTensor>,
    biases: Vec<ParamTensor>,
}

/// Per-layer inputs and pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Uniform fan-in initialisation with a ReLU gain where one follows; zero biases.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, name: &str, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut weights = Vec::with_capacity(spec.n_layers());
        let mut biases = Vec::with_capacity(spec.n_layers());
        for l in 0..spec.n_layers() {
            let (fan_in, fan_out) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
            let gain = spec.activation_at(l).map_or(1.0, Activation::gain);
            let bound = gain * (3.0 / fan_in as f64).sqrt();
            let w =
                Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
            weights.push(ParamTensor::new(format!("{name}.w{l}"), w));
            biases.push(ParamTensor::new(
                format!("{name}.b{l}"),
                Array2::zeros((1, fan_out)),
            ));
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    /// Builds a network from explicit `(in x out)` weights and `(1 x out)` biases.
    pub fn from_weights(
        spec: MlpSpec,
        name: &str,
        layers: Vec<(Array2<f64>, Array2<f64>)>,
    ) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.n_layers() {
            return Err(Error::Shape(format!(
                "{} layers for spec with {}",
                layers.len(),
                spec.n_layers()
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, (w, b)) in layers.into_iter().enumerate() {
            let want = (spec.layer_widths[l], spec.layer_widths[l + 1]);
            if w.dim() != want || b.dim() != (1, want.1) {
                return Err(Error::Shape(format!(
                    "layer {l}: weight {:?}, bias {:?}, want {want:?}",
                    w.dim(),
                    b.dim()
                )));
            }
            weights.push(ParamTensor::new(format!("{name}.w{l}"), w));
            biases.push(ParamTensor::new(format!("{name}.b{l}"), b));
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weight(&self, layer: usize) -> &ParamTensor {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &ParamTensor {
        &self.biases[layer]
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if x.ncols() != self.spec.input_width() {
            return Err(Error::Shape(format!(
                "{}: input width {} but network expects {}",
                self.weights[0].name,
                x.ncols(),
                self.spec.input_width()
            )));
        }
        let mut inputs = Vec::with_capacity(self.spec.n_layers());
        let mut pre = Vec::with_capacity(self.spec.n_layers());
        let mut h = x.clone();
        for l in 0..self.spec.n_layers() {
            let z = h.dot(&self.weights[l].value) + &self.biases[l].value;
            let out = match self.spec.activation_at(l) {
                Some(act) => z.mapv(|v| act.apply(v)),
                None => z.clone(),
            };
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok((h, MlpCache { inputs, pre }))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&mut self, cache: &MlpCache, upstream: &Array2<f64>) -> Result<Array2<f64>> {
        if cache.pre.len() != self.spec.n_layers() {
            return Err(Error::Shape("cache does not come from this network".into()));
        }
        let last = &cache.pre[self.spec.n_layers() - 1];
        if upstream.dim() != last.dim() {
            return Err(Error::Shape(format!(
                "upstream {:?} vs output {:?}",
                upstream.dim(),
                last.dim()
            )));
        }
        let mut g = upstream.clone();
        for l in (0..self.spec.n_layers()).rev() {
            if let Some(act) = self.spec.activation_at(l) {
                Zip::from(&mut g)
                    .and(&cache.pre[l])
                    .for_each(|g, &z| *g *= act.derivative(z));
            }
            self.weights[l].grad += &cache.inputs[l].t().dot(&g);
            self.biases[l].grad += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
            g = g.dot(&self.weights[l].value.t());
        }
        Ok(g)
    }
}

impl Params for Mlp {
    fn params(&self) -> Vec<&ParamTensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{gradient_check, GradCheckConfig};
    use crate::rng::{stream, Domain};
    use ndarray::array;

    fn random_input(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, Domain::Init, 99);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    // Oracle: scalar loops over plain Vec<Vec<f64>>.
    fn naive_forward(net: &Mlp, x: &Array2<f64>) -> Vec<Vec<f64>> {
        let spec = net.spec();
        let mut rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        for l in 0..spec.n_layers() {
            let w = &net.weight(l).value;
            let b = &net.bias(l).value;
            rows = rows
                .iter()
                .map(|r| {
                    (0..w.ncols())
                        .map(|j| {
                            let mut s = b[[0, j]];
                            for (i, &v) in r.iter().enumerate() {
                                s += v * w[[i, j]];
                            }
                            let last = l + 1 == spec.n_layers();
                            match (last, spec.final_activation) {
                                (true, FinalActivation::None) => s,
                                (true, FinalActivation::Tanh) => s.tanh(),
                                (false, _) => match spec.activation {
                                    Activation::Relu => {
                                        if s > 0.0 {
                                            s
                                        } else {
                                            0.0
                                        }
                                    }
                                    Activation::Tanh => s.tanh(),
                                    Activation::Gelu => {
                                        0.5 * s
                                            * (1.0
                                                + ((2.0 / std::f64::consts::PI).sqrt()
                                                    * (s + 0.044715 * s.powi(3)))
                                                .tanh())
                                    }
                                },
                            }
                        })
                        .collect()
                })
                .collect();
        }
        rows
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::new(vec![4, 3, 2], Activation::Relu, FinalActivation::None);
        let net = Mlp::from_weights(
            spec,
            "z",
            vec![
                (Array2::zeros((4, 3)), Array2::zeros((1, 3))),
                (Array2::zeros((3, 2)), Array2::zeros((1, 2))),
            ],
        )
        .unwrap();
        assert!(net
            .predict(&random_input(5, 4, 0))
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let spec = MlpSpec::new(vec![3, 3], Activation::Relu, FinalActivation::None);
        let net =
            Mlp::from_weights(spec, "id", vec![(Array2::eye(3), Array2::zeros((1, 3)))]).unwrap();
        let x = random_input(4, 3, 1);
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn forward_matches_naive_loops() {
        for (act, fin) in [
            (Activation::Relu, FinalActivation::None),
            (Activation::Tanh, FinalActivation::Tanh),
            (Activation::Gelu, FinalActivation::None),
        ] {
            let spec = MlpSpec::new(vec![7, 9, 6, 3], act, fin);
            let net = Mlp::new(spec, "n", &mut stream(3, Domain::Init, 0)).unwrap();
            let x = random_input(5, 7, 2);
            let fast = net.predict(&x).unwrap();
            let slow = naive_forward(&net, &x);
            for (i, row) in slow.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert!((fast[[i, j]] - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = Mlp::new(
            MlpSpec::new(vec![4, 2], Activation::Relu, FinalActivation::None),
            "n",
            &mut stream(0, Domain::Init, 0),
        )
        .unwrap();
        assert!(matches!(
            net.forward(&Array2::zeros((2, 5))),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut net = Mlp::new(
            MlpSpec::new(vec![4, 5, 2], Activation::Tanh, FinalActivation::None),
            "n",
            &mut stream(0, Domain::Init, 0),
        )
        .unwrap();
        let (y, cache) = net.forward(&random_input(3, 4, 0)).unwrap();
        let dx = net.backward(&cache, &Array2::zeros(y.raw_dim())).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert!(net
            .params()
            .iter()
            .all(|p| p.grad.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_input_gradient_is_transpose_chain() {
        let w0 = array![[1.0, 2.0, 0.5], [-1.0, 0.0, 3.0]];
        let w1 = array![[0.5, -2.0], [1.5, 1.0], [0.0, 4.0]];
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu, FinalActivation::None);
        let spec = MlpSpec {
            activation: Activation::Relu,
            ..spec
        };
        // With positive pre-activations the ReLU is the identity, so use inputs that keep them positive.
        let mut net = Mlp::from_weights(
            spec,
            "lin",
            vec![
                (w0.clone(), array![[10.0, 10.0, 10.0]]),
                (w1.clone(), array![[0.0, 0.0]]),
            ],
        )
        .unwrap();
        let x = array![[0.3, 0.2]];
        let (_, cache) = net.forward(&x).unwrap();
        let up = array![[1.0, -0.5]];
        let dx = net.backward(&cache, &up).unwrap();
        let expected = up.dot(&w1.t()).dot(&w0.t());
        for (a, b) in dx.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn relu_propagates_nan() {
        assert!(Activation::Relu.apply(f64::NAN).is_nan());
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Relu, Activation::Tanh, Activation::Gelu] {
            let spec = MlpSpec::new(vec![6, 8, 5, 3], act, FinalActivation::Tanh);
            let mut net = Mlp::new(spec, "n", &mut stream(4, Domain::Init, 0)).unwrap();
            let x = random_input(7, 6, 5);
            let target = random_input(7, 3, 6);
            let report = gradient_check(
                &mut net,
                |net: &mut Mlp| {
                    let (y, cache) = net.forward(&x)?;
                    let diff = &y - &target;
                    net.backward(&cache, &diff)?;
                    Ok(0.5 * diff.mapv(|v| v * v).sum())
                },
                &GradCheckConfig {
                    tolerance: 1e-6,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(report.passed, "{act:?}: {report:?}");
        }
    }
}
