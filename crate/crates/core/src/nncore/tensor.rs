use ndarray::Array2;

/// A named parameter block with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.value
            .iter()
            .chain(self.grad.iter())
            .all(|v| v.is_finite())
    }
}

/// Anything that owns parameter blocks, listed in a fixed order.
pub trait Params {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
