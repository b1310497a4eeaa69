use nalgebra::{DMatrix, DVector};

use super::{
    check_batch, check_reg, log1p_exp, sigmoid, Capabilities, GlmStructure, LinkDerivatives,
    Minibatch, Objective,
};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// `f(θ) = c·Σᵢ log(1 + exp(−yᵢθᵀxᵢ)) + λ‖θ‖²` with `yᵢ ∈ {−1, +1}`.
#[derive(Clone, Debug)]
pub struct Logistic {
    x: DMatrix<f64>,
    y: DVector<f64>,
    reg: f64,
    scale: f64,
}

pub fn make_logistic(data: &Dataset, reg_strength: f64) -> Result<Logistic> {
    check_reg(reg_strength)?;
    check_labels(data.labels())?;
    Ok(Logistic {
        x: data.features().clone(),
        y: data.labels().clone(),
        reg: reg_strength,
        scale: 1.0,
    })
}

fn check_labels(y: &DVector<f64>) -> Result<()> {
    match y.iter().position(|&v| v != 1.0 && v != -1.0) {
        Some(index) => Err(Error::BadLabels {
            index,
            value: y[index],
        }),
        None => Ok(()),
    }
}

/// Mean log loss of the point estimate over every row of `data`.
pub fn test_log_loss(theta: &DVector<f64>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    if theta.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: theta.len(),
        });
    }
    check_labels(data.labels())?;
    let z = data.features() * theta;
    let total: f64 = z
        .iter()
        .zip(data.labels().iter())
        .map(|(z, y)| log1p_exp(-y * z))
        .sum();
    Ok(total / data.len() as f64)
}

impl Logistic {
    pub fn features(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn reg_strength(&self) -> f64 {
        self.reg
    }

    fn margins(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.x * theta
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::VALUE
            | Capabilities::GRAD
            | Capabilities::HESS
            | Capabilities::HESS_DIAG
            | Capabilities::GLM
            | Capabilities::MINIBATCH
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let z = self.margins(theta);
        let data: f64 = z.iter().zip(self.y.iter()).map(|(z, y)| log1p_exp(-y * z)).sum();
        self.scale * data + self.reg * theta.norm_squared()
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.margins(theta);
        let w = DVector::from_fn(z.len(), |i, _| -self.y[i] * sigmoid(-self.y[i] * z[i]));
        Ok(self.x.tr_mul(&w) * self.scale + theta * (2.0 * self.reg))
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let z = self.margins(theta);
        let mut weighted = self.x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= sigmoid(z[i]) * sigmoid(-z[i]);
        }
        let mut h = self.x.tr_mul(&weighted) * self.scale;
        for d in 0..self.dim() {
            h[(d, d)] += 2.0 * self.reg;
        }
        Ok(h)
    }

    fn hessian_diag(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.margins(theta);
        Ok(DVector::from_fn(self.dim(), |d, _| {
            let s: f64 = (0..self.x.nrows())
                .map(|i| sigmoid(z[i]) * sigmoid(-z[i]) * self.x[(i, d)] * self.x[(i, d)])
                .sum();
            self.scale * s + 2.0 * self.reg
        }))
    }

    fn glm(&self) -> Option<&dyn GlmStructure> {
        Some(self)
    }

    fn minibatch(&self) -> Option<&dyn Minibatch> {
        Some(self)
    }
}

impl GlmStructure for Logistic {
    fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    fn example_scale(&self) -> f64 {
        self.scale
    }

    fn link(&self, i: usize, z: f64) -> LinkDerivatives {
        let y = self.y[i];
        LinkDerivatives {
            value: log1p_exp(-y * z),
            d1: -y * sigmoid(-y * z),
            d2: sigmoid(z) * sigmoid(-z),
        }
    }

    fn ridge(&self) -> f64 {
        self.reg
    }
}

impl Minibatch for Logistic {
    fn num_examples(&self) -> usize {
        self.x.nrows()
    }

    fn batch(&self, indices: &[usize]) -> Result<Box<dyn Objective>> {
        check_batch(indices, self.num_examples())?;
        Ok(Box::new(Logistic {
            x: self.x.select_rows(indices),
            y: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i])),
            reg: self.reg,
            scale: self.scale * self.num_examples() as f64 / indices.len() as f64,
        }))
    }
}
