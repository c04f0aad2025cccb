//! Losses the optimizers can descend: a network on a mini-batch, or simple
//! analytic functions used for oracles and demonstrations.

use crate::error::{Error, Result};
use crate::nn::{self, Batch, NetworkSpec, ParamVector};

/// Loss at a point, with the classification count when the objective has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub loss: f64,
    pub correct: Option<usize>,
    pub count: usize,
}

pub trait Objective {
    /// Parameter dimension D.
    fn dim(&self) -> usize;

    fn evaluate(&self, params: &[f64]) -> Result<Evaluated>;

    fn evaluate_with_gradient(&self, params: &[f64]) -> Result<(Evaluated, ParamVector)>;

    fn loss(&self, params: &[f64]) -> Result<f64> {
        Ok(self.evaluate(params)?.loss)
    }
}

/// A network's batch-mean loss on one mini-batch.
#[derive(Debug, Clone, Copy)]
pub struct NetworkObjective<'a> {
    pub spec: &'a NetworkSpec,
    pub batch: &'a Batch,
}

impl<'a> NetworkObjective<'a> {
    pub fn new(spec: &'a NetworkSpec, batch: &'a Batch) -> Self {
        Self { spec, batch }
    }
}

impl Objective for NetworkObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.num_params()
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluated> {
        let out = nn::forward(self.spec, params, self.batch)?;
        Ok(Evaluated {
            loss: out.loss,
            correct: Some(out.correct(&self.batch.labels)),
            count: self.batch.len(),
        })
    }

    fn evaluate_with_gradient(&self, params: &[f64]) -> Result<(Evaluated, ParamVector)> {
        let (out, g) = nn::gradient(self.spec, params, self.batch)?;
        Ok((
            Evaluated {
                loss: out.loss,
                correct: Some(out.correct(&self.batch.labels)),
                count: self.batch.len(),
            },
            g,
        ))
    }
}

/// `L(θ) = Σ_j a_j (θ_j − m_j)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub curvature: Vec<f64>,
    pub center: Vec<f64>,
}

impl Quadratic {
    /// `‖θ‖²` in `dim` dimensions.
    pub fn bowl(dim: usize) -> Self {
        Self {
            curvature: vec![1.0; dim],
            center: vec![0.0; dim],
        }
    }

    pub fn new(curvature: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        if curvature.len() != center.len() || curvature.is_empty() {
            return Err(Error::Shape("curvature and center must have equal non-zero length".into()));
        }
        Ok(Self { curvature, center })
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluated> {
        if params.len() != self.dim() {
            return Err(Error::Shape(format!("expected {} parameters", self.dim())));
        }
        let mut loss = 0.0;
        for ((a, m), x) in self.curvature.iter().zip(&self.center).zip(params) {
            loss += a * (x - m) * (x - m);
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index: 0 });
        }
        Ok(Evaluated {
            loss,
            correct: None,
            count: 1,
        })
    }

    fn evaluate_with_gradient(&self, params: &[f64]) -> Result<(Evaluated, ParamVector)> {
        let e = self.evaluate(params)?;
        let g = self
            .curvature
            .iter()
            .zip(&self.center)
            .zip(params)
            .map(|((a, m), x)| 2.0 * a * (x - m))
            .collect::<Vec<_>>();
        Ok((e, ParamVector(g)))
    }
}

/// Constant loss, independent of the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl Objective for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, _params: &[f64]) -> Result<Evaluated> {
        Ok(Evaluated {
            loss: self.value,
            correct: None,
            count: 1,
        })
    }

    fn evaluate_with_gradient(&self, params: &[f64]) -> Result<(Evaluated, ParamVector)> {
        Ok((self.evaluate(params)?, ParamVector::zeros(self.dim)))
    }
}
