use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Stochastic gradient descent with a momentum term:
///
/// ```text
/// Δw(t) = −η · ∂L/∂w(t) + α · Δw(t−1)
/// w    += Δw(t)
/// ```
///
/// The velocity holds the previous delta `Δw(t−1)` for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    eta: f64,
    alpha: f64,
    velocity: Vec<Tensor>,
}

impl SgdMomentum {
    /// `eta ≥ 0` (zero freezes the weights), `0 ≤ alpha < 1`.
    pub fn new(eta: f64, alpha: f64, shapes: &[&[usize]]) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!(
                "learning rate must be non-negative, got {eta}"
            )));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "momentum weight must lie in [0, 1), got {alpha}"
            )));
        }
        let velocity = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        Ok(Self {
            eta,
            alpha,
            velocity,
        })
    }

    pub fn for_network(eta: f64, alpha: f64, net: &Network) -> Result<Self> {
        let params = net.params();
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        Self::new(eta, alpha, &shapes)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.velocity.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), v) in params.iter().zip(grads).zip(&self.velocity) {
            if p.shape() != g.shape() || p.shape() != v.shape() {
                return Err(Error::shape(format!(
                    "parameter {:?}, gradient {:?}, velocity {:?}",
                    p.shape(),
                    g.shape(),
                    v.shape()
                )));
            }
        }
        let (eta, alpha) = (self.eta, self.alpha);
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((w, &dw), vel) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                let delta = -eta * dw + alpha * *vel;
                *vel = delta;
                *w += delta;
            }
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut Network, grads: &[Tensor]) -> Result<()> {
        self.step(&mut net.params_mut(), grads)
    }
}
