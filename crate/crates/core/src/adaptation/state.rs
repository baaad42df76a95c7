use nalgebra::{DMatrix, DVector};

use super::mirror::MirrorMap;
use crate::error::{check_dim, Result};

/// Physical and model parameter estimates, stored as mirror-map duals.
#[derive(Clone, Debug)]
pub struct AdaptState {
    pub map_p: MirrorMap,
    pub map_m: MirrorMap,
    dual_p: Vec<f64>,
    dual_m: Vec<f64>,
    alpha_p: Vec<f64>,
    alpha_m: Vec<f64>,
}

impl AdaptState {
    pub fn new(alpha_p0: &[f64], alpha_m0: &[f64], map_p: MirrorMap, map_m: MirrorMap) -> Result<Self> {
        map_p.validate()?;
        map_m.validate()?;
        let dual_p = map_p.to_dual(alpha_p0);
        let dual_m = map_m.to_dual(alpha_m0);
        let mut s =
            Self { map_p, map_m, alpha_p: vec![0.0; dual_p.len()], alpha_m: vec![0.0; dual_m.len()], dual_p, dual_m };
        s.refresh()?;
        Ok(s)
    }

    pub fn zeros(p: usize, m: usize, map_p: MirrorMap, map_m: MirrorMap) -> Result<Self> {
        Self::new(&vec![0.0; p], &vec![0.0; m], map_p, map_m)
    }

    fn refresh(&mut self) -> Result<()> {
        self.map_p.to_primal_into(&self.dual_p, &mut self.alpha_p)?;
        self.map_m.to_primal_into(&self.dual_m, &mut self.alpha_m)
    }

    pub fn alpha_p(&self) -> &[f64] {
        &self.alpha_p
    }
    pub fn alpha_m(&self) -> &[f64] {
        &self.alpha_m
    }
    pub fn dual_p(&self) -> &[f64] {
        &self.dual_p
    }
    pub fn dual_m(&self) -> &[f64] {
        &self.dual_m
    }

    /// Forward-Euler step of the duals followed by the inverse mirror map.
    pub fn step(&mut self, rate_p: &[f64], rate_m: &[f64], dt: f64) -> Result<()> {
        check_dim("physical dual rate", self.dual_p.len(), rate_p.len())?;
        check_dim("model dual rate", self.dual_m.len(), rate_m.len())?;
        for (d, r) in self.dual_p.iter_mut().zip(rate_p) {
            *d += dt * r;
        }
        for (d, r) in self.dual_m.iter_mut().zip(rate_m) {
            *d += dt * r;
        }
        self.refresh()
    }
}

/// Dual rates `(-slope Y^T g_e^T gradQ, -slope Psi^T g_e^T gradQ)`.
pub fn parametric_update_duals(
    state: &AdaptState,
    y: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    g_e: &DMatrix<f64>,
    grad_q: &DVector<f64>,
    slope: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(slope >= 0.0) {
        return Err(crate::Error::InvalidArgument(format!("slope must be nonnegative, got {slope}")));
    }
    check_dim("Y columns", state.dual_p.len(), y.ncols())?;
    check_dim("Psi columns", state.dual_m.len(), psi.ncols())?;
    check_dim("g_e rows", grad_q.len(), g_e.nrows())?;
    check_dim("Y rows", g_e.ncols(), y.nrows())?;
    check_dim("Psi rows", g_e.ncols(), psi.nrows())?;
    if slope == 0.0 {
        return Ok((DVector::zeros(y.ncols()), DVector::zeros(psi.ncols())));
    }
    let v = g_e.transpose() * grad_q * (-slope);
    Ok((y.transpose() * &v, psi.transpose() * &v))
}
