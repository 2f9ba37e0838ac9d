//! Skew-symmetric convection with a Lipschitz cutoff.
//!
//! The bilinear form is the 1-d surrogate
//!
//! ```text
//! B(v, w) = v w' + (1/2) v' w
//! ```
//!
//! whose pairing against w vanishes identically under Dirichlet conditions;
//! the cutoff version scales B(u, u) by a ramp in the H-norm of the state,
//! equal to 1 up to level R and dropping linearly to 0 at 2R.

use crate::spaces::{Field, NormKind, SpectralBasis};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConvectionError {
    #[error("cutoff level must be at least 1 (got {0})")]
    BadCutoff(f64),
    #[error("convection needs a 1-d basis")]
    NeedsOneDim,
}

/// Cutoff level for the convection ramp; at least 1 so the ramp has
/// Lipschitz constant at most 1.
#[derive(Debug, Clone, Copy)]
pub struct CutoffParams {
    level: f64,
}

impl CutoffParams {
    pub fn new(level: f64) -> Result<Self, ConvectionError> {
        if level >= 1.0 && level.is_finite() {
            Ok(CutoffParams { level })
        } else {
            Err(ConvectionError::BadCutoff(level))
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

/// Ramp theta(s) = min(1, max(0, 2 - s/R)): 1 on [0, R], 0 on [2R, inf).
pub fn theta(cut: CutoffParams, s: f64) -> f64 {
    debug_assert!(s >= 0.0);
    (2.0 - s / cut.level).clamp(0.0, 1.0)
}

/// Dual vector d_j = <B(v, w), w_j>.
pub fn assemble_b(
    basis: &SpectralBasis,
    v: &Field,
    w: &Field,
) -> Result<Vec<f64>, ConvectionError> {
    if basis.dim() != 1 {
        return Err(ConvectionError::NeedsOneDim);
    }
    let vv = basis.evaluate(v);
    let wv = basis.evaluate(w);
    let vd = basis.evaluate_derivatives(v, 1).expect("order cap");
    let wd = basis.evaluate_derivatives(w, 1).expect("order cap");
    let g: Vec<f64> = (0..basis.quad_points())
        .map(|q| vv[q] * wd[q] + 0.5 * vd[q] * wv[q])
        .collect();
    let mut dual = vec![0.0; basis.len()];
    for (m, d) in dual.iter_mut().enumerate() {
        let row = basis.mode_derivatives(m, 0);
        *d = basis.quad_weight() * g.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(dual)
}

/// theta(|u|) B(u, u); exactly the zero vector once |u| >= 2R.
pub fn assemble_b_cutoff(
    basis: &SpectralBasis,
    u: &Field,
    cut: CutoffParams,
) -> Result<Vec<f64>, ConvectionError> {
    if basis.dim() != 1 {
        return Err(ConvectionError::NeedsOneDim);
    }
    let t = theta(cut, basis.norm(u, NormKind::H));
    if t == 0.0 {
        return Ok(vec![0.0; basis.len()]);
    }
    let mut dual = assemble_b(basis, u, u)?;
    for d in &mut dual {
        *d *= t;
    }
    Ok(dual)
}
