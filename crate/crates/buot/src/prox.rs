//! Closed-form proximal operators for the flux and source terms.
//!
//! Both reduce to shrinkage: soft thresholding per component for the `l1`
//! norm, radial shrinkage of the pointwise d-vector for `l2`. The `h^d`
//! volume weight appears in both the objective and the quadratic penalty of
//! the prox, so it cancels; thresholds are the plain step-size products
//! (`mu` for the flux, `alpha * mu` for the source). Double-weighting them
//! is the classic mistake this module guards against.

use thiserror::Error;

use crate::grid::{FluxField, FluxNorm, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("shrinkage threshold must be finite and nonnegative, got {0}")]
    InvalidThreshold(f64),
}

/// Validated shrinkage threshold (step size times weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkParam {
    lambda: f64,
}

impl ShrinkParam {
    pub fn new(lambda: f64) -> Result<Self, ProxError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(ProxError::InvalidThreshold(lambda));
        }
        Ok(ShrinkParam { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Soft threshold `sign(v) * max(|v| - lambda, 0)`, with `sign(0) = 0`.
/// Values in the dead zone `[-lambda, lambda]` map to exactly zero.
#[inline]
pub fn shrink_scalar(v: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Prox of the Euclidean norm: `v * max(1 - lambda / |v|_2, 0)`.
/// Returns the zero vector when `|v|_2 <= lambda`.
pub fn shrink_vector_l2(v: &[f64], lambda: f64) -> Vec<f64> {
    debug_assert!(lambda >= 0.0);
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm <= lambda {
        vec![0.0; v.len()]
    } else {
        let scale = 1.0 - lambda / norm;
        v.iter().map(|c| c * scale).collect()
    }
}

/// Pointwise prox of `lambda * f` on a flux field: componentwise soft
/// thresholding for `L1`, radial shrinkage of each node's d-vector for `L2`.
/// The output keeps the zero-flux boundary invariant (shrinkage of zero is
/// zero).
pub fn prox_flux(m: &FluxField, lambda: ShrinkParam, p: FluxNorm) -> FluxField {
    let mut out = m.clone();
    prox_flux_in_place(&mut out, lambda, p);
    out
}

pub(crate) fn prox_flux_in_place(m: &mut FluxField, lambda: ShrinkParam, p: FluxNorm) {
    let dim = m.grid().dim();
    let lam = lambda.lambda();
    match p {
        FluxNorm::L1 => {
            for v in m.values_mut() {
                *v = shrink_scalar(*v, lam);
            }
        }
        FluxNorm::L2 => {
            for chunk in m.values_mut().chunks_exact_mut(dim) {
                let norm = chunk.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm <= lam {
                    chunk.fill(0.0);
                } else {
                    let scale = 1.0 - lam / norm;
                    for c in chunk {
                        *c *= scale;
                    }
                }
            }
        }
    }
}

/// Pointwise soft thresholding of the source field with threshold
/// `lambda = alpha * mu`. Inputs inside the dead zone come out as exact
/// (bitwise) zeros, which is what makes the finite-convergence behavior
/// observable.
pub fn prox_source(eta: &ScalarField, lambda: ShrinkParam) -> ScalarField {
    let mut out = eta.clone();
    prox_source_in_place(&mut out, lambda);
    out
}

pub(crate) fn prox_source_in_place(eta: &mut ScalarField, lambda: ShrinkParam) {
    let lam = lambda.lambda();
    for v in eta.values_mut() {
        *v = shrink_scalar(*v, lam);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn shrink_scalar_examples() {
        assert_eq!(shrink_scalar(3.0, 1.0), 2.0);
        assert_eq!(shrink_scalar(-0.5, 1.0), 0.0);
        assert_eq!(shrink_scalar(-2.5, 1.0), -1.5);
        assert_eq!(shrink_scalar(0.0, 0.0), 0.0);
        for &v in &[-3.25, -0.1, 0.0, 0.7, 11.0] {
            assert_eq!(shrink_scalar(v, 0.0), v);
        }
    }

    #[test]
    fn shrink_vector_examples() {
        assert_eq!(shrink_vector_l2(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        assert_eq!(shrink_vector_l2(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        // Oracle: minimizing lambda*|w| + |w - v|^2/2 over the ray through v
        // with |v| = 10, lambda = 5 gives |w| = 5, i.e. (3, 4).
        let w = shrink_vector_l2(&[6.0, 8.0], 5.0);
        assert!((w[0] - 3.0).abs() < 1e-12 && (w[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn shrink_vector_ray_search_oracle() {
        // Brute-force the 1-D problem min_t lambda*t + (t - |v|)^2 / 2, t >= 0,
        // then compare against the closed form.
        let v = [1.3_f64, -2.1, 0.4];
        let lambda = 1.1;
        let norm_v = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        let mut t = 0.0;
        while t <= 2.0 * norm_v {
            let val = lambda * t + 0.5 * (t - norm_v) * (t - norm_v);
            if val < best {
                best = val;
                best_t = t;
            }
            t += 1e-6;
        }
        let w = shrink_vector_l2(&v, lambda);
        let norm_w = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm_w - best_t).abs() < 1e-5);
    }

    #[test]
    fn prox_source_dead_zone_is_exact() {
        let g = Grid::new(1, 1.0, 3).unwrap();
        let eta = ScalarField::from_values(&g, vec![0.4, -0.5, 0.5, 1.5]).unwrap();
        let lam = ShrinkParam::new(0.5).unwrap();
        let out = prox_source(&eta, lam);
        assert_eq!(out.values()[0].to_bits(), 0.0_f64.to_bits());
        assert_eq!(out.values()[1].to_bits(), 0.0_f64.to_bits());
        assert_eq!(out.values()[2].to_bits(), 0.0_f64.to_bits());
        assert_eq!(out.values()[3], 1.0);
    }

    #[test]
    fn prox_source_brute_force_oracle() {
        // min_w |w| + (w - v)^2 / (2 * alpha * mu) over a fine grid, alpha*mu = 1.
        let threshold = 1.0;
        for &v in &[-2.0, -0.3, 0.0, 0.7, 5.0] {
            let mut best_w = -8.0_f64;
            let mut best = f64::INFINITY;
            let mut w = -8.0_f64;
            while w <= 8.0 {
                let val = w.abs() + (w - v) * (w - v) / (2.0 * threshold);
                if val < best {
                    best = val;
                    best_w = w;
                }
                w += 1e-5;
            }
            assert!((shrink_scalar(v, threshold) - best_w).abs() < 1e-4, "v = {v}");
        }
    }

    #[test]
    fn prox_flux_identity_and_zero() {
        let g = Grid::new(2, 1.0, 2).unwrap();
        let mut m = FluxField::zeros(&g);
        m.set_component(0, 0, 1.5);
        m.set_component(0, 1, -0.5);
        let zero_lam = ShrinkParam::new(0.0).unwrap();
        for p in [FluxNorm::L1, FluxNorm::L2] {
            assert_eq!(prox_flux(&m, zero_lam, p).values(), m.values());
            let z = prox_flux(&FluxField::zeros(&g), ShrinkParam::new(0.3).unwrap(), p);
            assert!(z.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn prox_flux_l2_optimality_condition() {
        // w = prox(v) must satisfy |v - w| <= lambda and w parallel to v,
        // the subgradient characterization of the Euclidean-norm prox.
        let g = Grid::new(2, 1.0, 1).unwrap();
        let mut m = FluxField::zeros(&g);
        m.set_component(0, 0, 2.2);
        m.set_component(0, 1, -1.7);
        let lam = 0.9;
        let out = prox_flux(&m, ShrinkParam::new(lam).unwrap(), FluxNorm::L2);
        let v = [m.component(0, 0), m.component(0, 1)];
        let w = [out.component(0, 0), out.component(0, 1)];
        let diff = ((v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2)).sqrt();
        assert!(diff <= lam + 1e-12);
        let cross = v[0] * w[1] - v[1] * w[0];
        assert!(cross.abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scalar_shrinkage_nonexpansive(
                a in -50.0..50.0f64,
                b in -50.0..50.0f64,
                lambda in 0.0..10.0f64,
            ) {
                let d = (shrink_scalar(a, lambda) - shrink_scalar(b, lambda)).abs();
                prop_assert!(d <= (a - b).abs() + 1e-12);
            }

            #[test]
            fn vector_shrinkage_nonexpansive(
                a in prop::collection::vec(-20.0..20.0f64, 3),
                b in prop::collection::vec(-20.0..20.0f64, 3),
                lambda in 0.0..10.0f64,
            ) {
                let wa = shrink_vector_l2(&a, lambda);
                let wb = shrink_vector_l2(&b, lambda);
                let dist = |x: &[f64], y: &[f64]| {
                    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
                };
                prop_assert!(dist(&wa, &wb) <= dist(&a, &b) + 1e-12);
            }

            #[test]
            fn dead_zone_is_bitwise_zero(
                scale in -1.0..1.0f64,
                lambda in 0.0..10.0f64,
            ) {
                let v = scale * lambda;
                prop_assert_eq!(shrink_scalar(v, lambda).to_bits(), 0u64);
            }
        }
    }

    #[test]
    fn invalid_threshold_rejected() {
        assert!(ShrinkParam::new(-0.1).is_err());
        assert!(ShrinkParam::new(f64::NAN).is_err());
        assert!(ShrinkParam::new(f64::INFINITY).is_err());
        assert!(ShrinkParam::new(0.0).is_ok());
    }
}
