//! Reading the last linear layer of a SymA regressor as a weighted sum of
//! learned base matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sym_rep::{theta_to_A, SymMat4, ThetaParams};

#[derive(Debug, Clone, PartialEq)]
pub struct LastLayerDecomposition {
    /// `A(wᵢ)` for every column `wᵢ` of the weight matrix.
    pub bases: Vec<SymMat4>,
    /// `A(b)`
    pub bias: SymMat4,
    /// `Σᵢ γᵢ A(wᵢ) + A(b)`
    pub combined: SymMat4,
}

/// Splits `A(Wγ + b)` into per-feature base matrices.
pub fn last_layer_decompose(weight: &DMatrix<f64>, bias: &DVector<f64>, gamma: &DVector<f64>) -> Result<LastLayerDecomposition> {
    if weight.nrows() != 10 {
        return Err(Error::DimensionMismatch { expected: 10, got: weight.nrows() });
    }
    if bias.len() != 10 {
        return Err(Error::DimensionMismatch { expected: 10, got: bias.len() });
    }
    if gamma.len() != weight.ncols() {
        return Err(Error::DimensionMismatch {
            expected: weight.ncols(),
            got: gamma.len(),
        });
    }
    let bases: Vec<SymMat4> = weight
        .column_iter()
        .map(|c| Ok(theta_to_A(&ThetaParams::from_slice(c.as_slice())?)))
        .collect::<Result<_>>()?;
    let bias = theta_to_A(&ThetaParams::from_slice(bias.as_slice())?);
    let combined = bases.iter().zip(gamma.iter()).map(|(a, g)| *a * *g).sum::<SymMat4>() + bias;
    Ok(LastLayerDecomposition { bases, bias, combined })
}

/// `‖Wγ + b‖₂`, the norm of the raw head output.
pub fn head_norm_metric(raw: &[f64]) -> f64 {
    raw.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn simple_cases() {
        let mut rng = seeded(111, 0);
        let w = DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>() - 0.5);
        let b = DVector::from_fn(10, |_, _| rng.random::<f64>() - 0.5);
        let d = last_layer_decompose(&w, &b, &DVector::zeros(3)).unwrap();
        assert_eq!(d.combined, d.bias);
        assert_eq!(d.bases.len(), 3);

        let w1 = w.columns(0, 1).into_owned();
        let d = last_layer_decompose(&w1, &b, &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(d.combined, d.bases[0] + d.bias);

        assert!(last_layer_decompose(&w, &b, &DVector::zeros(2)).is_err());
        assert!(last_layer_decompose(&DMatrix::zeros(9, 2), &b, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn norm_metric() {
        assert_eq!(head_norm_metric(&[0.0; 10]), 0.0);
        let raw = [3.0, 4.0];
        assert_eq!(head_norm_metric(&raw), 5.0);
        assert_eq!(head_norm_metric(&[-6.0, -8.0]), 10.0);
    }
}
