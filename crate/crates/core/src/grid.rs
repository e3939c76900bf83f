//! 4-neighbour image grids and anisotropic total-variation denoising.
//!
//! The grid penalty is `sum |u_p - u_q|` over horizontally and vertically
//! adjacent pixels, i.e. the l1 norm of the axis-aligned differences.

use crate::error::{Error, Result};
use crate::prox::{prox, ProxProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// Uniform edge weight.
    pub weight: f64,
}

impl GridSpec {
    pub fn new(height: usize, width: usize, weight: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("grid dimensions must be positive".into()));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid grid weight {weight}")));
        }
        Ok(Self {
            height,
            width,
            weight,
        })
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major pixel index.
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::with_capacity(2 * self.len());
        for r in 0..self.height {
            for c in 0..self.width {
                let p = self.index(r, c);
                if c + 1 < self.width {
                    edges.push((p, p + 1, self.weight));
                }
                if r + 1 < self.height {
                    edges.push((p, p + self.width, self.weight));
                }
            }
        }
        edges
    }
}

/// Anisotropic TV denoising: the prox of `lambda * TV` centred at `image`.
pub fn denoise(grid: &GridSpec, image: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if image.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: image.len(),
        });
    }
    let problem = ProxProblem::new(image.to_vec(), grid.edges(), lambda, vec![])?;
    Ok(prox(&problem))
}
