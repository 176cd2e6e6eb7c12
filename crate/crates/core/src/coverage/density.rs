use serde::{Deserialize, Serialize};

use super::geometry::Point;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: [f64; 2],
    /// Diagonal of the covariance matrix.
    pub variance: [f64; 2],
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Coverage density over the region; must be positive there.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensityField {
    #[default]
    Uniform,
    /// Weighted sum of axis-aligned normal densities plus a constant floor.
    GaussianMixture {
        components: Vec<GaussianComponent>,
        #[serde(default)]
        floor: f64,
    },
    /// Bilinear interpolation of samples on a regular grid over
    /// `bounds = [xmin, ymin, xmax, ymax]`. `values` is row-major with `nx`
    /// entries per row and `ny` rows, starting at `ymin`. Points outside the
    /// bounds use the nearest boundary value.
    Grid {
        bounds: [f64; 4],
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    },
}

impl DensityField {
    pub fn gaussian(mean: [f64; 2], sigma: f64) -> Self {
        DensityField::GaussianMixture {
            components: vec![GaussianComponent {
                mean,
                variance: [sigma * sigma; 2],
                weight: 1.0,
            }],
            floor: 0.0,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, DensityField::Uniform)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DensityField::Uniform => Ok(()),
            DensityField::GaussianMixture { components, floor } => {
                if components.is_empty() && *floor <= 0.0 {
                    return Err(Error::invalid("gaussian mixture needs components or a positive floor"));
                }
                if !(floor.is_finite() && *floor >= 0.0) {
                    return Err(Error::invalid(format!("density floor must be non-negative, got {floor}")));
                }
                for (k, c) in components.iter().enumerate() {
                    let finite = c.mean.iter().chain(&c.variance).all(|v| v.is_finite());
                    if !finite || c.variance.iter().any(|&v| v <= 0.0) || !(c.weight > 0.0) {
                        return Err(Error::invalid(format!(
                            "gaussian component {k} needs finite mean, positive variances and positive weight"
                        )));
                    }
                }
                Ok(())
            }
            DensityField::Grid { bounds, nx, ny, values } => {
                if *nx < 2 || *ny < 2 {
                    return Err(Error::invalid("density grid needs at least 2 samples per axis"));
                }
                if values.len() != nx * ny {
                    return Err(Error::invalid(format!(
                        "density grid has {} values, expected {}",
                        values.len(),
                        nx * ny
                    )));
                }
                if !(bounds[2] > bounds[0] && bounds[3] > bounds[1]) {
                    return Err(Error::invalid("density grid bounds must satisfy xmin < xmax and ymin < ymax"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid("density grid values must be positive and finite"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, q: &Point) -> f64 {
        match self {
            DensityField::Uniform => 1.0,
            DensityField::GaussianMixture { components, floor } => {
                floor
                    + components
                        .iter()
                        .map(|c| {
                            let dx = q.x - c.mean[0];
                            let dy = q.y - c.mean[1];
                            let norm = 2.0 * std::f64::consts::PI * (c.variance[0] * c.variance[1]).sqrt();
                            c.weight * (-0.5 * (dx * dx / c.variance[0] + dy * dy / c.variance[1])).exp() / norm
                        })
                        .sum::<f64>()
            }
            DensityField::Grid { bounds, nx, ny, values } => {
                let fx = ((q.x - bounds[0]) / (bounds[2] - bounds[0]) * (*nx - 1) as f64).clamp(0.0, (*nx - 1) as f64);
                let fy = ((q.y - bounds[1]) / (bounds[3] - bounds[1]) * (*ny - 1) as f64).clamp(0.0, (*ny - 1) as f64);
                let ix = (fx.floor() as usize).min(nx - 2);
                let iy = (fy.floor() as usize).min(ny - 2);
                let (tx, ty) = (fx - ix as f64, fy - iy as f64);
                let at = |x: usize, y: usize| values[y * nx + x];
                (1.0 - ty) * ((1.0 - tx) * at(ix, iy) + tx * at(ix + 1, iy))
                    + ty * ((1.0 - tx) * at(ix, iy + 1) + tx * at(ix + 1, iy + 1))
            }
        }
    }
}
