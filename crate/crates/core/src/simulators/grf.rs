use super::GaussianOracle;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Largest grid (in cells) for which the dense covariance is formed.
pub const GRF_ORACLE_LIMIT: usize = 4096;

/// Mean-zero anisotropic exponential random field on a `rows x cols` grid
/// over the unit square.
///
/// Cell `(r, c)` sits at `((c + 0.5)/cols, (r + 0.5)/rows)` and has index
/// `r * cols + c`. The correlation is `exp(-‖D R(-θ) h‖)` with
/// `D = diag(1/range_x, 1/range_y)`: the lag is rotated into the frame of
/// the principal axes and then scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grf2d {
    pub rows: usize,
    pub cols: usize,
    pub range_x: f64,
    pub range_y: f64,
    pub angle: f64,
}

impl Grf2d {
    pub fn new(rows: usize, cols: usize, range_x: f64, range_y: f64, angle: f64) -> Result<Self> {
        if !(range_x > 0.0 && range_y > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ranges must be positive, got ({range_x}, {range_y})"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(
                "grid must have at least one cell".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            range_x,
            range_y,
            angle,
        })
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn coordinates(&self) -> Vec<[f64; 2]> {
        (0..self.rows)
            .flat_map(|r| {
                (0..self.cols).map(move |c| {
                    [
                        (c as f64 + 0.5) / self.cols as f64,
                        (r as f64 + 0.5) / self.rows as f64,
                    ]
                })
            })
            .collect()
    }

    pub fn correlation(&self, h: [f64; 2]) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let hx = c * h[0] + s * h[1];
        let hy = -s * h[0] + c * h[1];
        let d = ((hx / self.range_x).powi(2) + (hy / self.range_y).powi(2)).sqrt();
        (-d).exp()
    }

    pub fn oracle(&self) -> Result<GaussianOracle> {
        let cells = self.cells();
        if cells > GRF_ORACLE_LIMIT {
            return Err(Error::GridTooLargeForOracle {
                cells,
                limit: GRF_ORACLE_LIMIT,
            });
        }
        let xy = self.coordinates();
        let cov = DMatrix::from_fn(cells, cells, |i, j| {
            self.correlation([xy[i][0] - xy[j][0], xy[i][1] - xy[j][1]])
        });
        Ok(GaussianOracle {
            mean: DVector::zeros(cells),
            cov,
            prec: None,
        })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<(Ensemble, GaussianOracle)> {
        let oracle = self.oracle()?;
        Ok((oracle.sample(n, seed)?, oracle))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn isotropic_correlation() {
        let g = Grf2d::new(4, 4, 0.3, 0.3, 0.7).unwrap();
        assert_eq!(g.correlation([0.0, 0.0]), 1.0);
        assert_relative_eq!(
            g.correlation([0.3, 0.4]),
            (-0.5f64 / 0.3).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rotation_aligns_long_axis() {
        let angle = std::f64::consts::FRAC_PI_4;
        let g = Grf2d::new(4, 4, 1.0, 0.1, angle).unwrap();
        let along = g.correlation([0.1, 0.1]);
        let across = g.correlation([0.1, -0.1]);
        assert_relative_eq!(along, (-(0.02f64).sqrt()).exp(), epsilon = 1e-12);
        assert!(along > across);
    }

    #[test]
    fn oracle_size_guard() {
        let g = Grf2d::new(65, 64, 0.1, 0.1, 0.0).unwrap();
        assert!(matches!(
            g.oracle(),
            Err(Error::GridTooLargeForOracle { .. })
        ));
    }

    #[test]
    fn sample_mean_near_zero() {
        let g = Grf2d::new(10, 10, 0.5, 0.1, 0.6).unwrap();
        let (e, _) = g.sample(100, 9).unwrap();
        let mean = e.mean();
        // Per-cell sd is 1, so 3/sqrt(n) is a 3-sigma band.
        assert!(mean.iter().all(|m| m.abs() < 0.3));
        assert_eq!(e, g.sample(100, 9).unwrap().0);
    }
}
