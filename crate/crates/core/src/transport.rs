//! Graph-constrained affine triangular transport: sparse precision estimates
//! from an ensemble.
//!
//! Under a variable ordering, row `j` of the lower-triangular factor `C`
//! whitens variable `j` given its graph-permitted predecessors. Fitting the
//! affine map by maximum likelihood reduces to one least-squares regression
//! per row, and the precision is `Λ = Πᵀ CᵀC Π`.

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::graph::CIGraph;
use crate::sparse::{
    cholesky, fill_reducing_order, kr_order_from_cholesky, symbolic_cholesky, Permutation,
    SparseMatrix, SparseSpd,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Fitted affine triangular map.
#[derive(Debug, Clone)]
pub struct KrMap {
    /// Fitting order: variable `perm.order()[k]` is the `k`-th map component.
    pub perm: Permutation,
    /// Fill-reducing order of the graph the map pattern was derived from.
    pub star: Permutation,
    /// Lower-triangular factor in fitting order, positive diagonal.
    pub c: SparseMatrix,
    /// Ensemble mean in the original labelling.
    pub mean: DVector<f64>,
    pub source_graph: CIGraph,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Scale variables to unit variance before regressing. The estimate is
    /// the same up to rounding; exposed so both variants can be compared.
    pub standardise: bool,
    /// Fill-reducing order to use instead of computing one from the graph.
    /// Sharing one order across nested graphs keeps the map patterns nested.
    pub star: Option<Permutation>,
}

pub fn fit_affine_kr(ens: &Ensemble, graph: &CIGraph) -> Result<KrMap> {
    fit_affine_kr_with(ens, graph, &FitOptions::default())
}

pub fn fit_affine_kr_with(ens: &Ensemble, graph: &CIGraph, opts: &FitOptions) -> Result<KrMap> {
    let (n, p) = (ens.n(), ens.p());
    if graph.p() != p {
        return Err(Error::DimensionMismatch {
            context: "graph vs ensemble dimension",
            expected: p,
            found: graph.p(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two members to fit, got {n}"
        )));
    }
    let star = match &opts.star {
        Some(s) if s.len() != p => {
            return Err(Error::DimensionMismatch {
                context: "supplied ordering",
                expected: p,
                found: s.len(),
            })
        }
        Some(s) => s.clone(),
        None => fill_reducing_order(&graph.to_pattern())?,
    };
    let pattern = symbolic_cholesky(&graph.to_pattern(), &star)?;
    let (perm, rows) = kr_order_from_cholesky(&star, &pattern)?;

    let mean = ens.mean();
    // Centred data in fitting order.
    let mut z = ens.anomalies().select_columns(perm.order());
    let scale: Vec<f64> = if opts.standardise {
        (0..p)
            .map(|k| {
                let sd = (z.column(k).norm_squared() / (n as f64 - 1.0)).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect()
    } else {
        vec![1.0; p]
    };
    for (k, s) in scale.iter().enumerate() {
        z.column_mut(k).unscale_mut(*s);
    }

    let fitted: Vec<Vec<(usize, f64)>> = (0..p)
        .into_par_iter()
        .map(|k| {
            let preds: Vec<usize> = rows[k].iter().copied().filter(|&j| j != k).collect();
            fit_row(&z, k, &preds, perm.order()[k])
        })
        .collect::<Result<_>>()?;

    // Undo the per-variable scaling: ν_std = ν / s, so C = C_std diag(1/s).
    let fitted = fitted
        .into_iter()
        .map(|row| row.into_iter().map(|(j, v)| (j, v / scale[j])).collect())
        .collect();
    Ok(KrMap {
        perm,
        star,
        c: SparseMatrix::from_rows(p, fitted)?,
        mean,
        source_graph: graph.clone(),
    })
}

/// Regresses column `k` of `z` on columns `preds` (all centred). Returns row
/// `k` of `C`: `1/s` on the diagonal and `-β/s` on the predictors.
fn fit_row(z: &DMatrix<f64>, k: usize, preds: &[usize], label: usize) -> Result<Vec<(usize, f64)>> {
    let n = z.nrows();
    let y = z.column(k);
    let sd = (y.norm_squared() / (n as f64 - 1.0)).sqrt();
    if preds.len() + 1 >= n {
        return Err(Error::UnderdeterminedRow {
            row: label,
            predictors: preds.len(),
            members: n,
        });
    }
    if sd == 0.0 {
        return Err(Error::ZeroResidual { row: label });
    }
    let (beta, resid) = if preds.is_empty() {
        (DVector::zeros(0), y.into_owned())
    } else {
        let x = z.select_columns(preds);
        let xtx = x.tr_mul(&x);
        let xty = x.tr_mul(&y);
        let chol = xtx.cholesky().ok_or(Error::SingularDesign { row: label })?;
        let beta = chol.solve(&xty);
        let resid = y - &x * &beta;
        (beta, resid)
    };
    let s = (resid.norm_squared() / (n as f64 - 1.0)).sqrt();
    if !(s > 1e-12 * sd) {
        return Err(Error::ZeroResidual { row: label });
    }
    let mut row: Vec<(usize, f64)> = preds
        .iter()
        .zip(beta.iter())
        .map(|(&j, &b)| (j, -b / s))
        .collect();
    row.push((k, 1.0 / s));
    Ok(row)
}

impl KrMap {
    pub fn p(&self) -> usize {
        self.perm.len()
    }

    /// `Λ̂ = Πᵀ CᵀC Π`.
    pub fn precision(&self) -> SparseSpd {
        let ctc = self
            .c
            .gram_weighted(&SparseSpd::identity(self.p()))
            .expect("C is square");
        ctc.permute(&self.perm.inverse())
            .expect("permutation length matches")
    }

    /// Pushes members to the reference: `C Π (u - μ)` per row.
    pub fn forward(&self, ens: &Ensemble) -> Result<Ensemble> {
        if ens.p() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "map forward",
                expected: self.p(),
                found: ens.p(),
            });
        }
        let rows: Vec<Vec<f64>> = (0..ens.n())
            .map(|i| {
                let u: Vec<f64> = ens
                    .member(i)
                    .iter()
                    .zip(self.mean.iter())
                    .map(|(a, m)| a - m)
                    .collect();
                self.c.mul_vec(&self.perm.apply(&u))
            })
            .collect::<Result<_>>()?;
        if rows.is_empty() {
            return Ensemble::new(DMatrix::zeros(0, self.p()));
        }
        Ensemble::from_rows(&rows)
    }
}

/// Free-function form of [`KrMap::precision`].
pub fn unwrap_precision(map: &KrMap) -> SparseSpd {
    map.precision()
}

/// Average negative log-likelihood of the members under `N(mean, prec⁻¹)`:
/// `½p log 2π - ½ log|Λ| + (1/2n) Σ (u-μ)ᵀ Λ (u-μ)`.
pub fn gaussian_nll(ens: &Ensemble, prec: &SparseSpd, mean: &DVector<f64>) -> Result<f64> {
    let p = ens.p();
    if prec.dim() != p || mean.len() != p {
        return Err(Error::DimensionMismatch {
            context: "gaussian nll",
            expected: p,
            found: prec.dim(),
        });
    }
    let perm = fill_reducing_order(prec)?;
    let log_det = cholesky(prec, &perm)?.log_det();
    let n = ens.n();
    let quad: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = ens
                .member(i)
                .iter()
                .zip(mean.iter())
                .map(|(a, m)| a - m)
                .collect();
            prec.quad_form(&d)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(
        0.5 * p as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det
            + quad / (2.0 * n as f64),
    )
}
