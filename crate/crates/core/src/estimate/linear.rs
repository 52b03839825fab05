//! Within-transformed least squares and just-identified IV with
//! individual-clustered sandwich variance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest eigenvalue ratio of the scaled cross-product tolerated before a
/// design is declared collinear.
const RANK_TOLERANCE: f64 = 1e-10;

/// Rows stacked by cluster; `clusters[g]` is the `(start, len)` of cluster `g`.
#[derive(Debug, Clone)]
pub(crate) struct Stacked {
    pub x: DMatrix<f64>,
    pub clusters: Vec<(usize, usize)>,
}

impl Stacked {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }
}

/// Subtracts the cluster mean from every column, cluster by cluster.
pub(crate) fn demean(m: &mut DMatrix<f64>, clusters: &[(usize, usize)]) {
    for j in 0..m.ncols() {
        let mut col = m.column_mut(j);
        for &(s, len) in clusters {
            let mut block = col.rows_mut(s, len);
            let mean = block.sum() / len as f64;
            block.add_scalar_mut(-mean);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Fit {
    pub coef: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub n: usize,
    pub clusters: usize,
}

impl Fit {
    pub fn se(&self, j: usize) -> f64 {
        self.vcov[(j, j)].max(0.0).sqrt()
    }
}

/// `G/(G-1) * (N-1)/(N-K)`, with `K` the number of explicit regressors.
pub(crate) fn small_sample_factor(n: usize, g: usize, k: usize) -> f64 {
    (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64))
}

fn check_shape(d: &Stacked) -> Result<()> {
    if d.clusters.len() < 2 {
        return Err(Error::TooFewClusters(d.clusters.len()));
    }
    if d.n() <= d.k() {
        return Err(Error::Collinear(format!(
            "{} observations for {} regressors",
            d.n(),
            d.k()
        )));
    }
    Ok(())
}

/// Fails when `xtx` is numerically rank deficient after unit-diagonal scaling.
pub(crate) fn check_rank(xtx: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let k = xtx.nrows();
    for j in 0..k {
        if !(xtx[(j, j)] > 0.0) {
            return Err(Error::Collinear(format!(
                "regressor {} has no within variation",
                names.get(j).map_or("?", |s| s.as_str())
            )));
        }
    }
    let scale = DVector::from_iterator(k, (0..k).map(|j| 1.0 / xtx[(j, j)].sqrt()));
    let scaled = DMatrix::from_fn(k, k, |i, j| xtx[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(min > RANK_TOLERANCE * max) {
        return Err(Error::Collinear(format!(
            "smallest/largest eigenvalue ratio {:.3e}",
            min / max
        )));
    }
    Ok(())
}

fn invert_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Collinear("cross-product matrix is not positive definite".into()))
}

/// `sum_g (Z_g' u_g)(Z_g' u_g)'` in cluster order.
pub(crate) fn cluster_meat(
    z: &DMatrix<f64>,
    u: &DVector<f64>,
    clusters: &[(usize, usize)],
) -> DMatrix<f64> {
    let k = z.ncols();
    let mut meat = DMatrix::zeros(k, k);
    for &(s, len) in clusters {
        let score = z.rows(s, len).tr_mul(&u.rows(s, len));
        meat.ger(1.0, &score, &score, 1.0);
    }
    meat
}

/// OLS of `y` on already demeaned `d.x`.
pub(crate) fn ols(d: &Stacked, y: &DVector<f64>, names: &[String]) -> Result<Fit> {
    check_shape(d)?;
    let xtx = d.x.tr_mul(&d.x);
    check_rank(&xtx, names)?;
    let inv = invert_spd(&xtx)?;
    let coef = &inv * d.x.tr_mul(y);
    let u = y - &d.x * &coef;
    let meat = cluster_meat(&d.x, &u, &d.clusters);
    let c = small_sample_factor(d.n(), d.clusters.len(), d.k());
    let vcov = (&inv * meat * &inv) * c;
    Ok(Fit {
        coef,
        vcov,
        n: d.n(),
        clusters: d.clusters.len(),
    })
}

/// Just-identified IV: `(Z'X)^-1 Z'y` with `Z = d.x` and `x` of equal width.
pub(crate) fn iv(d: &Stacked, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Fit> {
    check_shape(d)?;
    let zx = d.x.tr_mul(x);
    let inv = zx
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::WeakInstrument("Z'X is singular".into()))?;
    let coef = &inv * d.x.tr_mul(y);
    let u = y - x * &coef;
    let meat = cluster_meat(&d.x, &u, &d.clusters);
    let c = small_sample_factor(d.n(), d.clusters.len(), d.k());
    let vcov = (&inv * meat * inv.transpose()) * c;
    Ok(Fit {
        coef,
        vcov,
        n: d.n(),
        clusters: d.clusters.len(),
    })
}
