use crate::error::{shape_err, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub entries: CMatrix,
    pub snapshot_count: usize,
}

impl CovarianceMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.rows()
    }
}

/// `R̂ = Yᴴ·Y / M`, treating each of the `M` subcarrier rows of the CSI as one
/// antenna-domain snapshot.
pub fn spatial_covariance(csi: &CMatrix) -> Result<CovarianceMatrix> {
    let (m, n) = csi.shape();
    if n == 0 || m < n {
        return Err(shape_err(format!(
            "spatial covariance needs at least as many subcarriers as antennas, got {m}x{n}"
        )));
    }
    let mut r = CMatrix::zeros(n, n);
    for row in 0..m {
        let y = csi.row(row);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] += y[i] * y[j].conj();
            }
        }
    }
    let scale = 1.0 / m as f64;
    for i in 0..n {
        r[(i, i)] = num_complex::Complex64::new(r[(i, i)].re * scale, 0.0);
        for j in i + 1..n {
            let v = r[(i, j)] * scale;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
    Ok(CovarianceMatrix { entries: r, snapshot_count: m })
}
