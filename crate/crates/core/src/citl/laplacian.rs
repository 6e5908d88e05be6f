use crate::error::{Error, Result};
use crate::numcore::Matrix;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Graph Laplacian `Λ − V` of the union-symmetrized k-nearest-neighbour
/// graph over the rows of `x`, with heat-kernel weights
/// `ν_ij = exp(−½‖x_i − x_j‖²)`.
///
/// Neighbour ties are broken by the lower row index.
pub fn build_laplacian(x: &Matrix, k_nn: usize) -> Result<Matrix> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if k_nn == 0 {
        return Err(Error::InvalidConfig("k_nn must be at least 1".into()));
    }
    let mut dist = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(x.row(i), x.row(j));
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    let mut adj = vec![false; n * n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for &j in others.iter().take(k_nn) {
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
    }
    let mut lap = Matrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if adj[i * n + j] {
                let w = (-0.5 * dist[(i, j)]).exp();
                lap[(i, j)] = -w;
                degree += w;
            }
        }
        lap[(i, i)] = degree;
    }
    Ok(lap)
}
