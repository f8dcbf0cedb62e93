//! Normalized Laplacian, second-smallest eigenvalue, and the variational
//! Rayleigh quotient.
//!
//! The eigensolver is a cyclic Jacobi sweep on the dense symmetric matrix:
//! support sizes here are at most a few thousand, sweeps are deterministic,
//! and the full spectrum is available for multiplicity counts. Rationals
//! are rounded to f64 exactly once, when the Laplacian is built.

use thiserror::Error;

use crate::graph::ConnectionGraph;
use crate::rat::rat_to_f64;

/// Off-diagonal Frobenius mass below this fraction of the total counts as
/// converged.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix must be symmetric")]
    NotSymmetric,
    #[error("Jacobi sweeps did not converge within {JACOBI_MAX_SWEEPS} sweeps")]
    NoConvergence,
    #[error("second eigenvalue undefined for a {0}x{0} matrix")]
    TooSmall(usize),
    #[error("Rayleigh quotient undefined: g is constant on the weight measure")]
    ConstantFunction,
}

pub type Matrix = Vec<Vec<f64>>;

/// L[u][v] = 1 - rho(u,v)/rho(v) on the diagonal, -rho(u,v)/sqrt(rho(u)rho(v))
/// off it, over the positive-weight vertices.
pub fn normalized_laplacian(graph: &ConnectionGraph) -> Matrix {
    let n = graph.vertex_count();
    let w: Vec<f64> = (0..n).map(|i| rat_to_f64(graph.vertex_weight(i))).collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0 - rat_to_f64(&graph.weight(i, i)) / w[i];
    }
    for (i, j, rho) in graph.edges() {
        let v = -rat_to_f64(rho) / (w[i] * w[j]).sqrt();
        m[i][j] = v;
        m[j][i] = v;
    }
    m
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// vectors[c] is the eigenvector for values[c].
    pub vectors: Vec<Vec<f64>>,
}

fn off_diag_norm_sq(a: &Matrix) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j] * a[i][j];
            }
        }
    }
    s
}

fn frobenius_sq(a: &Matrix) -> f64 {
    a.iter().flatten().map(|x| x * x).sum()
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(matrix: &Matrix) -> Result<Eigen, SpectralError> {
    let n = matrix.len();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(SpectralError::NotSymmetric);
        }
        for j in 0..n {
            if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 {
                return Err(SpectralError::NotSymmetric);
            }
        }
    }
    let mut a = matrix.clone();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let total = frobenius_sq(&a).sqrt();
    if n > 1 && total > 0.0 {
        let threshold = (JACOBI_TOL * total) * (JACOBI_TOL * total);
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diag_norm_sq(&a) <= threshold {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[p][q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let app = a[p][p];
                    let aqq = a[q][q];
                    a[p][p] = app - t * apq;
                    a[q][q] = aqq + t * apq;
                    a[p][q] = 0.0;
                    a[q][p] = 0.0;
                    for r in 0..n {
                        if r != p && r != q {
                            let arp = a[r][p];
                            let arq = a[r][q];
                            a[r][p] = arp - s * (arq + tau * arp);
                            a[p][r] = a[r][p];
                            a[r][q] = arq + s * (arp - tau * arq);
                            a[q][r] = a[r][q];
                        }
                    }
                    for row in v.iter_mut() {
                        let rp = row[p];
                        let rq = row[q];
                        row[p] = rp - s * (rq + tau * rp);
                        row[q] = rq + s * (rp - tau * rq);
                    }
                }
            }
        }
        if !converged && off_diag_norm_sq(&a) > threshold {
            return Err(SpectralError::NoConvergence);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x][x].partial_cmp(&a[y][y]).unwrap());
    let values: Vec<f64> = order.iter().map(|&c| a[c][c]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| (0..n).map(|r| v[r][c]).collect())
        .collect();
    Ok(Eigen { values, vectors })
}

#[derive(Debug, Clone)]
pub struct Lambda2 {
    pub value: f64,
    pub vector: Vec<f64>,
    /// ||L v - lambda v|| for the returned pair.
    pub residual: f64,
}

/// Second-smallest eigenvalue with its eigenvector and residual. For a
/// disconnected graph the zero eigenvalue has multiplicity >= 2 and this is
/// zero up to the solver tolerance.
pub fn lambda2(matrix: &Matrix) -> Result<Lambda2, SpectralError> {
    let n = matrix.len();
    if n < 2 {
        return Err(SpectralError::TooSmall(n));
    }
    let eig = symmetric_eigen(matrix)?;
    let value = eig.values[1];
    let vector = eig.vectors[1].clone();
    let mut residual = 0.0;
    for i in 0..n {
        let mut r = -value * vector[i];
        for j in 0..n {
            r += matrix[i][j] * vector[j];
        }
        residual += r * r;
    }
    Ok(Lambda2 {
        value,
        vector,
        residual: residual.sqrt(),
    })
}

/// Rayleigh quotient of a vector-valued test function: the edge energy over
/// the weighted spread around the mean. Always an upper bound on lambda.
///
/// g maps each vertex index to an r-dimensional vector.
pub fn variational_upper_bound(
    graph: &ConnectionGraph,
    g: &[Vec<f64>],
) -> Result<f64, SpectralError> {
    let n = graph.vertex_count();
    assert_eq!(g.len(), n, "test function must cover every vertex");
    let dim = g[0].len();
    let w: Vec<f64> = (0..n).map(|i| rat_to_f64(graph.vertex_weight(i))).collect();
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for d in 0..dim {
            mean[d] += w[i] * g[i][d];
        }
    }
    let mut denom = 0.0;
    for i in 0..n {
        let mut sp = 0.0;
        for d in 0..dim {
            let diff = g[i][d] - mean[d];
            sp += diff * diff;
        }
        denom += w[i] * sp;
    }
    if denom <= 0.0 {
        return Err(SpectralError::ConstantFunction);
    }
    let mut num = 0.0;
    for (i, j, rho) in graph.edges() {
        let mut dd = 0.0;
        for d in 0..dim {
            let diff = g[i][d] - g[j][d];
            dd += diff * diff;
        }
        num += rat_to_f64(rho) * dd;
    }
    Ok(num / denom)
}

/// Certified lower bounds attached to a spectral report.
#[derive(Debug, Clone)]
pub struct LowerBound {
    pub source: String,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub dimension: usize,
    pub lambda2: Option<f64>,
    pub residual: Option<f64>,
    pub spectrum_min: f64,
    pub spectrum_max: f64,
    /// Eigenvalues below 1e-6, i.e. the numerically certified kernel size.
    pub zero_multiplicity: usize,
    pub component_count: usize,
    pub lower_bounds: Vec<LowerBound>,
    /// lambda vs rho_min on connected graphs (observed comparison, never
    /// asserted as an inequality).
    pub rho_min: f64,
    pub lambda_ge_rho_min: Option<bool>,
}

/// Builds the Laplacian, runs the eigensolver, and collects the certified
/// lower bounds the caller supplies (congestion certificates are attached
/// by the congestion module).
pub fn spectral_report(
    graph: &ConnectionGraph,
    extra_bounds: Vec<LowerBound>,
    tol: f64,
) -> Result<SpectralReport, SpectralError> {
    let matrix = normalized_laplacian(graph);
    let n = matrix.len();
    let eig = symmetric_eigen(&matrix)?;
    let (l2, residual) = if n >= 2 {
        let l = lambda2(&matrix)?;
        (Some(l.value), Some(l.residual))
    } else {
        (None, None)
    };
    let zero_multiplicity = eig.values.iter().filter(|&&v| v.abs() < 1e-6).count();
    let rho_min = rat_to_f64(graph.rho_min());
    let mut lower_bounds = Vec::new();
    if graph.component_count() == 1 {
        lower_bounds.push(LowerBound {
            source: "rho_min".into(),
            value: rho_min,
        });
    }
    lower_bounds.extend(extra_bounds);
    let lambda_ge_rho_min = match (graph.component_count() == 1, l2) {
        (true, Some(v)) => Some(v >= rho_min - tol),
        _ => None,
    };
    Ok(SpectralReport {
        dimension: n,
        lambda2: l2,
        residual,
        spectrum_min: *eig
            .values
            .first()
            .expect("nonempty graph has a spectrum"),
        spectrum_max: *eig.values.last().unwrap(),
        zero_multiplicity,
        component_count: graph.component_count(),
        lower_bounds,
        rho_min,
        lambda_ge_rho_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_free_uniform, build_ghz};
    use crate::graph::build_connection_graph;

    fn free_graph(k: usize, d: usize) -> ConnectionGraph {
        build_connection_graph(&build_free_uniform(k, d).unwrap()).unwrap()
    }

    #[test]
    fn ghz_laplacian_is_zero_matrix() {
        let h = build_connection_graph(&build_ghz()).unwrap();
        let l = normalized_laplacian(&h);
        for row in &l {
            for &x in row {
                assert_eq!(x, 0.0);
            }
        }
        let l2 = lambda2(&l).unwrap();
        assert!(l2.value.abs() < 1e-12);
    }

    #[test]
    fn free_uniform_laplacian_closed_form() {
        for (k, d) in [(2usize, 2usize), (3, 2), (2, 4)] {
            let h = free_graph(k, d);
            let l = normalized_laplacian(&h);
            let n = h.vertex_count();
            for i in 0..n {
                for j in 0..n {
                    let diff = h.vertices()[i]
                        .iter()
                        .zip(&h.vertices()[j])
                        .filter(|(a, b)| a != b)
                        .count();
                    let expect = if i == j {
                        1.0 - 1.0 / d as f64
                    } else if diff == 1 {
                        -1.0 / (k as f64 * d as f64)
                    } else {
                        0.0
                    };
                    assert!(
                        (l[i][j] - expect).abs() < 1e-12,
                        "entry ({i},{j}) = {} vs {expect}",
                        l[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn free_uniform_lambda_is_one_over_k() {
        for (k, d) in [(2usize, 2usize), (2, 3), (3, 2), (3, 3)] {
            let h = free_graph(k, d);
            let l = normalized_laplacian(&h);
            let l2 = lambda2(&l).unwrap();
            assert!(
                (l2.value - 1.0 / k as f64).abs() < 1e-8,
                "k={k} d={d}: {}",
                l2.value
            );
            assert!(l2.residual < 1e-8);
        }
    }

    #[test]
    fn laplacian_annihilates_sqrt_weights() {
        let h = free_graph(3, 2);
        let l = normalized_laplacian(&h);
        let n = h.vertex_count();
        let f: Vec<f64> = (0..n)
            .map(|i| rat_to_f64(h.vertex_weight(i)).sqrt())
            .collect();
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                r += l[i][j] * f[j];
            }
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_in_range_and_multiplicity_counts_components() {
        for graph in [
            build_connection_graph(&build_ghz()).unwrap(),
            free_graph(2, 3),
            free_graph(3, 2),
        ] {
            let l = normalized_laplacian(&graph);
            let eig = symmetric_eigen(&l).unwrap();
            for &v in &eig.values {
                assert!(v > -1e-8 && v < 2.0 + 1e-8);
            }
            assert!(eig.values[0].abs() < 1e-8);
            let zero_mult = eig.values.iter().filter(|&&v| v.abs() < 1e-6).count();
            assert_eq!(zero_mult, graph.component_count());
        }
    }

    #[test]
    fn variational_quotient_certifies_zero_for_ghz() {
        let h = build_connection_graph(&build_ghz()).unwrap();
        let mut g = vec![vec![0.0]; h.vertex_count()];
        g[0][0] = 1.0;
        let q = variational_upper_bound(&h, &g).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn variational_quotient_at_eigenvector_equals_lambda() {
        let h = free_graph(3, 2);
        let l = normalized_laplacian(&h);
        let l2 = lambda2(&l).unwrap();
        // Eq-style test function: g(u) = v(u)/sqrt(rho(u)).
        let g: Vec<Vec<f64>> = (0..h.vertex_count())
            .map(|i| vec![l2.vector[i] / rat_to_f64(h.vertex_weight(i)).sqrt()])
            .collect();
        let q = variational_upper_bound(&h, &g).unwrap();
        assert!((q - l2.value).abs() < 1e-9, "{q} vs {}", l2.value);
    }

    #[test]
    fn variational_quotient_bounds_lambda_from_above() {
        let h = free_graph(3, 2);
        let l = normalized_laplacian(&h);
        let l2 = lambda2(&l).unwrap();
        // deterministic pseudo-random test functions
        let mut seed = 0x9e3779b97f4a7c15u64;
        for _ in 0..20 {
            let g: Vec<Vec<f64>> = (0..h.vertex_count())
                .map(|_| {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    vec![(seed >> 11) as f64 / (1u64 << 53) as f64]
                })
                .collect();
            if let Ok(q) = variational_upper_bound(&h, &g) {
                assert!(q >= l2.value - 1e-8);
            }
        }
    }

    #[test]
    fn constant_function_is_rejected() {
        let h = free_graph(2, 2);
        let g = vec![vec![0.5]; h.vertex_count()];
        assert!(matches!(
            variational_upper_bound(&h, &g),
            Err(SpectralError::ConstantFunction)
        ));
    }

    #[test]
    fn non_symmetric_matrix_is_rejected() {
        let m = vec![vec![1.0, 0.5], vec![0.0, 1.0]];
        assert!(matches!(
            symmetric_eigen(&m),
            Err(SpectralError::NotSymmetric)
        ));
    }
}
