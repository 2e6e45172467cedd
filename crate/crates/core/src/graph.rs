//! Sensor graphs: degree, Laplacians and structural masks.
//!
//! The structural mask marks sensor pairs that are *not* connected within
//! `order` hops:
//!
//! ```text
//! M = 1 - ceil(|L~|),   L~ = I - D^{-1/2} W D^{-1/2}
//! ```
//!
//! with the diagonal of `M` forced to zero. Order 2 applies the same rule to
//! the support of `W + W^2`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::SeededRng;

/// Entries of `L~` with magnitude at or below this count as zero.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Weighted sensor graph without self-loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGraph {
    adjacency: Matrix,
    degree: Vec<f64>,
}

impl SensorGraph {
    /// Validate and wrap an adjacency matrix.
    ///
    /// The matrix must be square with finite, nonnegative entries and a zero
    /// diagonal.
    pub fn new(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::Validation(alloc::format!(
                "adjacency must be square, got {}x{}",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        let n = adjacency.rows();
        for i in 0..n {
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Validation(alloc::format!(
                        "adjacency[{i},{j}] = {w} is not a finite nonnegative weight"
                    )));
                }
            }
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::Validation(alloc::format!("self-loop at sensor {i}")));
            }
        }
        let degree = adjacency.row_iter().map(|r| r.iter().sum()).collect();
        Ok(Self { adjacency, degree })
    }

    /// Path `0 - 1 - ... - (n-1)` with unit weights.
    pub fn path(n: usize) -> Self {
        let mut w = Matrix::zeros(n, n);
        for i in 1..n {
            w[(i - 1, i)] = 1.0;
            w[(i, i - 1)] = 1.0;
        }
        Self::new(w).expect("path adjacency is valid")
    }

    /// Ring (cycle) with unit weights. For `n < 3` this degenerates to a path.
    pub fn ring(n: usize) -> Self {
        let mut w = Self::path(n).adjacency;
        if n >= 3 {
            w[(0, n - 1)] = 1.0;
            w[(n - 1, 0)] = 1.0;
        }
        Self::new(w).expect("ring adjacency is valid")
    }

    /// Complete graph with unit weights.
    pub fn complete(n: usize) -> Self {
        let mut w = Matrix::filled(n, n, 1.0);
        for i in 0..n {
            w[(i, i)] = 0.0;
        }
        Self::new(w).expect("complete adjacency is valid")
    }

    /// Undirected Erdos-Renyi graph `G(n, p)` with unit weights.
    pub fn erdos_renyi(n: usize, p_edge: f64, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.uniform() < p_edge {
                    w[(i, j)] = 1.0;
                    w[(j, i)] = 1.0;
                }
            }
        }
        Self::new(w).expect("random adjacency is valid")
    }

    /// Number of sensors.
    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    /// Weighted adjacency `W`.
    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Row sums of `W`.
    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Diagonal degree matrix `D`.
    pub fn degree_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.degree)
    }

    /// Combinatorial Laplacian `L = D - W`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = self.adjacency.scale(-1.0);
        for (i, &d) in self.degree.iter().enumerate() {
            l[(i, i)] = d;
        }
        l
    }

    /// `D^{-1/2} W D^{-1/2}`, with `D^{-1/2}_ii = 0` for isolated sensors.
    pub fn normalized_adjacency(&self) -> Matrix {
        let inv_sqrt: Vec<f64> = self
            .degree
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / math::sqrt(d) } else { 0.0 })
            .collect();
        let n = self.n();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    a[(i, j)] = inv_sqrt[i] * w * inv_sqrt[j];
                }
            }
        }
        a
    }

    /// True if `W` has an edge `i -> j`.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] > 0.0
    }
}

/// Symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.
///
/// Rows and columns of isolated sensors are entirely zero, including the
/// diagonal entry.
pub fn normalized_laplacian(graph: &SensorGraph) -> Matrix {
    let mut l = graph.normalized_adjacency().scale(-1.0);
    for (i, &d) in graph.degrees().iter().enumerate() {
        l[(i, i)] = if d > 0.0 { 1.0 } else { 0.0 };
    }
    l
}

/// Binary mask of sensor pairs outside the `order`-hop neighborhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralMask {
    order: usize,
    mask: Matrix,
}

impl StructuralMask {
    /// Hop order the mask was built for.
    pub fn order(&self) -> usize {
        self.order
    }

    /// The 0/1 matrix.
    pub fn matrix(&self) -> &Matrix {
        &self.mask
    }

    /// Number of sensors.
    pub fn n(&self) -> usize {
        self.mask.rows()
    }

    /// True if coupling `i <- j` is penalized.
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)] != 0.0
    }

    /// Build a mask directly from a 0/1 matrix (e.g. when loading a checkpoint).
    pub fn from_matrix(order: usize, mask: Matrix) -> Result<Self> {
        if !mask.is_square() {
            return Err(Error::Validation("mask must be square".into()));
        }
        for i in 0..mask.rows() {
            for j in 0..mask.cols() {
                let v = mask[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Validation(alloc::format!(
                        "mask[{i},{j}] = {v} is not binary"
                    )));
                }
            }
            if mask[(i, i)] != 0.0 {
                return Err(Error::Validation(alloc::format!(
                    "mask diagonal at {i} must be 0"
                )));
            }
        }
        Ok(Self { order, mask })
    }
}

/// `M = 1 - ceil(|L~|)` for order 1; the same rule on `support(W + W^2)` for
/// order 2. The diagonal is always 0.
pub fn structural_mask(graph: &SensorGraph, order: usize) -> Result<StructuralMask> {
    let lap = match order {
        1 => normalized_laplacian(graph),
        2 => normalized_laplacian(&second_order_graph(graph)),
        other => return Err(Error::UnsupportedOrder(other)),
    };
    let n = graph.n();
    let mut mask = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // ceil(|x|) is 1 for any nonzero x in (0, 1], 0 at exactly 0.
            let covered = if math::abs(lap[(i, j)]) > SUPPORT_EPS {
                math::ceil(math::abs(lap[(i, j)])).min(1.0)
            } else {
                0.0
            };
            mask[(i, j)] = 1.0 - covered;
        }
    }
    Ok(StructuralMask { order, mask })
}

/// Unit-weight graph on the support of `W + W^2`, self-loops dropped.
fn second_order_graph(graph: &SensorGraph) -> SensorGraph {
    let w = graph.adjacency();
    let w2 = w.matmul(w).expect("square");
    let n = graph.n();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && (w[(i, j)] > 0.0 || w2[(i, j)] > 0.0) {
                s[(i, j)] = 1.0;
            }
        }
    }
    SensorGraph::new(s).expect("support graph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const R2: f64 = core::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn edgeless_laplacian_is_zero() {
        let g = SensorGraph::new(Matrix::zeros(3, 3)).unwrap();
        assert_eq!(normalized_laplacian(&g), Matrix::zeros(3, 3));
    }

    #[test]
    fn path3_laplacian() {
        let l = normalized_laplacian(&SensorGraph::path(3));
        let expected =
            Matrix::from_rows(&[[1.0, -R2, 0.0], [-R2, 1.0, -R2], [0.0, -R2, 1.0]]).unwrap();
        assert!(l.max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn complete3_laplacian() {
        let l = normalized_laplacian(&SensorGraph::complete(3));
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { -0.5 };
                assert!((l[(i, j)] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_is_degree_minus_adjacency() {
        let g = SensorGraph::erdos_renyi(8, 0.4, 2);
        assert_eq!(g.laplacian(), g.degree_matrix().sub(g.adjacency()).unwrap());
    }

    #[test]
    fn path3_masks() {
        let g = SensorGraph::path(3);
        let m1 = structural_mask(&g, 1).unwrap();
        let expected =
            Matrix::from_rows(&[[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(m1.matrix(), &expected);
        assert_eq!(
            structural_mask(&g, 2).unwrap().matrix(),
            &Matrix::zeros(3, 3)
        );
    }

    #[test]
    fn complete_graph_mask_is_zero() {
        assert_eq!(
            structural_mask(&SensorGraph::complete(3), 1)
                .unwrap()
                .matrix(),
            &Matrix::zeros(3, 3)
        );
    }

    #[test]
    fn isolated_sensor_masked_everywhere() {
        let mut w = Matrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        let m = structural_mask(&SensorGraph::new(w).unwrap(), 1).unwrap();
        assert_eq!(m.matrix().row(2), &[1.0, 1.0, 0.0]);
        assert_eq!(m.matrix().col(2), alloc::vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(SensorGraph::new(Matrix::zeros(2, 3)).is_err());
        let mut w = Matrix::zeros(2, 2);
        w[(0, 1)] = -1.0;
        assert!(SensorGraph::new(w).is_err());
        assert!(matches!(
            structural_mask(&SensorGraph::path(3), 3),
            Err(Error::UnsupportedOrder(3))
        ));
    }
}
