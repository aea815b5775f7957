//! Finite differences: centered in the interior, second-order one-sided at
//! the boundary (gradient only).

use super::{GridField, Grid, MatrixField, VectorField, MAX_DIM};

/// Discrete gradient at one node.
pub fn gradient_at(grid: &Grid, values: &[f64], node: usize) -> [f64; MAX_DIM] {
    let m = grid.multi_index(node);
    let h = grid.spacing();
    let mut g = [0.0; MAX_DIM];
    for k in 0..grid.dim() {
        let s = grid.stride(k);
        let last = grid.counts()[k] - 1;
        g[k] = if m[k] == 0 {
            (-3.0 * values[node] + 4.0 * values[node + s] - values[node + 2 * s]) / (2.0 * h)
        } else if m[k] == last {
            (3.0 * values[node] - 4.0 * values[node - s] + values[node - 2 * s]) / (2.0 * h)
        } else {
            (values[node + s] - values[node - s]) / (2.0 * h)
        };
    }
    g
}

/// Discrete Hessian at an interior node; symmetric by construction.
pub fn hessian_at(grid: &Grid, values: &[f64], node: usize) -> [[f64; MAX_DIM]; MAX_DIM] {
    let h2 = grid.spacing() * grid.spacing();
    let n = grid.dim();
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    let u = values[node];
    for i in 0..n {
        let si = grid.stride(i);
        out[i][i] = (values[node + si] - 2.0 * u + values[node - si]) / h2;
        for j in i + 1..n {
            let sj = grid.stride(j);
            let c = (values[node + si + sj] - values[node + si - sj] - values[node - si + sj]
                + values[node - si - sj])
                / (4.0 * h2);
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    out
}

pub fn gradient(field: &GridField) -> VectorField {
    let grid = *field.grid();
    let n = grid.dim();
    let mut data = vec![0.0; grid.len() * n];
    for node in 0..grid.len() {
        let g = gradient_at(&grid, field.values(), node);
        data[node * n..(node + 1) * n].copy_from_slice(&g[..n]);
    }
    VectorField { grid, data }
}

/// Hessian at interior nodes; boundary entries are zero.
pub fn hessian(field: &GridField) -> MatrixField {
    let grid = *field.grid();
    let n = grid.dim();
    let mut data = vec![0.0; grid.len() * n * n];
    for node in 0..grid.len() {
        if grid.is_boundary(node) {
            continue;
        }
        let hm = hessian_at(&grid, field.values(), node);
        for i in 0..n {
            for j in 0..n {
                data[node * n * n + i * n + j] = hm[i][j];
            }
        }
    }
    MatrixField { grid, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_coordinate_is_unit_vector_everywhere() {
        let g = Grid::cube(3, 1.0, 7).unwrap();
        let f = GridField::from_fn(g, |x| x[2]).unwrap();
        let d = gradient(&f);
        for node in 0..g.len() {
            let v = d.slice(node);
            assert!(v[0].abs() < 1e-13 && v[1].abs() < 1e-13 && (v[2] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_and_hessian_of_half_square_norm() {
        let g = Grid::cube(2, 1.0, 11).unwrap();
        let f = GridField::from_fn(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let d = gradient(&f);
        let hm = hessian(&f);
        for node in g.interior() {
            let x = g.point(node);
            let v = d.slice(node);
            assert!((v[0] - x[0]).abs() < 1e-13 && (v[1] - x[1]).abs() < 1e-13);
            let m = hm.at(node);
            assert!((m[(0, 0)] - 1.0).abs() < 1e-11 && (m[(1, 1)] - 1.0).abs() < 1e-11);
            assert!(m[(0, 1)].abs() < 1e-11);
        }
        // one-sided second-order differences are exact on quadratics too
        for node in g.boundary() {
            let x = g.point(node);
            let v = d.slice(node);
            assert!((v[0] - x[0]).abs() < 1e-12 && (v[1] - x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_derivative_of_product() {
        let g = Grid::cube(2, 1.0, 9).unwrap();
        let f = GridField::from_fn(g, |x| x[0] * x[1]).unwrap();
        let hm = hessian(&f);
        for node in g.interior() {
            let m = hm.at(node);
            assert!((m[(0, 1)] - 1.0).abs() < 1e-12);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
        }
    }

    #[test]
    fn quartic_second_difference() {
        let g = Grid::new(&[(0.0, 2.0)], &[21]).unwrap();
        let f = GridField::from_fn(g, |x| x[0].powi(4)).unwrap();
        let node = g.index(&[10]);
        let d2 = hessian(&f).at(node)[(0, 0)];
        assert!((d2 - 12.02).abs() < 1e-10);
    }

    #[test]
    fn sine_gradient_error_bound() {
        let g = Grid::new(&[(0.0, 3.0)], &[301]).unwrap();
        let f = GridField::from_fn(g, |x| x[0].sin()).unwrap();
        let d = gradient(&f);
        let err = g
            .interior()
            .into_iter()
            .map(|i| (d.slice(i)[0] - g.point(i)[0].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2e-5, "{err}");
    }
}
