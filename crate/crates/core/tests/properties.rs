use amlab::barriers::{control_distance, straight_line_cost};
use amlab::experiments::blowup_probe;
use amlab::grid::{Grid, GridField};
use amlab::hamiltonian::{cone, legendre, ConeSpec, Hamiltonian, HamiltonianModel};
use amlab::pde_solver::{check_max_principle, solve_regularized, SolverConfig, SolverProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd() -> impl Strategy<Value = HamiltonianModel> {
    (0.5..2.0f64, 0.5..2.0f64, -0.45..0.45f64).prop_map(|(a, b, r)| {
        let c = r * (a * b).sqrt();
        HamiltonianModel::anisotropic(DMatrix::from_row_slice(2, 2, &[a, c, c, b])).unwrap()
    })
}

fn point(half_width: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-half_width..half_width, 2).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_growth_bounds(alpha in 1.2..6.0f64, p in point(1.5)) {
        let m = HamiltonianModel::separable_power_on_box(2, alpha, 1.5).unwrap();
        let b = m.bounds();
        let h = m.value(&p).unwrap();
        let r2 = p.norm_squared();
        prop_assert!(h >= 0.5 * b.lower * r2 - 1e-12);
        prop_assert!(h <= 0.5 * b.upper * r2 + 1e-12);
    }

    #[test]
    fn fenchel_young(m in spd(), p in point(2.0), q in point(2.0)) {
        let l = legendre(&m, &q).unwrap();
        prop_assert!(p.dot(&q) <= m.value(&p).unwrap() + l.value + 1e-12);
    }

    #[test]
    fn cone_is_positively_homogeneous(m in spd(), x in point(1.0), t in 0.1..5.0f64, sigma in 0.1..2.0f64) {
        let spec = ConeSpec::new(sigma, &m).unwrap();
        let a = cone(&spec, &(&x * t)).unwrap();
        let b = t * cone(&spec, &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn quadratic_form_cone_scales_with_root_sigma(m in spd(), x in point(1.0), sigma in 0.1..2.0f64) {
        let one = cone(&ConeSpec::new(sigma, &m).unwrap(), &x).unwrap();
        let four = cone(&ConeSpec::new(4.0 * sigma, &m).unwrap(), &x).unwrap();
        prop_assert!((four - 2.0 * one).abs() <= 1e-9 * one.abs().max(1.0));
    }

    #[test]
    fn straight_cost_is_subadditive(m in spd(), x in point(1.0), y in point(1.0), z in point(1.0), sigma in 0.2..2.0f64) {
        let xz = straight_line_cost(&m, sigma, 0.0, x.as_slice(), z.as_slice()).unwrap();
        let xy = straight_line_cost(&m, sigma, 0.0, x.as_slice(), y.as_slice()).unwrap();
        let yz = straight_line_cost(&m, sigma, 0.0, y.as_slice(), z.as_slice()).unwrap();
        prop_assert!(xz <= (xy + yz) * (1.0 + 1e-7) + 1e-12);
    }

    #[test]
    fn discount_never_increases_straight_cost(m in spd(), x in point(1.0), y in point(1.0), delta in 0.01..1.0f64) {
        let plain = straight_line_cost(&m, 1.0, 0.0, x.as_slice(), y.as_slice()).unwrap();
        let discounted = straight_line_cost(&m, 1.0, delta, x.as_slice(), y.as_slice()).unwrap();
        prop_assert!(discounted <= plain * (1.0 + 1e-7) + 1e-12);
    }

    #[test]
    fn affine_fields_blow_up_to_their_slope(a in -2.0..2.0f64, b in -2.0..2.0f64, cx in -0.5..0.5f64, cy in -0.5..0.5f64) {
        let grid = Grid::cube(2, 1.0, 21).unwrap();
        let u = GridField::from_fn(grid, |x| a * x[0] + b * x[1] + 0.3).unwrap();
        let r = blowup_probe(&u, &[cx, cy], &[0.4, 0.2, 0.1]).unwrap();
        for f in &r.fits {
            prop_assert!((f.slope[0] - a).abs() < 1e-10 && (f.slope[1] - b).abs() < 1e-10);
        }
        prop_assert!(r.dispersion < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn barrier_grows_with_sigma(m in spd(), sigma in 0.3..1.5f64) {
        let grid = Grid::cube(2, 1.0, 13).unwrap();
        let low = control_distance(&m, sigma, 0.0, &grid, &[0.0, 0.0]).unwrap();
        let high = control_distance(&m, 2.0 * sigma, 0.0, &grid, &[0.0, 0.0]).unwrap();
        for (a, b) in low.value().values().iter().zip(high.value().values()) {
            prop_assert!(*a <= *b + 1e-12);
        }
    }

    #[test]
    fn solutions_obey_the_maximum_principle(m in spd(), c in prop::collection::vec(-1.0..1.0f64, 4), eps in 0.05..0.5f64) {
        let grid = Grid::cube(2, 1.0, 17).unwrap();
        let g = GridField::from_fn(grid, |x| {
            c[0] * x[0] + c[1] * (2.0 * x[1]).sin() + c[2] * x[0] * x[1] + c[3] * (x[0] - x[1]).cos()
        })
        .unwrap();
        let u = solve_regularized(&SolverProblem::new(&m, g.clone(), eps, SolverConfig::default()).unwrap())
            .unwrap()
            .field;
        prop_assert!(check_max_principle(&u, &g).unwrap().pass);
    }
}
