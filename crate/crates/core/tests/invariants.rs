use nlpme::elliptic::fixed_point_solve;
use nlpme::operator::{midpoint_operator, multilinear_operator};
use nlpme::stepper::{cfl_bound, explicit_step};
use nlpme::{DiscreteOperator, Field, LevyMeasureSpec, Monotone, Nonlinearity, UniformGrid};
use proptest::prelude::*;

const HALF: usize = 24;
const H: f64 = 0.125;

fn grid() -> UniformGrid {
    UniformGrid::new(1, H, HALF).unwrap()
}

/// Values on the central `2·inner+1` cells, zero elsewhere.
fn compact(values: &[f64]) -> Field {
    let g = grid();
    let inner = (values.len() / 2) as i64;
    let vals = (0..g.len())
        .map(|k| {
            let i = g.index(k)[0];
            if i.abs() <= inner {
                values[(i + inner) as usize]
            } else {
                0.0
            }
        })
        .collect();
    Field::from_values(g, vals).unwrap()
}

fn operator(alpha: f64, r_cells: f64, multilinear: bool) -> DiscreteOperator {
    let spec = LevyMeasureSpec::fractional(alpha, 1).unwrap();
    let r = H * r_cells;
    if multilinear {
        multilinear_operator(&spec, r, H, 1.0).unwrap()
    } else {
        midpoint_operator(&spec, r, H, 1.0).unwrap()
    }
}

fn phi_of(kind: u8) -> Nonlinearity {
    match kind % 3 {
        0 => Nonlinearity::identity(),
        1 => Nonlinearity::power(2.0).unwrap(),
        _ => Nonlinearity::stefan(1.0, 0.5).unwrap(),
    }
}

fn data(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn weights_are_symmetric_and_nonnegative(alpha in 0.1f64..1.9, r_cells in 1.0f64..3.0, ml in any::<bool>()) {
        let op = operator(alpha, r_cells, ml);
        for (b, w) in op.entries() {
            prop_assert!(w >= 0.0);
            let neg: Vec<i64> = b.iter().map(|v| -v).collect();
            prop_assert_eq!(w, op.weight(&neg));
        }
        prop_assert!(op.tail_mass() >= 0.0);
    }

    #[test]
    fn operator_conserves_mass_of_interior_data(alpha in 0.1f64..1.9, ml in any::<bool>(), v in data(9)) {
        let op = operator(alpha, 1.0, ml);
        let u = compact(&v);
        let lu = op.apply(&u).unwrap();
        prop_assert!(lu.integral().abs() <= 1e-12 * (1.0 + op.total_mass()));
    }

    #[test]
    fn explicit_step_is_monotone_under_cfl(alpha in 0.3f64..1.7, kind in 0u8..3, u in data(9), gap in prop::collection::vec(0.0f64..0.5, 9), frac in 0.1f64..1.0) {
        let phi = phi_of(kind);
        let w: Vec<f64> = u.iter().zip(&gap).map(|(a, g)| a + g).collect();
        let (a, b) = (compact(&u), compact(&w));
        let op = operator(alpha, 1.0, false);
        let dt = frac * cfl_bound(&phi, op.total_mass(), b.linf_norm().max(a.linf_norm())).unwrap();
        let scaled = op.scaled(dt).unwrap();
        let ua = explicit_step(&scaled, &phi, &a).unwrap();
        let ub = explicit_step(&scaled, &phi, &b).unwrap();
        prop_assert!(ua.values().iter().zip(ub.values()).all(|(x, y)| x <= &(y + 1e-14)));
    }

    #[test]
    fn implicit_solve_contracts_and_preserves_order(alpha in 0.3f64..1.7, kind in 0u8..3, dt in 0.01f64..0.3, u in data(9), gap in prop::collection::vec(0.0f64..0.5, 9)) {
        let phi = phi_of(kind);
        let op = operator(alpha, 1.0, false).scaled(dt).unwrap();
        let w: Vec<f64> = u.iter().zip(&gap).map(|(a, g)| a + g).collect();
        let (ra, rb) = (compact(&u), compact(&w));
        let tol = 1e-12;
        let (sa, _) = fixed_point_solve(&op, &phi, &ra, tol, None).unwrap();
        let (sb, _) = fixed_point_solve(&op, &phi, &rb, tol, None).unwrap();
        prop_assert!(sa.l1_distance(&sb).unwrap() <= ra.l1_distance(&rb).unwrap() + 10.0 * tol);
        prop_assert!(sa.positive_part_distance(&sb).unwrap() <= 10.0 * tol);
        // maximum principle
        let hi = ra.max().max(0.0);
        let lo = ra.min().min(0.0);
        prop_assert!(sa.values().iter().all(|&x| x <= hi + 1e-10 && x >= lo - 1e-10));
    }

    #[test]
    fn operator_commutes_with_translation(alpha in 0.1f64..1.9, ml in any::<bool>(), shift in -3i64..=3, u in data(7)) {
        let op = operator(alpha, 1.0, ml);
        let v = compact(&u);
        let a = op.apply(&v).unwrap().translated(&[shift]);
        let b = op.apply(&v.translated(&[shift])).unwrap();
        // compare away from the box edge, where both see the whole stencil
        let g = grid();
        for k in 0..g.len() {
            if g.index(k)[0].abs() <= 12 {
                prop_assert!((a.values()[k] - b.values()[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn regularized_functions_are_strictly_increasing(kind in 0u8..3, delta in 0.01f64..0.5, x in -2.0f64..2.0, step in 1e-3f64..1.0) {
        let reg = phi_of(kind).regularize(delta).unwrap();
        let (a, b) = (reg.eval(x), reg.eval(x + step));
        prop_assert!(b - a >= delta * step * (1.0 - 1e-9));
        prop_assert!(reg.eval(0.0).abs() <= 1e-12);
    }
}
