mod support;

use proptest::prelude::*;
use support::oracle88::{crate_element, crate_node, Oracle};
use wheelforge_core::fem2d::{
    assemble_and_solve, assemble_stiffness, element_compliances, total_compliance, GridModel2D, LoadCase2D,
};

#[test]
fn cantilever_matches_textbook_code() {
    let (nelx, nely) = (60, 20);
    let oracle = Oracle::new(nelx, nely);
    let (fixed, f) = oracle.cantilever();
    let x_oracle = vec![1.0; nelx * nely];
    let u_oracle = oracle.fe(&x_oracle, &fixed, &f);
    let ce_oracle = oracle.element_compliances(&u_oracle);
    let c_oracle: f64 = f.iter().zip(&u_oracle).map(|(a, b)| a * b).sum();

    let model = GridModel2D::new(nelx, nely);
    let loads = LoadCase2D::cantilever_tip(&model);
    let x = vec![1.0; model.n_elems()];
    let u = assemble_and_solve(&model, &x, &loads).unwrap();
    let ce = element_compliances(&model, &x, &u).unwrap();
    let c = total_compliance(&model, &x, &ce);
    assert!((c - c_oracle).abs() <= 1e-6 * c_oracle, "{c} vs {c_oracle}");

    for col in 0..=nelx {
        for row in 0..=nely {
            let on = (nely + 1) * col + row;
            let mn = crate_node(nelx, nely, col, row);
            for k in 0..2 {
                assert!((u[2 * mn + k] - u_oracle[2 * on + k]).abs() <= 1e-8 * u_oracle.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
    }
    let ce_max = ce_oracle.iter().cloned().fold(0.0, f64::max);
    for elx in 0..nelx {
        for ely in 0..nely {
            let a = ce[crate_element(nelx, nely, elx, ely)];
            let b = ce_oracle[ely + elx * nely];
            assert!((a - b).abs() <= 1e-8 * ce_max, "element ({elx},{ely}): {a} vs {b}");
        }
    }
}

#[test]
fn element_compliances_sum_to_total() {
    let model = GridModel2D::new(12, 7);
    let loads = LoadCase2D::cantilever_tip(&model);
    let x: Vec<f64> = (0..model.n_elems()).map(|e| 0.1 + 0.9 * ((e * 37 % 17) as f64 / 16.0)).collect();
    let u = assemble_and_solve(&model, &x, &loads).unwrap();
    let ce = element_compliances(&model, &x, &u).unwrap();
    let k = assemble_stiffness(&model, &x).unwrap();
    let utku = k.quad_form(&u);
    let sum = total_compliance(&model, &x, &ce);
    assert!((sum - utku).abs() <= 1e-9 * utku);
}

#[test]
fn single_element_compliance_is_total() {
    let model = GridModel2D::new(1, 1);
    let loads = LoadCase2D::cantilever_tip(&model);
    let u = assemble_and_solve(&model, &[1.0], &loads).unwrap();
    let ce = element_compliances(&model, &[1.0], &u).unwrap();
    let c: f64 = loads.nodal_forces.iter().map(|(&d, &f)| f * u[d]).sum();
    assert!((total_compliance(&model, &[1.0], &ce) - c).abs() <= 1e-12 * c);
}

fn compliance(model: &GridModel2D, loads: &LoadCase2D, x: &[f64]) -> f64 {
    let u = assemble_and_solve(model, x, loads).unwrap();
    loads.nodal_forces.iter().map(|(&d, &f)| f * u[d]).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_a_density_never_increases_compliance(
        x in prop::collection::vec(0.05f64..1.0, 16),
        e in 0usize..16,
        bump in 0.0f64..0.5,
    ) {
        let model = GridModel2D::new(4, 4);
        let loads = LoadCase2D::cantilever_tip(&model);
        let c0 = compliance(&model, &loads, &x);
        let mut y = x.clone();
        y[e] = (y[e] + bump).min(1.0);
        let c1 = compliance(&model, &loads, &y);
        prop_assert!(c1 <= c0 * (1.0 + 1e-10), "{} > {}", c1, c0);
    }

    #[test]
    fn displacements_are_linear_in_load(
        x in prop::collection::vec(0.0f64..=1.0, 15),
        alpha in -50.0f64..50.0,
    ) {
        let model = GridModel2D::new(5, 3);
        let loads = LoadCase2D::cantilever_tip(&model);
        let mut scaled = loads.clone();
        for f in scaled.nodal_forces.values_mut() {
            *f *= alpha;
        }
        prop_assume!(alpha.abs() > 1e-3);
        let u = assemble_and_solve(&model, &x, &loads).unwrap();
        let ua = assemble_and_solve(&model, &x, &scaled).unwrap();
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())) * alpha.abs();
        for (a, b) in u.iter().zip(&ua) {
            prop_assert!((alpha * a - b).abs() <= 1e-10 * scale);
        }
    }
}
