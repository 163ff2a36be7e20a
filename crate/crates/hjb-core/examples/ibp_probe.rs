use hjb_core::hjb::{h_min, solve_fixed_point, SolveOptions};
use hjb_core::presets::{default_heat_problem, heat_spec};
use hjb_core::quadrature::{expect, expect_weighted_multi, ProjectedGaussian, QuadScheme};
use hjb_core::smoothing::lambda_operator;
use nalgebra::DVector;

fn main() {
    let problem = default_heat_problem(33).unwrap();
    let model = &problem.model;
    let spec = heat_spec(model, 33).unwrap();
    let lambda = 9.6;
    let options = SolveOptions { tol: 1e-6, ..SolveOptions::default() };
    let sol = solve_fixed_point(model, &spec, lambda, &problem.estimate, &options, None).unwrap();
    let w = sol.w.clone();
    let g = |y: &DVector<f64>| spec.state_cost.eval(y) + h_min(&w.eval(y), &spec).0;
    let scheme = QuadScheme::GaussHermite { order: 20 };
    let b0 = model.projected_control();
    let h = 1e-4;

    // worst interior node: probe a few
    for &znode in &[0.0_f64, 0.5, 0.9, 1.05] {
        let z = DVector::from_vec(vec![znode]);
        println!("z = {znode}");
        for t in [1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
            let mean_mat = model.projected_semigroup(t).unwrap();
            let (_, root) = model.covariance_projected(t).unwrap();
            let (lam, _) = lambda_operator(model, t).unwrap();
            let mk_law = |mu: DVector<f64>| ProjectedGaussian::from_mean_root(mu, &root);
            let law = mk_law(&mean_mat * &z);
            let out = expect_weighted_multi(&g, &law, &lam, scheme).unwrap();
            // FD along channel 0
            let dir = b0.column(0).clone_owned();
            let up = expect(&g, &mk_law(&mean_mat * &(&z + &dir * h)), scheme).unwrap().value;
            let dn = expect(&g, &mk_law(&mean_mat * &(&z - &dir * h)), scheme).unwrap().value;
            let fd = (up - dn) / (2.0 * h);
            println!("  t={t:>8.0e}: grad={:+.6e} fd={:+.6e} diff={:+.3e}", out.values[0], fd, out.values[0] - fd);
        }
    }
}
