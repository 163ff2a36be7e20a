use hjb_core::hjb::{solve_fixed_point, SolveOptions};
use hjb_core::presets::{default_heat_problem, heat_spec};
use hjb_core::quadrature::QuadScheme;

fn main() {
    let problem = default_heat_problem(33).unwrap();
    let lambda = 9.6;
    for fd_step in [1e-2, 1e-3, 1e-4, 1e-5] {
        let spec = heat_spec(&problem.model, 33).unwrap();
        let options = SolveOptions {
            scheme: QuadScheme::GaussHermite { order: 20 },
            tol: 1e-6,
            fd_step,
            ..SolveOptions::default()
        };
        let sol = solve_fixed_point(&problem.model, &spec, lambda, &problem.estimate, &options, None).unwrap();
        println!("h = {fd_step:.0e}: consistency {:.4e}", sol.consistency_gap);
    }
}
