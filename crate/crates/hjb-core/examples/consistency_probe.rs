use hjb_core::hjb::{solve_fixed_point, SolveOptions};
use hjb_core::presets::{default_heat_problem, heat_spec};
use hjb_core::quadrature::QuadScheme;

fn main() {
    let problem = default_heat_problem(33).unwrap();
    let lambda = 9.6;
    for (label, nodes, order) in [
        ("33 nodes, GH20", 33usize, 20usize),
        ("33 nodes, GH40", 33, 40),
        ("65 nodes, GH20", 65, 20),
        ("129 nodes, GH20", 129, 20),
        ("65 nodes, GH40", 65, 40),
    ] {
        let spec = heat_spec(&problem.model, nodes).unwrap();
        let options = SolveOptions {
            scheme: QuadScheme::GaussHermite { order },
            tol: 1e-6,
            ..SolveOptions::default()
        };
        let sol = solve_fixed_point(&problem.model, &spec, lambda, &problem.estimate, &options, None).unwrap();
        println!("{label}: consistency {:.3e}, grid_fd {:.3e}, iters {}", sol.consistency_gap, sol.grid_fd_gap, sol.iterations);
    }
}
