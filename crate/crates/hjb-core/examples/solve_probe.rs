use hjb_core::hjb::{contraction_bound, control_lipschitz, lambda_threshold, solve_fixed_point, SolveOptions};
use hjb_core::presets::default_heat_problem;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let problem = default_heat_problem(33).unwrap();
    println!("fit: gamma = {:.4}, kappa0 = {:.4}, r2 = {:.6}, slope = {:.4}",
        problem.estimate.gamma(), problem.estimate.kappa0, problem.estimate.fit_r2,
        problem.estimate.fitted_exponent);
    let lambda0 = lambda_threshold(&problem.estimate, &problem.spec.control_set).unwrap();
    println!("lambda0 = {lambda0:.4}");
    let q = control_lipschitz(&problem.spec)
        * contraction_bound(lambda0, problem.estimate.gamma(), problem.estimate.kappa0).unwrap();
    println!("certified factor at lambda0 = {q:.4}");
    let options = SolveOptions::default();
    let t1 = Instant::now();
    let sol = solve_fixed_point(&problem.model, &problem.spec, lambda0, &problem.estimate, &options, None).unwrap();
    println!("solve: {} iterations, converged {}, {:.2}s", sol.iterations, sol.converged, t1.elapsed().as_secs_f64());
    println!("v sup = {:.6}, w sup = {:.6}", sol.v.sup_norm(), sol.w.sup_norm());
    println!("consistency gap = {:.3e} (10 tol = {:.1e}), grid fd gap = {:.3e}",
        sol.consistency_gap, 10.0 * sol.tol, sol.grid_fd_gap);
    let ratios: Vec<f64> = sol.residual_history.windows(2).map(|w| w[1] / w[0]).collect();
    println!("first residuals: {:?}", &sol.residual_history[..6.min(sol.residual_history.len())]);
    println!("max ratio from iter 2: {:.4}",
        ratios.iter().skip(1).cloned().fold(0.0_f64, f64::max));
    println!("total {:.2}s", t0.elapsed().as_secs_f64());
}
