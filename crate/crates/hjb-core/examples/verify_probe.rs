use hjb_core::hjb::{lambda_threshold, solve_fixed_point, SolveOptions};
use hjb_core::model::{StateSpace, StateVector};
use hjb_core::presets::default_heat_problem;
use hjb_core::seed::derive_seed;
use hjb_core::synthesis::{fundamental_identity_check, Policy, SimulationParams};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let problem = default_heat_problem(33).unwrap();
    let model = &problem.model;
    let spec = &problem.spec;
    let lambda0 = lambda_threshold(&problem.estimate, &spec.control_set).unwrap();
    let sol = solve_fixed_point(model, spec, lambda0, &problem.estimate, &SolveOptions::default(), None).unwrap();
    println!("lambda0 = {lambda0:.4}, solve {} iters, consistency {:.2e}", sol.iterations, sol.consistency_gap);

    let params = SimulationParams::default_for(lambda0, 2024);
    // 5 initial states along the first eigenmode
    for &c in &[0.0, 0.4, -0.4, 0.9, -1.0_f64] {
        let mut coeffs = DVector::zeros(model.state_dim());
        coeffs[0] = c;
        coeffs[3] = 0.2 * c; // off-projection component, exercises the full state
        let x0 = StateVector::new(coeffs, StateSpace::H);
        let t1 = Instant::now();
        let rep = fundamental_identity_check(model, spec, &sol, &Policy::Feedback(&sol), &x0, &params).unwrap();
        println!("x0[0]={c:+.1}: J={:.6} v={:.6} gap={:+.3e} (3se={:.1e}) gap_int={:+.3e} ({:.1e})  [{:.1}s]",
            rep.cost_estimate, rep.value_at_start, rep.gap_cost, 3.0*rep.gap_cost_std_error,
            rep.gap_integrand, rep.gap_integrand_std_error, t1.elapsed().as_secs_f64());
    }

    // 10 random constant policies from the outer half ball, paired vs feedback
    let mut coeffs = DVector::zeros(model.state_dim());
    coeffs[0] = 0.4;
    let x0 = StateVector::new(coeffs, StateSpace::H);
    let fb = fundamental_identity_check(model, spec, &sol, &Policy::Feedback(&sol), &x0, &params).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(2024, &[77]));
    for i in 0..10 {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r: f64 = rng.random_range(0.125..0.25);
        let u = DVector::from_vec(vec![r * theta.cos(), r * theta.sin()]);
        let rep = fundamental_identity_check(model, spec, &sol, &Policy::Constant(u.clone()), &x0, &params).unwrap();
        let paired_gap = rep.cost_estimate - fb.cost_estimate;
        // crude paired SE: both runs share noise; report both SEs
        println!("const {i}: |u|={:.3} gap_vs_v={:+.4e} gap_int={:+.4e}±{:.1e} J-J_fb={:+.4e}",
            u.norm(), rep.gap_cost, rep.gap_integrand, rep.gap_integrand_std_error, paired_gap);
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
