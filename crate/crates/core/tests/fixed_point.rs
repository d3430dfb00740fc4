mod common;

use common::*;
use lsv_core::fixed_point::{iterate, shrink_horizon, x_set_params, FixedPointConfig, Problem};
use lsv_core::linpde::StepConfig;
use lsv_core::model::Func1;
use lsv_core::{Error, Exec};

fn config() -> FixedPointConfig {
    FixedPointConfig::default()
}

#[test]
fn constant_b_reduces_to_the_linear_solve() {
    let g = lsv_grid(100, 50, 40);
    let spec = lsv_spec(Func1::constant(1.0), 0.2, 1.0, -0.3);
    let init = lsv_initial(&g, 1e-6);
    let problem = Problem::new(&spec, &g, &init, Exec::Parallel).unwrap();
    let params = x_set_params(&problem, &config()).unwrap();
    let (p, report) = iterate(&problem, &params, &config()).unwrap();
    let (u, _) = problem.frozen_solution(&StepConfig::default()).unwrap();
    assert!(report.iterations <= 2);
    assert_eq!(p.data, u.data);
}

#[test]
fn success_survives_halving_the_horizon() {
    let g = lsv_grid(100, 50, 40);
    let spec = lsv_spec(Func1::sin_perturbed(0.1), 0.2, 1.5, 0.0);
    let init = lsv_initial(&g, 5e-7);
    let problem = Problem::new(&spec, &g, &init, Exec::Parallel).unwrap();
    let params = x_set_params(&problem, &config()).unwrap();
    assert!(iterate(&problem, &params, &config()).is_ok());
    let half = problem.with_steps(g.nt / 2);
    let trial = lsv_core::fixed_point::XSetParams {
        t_star: half.grid.t_end,
        ..params
    };
    let (_, report) = iterate(&half, &trial, &config()).unwrap();
    assert!(report.membership.iter().all(|m| m.passed()));
}

#[test]
fn iterates_keep_the_initial_and_lateral_data() {
    let g = lsv_grid(100, 50, 20);
    let spec = lsv_spec(Func1::exp(Some((0.5, 2.0))), 0.2, 1.5, 0.0);
    let init = lsv_initial(&g, 5e-7);
    let problem = Problem::new(&spec, &g, &init, Exec::Parallel).unwrap();
    let params = x_set_params(&problem, &config()).unwrap();
    let (p, _) = iterate(&problem, &params, &config()).unwrap();
    assert_eq!(p.slice(0), &init.psi[..]);
    for k in 0..=g.nt {
        let s = p.slice(k);
        for i in 0..g.n_s() {
            for j in [0, g.n_y() - 1] {
                assert_eq!(s[g.idx(i, j)], init.psi[g.idx(i, j)]);
            }
        }
        for j in 0..g.n_y() {
            for i in [0, g.n_s() - 1] {
                assert_eq!(s[g.idx(i, j)], init.psi[g.idx(i, j)]);
            }
        }
    }
}

#[test]
fn large_b_star_needs_a_shorter_horizon() {
    let mut g = lsv_grid(100, 50, 100);
    g.y_min = -2.0;
    g.y_max = 2.0;
    let floor = lsv_core::model::relative_floor(&g, 100.0, 0.0, 10.0, 0.3, 5e-7);
    let init = lsv_core::model::smoothed_dirac(100.0, 0.0, 10.0, 0.3, floor, &g).unwrap();
    let mut spec = lsv_spec(Func1::sin_perturbed(0.99), 0.2, 1.5, 0.0);
    spec.alpha_y = lsv_core::model::Func3::constant(1.0);
    let problem = Problem::new(&spec, &g, &init, Exec::Parallel).unwrap();
    let params = x_set_params(&problem, &config()).unwrap();
    assert!(matches!(
        iterate(&problem, &params, &config()),
        Err(Error::MembershipLost { .. }) | Err(Error::NotConverged(_))
    ));
    let found = shrink_horizon(&problem, &params, &config()).unwrap();
    assert!(found.halvings > 0);
    assert!(found.params.t_star < g.t_end);
    assert_eq!(found.params.x_star, params.x_star);
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let g = lsv_grid(100, 50, 20);
    let spec = lsv_spec(Func1::exp(Some((0.5, 2.0))), 0.2, 1.5, 0.0);
    let init = lsv_initial(&g, 5e-7);
    let run = |exec| {
        let problem = Problem::new(&spec, &g, &init, exec).unwrap();
        let cfg = FixedPointConfig {
            step: StepConfig { exec, ..StepConfig::default() },
            ..config()
        };
        let params = x_set_params(&problem, &cfg).unwrap();
        iterate(&problem, &params, &cfg).unwrap().0
    };
    assert_eq!(run(Exec::Sequential).data, run(Exec::Parallel).data);
}
