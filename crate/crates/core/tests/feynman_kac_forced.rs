//! Path-space estimates where the forcing reaches the start point, so the
//! killing weight carries real mass.

use seedbank_core::feynman_kac::{fk_estimate, FkOptions, FkWeight};
use seedbank_core::grid::Grid1D;
use seedbank_core::pfde::solve_two_component;
use seedbank_core::{PfdeConfig, PfdeSolution};

const PATHS: usize = 20_000;

fn solution(lambda: f64) -> PfdeSolution {
    let g = Grid1D::new(-10.0, 10.0, 0.1).unwrap();
    solve_two_component(&PfdeConfig::new(lambda, 0.5, 1.0, g, 0.0005, 1.0).unwrap()).unwrap()
}

#[test]
fn killed_estimate_matches_solver() {
    for lambda in [1.0, 10.0] {
        let sol = solution(lambda);
        for (s, x) in [(0.5, 1.5), (1.0, 2.5), (1.0, 0.0)] {
            let est = fk_estimate(s, x, &sol, FkOptions::default(), PATHS, 3).unwrap();
            let pde = sol.phi_interp(s, x).unwrap();
            let err = (est.value.mean - pde).abs();
            assert!(
                err <= 3.0 * est.value.stderr + 0.01,
                "lambda {lambda} (s {s}, x {x}): mc {:?} pde {pde}",
                est.value
            );
            assert_eq!(est.excluded, 0);
        }
    }
}

#[test]
fn unit_weight_overshoots_when_damping_matters() {
    let sol = solution(10.0);
    let (s, x) = (1.0, 2.5);
    let killed = fk_estimate(s, x, &sol, FkOptions::default(), PATHS, 3).unwrap();
    let unit = fk_estimate(s, x, &sol, FkOptions { dt_path: None, weight: FkWeight::Unit }, PATHS, 3).unwrap();
    let pde = sol.phi_interp(s, x).unwrap();
    assert!(unit.value.mean - pde > 10.0 * unit.value.stderr, "{unit:?} vs {pde}");
    assert!(killed.value.mean < unit.value.mean);
}

#[test]
fn estimates_follow_the_lambda_ordering() {
    let (low, high) = (solution(1.0), solution(10.0));
    let (s, x) = (0.5, 1.5);
    let a = fk_estimate(s, x, &low, FkOptions::default(), PATHS, 9).unwrap();
    let b = fk_estimate(s, x, &high, FkOptions::default(), PATHS, 9).unwrap();
    assert!(low.phi_interp(s, x).unwrap() < high.phi_interp(s, x).unwrap());
    assert!(a.value.mean < b.value.mean + 3.0 * a.value.combined_stderr(&b.value));
}
