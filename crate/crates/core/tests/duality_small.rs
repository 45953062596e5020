//! Reduced-size duality checks on moment shapes outside the default battery.

use seedbank_core::experiments::{duality_from_states, spde_final_states, MomentSpec};
use seedbank_core::grid::Grid1D;
use seedbank_core::{Marker, SimConfig};

#[test]
fn further_moment_shapes_agree_with_the_dual() {
    let g = Grid1D::new(-15.0, 15.0, 0.1).unwrap();
    let cfg = SimConfig::new(1.0, 1.0, g, 0.004, 0.5, 77).unwrap();
    let states = spde_final_states(&cfg, 1000).unwrap();
    let shapes = [
        "0:d,0.5:d",
        "-0.5:a,0.5:a",
        "0:a,0:d",
        "-0.5:a,0:a,0.5:d",
        "0:a,0:a,0:a,0:a",
    ];
    for shape in shapes {
        let spec = MomentSpec::new(MomentSpec::parse_points(shape).unwrap(), 0.5).unwrap();
        let r = duality_from_states(&spec, &states, &cfg, 10_000, 0.02).unwrap();
        assert!(r.pass, "{shape}: {r:?}");
    }
}

#[test]
fn product_of_active_factors_dominated_by_single_factor() {
    let g = Grid1D::new(-15.0, 15.0, 0.1).unwrap();
    let cfg = SimConfig::new(1.0, 1.0, g, 0.004, 0.5, 5).unwrap();
    let states = spde_final_states(&cfg, 200).unwrap();
    let one = MomentSpec::new(vec![(0.0, Marker::Active)], 0.5).unwrap();
    let two = MomentSpec::new(vec![(0.0, Marker::Active); 2], 0.5).unwrap();
    let m1 = seedbank_core::experiments::moment_from_states(&one, &states).unwrap();
    let m2 = seedbank_core::experiments::moment_from_states(&two, &states).unwrap();
    assert!(m2.mean <= m1.mean);
}
