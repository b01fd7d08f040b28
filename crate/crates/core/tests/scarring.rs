use catlab::dynamics::{orbit_of_rational, CatMatrix, RationalPoint};
use catlab::phase_space::{coherent_state, husimi, CoherentSpec};
use catlab::propagator::build_propagator;
use catlab::quantization::QuantumTorus;
use catlab::spectral::{best_scar, decompose, min_mass_scan, orbit_mass, Region};

#[test]
fn scar_on_short_orbit_beats_baseline() {
    let m = CatMatrix::arnold();
    let qt = QuantumTorus::new(204).unwrap();
    let p = build_propagator(&qt, &m).unwrap();
    let orbit = orbit_of_rational(&m, "1/3,0".parse::<RationalPoint>().unwrap());
    assert_eq!(orbit.period, 4);
    let (_, report) = best_scar(&p, &orbit, 0.05, 200).unwrap();
    assert!(report.residual <= 1e-8);
    assert!(report.orbit_mass > 3.0 * report.baseline, "{report:?}");
}

#[test]
fn eigenvectors_have_mass_everywhere() {
    let qt = QuantumTorus::new(64).unwrap();
    let p = build_propagator(&qt, &CatMatrix::arnold()).unwrap();
    let d = decompose(&p).unwrap();
    let regions = [Region::Whole, Region::Ball { center: [0.5, 0.5], radius: 0.2 }];
    let mins = min_mass_scan(&qt, &d, &regions).unwrap();
    assert!((mins[0].min_mass - 1.0).abs() < 1e-12);
    assert!(mins[1].min_mass > 0.0);
}

#[test]
fn coherent_state_mass_sits_at_its_center() {
    let qt = QuantumTorus::new(256).unwrap();
    let u = coherent_state(&qt, &CoherentSpec::balanced(&qt, [0.3, 0.7])).unwrap();
    let field = husimi(&qt, &u, 128, 128).unwrap();
    let am = field.argmax();
    assert!((am[0] - 0.3).abs() < 0.02 && (am[1] - 0.7).abs() < 0.02);
    let m = orbit_mass(&qt, &u, &[[0.3, 0.7]], 0.1).unwrap();
    assert!(m.mass > 0.9);
}
