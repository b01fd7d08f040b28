use catlab::dynamics::{CatMatrix, HoleRegion};
use catlab::fup::{
    cantor_set, fup_curve, max_porosity, omega_porosity, porosity_check, IntervalFamily, LineDirection, OmegaSet,
};

#[test]
fn cantor_family_decays_faster_than_volume() {
    let pairs: Vec<_> = (1..=6)
        .map(|k| {
            let x = cantor_set(3, &[0, 2], k).unwrap();
            (x.clone(), x)
        })
        .collect();
    let curve = fup_curve(&pairs).unwrap();
    assert!(curve.rows.windows(2).all(|w| w[1].norm < w[0].norm));
    assert!(curve.fit.beta > curve.volume_exponent);
}

#[test]
fn cantor_porosity_is_scale_free() {
    for k in 2..=6 {
        let set = cantor_set(3, &[0, 2], k).unwrap();
        let nu = max_porosity(&set, IntervalFamily::Exhaustive).nu_star;
        assert!(nu >= 1.0 / 9.0 - 1e-12, "k={k} nu={nu}");
        assert!(porosity_check(&set, 1.0 / 9.0, IntervalFamily::Dyadic).unwrap().holds);
    }
}

#[test]
fn omega_plus_is_smooth_along_unstable_lines() {
    let hole = HoleRegion::new((0.4, 0.6), (0.4, 0.6)).unwrap();
    let report = omega_porosity(&CatMatrix::arnold(), &hole, 2048, 4);
    let e = report.entry(OmegaSet::Plus, LineDirection::Unstable);
    assert!(e.nu < 0.2);
    assert!(e.witness.is_some());
}
