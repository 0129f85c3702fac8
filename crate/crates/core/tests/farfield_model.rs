mod common;

use holosim::channel::SurfaceProfile;
use holosim::farfield::{angle_grid, farfield_cut, isolation, main_lobe, FarfieldCut};
use holosim::hologram::{design, excite, ComplexFieldGrid, GridTag};
use num_complex::Complex64;
use proptest::prelude::*;

fn aperture(
    rows: usize,
    cols: usize,
    f: impl Fn(f64) -> Complex64,
    ys: &[f64],
) -> ComplexFieldGrid {
    ComplexFieldGrid {
        rows,
        cols,
        values: ys.iter().map(|&y| f(y)).collect(),
        tag: GridTag::Reconstruction,
    }
}

#[test]
fn uniform_aperture_radiates_broadside() {
    let s = common::single_pair(16, 16, [0.4, 0.0, 0.0], [1.0, 0.0, 0.0]);
    let ys: Vec<f64> = s.geometry.elements().map(|(_, _, p)| p.y).collect();
    let ap = aperture(16, 16, |_| Complex64::new(1.0, 0.0), &ys);
    let cut = farfield_cut(
        &ap,
        &s.geometry,
        s.wavenumber(),
        &angle_grid(-90.0, 90.0, 0.1).unwrap(),
    )
    .unwrap();
    let lobe = main_lobe(&cut).unwrap();
    assert!(lobe.angle_deg.abs() < 1e-9, "{}", lobe.angle_deg);
    // Peak of 256 unit elements with element amplitude 1 at broadside.
    assert!((lobe.peak_db - 20.0 * 256f64.log10()).abs() < 1e-9);
    let w = lobe.width_3db_deg.unwrap();
    // Uniform line of N elements at d: HPBW ~ 0.886 lambda / (N d) radians.
    let approx = (0.886 * s.wavelength() / (16.0 * s.geometry.dy)).to_degrees();
    assert!((w - approx).abs() < 0.05 * approx, "{w} vs {approx}");
}

#[test]
fn linear_phase_ramp_steers_the_beam() {
    let s = common::single_pair(36, 36, [0.4, 0.0, 0.0], [1.0, 0.0, 0.0]);
    let k = s.wavenumber();
    let ys: Vec<f64> = s.geometry.elements().map(|(_, _, p)| p.y).collect();
    let sin20 = 20f64.to_radians().sin();
    let ap = aperture(36, 36, |y| Complex64::from_polar(1.0, -k * y * sin20), &ys);
    let cut = farfield_cut(&ap, &s.geometry, k, &angle_grid(-90.0, 90.0, 0.05).unwrap()).unwrap();
    let lobe = main_lobe(&cut).unwrap();
    assert!((lobe.angle_deg - 20.0).abs() < 0.1, "{}", lobe.angle_deg);
}

#[test]
fn sinc_fixture_peak_is_located() {
    let step = 0.5;
    let angles: Vec<f64> = (0..121).map(|i| -20.0 + 0.3 + i as f64 * step).collect();
    let values = angles
        .iter()
        .map(|a| {
            let x = (a - 10.0) / 3.0;
            let v = if x == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    let lobe = main_lobe(&FarfieldCut {
        angles_deg: angles,
        values,
    })
    .unwrap();
    assert!(
        (lobe.angle_deg - 10.0).abs() <= step / 2.0,
        "{}",
        lobe.angle_deg
    );
    assert!(lobe.peak_db.abs() < 0.05, "{}", lobe.peak_db);
    assert!(lobe.width_3db_deg.is_some());
}

#[test]
fn lobe_running_off_the_cut_has_no_width() {
    let angles: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let values = angles
        .iter()
        .map(|a| Complex64::new(1.0 + a, 0.0))
        .collect();
    let lobe = main_lobe(&FarfieldCut {
        angles_deg: angles,
        values,
    })
    .unwrap();
    assert_eq!(lobe.angle_deg, 19.0);
    assert!(lobe.width_3db_deg.is_none());
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(angle_grid(0.0, 10.0, 0.0).is_err());
    assert!(angle_grid(10.0, 0.0, 1.0).is_err());
    assert!(angle_grid(-91.0, 0.0, 1.0).is_err());
    let s = common::single_pair(2, 2, [0.4, 0.0, 0.0], [1.0, 0.0, 0.0]);
    let ap = aperture(2, 2, |_| Complex64::new(1.0, 0.0), &[0.0; 4]);
    assert!(farfield_cut(&ap, &s.geometry, s.wavenumber(), &[1.0, 0.0]).is_err());
    assert!(farfield_cut(&ap, &s.geometry, s.wavenumber(), &[]).is_err());
    let wrong = aperture(1, 4, |_| Complex64::new(1.0, 0.0), &[0.0; 4]);
    assert!(farfield_cut(&wrong, &s.geometry, s.wavenumber(), &[0.0]).is_err());
}

#[test]
fn halving_the_step_barely_moves_the_energy() {
    let s = common::two_pair_scenario();
    let prof = design(&s).unwrap();
    let ap = excite(&s, &prof, 1).unwrap();
    let k = s.wavenumber();
    let coarse = farfield_cut(&ap, &s.geometry, k, &angle_grid(-90.0, 90.0, 0.1).unwrap()).unwrap();
    let fine = farfield_cut(&ap, &s.geometry, k, &angle_grid(-90.0, 90.0, 0.05).unwrap()).unwrap();
    let change = 10.0 * (fine.energy() / coarse.energy()).log10();
    assert!(change.abs() < 0.5, "{change} dB");
}

#[test]
fn designed_surface_steers_each_tx_toward_its_user() {
    let s = common::two_pair_scenario();
    let prof = design(&s).unwrap();
    let grid = angle_grid(-90.0, 90.0, 0.05).unwrap();
    let want = [45.0, -10.0];
    for (t, w) in want.iter().enumerate() {
        let ap = excite(&s, &prof, t + 1).unwrap();
        let lobe =
            main_lobe(&farfield_cut(&ap, &s.geometry, s.wavenumber(), &grid).unwrap()).unwrap();
        assert!(
            (lobe.angle_deg - w).abs() <= 2.0,
            "Tx {}: {}",
            t + 1,
            lobe.angle_deg
        );
    }
}

#[test]
fn single_pair_has_no_isolation_figure() {
    let s = common::single_pair(4, 4, [0.4, 0.1, 0.0], [1.0, 0.2, 0.0]);
    let table = isolation(&s, &SurfaceProfile::uniform(4, 4)).unwrap();
    assert_eq!(table.powers_w.len(), 1);
    assert!(table.powers_w[0][0] > 0.0);
    assert!(table.rows[0].isolation_db.is_none());
}

#[test]
fn two_pair_isolation_is_positive_both_ways() {
    let s = common::two_pair_scenario();
    let table = isolation(&s, &design(&s).unwrap()).unwrap();
    for r in &table.rows {
        assert!(r.isolation_db.unwrap() > 0.0);
        assert!((r.paired_power_w - table.powers_w[r.rx - 1][r.paired_tx - 1]).abs() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pattern_is_linear_in_the_aperture(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
        alpha in 0.1f64..10.0,
    ) {
        let s = common::single_pair(4, 3, [0.4, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let mk = |v: &[(f64, f64)]| ComplexFieldGrid {
            rows: 4, cols: 3,
            values: v.iter().map(|&(r, i)| Complex64::new(r, i)).collect(),
            tag: GridTag::Reconstruction,
        };
        let (ga, gb) = (mk(&a), mk(&b));
        let sum = ComplexFieldGrid { values: ga.values.iter().zip(&gb.values).map(|(x, y)| x + y).collect(), ..ga.clone() };
        let scaled = ComplexFieldGrid { values: ga.values.iter().map(|x| x * alpha).collect(), ..ga.clone() };
        let grid = angle_grid(-80.0, 80.0, 1.0).unwrap();
        let k = s.wavenumber();
        let (ca, cb) = (farfield_cut(&ga, &s.geometry, k, &grid).unwrap(), farfield_cut(&gb, &s.geometry, k, &grid).unwrap());
        let cs = farfield_cut(&sum, &s.geometry, k, &grid).unwrap();
        let cx = farfield_cut(&scaled, &s.geometry, k, &grid).unwrap();
        for i in 0..grid.len() {
            let scale = ca.values[i].norm() + cb.values[i].norm() + 1e-300;
            prop_assert!((cs.values[i] - ca.values[i] - cb.values[i]).norm() <= 1e-12 * scale.max(1.0));
            prop_assert!((cx.values[i] - ca.values[i] * alpha).norm() <= 1e-12 * alpha * scale.max(1.0));
        }
        let (da, dx) = (ca.normalized_db(), cx.normalized_db());
        for (p, q) in da.iter().zip(&dx) {
            if p.is_finite() && *p > -200.0 {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
