use std::collections::HashSet;

use ndarray::Array2;

use pdao_cli::catalog::{entries, find, two_point_reflected_maxima};
use pdao_cli::config::{parse_config, resolve, Method, Overrides};
use pdao_core::phase_space::{WignerField, WignerGrid};

#[test]
fn catalog_covers_the_reference_scenarios() {
    let names: Vec<&str> = entries().iter().map(|e| e.name).collect();
    for expected in ["decay", "fig2", "fig3", "fig5"] {
        assert!(names.contains(&expected), "missing entry {expected}");
    }
    let unique: HashSet<&str> = names.iter().copied().collect();
    assert_eq!(unique.len(), names.len(), "duplicate catalog names");
}

#[test]
fn every_entry_parses_and_resolves() {
    for entry in entries() {
        let raw = parse_config(entry.config_toml)
            .unwrap_or_else(|e| panic!("{} does not parse: {e}", entry.name));
        resolve(raw, &Overrides::default())
            .unwrap_or_else(|e| panic!("{} does not resolve: {e}", entry.name));
    }
}

#[test]
fn caption_parameters_are_carried_verbatim() {
    let fig2 = resolve(
        parse_config(find("fig2").unwrap().config_toml).unwrap(),
        &Overrides::default(),
    )
    .unwrap();
    assert_eq!(fig2.params.delta, -2.0);
    assert_eq!(fig2.params.chi, 5.0);
    assert_eq!(fig2.params.drive, 7.0);
    assert!(fig2.train.monochromatic);

    let fig3 = resolve(
        parse_config(find("fig3").unwrap().config_toml).unwrap(),
        &Overrides::default(),
    )
    .unwrap();
    assert_eq!(fig3.params.delta, -2.0);
    assert_eq!(fig3.params.chi, 5.0);
    assert_eq!(fig3.params.drive, 10.0);
    assert_eq!(fig3.train.width, 0.5);
    assert_eq!(fig3.train.period, 4.0);
    assert_eq!(fig3.method, Method::Both);

    let fig5 = resolve(
        parse_config(find("fig5").unwrap().config_toml).unwrap(),
        &Overrides::default(),
    )
    .unwrap();
    assert_eq!(fig5.params.delta, -10.0);
    assert_eq!(fig5.params.chi, 5.0);
    assert_eq!(fig5.params.drive, 10.3);
    assert_eq!(fig5.train.width, 0.5);
    assert_eq!(fig5.train.period, 4.0);
}

#[test]
fn snapshot_landmarks_match_their_labels() {
    let fig3 = resolve(
        parse_config(find("fig3").unwrap().config_toml).unwrap(),
        &Overrides::default(),
    )
    .unwrap();
    let expected = [7.0, 7.1, 7.8, 8.0, 8.3];
    assert_eq!(fig3.observables.wigner_times.len(), expected.len());
    for (got, want) in fig3.observables.wigner_times.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12);
    }
}

fn synthetic_field(centers: &[(f64, f64)]) -> WignerField {
    let n = 101;
    let grid = WignerGrid::Cartesian {
        x_min: -4.0,
        x_max: 4.0,
        y_min: -4.0,
        y_max: 4.0,
        n_x: n,
        n_y: n,
    };
    let step = 8.0 / (n - 1) as f64;
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let x = -4.0 + j as f64 * step;
            let y = -4.0 + i as f64 * step;
            let mut v = 0.0;
            for (cx, cy) in centers {
                v += (-((x - cx).powi(2) + (y - cy).powi(2))).exp();
            }
            values[[i, j]] = v;
        }
    }
    WignerField {
        grid,
        values,
        min_value: 0.0,
        integral: 1.0,
    }
}

#[test]
fn hump_finder_recognizes_point_reflection() {
    let (ok, detail) = two_point_reflected_maxima(&synthetic_field(&[(1.2, 0.6), (-1.2, -0.6)]));
    assert!(ok, "reflected pair not recognized: {detail}");

    let (ok, detail) = two_point_reflected_maxima(&synthetic_field(&[(1.2, 0.6)]));
    assert!(!ok, "single hump accepted: {detail}");

    let (ok, detail) = two_point_reflected_maxima(&synthetic_field(&[(1.2, 0.6), (1.2, -0.6)]));
    assert!(!ok, "unreflected pair accepted: {detail}");
}
