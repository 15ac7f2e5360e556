use beadjam_core::experiments::{
    report, run_load, run_pcc_validation, run_stability, run_stability_serial, run_workspace, run_workspace_serial,
    LoadMode, LoadProtocol, Scheme, StabilityProtocol,
};
use beadjam_core::{default_spec, ArcParams, GravityOrientation, LoadCase, ManipulatorSpec};

fn arcs(spec: &ManipulatorSpec, pairs: &[(f64, f64)]) -> Vec<ArcParams> {
    pairs
        .iter()
        .zip(&spec.segments)
        .map(|(&(p, t), s)| ArcParams::new(f64::to_radians(p), f64::to_radians(t), s.rest_length()).unwrap())
        .collect()
}

#[test]
fn unbent_distal_segment_moves_nothing() {
    let spec = default_spec();
    let protocol = StabilityProtocol {
        curvature_angles: vec![0.0],
        ..StabilityProtocol::standard(4)
    };
    let r = run_stability(&spec, &protocol).unwrap();
    assert_eq!(r.excluded, 0);
    assert!(r.rows.iter().all(|row| row.deviation.unwrap() <= 1e-6), "{:?}", r.rows);
}

#[test]
fn standard_protocol_orders_schemes_and_variability() {
    let spec = default_spec();
    let protocol = StabilityProtocol::standard(7);
    let r = run_stability(&spec, &protocol).unwrap();
    r.audit().unwrap();
    assert_eq!(r.rows.len(), 135);
    let mut previous = [0.0; 3];
    for &theta in &protocol.curvature_angles {
        let s = Scheme::ALL.map(|scheme| r.summary(scheme, theta).unwrap());
        let [ext, int, jam] = s;
        assert!(jam.mean <= int.mean && int.mean <= ext.mean);
        assert!(jam.range < ext.range, "θ₂ = {theta}: {} vs {}", jam.range, ext.range);
        for (k, summary) in s.iter().enumerate() {
            assert!(summary.mean >= previous[k]);
            assert!(summary.max >= summary.mean);
            previous[k] = summary.mean;
        }
    }
    assert_eq!(r.reductions.len(), protocol.curvature_angles.len() * 3);
}

#[test]
fn parallel_and_serial_reports_are_byte_identical() {
    let spec = default_spec();
    let protocol = StabilityProtocol::standard(21);
    let a = run_stability(&spec, &protocol).unwrap();
    let b = run_stability_serial(&spec, &protocol).unwrap();
    let bytes = |r| {
        let mut out = Vec::new();
        report::stability_csv(r, &mut out).unwrap();
        report::stability_json(r, &mut out).unwrap();
        out
    };
    assert_eq!(bytes(&a), bytes(&b));

    let w1 = run_workspace(&spec, GravityOrientation::Horizontal, LoadMode::Flexible, 10).unwrap();
    let w2 = run_workspace_serial(&spec, GravityOrientation::Horizontal, LoadMode::Flexible, 10).unwrap();
    assert_eq!(w1, w2);
}

#[test]
fn load_protocol_baselines_and_horizontal_thresholds() {
    let spec = default_spec();
    let protocol = LoadProtocol::standard();
    let r = run_load(&spec, &protocol).unwrap();
    assert_eq!(r.flagged(), 0);
    for c in &r.curves {
        let sweep = c.outcome.as_ref().unwrap();
        assert_eq!(sweep.points[0].load, 0.0);
        assert!(sweep.points[0].deviation < 1e-6);
        assert!(sweep.points.windows(2).all(|w| w[1].deviation >= w[0].deviation - 1e-9));
        if c.mode == LoadMode::Flexible {
            assert_eq!(c.threshold(), None);
        }
    }
    let h = |phi: f64| r.curve(LoadMode::Jammed, GravityOrientation::Horizontal, phi).unwrap().threshold().unwrap();
    assert!((h(0.0) - h(45f64.to_radians())).abs() <= 50.0);
}

#[test]
fn zero_gravity_reach_is_the_rest_length() {
    let spec = default_spec();
    let w = run_workspace(&spec, GravityOrientation::Zero, LoadMode::Flexible, 10).unwrap();
    assert_eq!(w.excluded, 0);
    assert_eq!(w.points.len(), 91 * 91);
    assert!((w.max_reach - spec.rest_length()).abs() <= 0.02 * spec.rest_length());
}

#[test]
fn doubling_density_barely_moves_the_reach() {
    let spec = default_spec();
    let coarse = run_workspace(&spec, GravityOrientation::Horizontal, LoadMode::Flexible, 10).unwrap();
    let fine = run_workspace(&spec, GravityOrientation::Horizontal, LoadMode::Flexible, 20).unwrap();
    assert!((fine.max_reach - coarse.max_reach).abs() / coarse.max_reach < 0.01);
}

#[test]
fn pcc_residuals() {
    let spec = default_spec();
    let straight = run_pcc_validation(&spec, &[arcs(&spec, &[(0.0, 0.0), (0.0, 0.0)])], &LoadCase::weightless()).unwrap();
    assert!(straight[0].tip_residual <= 1e-6);

    let poses = vec![
        arcs(&spec, &[(0.0, 30.0), (0.0, 30.0)]),
        arcs(&spec, &[(45.0, 45.0), (45.0, 45.0)]),
        arcs(&spec, &[(90.0, 20.0), (-60.0, 50.0)]),
    ];
    for r in run_pcc_validation(&spec, &poses, &LoadCase::weightless()).unwrap() {
        assert!(r.converged);
        for (f, seg) in r.fitted.iter().zip(&spec.segments) {
            assert!(f.residual <= 0.02 * seg.rest_length(), "{r:?}");
        }
        assert!(r.tip_residual <= 0.02 * spec.rest_length(), "{r:?}");
    }

    let pose = arcs(&spec, &[(0.0, 30.0), (30.0, 40.0)]);
    let residuals: Vec<f64> = [0.0, 100.0, 200.0]
        .iter()
        .map(|&m| {
            let load = LoadCase::oriented(&spec, GravityOrientation::Horizontal, m).unwrap();
            run_pcc_validation(&spec, std::slice::from_ref(&pose), &load).unwrap()[0].tip_residual
        })
        .collect();
    assert!(residuals.windows(2).all(|w| w[1] > w[0]), "{residuals:?}");
}
