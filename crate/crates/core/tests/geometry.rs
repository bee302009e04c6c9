mod common;

use nalgebra::DMatrix;
use ncvx_sdp::sphere::{self, SphereConfig};
use ncvx_sdp::stiefel;

#[test]
fn finite_difference_geometry_suite() {
    let out = common::geometry_suite();
    assert!(out.passed, "{}", out.detail);
}

#[test]
fn retraction_matches_closed_form_derivatives() {
    // σ'(t) = −tDσ(t) + u(t), σ''(t) = [−D + 3t²D²]σ(t) − 2tDu(t)
    let s = sphere::random_config(12, 3, 1).unwrap();
    let u = common::structured_tangent(&s, 2);
    let curve = |t: f64| sphere::retract(&s, &u, t).unwrap().into_rows();
    for &t in &[0.0, 0.3, 1.0] {
        let h = 1e-4;
        let fd1 = (curve(t + h) - curve(t - h)) / (2.0 * h);
        let fd2 = (curve(t + h) - curve(t) * 2.0 + curve(t - h)) / (h * h);
        let st = curve(t);
        let mut d1 = DMatrix::zeros(12, 3);
        let mut d2 = DMatrix::zeros(12, 3);
        for i in 0..12 {
            let ui = u.rows().row(i) / (1.0 + t * t * u.rows().row(i).norm_squared()).sqrt();
            let di = ui.norm_squared();
            let si = st.row(i);
            d1.set_row(i, &(si * (-t * di) + &ui));
            d2.set_row(i, &(si * (-di + 3.0 * t * t * di * di) - ui * (2.0 * t * di)));
        }
        assert!((fd1 - d1).amax() < 1e-7, "first derivative at t = {t}");
        assert!((fd2 - d2).amax() < 1e-5, "second derivative at t = {t}");
    }
}

#[test]
fn retraction_with_rank_one_rows_keeps_signs() {
    let rows = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, -1.0, 1.0]);
    let s = SphereConfig::new(rows.clone()).unwrap();
    let u = sphere::random_tangent(&s, 3);
    assert_eq!(u.norm(), 0.0);
    assert_eq!(sphere::retract(&s, &u, 2.5).unwrap().rows(), &rows);
}

#[test]
fn stiefel_retraction_stays_on_manifold() {
    for seed in 0..10 {
        let s = stiefel::oc_random_config(6, 3, 5, seed).unwrap();
        let u = stiefel::oc_random_tangent(&s, seed + 100);
        let r = stiefel::oc_retract(&s, &u, 0.7).unwrap();
        for b in 0..6 {
            let blk = r.block(b);
            let gram = blk * blk.transpose();
            assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        }
    }
}

#[test]
fn d1_stiefel_matches_sphere_bitwise() {
    let a = common::test_matrix(15, 3);
    let s = sphere::random_config(15, 4, 8).unwrap();
    let u = sphere::random_tangent(&s, 9);
    let so = common::as_stiefel(&s);
    assert_eq!(sphere::objective(&a, &s).unwrap(), stiefel::oc_objective(&a.clone().with_block_dim(1).unwrap(), &so).unwrap());
    let g = sphere::gradient(&a, &s).unwrap();
    let go = stiefel::oc_gradient(&a.clone().with_block_dim(1).unwrap(), &so).unwrap();
    assert_eq!(g.rows(), go.rows());
    let uo = stiefel::StiefelTangent::new(&so, u.rows().clone()).unwrap();
    assert_eq!(
        sphere::retract(&s, &u, 0.4).unwrap().rows(),
        stiefel::oc_retract(&so, &uo, 0.4).unwrap().rows()
    );
}
