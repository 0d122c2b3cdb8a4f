use super::*;
use crate::expr::parse;
use crate::forms::{jet_norm, ExprForm, MultiIndex};
use crate::geometry::{
    make_conformally_flat, make_poincare_ball, make_round_sphere, standard_torus, Axis,
};
use crate::samples::{closed_conformal_killing_form, random_form, rotation_killing_form};

fn at(chart: &MetricChart, form: &ExprForm, p: &[f64]) -> (LocalGeometry, JetForm) {
    let geo = chart.local(p, 2).unwrap();
    let w = form.jet_at(&geo).unwrap();
    (geo, w)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn curved_models() -> Vec<MetricChart> {
    vec![
        make_round_sphere(2, 1.0).unwrap(),
        make_round_sphere(3, 1.0).unwrap(),
        make_poincare_ball(3, -1.0).unwrap(),
        make_conformally_flat(3, &parse("0.3*sin(x1) + 0.2*x2*x3", 3).unwrap()).unwrap(),
    ]
}

#[test]
fn d_of_sine_form() {
    let t = standard_torus(3).unwrap();
    let w = ExprForm::from_components(
        3,
        1,
        [(
            MultiIndex::one_based(&[2], 3).unwrap(),
            parse("sin(x1)", 3).unwrap(),
        )],
    )
    .unwrap();
    let (_, j) = at(&t, &w, &[0.7, 0.1, 0.2]);
    let dw = exterior_d(&j).unwrap().values();
    assert!(max_diff(&dw, &[0.7f64.cos(), 0.0, 0.0]) < 1e-15);
    let c = ExprForm::basis_form(3, &[1, 3]).unwrap();
    let (_, j) = at(&t, &c, &[0.7, 0.1, 0.2]);
    assert!(exterior_d(&j).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn d_squared_vanishes_pointwise() {
    for chart in curved_models() {
        let n = chart.dim();
        for r in 0..n - 1 {
            let w = random_form(n, r, 5 + r as u64).unwrap();
            for p in chart.sample_points(5, 1) {
                let (_, j) = at(&chart, &w, &p);
                let dd = exterior_d(&exterior_d(&j).unwrap()).unwrap();
                assert!(dd.values().iter().all(|v| v.abs() < 1e-10));
            }
        }
    }
}

#[test]
fn codifferential_routes_agree() {
    let mut charts = curved_models();
    let custom = crate::geometry::parse_chart_fixture(
        "dim 2\naxis 1 -1 1\naxis 2 -1 1\ng 1 1 = 2 + x2^2\ng 1 2 = 0.3*x1\ng 2 2 = 1 + exp(x1)\n",
    )
    .unwrap();
    charts.push(custom);
    for chart in charts {
        let n = chart.dim();
        for r in 1..=n {
            let w = random_form(n, r, 40 + r as u64).unwrap();
            for p in chart.sample_points(5, 2) {
                let (geo, j) = at(&chart, &w, &p);
                let a = codifferential(&j, &geo).unwrap().values();
                let b = codifferential_via_star(&j, &geo).unwrap().values();
                let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(
                    max_diff(&a, &b) < 1e-10 * scale,
                    "{} r={r}",
                    chart.label().name()
                );
            }
        }
    }
}

#[test]
fn codifferential_examples() {
    let t = standard_torus(2).unwrap();
    let w = ExprForm::one_form(vec![parse("sin(x1)", 2).unwrap(), Expression::zero()]);
    let (geo, j) = at(&t, &w, &[0.4, 0.3]);
    let c = codifferential(&j, &geo).unwrap().values();
    assert!((c[0] + 0.4f64.cos()).abs() < 1e-15);
    let s = make_round_sphere(3, 1.0).unwrap();
    let w = random_form(3, 2, 9).unwrap();
    for p in s.sample_points(5, 3) {
        let (geo, j) = at(&s, &w, &p);
        let cc = codifferential(&codifferential(&j, &geo).unwrap(), &geo).unwrap();
        assert!(cc.values().iter().all(|v| v.abs() < 1e-10));
    }
}

use crate::expr::Expression;

#[test]
fn adjointness_fixes_the_codifferential_sign() {
    // ∫⟨df, ω⟩ = ∫ f d*ω on the torus, by a trapezoid rule that is exact for
    // these trigonometric polynomials
    let t = standard_torus(2).unwrap();
    let f = ExprForm::function(2, parse("sin(x1)*cos(x2)", 2).unwrap());
    let w = ExprForm::one_form(vec![
        parse("cos(x1)*cos(x2)", 2).unwrap(),
        parse("sin(2*x2)", 2).unwrap(),
    ]);
    let m = 12;
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for a in 0..m {
        for b in 0..m {
            let p = [a as f64 * h - 3.0, b as f64 * h - 3.0];
            let (geo, fj) = at(&t, &f, &p);
            let wj = w.jet_at(&geo).unwrap();
            lhs += crate::forms::jet_inner(&exterior_d(&fj).unwrap(), &wj, &geo);
            rhs += fj.values()[0] * codifferential(&wj, &geo).unwrap().values()[0];
        }
    }
    assert!(lhs.abs() > 1.0);
    assert!((lhs - rhs).abs() < 1e-10 * lhs.abs());
}

#[test]
fn metric_compatibility() {
    let s = make_round_sphere(3, 1.0).unwrap();
    for p in s.sample_points(5, 4) {
        let geo = s.local(&p, 1).unwrap();
        let n = 3;
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut v = geo.g(a, b).deriv(j).value();
                    for m in 0..n {
                        v -= geo.christoffel(m, j, a).value() * geo.g(m, b).value();
                        v -= geo.christoffel(m, j, b).value() * geo.g(a, m).value();
                    }
                    assert!(v.abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn flat_covariant_derivative_is_partial() {
    let t = standard_torus(3).unwrap();
    let w = random_form(3, 1, 2).unwrap();
    let (geo, j) = at(&t, &w, &[0.1, 0.5, -0.3]);
    let nab = covariant_derivative(&j, &geo).unwrap();
    for a in 0..3 {
        for i in 0..3 {
            let want = j.components()[i].deriv(a).value();
            assert!((nab.get(a, i).value() - want).abs() < 1e-15);
        }
    }
    let c = ExprForm::basis_form(3, &[2]).unwrap();
    let (geo, j) = at(&t, &c, &[0.1, 0.5, -0.3]);
    assert!(covariant_derivative(&j, &geo)
        .unwrap()
        .values()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn killing_form_has_antisymmetric_derivative() {
    let s = make_round_sphere(3, 1.0).unwrap();
    let w = rotation_killing_form(3, 1.0);
    for p in s.sample_points(5, 5) {
        let (geo, j) = at(&s, &w, &p);
        let nab = covariant_derivative(&j, &geo).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let sym = nab.get(a, b).value() + nab.get(b, a).value();
                assert!(sym.abs() < 1e-12);
            }
        }
    }
}

#[test]
fn flat_rough_laplacian() {
    let t = standard_torus(3).unwrap();
    let w = ExprForm::from_components(
        3,
        1,
        [(
            MultiIndex::one_based(&[2], 3).unwrap(),
            parse("sin(x1)", 3).unwrap(),
        )],
    )
    .unwrap();
    let p = [0.9, 0.1, 0.2];
    let (geo, j) = at(&t, &w, &p);
    let l = rough_laplacian(&j, &geo).unwrap().values();
    assert!(max_diff(&l, &[0.0, 0.9f64.sin(), 0.0]) < 1e-14);
    let h = hodge_laplacian(&j, &geo).unwrap().values();
    assert!(max_diff(&h, &l) < 1e-14);
}

#[test]
fn weitzenbock_identity_on_curved_models() {
    for chart in curved_models() {
        let n = chart.dim();
        for r in 1..n {
            let w = random_form(n, r, 70 + r as u64).unwrap();
            let pts = chart.sample_points(10, 6);
            let norm = sup_norm(&w, &chart, &pts).unwrap();
            for p in &pts {
                let (geo, j) = at(&chart, &w, p);
                let lhs = hodge_laplacian(&j, &geo).unwrap();
                let rhs = rough_laplacian(&j, &geo)
                    .unwrap()
                    .axpy(1.0, &weitzenbock_term(&j, &geo).unwrap());
                let res = jet_norm(&lhs.axpy(-1.0, &rhs), &geo);
                assert!(res <= 1e-8 * norm, "{} r={r}: {res}", chart.label().name());
            }
        }
    }
}

#[test]
fn constant_curvature_weitzenbock_term() {
    for (n, r, c) in [
        (2, 1, 1.0),
        (3, 1, 1.0),
        (3, 2, 1.0),
        (3, 1, -1.0),
        (4, 2, 1.0),
        (4, 3, 0.5),
    ] {
        let chart = if c > 0.0 {
            make_round_sphere(n, c).unwrap()
        } else {
            make_poincare_ball(n, c).unwrap()
        };
        let w = random_form(n, r, 3).unwrap();
        let k = (r * (n - r)) as f64 * c;
        for p in chart.sample_points(5, 7) {
            let (geo, j) = at(&chart, &w, &p);
            let f = weitzenbock_term(&j, &geo).unwrap().values();
            let want: Vec<f64> = j.values().iter().map(|v| k * v).collect();
            let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(max_diff(&f, &want) < 1e-8 * scale, "n={n} r={r} C={c}");
        }
    }
}

#[test]
fn conformally_flat_surface_weitzenbock_is_half_scalar() {
    let chart = make_conformally_flat(2, &parse("0.4*x1 + 0.3*sin(x2)", 2).unwrap()).unwrap();
    let w = random_form(2, 1, 8).unwrap();
    for p in chart.sample_points(5, 8) {
        let (geo, j) = at(&chart, &w, &p);
        let s = geo.curvature().scalar.value();
        assert!(s.abs() > 1e-3);
        let f = weitzenbock_term(&j, &geo).unwrap().values();
        let want: Vec<f64> = j.values().iter().map(|v| 0.5 * s * v).collect();
        assert!(max_diff(&f, &want) < 1e-10);
    }
}

#[test]
fn flat_weitzenbock_vanishes() {
    let t = standard_torus(3).unwrap();
    let w = random_form(3, 2, 1).unwrap();
    let (geo, j) = at(&t, &w, &[0.1, 0.2, 0.3]);
    assert!(weitzenbock_term(&j, &geo)
        .unwrap()
        .values()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn hodge_laplacian_commutes_with_star() {
    let s = make_round_sphere(3, 1.0).unwrap();
    for r in 0..=3 {
        let w = random_form(3, r, 20 + r as u64).unwrap();
        let starred = crate::forms::Starred(&w);
        for p in s.sample_points(5, 9) {
            let geo = s.local(&p, 2).unwrap();
            let j = w.jet_at(&geo).unwrap();
            let a = hodge_star(&hodge_laplacian(&j, &geo).unwrap(), &geo).values();
            let b = hodge_laplacian(&starred.jet_at(&geo).unwrap(), &geo)
                .unwrap()
                .values();
            let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(max_diff(&a, &b) < 1e-9 * scale, "r={r}");
        }
    }
}

#[test]
fn tachibana_routes_agree() {
    for chart in curved_models() {
        let n = chart.dim();
        for r in 1..n {
            let w = random_form(n, r, 90 + r as u64).unwrap();
            for p in chart.sample_points(5, 10) {
                let (geo, j) = at(&chart, &w, &p);
                let a = tachibana_laplacian(&j, &geo, Route::Rough)
                    .unwrap()
                    .values();
                let b = tachibana_laplacian(&j, &geo, Route::Hodge)
                    .unwrap()
                    .values();
                let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                assert!(max_diff(&a, &b) < 1e-8 * scale);
            }
        }
    }
}

#[test]
fn tachibana_examples() {
    let t = standard_torus(3).unwrap();
    let c = ExprForm::basis_form(3, &[2]).unwrap();
    let (geo, j) = at(&t, &c, &[0.1, 0.2, 0.3]);
    assert!(tachibana_laplacian(&j, &geo, Route::Rough)
        .unwrap()
        .values()
        .iter()
        .all(|v| *v == 0.0));
    // coexact mode cos(x1) dx2: □ω = ω/4
    let w = ExprForm::one_form(vec![
        Expression::zero(),
        parse("cos(x1)", 3).unwrap(),
        Expression::zero(),
    ]);
    let (geo, j) = at(&t, &w, &[0.3, 0.2, 0.1]);
    let b = tachibana_laplacian(&j, &geo, Route::Rough)
        .unwrap()
        .values();
    assert!(max_diff(&b, &[0.0, 0.25 * 0.3f64.cos(), 0.0]) < 1e-15);
    let s = make_round_sphere(3, 1.0).unwrap();
    let k = rotation_killing_form(3, 1.0);
    for p in s.sample_points(5, 11) {
        let (geo, j) = at(&s, &k, &p);
        for route in [Route::Rough, Route::Hodge] {
            let b = tachibana_laplacian(&j, &geo, route).unwrap();
            assert!(b.values().iter().all(|v| v.abs() < 1e-7));
        }
    }
}

#[test]
fn degree_edge_cases() {
    let t = standard_torus(2).unwrap();
    let f = ExprForm::function(2, parse("x1", 2).unwrap());
    let top = ExprForm::basis_form(2, &[1, 2]).unwrap();
    let (geo, fj) = at(&t, &f, &[0.1, 0.2]);
    let tj = top.jet_at(&geo).unwrap();
    assert!(codifferential(&fj, &geo).is_err());
    assert!(exterior_d(&tj).is_err());
    assert!(tachibana_laplacian(&fj, &geo, Route::Rough).is_err());
    assert!(tachibana_laplacian(&tj, &geo, Route::Hodge).is_err());
    assert!(d_decomposition(&tj, &geo).is_err());
    assert!(hodge_laplacian(&fj, &geo).is_ok());
    let low = t.local(&[0.1, 0.2], 1).unwrap();
    let lj = f.jet_at(&low).unwrap();
    assert!(matches!(
        rough_laplacian(&lj, &low),
        Err(OperatorError::JetOrder { .. })
    ));
}

#[test]
fn d_parts_are_orthogonal_and_reconstruct() {
    for chart in curved_models() {
        let n = chart.dim();
        for r in 1..n {
            let w = random_form(n, r, 30 + r as u64).unwrap();
            for p in chart.sample_points(4, 12) {
                let (geo, j) = at(&chart, &w, &p);
                let dec = d_decomposition(&j, &geo).unwrap();
                let scale = dec.nabla.norm(&geo).powi(2).max(1.0);
                assert!(dec.d1.inner(&dec.d2, &geo).abs() < 1e-10 * scale);
                assert!(dec.d1.inner(&dec.d3, &geo).abs() < 1e-10 * scale);
                assert!(dec.d2.inner(&dec.d3, &geo).abs() < 1e-10 * scale);
                let sum = dec.d1.axpy(1.0, &dec.d2).axpy(1.0, &dec.d3);
                assert!(max_diff(&sum.values(), &dec.nabla.values()) < 1e-10 * scale);
                // |D1| = |dω|/√(r+1), |D2| = |d*ω|/√(n−r+1)
                let dw = jet_norm(&exterior_d(&j).unwrap(), &geo);
                let cw = jet_norm(&codifferential(&j, &geo).unwrap(), &geo);
                let rf = r as f64;
                assert!((dec.d1.norm(&geo) - dw / (rf + 1.0).sqrt()).abs() < 1e-10 * (1.0 + dw));
                let k = (n - r + 1) as f64;
                assert!((dec.d2.norm(&geo) - cw / k.sqrt()).abs() < 1e-10 * (1.0 + cw));
            }
        }
    }
}

#[test]
fn conformal_killing_examples() {
    let t = standard_torus(3).unwrap();
    let c = ExprForm::basis_form(3, &[1, 2]).unwrap();
    let (geo, j) = at(&t, &c, &[0.1, 0.2, 0.3]);
    let dec = d_decomposition(&j, &geo).unwrap();
    assert_eq!(dec.d3.norm(&geo), 0.0);

    let s = make_round_sphere(2, 1.0).unwrap();
    let w = closed_conformal_killing_form(2, 1.0);
    for p in s.sample_points(5, 13) {
        let (geo, j) = at(&s, &w, &p);
        let dec = d_decomposition(&j, &geo).unwrap();
        assert!(dec.d3.norm(&geo) < 1e-10);
        assert!(dec.d1.norm(&geo) < 1e-10);
        assert!(jet_norm(&codifferential(&j, &geo).unwrap(), &geo) > 1e-3);
    }
}

#[test]
fn batch_evaluation_keeps_point_order() {
    let s = make_round_sphere(2, 1.0).unwrap();
    let w = random_form(2, 1, 4).unwrap();
    let pts = s.sample_points(16, 14);
    let res = apply_operator(Operator::Tachibana(Route::Rough), &w, &s, &pts).unwrap();
    assert_eq!(res.degree, 1);
    assert!(res.provenance.contains("rough"));
    for (v, p) in res.values.iter().zip(&pts) {
        assert_eq!(&v.point, p);
    }
    assert!(apply_operator(Operator::ExteriorD, &w, &s, &[]).is_err());
    let outside = s.with_axes(vec![Axis::new(-0.5, 0.5); 2]).unwrap();
    assert!(apply_operator(Operator::ExteriorD, &w, &outside, &[vec![0.9, 0.0]]).is_err());
}
