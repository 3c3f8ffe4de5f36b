mod common;

use ckdr::kernels::KernelSpec;
use ckdr::predictor::{FittedModel, Responses};
use ckdr::simplex::CdrMatrix;
use ckdr::viz::{
    decision_boundary, render_allocation_plot, render_decision_boundary, render_projection_plot,
    render_projection_plot_with_boundary, PlotSpec, PointValue, TernaryPoint,
};
use ckdr::Error;
use common::*;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn attr(node: &roxmltree::Node, name: &str) -> f64 {
    node.attribute(name).unwrap().parse().unwrap()
}

fn frame_vertices(doc: &roxmltree::Document) -> Vec<(f64, f64)> {
    let poly = doc.descendants().find(|n| n.has_tag_name("polygon")).unwrap();
    poly.attribute("points")
        .unwrap()
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn group<'a>(doc: &'a roxmltree::Document, id: &str) -> roxmltree::Node<'a, 'a> {
    doc.descendants().find(|n| n.attribute("id") == Some(id)).unwrap()
}

/// Model on the identity reduction whose dual predictor approximates `f`.
fn synthetic_model(f: impl Fn([f64; 3]) -> f64) -> FittedModel {
    let r = 10;
    let mut pts = Vec::new();
    for i in 0..=r {
        for j in 0..=r - i {
            pts.push([i as f64 / r as f64, j as f64 / r as f64, (r - i - j) as f64 / r as f64]);
        }
    }
    let z = DMatrix::from_fn(pts.len(), 3, |a, b| pts[a][b]);
    let y: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
    let p = CdrMatrix::new(DMatrix::identity(3, 3)).unwrap();
    FittedModel::from_projections(p, z, Responses::Real(y), KernelSpec::gaussian(0.5).unwrap(), 1e-9).unwrap()
}

#[test]
fn vertex_points_land_on_corners() {
    let spec = PlotSpec::default();
    let points: Vec<TernaryPoint> =
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().map(|&z| TernaryPoint::new(z, PointValue::None).unwrap()).collect();
    let svg = render_projection_plot(&points, &spec).unwrap();
    let doc = parse_svg(&svg);
    let corners = frame_vertices(&doc);
    let circles: Vec<(f64, f64)> = group(&doc, "points").children().filter(|n| n.has_tag_name("circle")).map(|c| (attr(&c, "cx"), attr(&c, "cy"))).collect();
    assert_eq!(circles, corners);
}

#[test]
fn random_points_stay_inside_triangle() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let spec = PlotSpec::default();
    let points: Vec<TernaryPoint> = (0..100)
        .map(|i| {
            let c = random_composition(&mut r, 3);
            TernaryPoint::new([c[0], c[1], c[2]], PointValue::Continuous(i as f64)).unwrap()
        })
        .collect();
    let svg = render_projection_plot(&points, &spec).unwrap();
    let doc = parse_svg(&svg);
    let v = frame_vertices(&doc);
    let cross = |a: (f64, f64), b: (f64, f64), p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let orientation = cross(v[0], v[1], v[2]).signum();
    let circles: Vec<_> = group(&doc, "points").children().filter(|n| n.has_tag_name("circle")).collect();
    assert_eq!(circles.len(), 100);
    for c in circles {
        let p = (attr(&c, "cx"), attr(&c, "cy"));
        for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
            // rounding of printed coordinates to 1e-3 px
            assert!(cross(a, b, p) * orientation >= -1.0, "point {p:?} outside");
        }
    }
}

#[test]
fn element_order_and_determinism() {
    let model = synthetic_model(|z| z[0] - z[2]);
    let points = vec![TernaryPoint::new([0.2, 0.3, 0.5], PointValue::Class(-1)).unwrap(), TernaryPoint::new([0.6, 0.3, 0.1], PointValue::Class(1)).unwrap()];
    let spec = PlotSpec { resolution: 30, ..PlotSpec::default() };
    let svg = render_projection_plot_with_boundary(&points, &model, &spec).unwrap();
    assert_eq!(svg, render_projection_plot_with_boundary(&points, &model, &spec).unwrap());
    let doc = parse_svg(&svg);
    let ids: Vec<&str> = doc.root_element().children().filter(|n| n.is_element()).map(|n| n.attribute("id").unwrap()).collect();
    assert_eq!(ids, ["frame", "grid", "boundary", "points", "labels"]);
    let colours: Vec<&str> = group(&doc, "points").children().filter_map(|n| n.attribute("fill")).collect();
    assert_ne!(colours[0], colours[1]);
}

#[test]
fn bubble_for_columns_at_a_vertex() {
    let mut e = DMatrix::zeros(3, 9);
    for j in 0..7 {
        e[(1, j)] = 1.0;
    }
    e.set_column(7, &nalgebra::DVector::from_vec(vec![0.2, 0.3, 0.5]));
    e.set_column(8, &nalgebra::DVector::from_vec(vec![0.6, 0.1, 0.3]));
    let p = CdrMatrix::new(e).unwrap();
    let spec = PlotSpec::default();
    let svg = render_allocation_plot(&p, &spec, 1e-9).unwrap();
    let doc = parse_svg(&svg);
    let bubbles: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("bubble")).collect();
    assert_eq!(bubbles.len(), 1);
    assert_eq!(bubbles[0].attribute("data-count"), Some("7"));
    let corner = spec.screen([0.0, 1.0, 0.0]);
    assert!((attr(&bubbles[0], "cx") - corner.0).abs() < 1e-3 && (attr(&bubbles[0], "cy") - corner.1).abs() < 1e-3);
    assert!((attr(&bubbles[0], "r") - spec.bubble_unit * 7f64.sqrt()).abs() < 1e-3);
    let counts: Vec<&str> = doc.descendants().filter(|n| n.attribute("class") == Some("count")).filter_map(|n| n.text()).collect();
    assert_eq!(counts, ["7"]);
    let columns = doc.descendants().filter(|n| n.attribute("class") == Some("column")).count();
    assert_eq!(columns, 9);
}

#[test]
fn distinct_columns_have_no_bubbles() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let p = random_cdr(&mut r, 3, 23);
    let svg = render_allocation_plot(&p, &PlotSpec::default(), 0.01).unwrap();
    let doc = parse_svg(&svg);
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("bubble")).count(), 0);
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("column")).count(), 23);
    let labels: Vec<&str> = doc.descendants().filter(|n| n.attribute("class") == Some("index")).filter_map(|n| n.text()).collect();
    assert_eq!(labels.len(), 23);
    assert_eq!(labels[22], "23");
}

#[test]
fn boundary_of_linear_predictor_follows_median_line() {
    let model = synthetic_model(|z| z[0] - z[2]);
    let resolution = 40;
    let lines = decision_boundary(&model, resolution).unwrap();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].len() > resolution / 2);
    for z in &lines[0] {
        assert!((z[0] - z[2]).abs() < 1.0 / resolution as f64, "{z:?}");
    }
}

#[test]
fn constant_predictor_has_empty_boundary() {
    let model = synthetic_model(|_| 0.5);
    let path = render_decision_boundary(&model, &PlotSpec::default()).unwrap();
    assert!(path.contains("d=\"\""));
    assert!(path.contains("stroke-dasharray"));
}

#[test]
fn coarse_grid_boundary() {
    let model = synthetic_model(|z| z[0] - z[2]);
    let spec = PlotSpec { resolution: 2, ..PlotSpec::default() };
    let lines = decision_boundary(&model, 2).unwrap();
    assert!(lines.iter().map(|l| l.len() - 1).sum::<usize>() <= 4);
    let points = vec![TernaryPoint::new([0.2, 0.3, 0.5], PointValue::None).unwrap()];
    parse_svg(&render_projection_plot_with_boundary(&points, &model, &spec).unwrap());
}

#[test]
fn boundary_requires_three_parts() {
    let p = CdrMatrix::new(DMatrix::identity(2, 2)).unwrap();
    let z = DMatrix::from_row_slice(3, 2, &[0.2, 0.8, 0.5, 0.5, 0.9, 0.1]);
    let model = FittedModel::from_projections(p, z, Responses::Real(vec![1.0, -1.0, 1.0]), KernelSpec::gaussian(0.5).unwrap(), 0.1).unwrap();
    assert_eq!(
        render_decision_boundary(&model, &PlotSpec::default()),
        Err(Error::WrongTargetDimension { expected: 3, found: 2 })
    );
}
