//! SVG ternary plots of three-part compositions: projected data, variable
//! allocation of CDR columns, and the zero level set of a binary predictor.
//!
//! Vertex `z₁` sits bottom-left, `z₂` bottom-right and `z₃` at the top.
//! Documents list their groups in the order frame, grid, boundary, points,
//! labels, and identical inputs give byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::predictor::{FittedModel, Responses};
use crate::simplex::CdrMatrix;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Categorical palette, assigned to classes in ascending order.
pub const CLASS_PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Endpoints of the continuous ramp (low, high).
const RAMP: ([u8; 3], [u8; 3]) = ([0x2b, 0x3c, 0x8c], [0xe0, 0x8a, 0x1e]);

/// Planar position of a point of the 2-simplex.
pub fn ternary_coords(z: [f64; 3]) -> (f64, f64) {
    (z[1] + 0.5 * z[2], SQRT3_2 * z[2])
}

/// Colouring of a plotted point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointValue {
    None,
    Class(i64),
    Continuous(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TernaryPoint {
    pub z: [f64; 3],
    pub value: PointValue,
}

impl TernaryPoint {
    /// Validates that `z` lies in the simplex (entries ≥ 0, unit sum).
    pub fn new(z: [f64; 3], value: PointValue) -> Result<Self> {
        crate::simplex::validate_composition(&z, 1e-9, false)?;
        Ok(TernaryPoint { z, value })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub vertex_labels: [String; 3],
    pub point_radius: f64,
    /// Bubble radius per square root of the column count.
    pub bubble_unit: f64,
    /// Grid subdivisions per edge for boundary tracing.
    pub resolution: usize,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            width: 600.0,
            height: 560.0,
            margin: 50.0,
            vertex_labels: ["z1".into(), "z2".into(), "z3".into()],
            point_radius: 3.0,
            bubble_unit: 6.0,
            resolution: 100,
        }
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<()> {
        let side = self.side();
        if !(self.width > 0.0 && self.height > 0.0 && self.margin >= 0.0 && side > 0.0) {
            return Err(Error::InvalidConfig("plot dimensions must leave a positive drawing area".into()));
        }
        if !(self.point_radius > 0.0 && self.bubble_unit > 0.0) {
            return Err(Error::InvalidConfig("marker sizes must be positive".into()));
        }
        if self.resolution < 1 {
            return Err(Error::InvalidConfig("boundary resolution must be at least 1".into()));
        }
        Ok(())
    }

    fn side(&self) -> f64 {
        (self.width - 2.0 * self.margin).min((self.height - 2.0 * self.margin) / SQRT3_2)
    }

    /// Screen position of a simplex point; y grows downward.
    pub fn screen(&self, z: [f64; 3]) -> (f64, f64) {
        let s = self.side();
        let (u, v) = ternary_coords(z);
        let left = 0.5 * (self.width - s);
        let bottom = 0.5 * (self.height + SQRT3_2 * s);
        (left + u * s, bottom - v * s)
    }
}

fn fmt(x: f64) -> String {
    let r = format!("{x:.3}");
    if r == "-0.000" {
        "0.000".into()
    } else {
        r
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const VERTICES: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn open_document(spec: &PlotSpec) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = fmt(spec.width),
        h = fmt(spec.height)
    );
    let pts: Vec<String> = VERTICES
        .iter()
        .map(|&v| {
            let (x, y) = spec.screen(v);
            format!("{},{}", fmt(x), fmt(y))
        })
        .collect();
    let _ = writeln!(
        out,
        "<g id=\"frame\"><polygon points=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"/></g>",
        pts.join(" ")
    );
    out.push_str("<g id=\"grid\" stroke=\"#bbbbbb\" stroke-width=\"0.5\">");
    for axis in 0..3 {
        for step in 1..5 {
            let t = step as f64 * 0.2;
            let (o1, o2) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut a = [0.0; 3];
            a[axis] = t;
            a[o1] = 1.0 - t;
            let mut b = [0.0; 3];
            b[axis] = t;
            b[o2] = 1.0 - t;
            let (x1, y1) = spec.screen(a);
            let (x2, y2) = spec.screen(b);
            let _ = write!(out, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>", fmt(x1), fmt(y1), fmt(x2), fmt(y2));
        }
    }
    out.push_str("</g>\n");
    out
}

fn vertex_labels(out: &mut String, spec: &PlotSpec) {
    let offsets = [(-10.0, 18.0, "end"), (10.0, 18.0, "start"), (0.0, -10.0, "middle")];
    for (v, (dx, dy, anchor)) in VERTICES.iter().zip(offsets) {
        let (x, y) = spec.screen(*v);
        let label = &spec.vertex_labels[VERTICES.iter().position(|w| w == v).expect("vertex")];
        let _ = write!(
            out,
            "<text class=\"vertex\" x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-size=\"14\">{}</text>",
            fmt(x + dx),
            fmt(y + dy),
            escape(label)
        );
    }
    let _ = write!(
        out,
        "<text class=\"legend\" x=\"{}\" y=\"{}\" font-size=\"10\">{}: bottom-left, {}: bottom-right, {}: top</text>",
        fmt(8.0),
        fmt(spec.height - 8.0),
        escape(&spec.vertex_labels[0]),
        escape(&spec.vertex_labels[1]),
        escape(&spec.vertex_labels[2])
    );
}

fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (lo, hi) = RAMP;
    let c: Vec<u8> = (0..3).map(|i| (lo[i] as f64 + t * (hi[i] as f64 - lo[i] as f64)).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn point_colours(points: &[TernaryPoint]) -> Vec<String> {
    let mut classes: Vec<i64> = points
        .iter()
        .filter_map(|p| if let PointValue::Class(c) = p.value { Some(c) } else { None })
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let cont: Vec<f64> = points
        .iter()
        .filter_map(|p| if let PointValue::Continuous(v) = p.value { Some(v) } else { None })
        .collect();
    let lo = cont.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cont.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    points
        .iter()
        .map(|p| match p.value {
            PointValue::None => "#444444".to_string(),
            PointValue::Class(c) => {
                let i = classes.binary_search(&c).expect("collected class");
                CLASS_PALETTE[i % CLASS_PALETTE.len()].to_string()
            }
            PointValue::Continuous(v) => ramp(if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }),
        })
        .collect()
}

/// Ternary plot of reduced data points.
pub fn render_projection_plot(points: &[TernaryPoint], spec: &PlotSpec) -> Result<String> {
    projection_document(points, None, spec)
}

/// Ternary plot of reduced data points with the traced decision boundary of
/// `model` drawn beneath them.
pub fn render_projection_plot_with_boundary(
    points: &[TernaryPoint],
    model: &FittedModel,
    spec: &PlotSpec,
) -> Result<String> {
    let path = render_decision_boundary(model, spec)?;
    projection_document(points, Some(path), spec)
}

fn projection_document(points: &[TernaryPoint], boundary: Option<String>, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = open_document(spec);
    if let Some(path) = boundary {
        let _ = writeln!(out, "<g id=\"boundary\">{path}</g>");
    }
    out.push_str("<g id=\"points\">");
    for (p, colour) in points.iter().zip(point_colours(points)) {
        let (x, y) = spec.screen(p.z);
        let class = match p.value {
            PointValue::Class(c) => format!(" data-class=\"{c}\""),
            PointValue::Continuous(v) => format!(" data-value=\"{v:e}\""),
            PointValue::None => String::new(),
        };
        let _ = write!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{colour}\" fill-opacity=\"0.8\"{class}/>",
            fmt(x),
            fmt(y),
            fmt(spec.point_radius)
        );
    }
    out.push_str("</g>\n<g id=\"labels\">");
    vertex_labels(&mut out, spec);
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Variable allocation plot: column `j` of `P` drawn at `P_j` with its index.
/// Two or more columns within `cluster_tol` (max-norm) of the same vertex
/// are summarized by a bubble of radius `bubble_unit · sqrt(count)` carrying
/// the count.
pub fn render_allocation_plot(p: &CdrMatrix, spec: &PlotSpec, cluster_tol: f64) -> Result<String> {
    spec.validate()?;
    if p.m() != 3 {
        return Err(Error::WrongTargetDimension { expected: 3, found: p.m() });
    }
    let cols: Vec<[f64; 3]> = (0..p.d()).map(|j| [p.entries()[(0, j)], p.entries()[(1, j)], p.entries()[(2, j)]]).collect();
    let mut at_vertex: [Vec<usize>; 3] = Default::default();
    for (j, c) in cols.iter().enumerate() {
        for (v, members) in at_vertex.iter_mut().enumerate() {
            let dist = (0..3).map(|a| (c[a] - VERTICES[v][a]).abs()).fold(0.0, f64::max);
            if dist <= cluster_tol {
                members.push(j);
                break;
            }
        }
    }
    let bubbled: Vec<bool> = (0..p.d()).map(|j| at_vertex.iter().any(|m| m.len() >= 2 && m.contains(&j))).collect();

    let mut out = open_document(spec);
    out.push_str("<g id=\"points\">");
    for (v, members) in at_vertex.iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let (x, y) = spec.screen(VERTICES[v]);
        let ids: Vec<String> = members.iter().map(|j| (j + 1).to_string()).collect();
        let _ = write!(
            out,
            "<circle class=\"bubble\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#7fdbff\" fill-opacity=\"0.6\" stroke=\"#0099cc\" data-count=\"{}\"><title>{}</title></circle>",
            fmt(x),
            fmt(y),
            fmt(spec.bubble_unit * (members.len() as f64).sqrt()),
            members.len(),
            ids.join(" ")
        );
    }
    for (j, c) in cols.iter().enumerate() {
        let (x, y) = spec.screen(*c);
        let _ = write!(
            out,
            "<circle class=\"column\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#222222\" data-index=\"{}\"/>",
            fmt(x),
            fmt(y),
            fmt(spec.point_radius),
            j + 1
        );
    }
    out.push_str("</g>\n<g id=\"labels\">");
    vertex_labels(&mut out, spec);
    for (j, c) in cols.iter().enumerate() {
        if bubbled[j] {
            continue;
        }
        let (x, y) = spec.screen(*c);
        let _ = write!(
            out,
            "<text class=\"index\" x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>",
            fmt(x + spec.point_radius + 1.0),
            fmt(y - spec.point_radius - 1.0),
            j + 1
        );
    }
    for (v, members) in at_vertex.iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let (x, y) = spec.screen(VERTICES[v]);
        let _ = write!(
            out,
            "<text class=\"count\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            fmt(x),
            fmt(y + 4.0),
            members.len()
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Polylines (in barycentric coordinates) tracing `f = 0` over a regular
/// triangulation of the simplex with `resolution` subdivisions per edge.
pub fn trace_zero_level<F>(resolution: usize, f: F) -> Result<Vec<Vec<[f64; 3]>>>
where
    F: Fn([f64; 3]) -> Result<f64> + Sync,
{
    let r = resolution.max(1);
    let id = |i: usize, j: usize| i * (r + 1) + j;
    let coords = |i: usize, j: usize| [i as f64 / r as f64, j as f64 / r as f64, (r - i - j) as f64 / r as f64];
    let nodes: Vec<(usize, usize)> = (0..=r).flat_map(|i| (0..=r - i).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = nodes.par_iter().map(|&(i, j)| f(coords(i, j))).collect::<Result<Vec<f64>>>()?;
    let mut value = vec![f64::NAN; (r + 1) * (r + 1)];
    for (&(i, j), &v) in nodes.iter().zip(&vals) {
        value[id(i, j)] = v;
    }

    // crossing on the edge between two grid nodes, keyed by the ordered pair
    let crossing = |a: (usize, usize), b: (usize, usize)| -> [f64; 3] {
        let (a, b) = if id(a.0, a.1) < id(b.0, b.1) { (a, b) } else { (b, a) };
        let (fa, fb) = (value[id(a.0, a.1)], value[id(b.0, b.1)]);
        let t = fa / (fa - fb);
        let (za, zb) = (coords(a.0, a.1), coords(b.0, b.1));
        [za[0] + t * (zb[0] - za[0]), za[1] + t * (zb[1] - za[1]), za[2] + t * (zb[2] - za[2])]
    };
    let key = |a: (usize, usize), b: (usize, usize)| {
        let (x, y) = (id(a.0, a.1), id(b.0, b.1));
        (x.min(y), x.max(y))
    };

    let mut segments: Vec<((usize, usize), (usize, usize))> = Vec::new();
    let mut points: BTreeMap<(usize, usize), [f64; 3]> = BTreeMap::new();
    let mut triangles = Vec::new();
    for i in 0..r {
        for j in 0..r - i {
            triangles.push([(i, j), (i + 1, j), (i, j + 1)]);
            if i + j + 2 <= r {
                triangles.push([(i + 1, j), (i, j + 1), (i + 1, j + 1)]);
            }
        }
    }
    for tri in triangles {
        let pos: Vec<bool> = tri.iter().map(|&(i, j)| value[id(i, j)] >= 0.0).collect();
        let mut cut = Vec::new();
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            if pos[a] != pos[b] {
                let k = key(tri[a], tri[b]);
                points.entry(k).or_insert_with(|| crossing(tri[a], tri[b]));
                cut.push(k);
            }
        }
        if cut.len() == 2 {
            segments.push((cut[0], cut[1]));
        }
    }

    // chain segments that share a crossing into polylines
    let mut adjacency: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let starts: Vec<(usize, usize)> = adjacency
        .iter()
        .filter(|(_, s)| s.len() == 1)
        .map(|(k, _)| *k)
        .chain(adjacency.keys().copied())
        .collect();
    for start in starts {
        let Some(&first) = adjacency[&start].iter().find(|&&s| !used[s]) else {
            continue;
        };
        let mut line = vec![points[&start]];
        let mut at = start;
        let mut seg = first;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            line.push(points[&next]);
            at = next;
            match adjacency[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        lines.push(line);
    }
    Ok(lines)
}

/// Zero level set of a real-response predictor of dimension three, traced on
/// the grid of `spec.resolution`. Grid points are fed to the predictor
/// directly as reduced points.
pub fn decision_boundary(model: &FittedModel, resolution: usize) -> Result<Vec<Vec<[f64; 3]>>> {
    if model.m() != 3 {
        return Err(Error::WrongTargetDimension { expected: 3, found: model.m() });
    }
    if !matches!(model.responses(), Responses::Real(_)) {
        return Err(Error::WrongResponseKernel);
    }
    trace_zero_level(resolution, |z| model.predict_real_at(&z))
}

/// Dashed SVG path of the decision boundary; `d` is empty if `ŷ` never
/// changes sign.
pub fn render_decision_boundary(model: &FittedModel, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let lines = decision_boundary(model, spec.resolution)?;
    let mut d = String::new();
    for line in &lines {
        for (k, z) in line.iter().enumerate() {
            let (x, y) = spec.screen(*z);
            if !d.is_empty() {
                d.push(' ');
            }
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { "L" }, fmt(x), fmt(y));
        }
    }
    Ok(format!(
        "<path class=\"decision-boundary\" d=\"{d}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>"
    ))
}
