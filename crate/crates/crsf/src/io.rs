//! Line-oriented text formats for graphs, connections, and surface specs,
//! plus the CSV header shared by every output file. All float formatting
//! uses the shortest round-trip representation, so rewriting a parsed file
//! reproduces it byte for byte.

use crate::connection::{Su2Connection, U1Connection};
use crate::graph::{GraphError, VertexId, WeightedGraph};
use crate::surface::{
    make_annulus_grid, make_hyperbolic_ball_grid, make_punctured_planar, make_sphere_grid,
    make_torus_grid, make_wired_cylinder, SurfaceError, SurfaceModel,
};
use nalgebra::Matrix2;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Connection(#[from] crate::connection::ConnectionError),
    #[error("unknown surface kind {0:?}")]
    UnknownKind(String),
    #[error("surface spec is missing parameter {0:?}")]
    MissingParam(&'static str),
}

fn perr(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line: line + 1, msg: msg.into() }
}

/// Non-comment, non-blank lines with their 0-based indices.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, IoError> {
    tok.parse().map_err(|_| perr(line, format!("invalid {what}: {tok:?}")))
}

/// Graph format: header `graph <vertex_count>`, then `e <a> <b> <c>` per
/// edge. `#` starts a comment line.
pub fn parse_graph(text: &str) -> Result<WeightedGraph, IoError> {
    let mut lines = content_lines(text);
    let (i, header) = lines.next().ok_or(perr(0, "empty graph file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("graph") {
        return Err(perr(i, "expected `graph <vertex_count>` header"));
    }
    let n: usize = parse_num(i, toks.next().ok_or(perr(i, "missing vertex count"))?, "vertex count")?;
    let mut edges: Vec<(VertexId, VertexId, f64)> = Vec::new();
    for (i, line) in lines {
        let mut toks = line.split_whitespace();
        if toks.next() != Some("e") {
            return Err(perr(i, format!("expected edge line `e <a> <b> <c>`, got {line:?}")));
        }
        let a = parse_num(i, toks.next().ok_or(perr(i, "missing endpoint"))?, "vertex id")?;
        let b = parse_num(i, toks.next().ok_or(perr(i, "missing endpoint"))?, "vertex id")?;
        let c = parse_num(i, toks.next().ok_or(perr(i, "missing conductance"))?, "conductance")?;
        if toks.next().is_some() {
            return Err(perr(i, "trailing tokens on edge line"));
        }
        edges.push((a, b, c));
    }
    Ok(WeightedGraph::build(n, &edges)?)
}

pub fn format_graph(g: &WeightedGraph) -> String {
    let mut s = format!("graph {}\n", g.vertex_count());
    for d in g.edges() {
        writeln!(s, "e {} {} {}", d.a, d.b, d.conductance).unwrap();
    }
    s
}

#[derive(Debug, Clone)]
pub enum ConnectionFile {
    U1(U1Connection),
    Su2(Su2Connection),
}

/// Connection dump: `conn u1 <edge_count>` then `a <edge_id> <theta>` per
/// edge, or `conn su2 <edge_count>` then `m <edge_id>` followed by the 8
/// entries re00 im00 re01 im01 re10 im10 re11 im11 of the forward matrix.
pub fn parse_connection(text: &str) -> Result<ConnectionFile, IoError> {
    let mut lines = content_lines(text);
    let (i, header) = lines.next().ok_or(perr(0, "empty connection file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("conn") {
        return Err(perr(i, "expected `conn <group> <edge_count>` header"));
    }
    let group = toks.next().ok_or(perr(i, "missing group"))?.to_string();
    let m: usize = parse_num(i, toks.next().ok_or(perr(i, "missing edge count"))?, "edge count")?;
    match group.as_str() {
        "u1" => {
            let mut angles = vec![0.0f64; m];
            for (i, line) in lines {
                let mut toks = line.split_whitespace();
                if toks.next() != Some("a") {
                    return Err(perr(i, format!("expected `a <edge_id> <theta>`, got {line:?}")));
                }
                let id: usize = parse_num(i, toks.next().ok_or(perr(i, "missing edge id"))?, "edge id")?;
                if id >= m {
                    return Err(perr(i, format!("edge id {id} out of range ({m} edges)")));
                }
                angles[id] = parse_num(i, toks.next().ok_or(perr(i, "missing angle"))?, "angle")?;
            }
            Ok(ConnectionFile::U1(U1Connection::from_angles(angles)))
        }
        "su2" => {
            let mut mats = vec![Matrix2::<Complex64>::identity(); m];
            for (i, line) in lines {
                let mut toks = line.split_whitespace();
                if toks.next() != Some("m") {
                    return Err(perr(i, format!("expected `m <edge_id> <8 reals>`, got {line:?}")));
                }
                let id: usize = parse_num(i, toks.next().ok_or(perr(i, "missing edge id"))?, "edge id")?;
                if id >= m {
                    return Err(perr(i, format!("edge id {id} out of range ({m} edges)")));
                }
                let mut vals = [0.0f64; 8];
                for v in &mut vals {
                    *v = parse_num(i, toks.next().ok_or(perr(i, "missing matrix entry"))?, "matrix entry")?;
                }
                mats[id] = Matrix2::new(
                    Complex64::new(vals[0], vals[1]),
                    Complex64::new(vals[2], vals[3]),
                    Complex64::new(vals[4], vals[5]),
                    Complex64::new(vals[6], vals[7]),
                );
            }
            Ok(ConnectionFile::Su2(Su2Connection::from_matrices(mats)?))
        }
        other => Err(perr(i, format!("unknown connection group {other:?}"))),
    }
}

pub fn format_u1(conn: &U1Connection) -> String {
    let mut s = format!("conn u1 {}\n", conn.edge_count());
    for id in 0..conn.edge_count() {
        writeln!(s, "a {} {}", id, conn.forward_angle(id)).unwrap();
    }
    s
}

pub fn format_su2(conn: &Su2Connection) -> String {
    let mut s = format!("conn su2 {}\n", conn.edge_count());
    for id in 0..conn.edge_count() {
        let m = conn.matrix(crate::graph::OrientedEdge::forward(id));
        write!(s, "m {id}").unwrap();
        for &x in &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]] {
            write!(s, " {} {}", x.re, x.im).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Surface spec: `kind=<name>` plus the constructor parameters as
/// `key=value` lines, enough to rebuild the graph and surface
/// deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub kind: String,
    pub params: BTreeMap<String, String>,
}

impl SurfaceSpec {
    pub fn new(kind: impl Into<String>) -> Self {
        SurfaceSpec { kind: kind.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    fn usize_param(&self, key: &'static str) -> Result<usize, IoError> {
        let v = self.params.get(key).ok_or(IoError::MissingParam(key))?;
        parse_num(0, v, key)
    }

    fn f64_param(&self, key: &'static str) -> Result<f64, IoError> {
        let v = self.params.get(key).ok_or(IoError::MissingParam(key))?;
        parse_num(0, v, key)
    }

    fn f64_param_or(&self, key: &'static str, default: f64) -> Result<f64, IoError> {
        match self.params.get(key) {
            Some(v) => parse_num(0, v, key),
            None => Ok(default),
        }
    }
}

pub fn parse_surface_spec(text: &str) -> Result<SurfaceSpec, IoError> {
    let mut kind = None;
    let mut params = BTreeMap::new();
    for (i, line) in content_lines(text) {
        let (key, value) = line
            .split_once('=')
            .ok_or(perr(i, format!("expected `key=value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "kind" {
            kind = Some(value.to_string());
        } else {
            params.insert(key.to_string(), value.to_string());
        }
    }
    Ok(SurfaceSpec { kind: kind.ok_or(IoError::MissingParam("kind"))?, params })
}

pub fn format_surface_spec(spec: &SurfaceSpec) -> String {
    let mut s = format!("kind={}\n", spec.kind);
    for (k, v) in &spec.params {
        writeln!(s, "{k}={v}").unwrap();
    }
    s
}

/// Punctures are given as `x:y` pairs separated by `;`.
fn parse_punctures(raw: &str) -> Result<Vec<(f64, f64)>, IoError> {
    raw.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (x, y) = p
                .split_once(':')
                .ok_or(perr(0, format!("expected puncture `x:y`, got {p:?}")))?;
            Ok((parse_num(0, x.trim(), "puncture x")?, parse_num(0, y.trim(), "puncture y")?))
        })
        .collect()
}

/// Rebuilds the surface family member named by the spec.
pub fn build_surface(spec: &SurfaceSpec) -> Result<(WeightedGraph, SurfaceModel), IoError> {
    let built = match spec.kind.as_str() {
        "torus" => make_torus_grid(spec.usize_param("n")?, spec.usize_param("m")?)?,
        "cylinder_wired" => make_wired_cylinder(spec.usize_param("n")?, spec.usize_param("m")?)?,
        "annulus" => make_annulus_grid(spec.usize_param("n")?, spec.usize_param("m")?)?,
        "sphere" => make_sphere_grid(spec.usize_param("k")?)?,
        "hyperbolic_ball" => {
            make_hyperbolic_ball_grid(spec.f64_param("radius")?, spec.usize_param("k")?)?
        }
        "planar_punctured" => {
            let punctures =
                parse_punctures(spec.params.get("punctures").map(String::as_str).unwrap_or(""))?;
            make_punctured_planar(
                spec.f64_param("w")?,
                spec.f64_param("h")?,
                &punctures,
                spec.usize_param("k")?,
            )?
        }
        other => return Err(IoError::UnknownKind(other.to_string())),
    };
    Ok(built)
}

/// The connection shipped with a surface: curvature-induced angles (scaled
/// by `scale`, default 1) plus `u` (and `v`) times the homology crossing
/// numbers, matching the flat-torus monodromy realization when curvature
/// vanishes.
pub fn build_surface_connection(
    spec: &SurfaceSpec,
    g: &WeightedGraph,
    surf: &SurfaceModel,
) -> Result<U1Connection, IoError> {
    let scale = spec.f64_param_or("scale", 1.0)?;
    let curvature: Vec<f64> = surf.face_curvature.iter().map(|&c| c * scale).collect();
    let mut conn = crate::connection::connection_from_face_curvature(g, surf, &curvature)?;
    let monodromy: Vec<f64> = (0..surf.cut_count)
        .map(|i| spec.f64_param_or(["u", "v"][i.min(1)], 0.0))
        .collect::<Result<_, _>>()?;
    if monodromy.iter().any(|&x| x != 0.0) {
        for id in 0..g.edge_count() {
            let cross = &surf.cut_crossings[id];
            let extra: f64 =
                cross.iter().zip(&monodromy).map(|(&c, &m)| c as f64 * m).sum();
            conn.set_forward_angle(id, conn.forward_angle(id) + extra);
        }
    }
    Ok(conn)
}

/// Header prepended to every CSV output: tool version, full config line,
/// and seed. Rerunning the same command reproduces the bytes exactly.
pub fn csv_header(config: &str, seed: u64) -> String {
    format!("# crsf {TOOL_VERSION}\n# config: {config}\n# seed: {seed}\n")
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn write_string(path: &Path, contents: &str) -> Result<(), IoError> {
    Ok(std::fs::write(path, contents)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn graph_round_trip() {
        let g = WeightedGraph::build(3, &[(0, 1, 1.5), (1, 2, 0.25), (2, 0, 3.0)]).unwrap();
        let text = format_graph(&g);
        let g2 = parse_graph(&text).unwrap();
        assert_eq!(format_graph(&g2), text);
        assert_eq!(g2.vertex_count(), 3);
        assert_eq!(g2.conductance(crate::graph::OrientedEdge::forward(1)), 0.25);
    }

    #[test]
    fn graph_parse_errors() {
        assert!(parse_graph("").is_err());
        assert!(parse_graph("graph").is_err());
        assert!(parse_graph("graph 2\nx 0 1 1.0").is_err());
        assert!(parse_graph("graph 2\ne 0 1").is_err());
        assert!(parse_graph("graph 2\ne 0 1 1.0 extra").is_err());
        // graph-level validation still applies
        assert!(parse_graph("graph 2\ne 0 1 -1.0").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let g = parse_graph("# header comment\n\ngraph 2\n# edge below\ne 0 1 1\n").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn u1_round_trip_is_exact() {
        let conn = U1Connection::from_angles(vec![0.1, -0.25, std::f64::consts::PI / 3.0]);
        let text = format_u1(&conn);
        match parse_connection(&text).unwrap() {
            ConnectionFile::U1(c) => {
                for id in 0..3 {
                    assert_eq!(c.forward_angle(id), conn.forward_angle(id));
                }
            }
            _ => panic!("expected u1"),
        }
    }

    #[test]
    fn su2_round_trip_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let conn = Su2Connection::random(4, &mut rng);
        let text = format_su2(&conn);
        match parse_connection(&text).unwrap() {
            ConnectionFile::Su2(c) => {
                for id in 0..4 {
                    let e = crate::graph::OrientedEdge::forward(id);
                    assert_eq!(c.matrix(e), conn.matrix(e));
                }
            }
            _ => panic!("expected su2"),
        }
    }

    #[test]
    fn surface_spec_round_trip_and_build() {
        let spec = SurfaceSpec::new("torus").with("n", 4).with("m", 3).with("u", 0.5);
        let text = format_surface_spec(&spec);
        let spec2 = parse_surface_spec(&text).unwrap();
        assert_eq!(spec, spec2);
        let (g, surf) = build_surface(&spec2).unwrap();
        assert_eq!(g.vertex_count(), 12);
        assert_eq!(surf.cut_count, 2);
        let conn = build_surface_connection(&spec2, &g, &surf).unwrap();
        // horizontal loop in row 0 lifts to the u monodromy
        let cyc: Vec<_> = (0..4)
            .map(|x| crate::graph::OrientedEdge::forward(2 * x))
            .collect();
        let theta = crate::connection::cycle_monodromy_angle(&g, &conn, &cyc).unwrap();
        assert!((theta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let spec = SurfaceSpec::new("moebius").with("n", 4);
        assert!(matches!(build_surface(&spec), Err(IoError::UnknownKind(_))));
        let spec = SurfaceSpec::new("torus");
        assert!(matches!(build_surface(&spec), Err(IoError::MissingParam("n"))));
    }

    #[test]
    fn punctured_planar_spec_builds() {
        let spec = SurfaceSpec::new("planar_punctured")
            .with("w", 3.0)
            .with("h", 3.0)
            .with("k", 2)
            .with("punctures", "0.25:0.25;1.75:2.25");
        let (g, surf) = build_surface(&spec).unwrap();
        assert!(g.vertex_count() > 0);
        assert_eq!(surf.cut_count, 2);
    }

    #[test]
    fn csv_header_mentions_seed_and_config() {
        let h = csv_header("sample --measure inc", 42);
        assert!(h.starts_with("# crsf "));
        assert!(h.contains("# config: sample --measure inc"));
        assert!(h.contains("# seed: 42"));
    }
}
