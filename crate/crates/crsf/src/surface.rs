//! The surface family: flat torus, wired cylinder, free annulus, punctured
//! planar domains, round sphere, hyperbolic ball. Each constructor returns
//! the grid graph plus embedding metadata: oriented faces, face curvatures,
//! homology cut crossings, boundary/wired vertices, chart positions.

use crate::graph::{GraphError, OrientedEdge, VertexId, WeightedGraph};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("grid dimension too small: need {0}, got {1}")]
    TooSmall(usize, usize),
    #[error("puncture ({0}, {1}) lies on a grid line; move it off the lattice")]
    PunctureOnGridLine(f64, f64),
    #[error("puncture ({0}, {1}) outside the domain")]
    PunctureOutside(f64, f64),
    #[error("two punctures fall in the same face")]
    PunctureCollision,
    #[error("domain intersects no grid face")]
    EmptyIntersection,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Torus,
    CylinderWired,
    Annulus,
    PlanarPunctured,
    Sphere,
    HyperbolicBall,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Torus => "torus",
            SurfaceKind::CylinderWired => "cylinder_wired",
            SurfaceKind::Annulus => "annulus",
            SurfaceKind::PlanarPunctured => "planar_punctured",
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::HyperbolicBall => "hyperbolic_ball",
        }
    }
}

/// Embedding metadata for a grid graph on a surface.
///
/// `faces` are oriented consistently (counterclockwise in the chart), so on
/// closed surfaces every oriented edge occurs in exactly one face boundary.
/// `cut_crossings[edge]` is the signed crossing vector of the forward edge
/// with each homology cut / winding generator.
#[derive(Debug, Clone)]
pub struct SurfaceModel {
    pub kind: SurfaceKind,
    pub faces: Vec<Vec<OrientedEdge>>,
    pub face_curvature: Vec<f64>,
    pub cut_count: usize,
    pub cut_crossings: Vec<Vec<i32>>,
    pub boundary: Vec<VertexId>,
    pub wired_vertex: Option<VertexId>,
    pub puncture_face: Option<usize>,
    pub closed: bool,
    pub vertex_positions: Vec<(f64, f64)>,
}

impl SurfaceModel {
    /// Signed crossing vector of an oriented edge with each cut.
    pub fn crossings(&self, e: OrientedEdge) -> Vec<i32> {
        let mut v = self.cut_crossings[e.edge].clone();
        if e.reversed {
            for x in &mut v {
                *x = -*x;
            }
        }
        v
    }

    /// Homology/winding class of a closed walk: the sum of signed cut
    /// crossings. Additive under concatenation of walks.
    pub fn classify_cycle(&self, cycle: &[OrientedEdge]) -> Vec<i32> {
        let mut class = vec![0i32; self.cut_count];
        for &e in cycle {
            let sign = if e.reversed { -1 } else { 1 };
            for (c, &x) in class.iter_mut().zip(&self.cut_crossings[e.edge]) {
                *c += sign * x;
            }
        }
        class
    }

    /// Zero class means contractible for this surface family (torus,
    /// annulus, punctured plane: simple closed curves are contractible iff
    /// null-homologous). Would be wrong for genus >= 2.
    pub fn is_contractible(&self, cycle: &[OrientedEdge]) -> bool {
        self.classify_cycle(cycle).iter().all(|&x| x == 0)
    }

    pub fn total_curvature(&self) -> f64 {
        self.face_curvature.iter().sum()
    }
}

/// 3x3 Gauss-Legendre quadrature of `f` over the rectangle.
fn quad_3x3(f: impl Fn(f64, f64) -> f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let t = (0.6f64).sqrt();
    let nodes = [-t, 0.0, t];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let (cx, hx) = ((x0 + x1) / 2.0, (x1 - x0) / 2.0);
    let (cy, hy) = ((y0 + y1) / 2.0, (y1 - y0) / 2.0);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += weights[i] * weights[j] * f(cx + hx * nodes[i], cy + hy * nodes[j]);
        }
    }
    s * hx * hy
}

/// n x m square grid on the flat torus: unit conductances, zero curvature,
/// two homology cuts.
pub fn make_torus_grid(n: usize, m: usize) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    if n < 2 {
        return Err(SurfaceError::TooSmall(2, n));
    }
    if m < 2 {
        return Err(SurfaceError::TooSmall(2, m));
    }
    let vid = |x: usize, y: usize| (y % m) * n + (x % n);
    let mut edges = Vec::new();
    for y in 0..m {
        for x in 0..n {
            edges.push((vid(x, y), vid(x + 1, y), 1.0)); // h(x,y) = 2*(y*n+x)
            edges.push((vid(x, y), vid(x, y + 1), 1.0)); // v(x,y) = 2*(y*n+x)+1
        }
    }
    let g = WeightedGraph::build(n * m, &edges)?;
    let h = |x: usize, y: usize| 2 * ((y % m) * n + (x % n));
    let v = |x: usize, y: usize| 2 * ((y % m) * n + (x % n)) + 1;
    let mut faces = Vec::new();
    for y in 0..m {
        for x in 0..n {
            faces.push(vec![
                OrientedEdge::forward(h(x, y)),
                OrientedEdge::forward(v(x + 1, y)),
                OrientedEdge::backward(h(x, y + 1)),
                OrientedEdge::backward(v(x, y)),
            ]);
        }
    }
    let mut cut_crossings = vec![vec![0, 0]; g.edge_count()];
    for y in 0..m {
        cut_crossings[h(n - 1, y)][0] = 1;
    }
    for x in 0..n {
        cut_crossings[v(x, m - 1)][1] = 1;
    }
    let face_count = faces.len();
    Ok((
        g,
        SurfaceModel {
            kind: SurfaceKind::Torus,
            face_curvature: vec![0.0; face_count],
            faces,
            cut_count: 2,
            cut_crossings,
            boundary: Vec::new(),
            wired_vertex: None,
            puncture_face: None,
            closed: true,
            vertex_positions: (0..n * m).map(|i| ((i % n) as f64, (i / n) as f64)).collect(),
        },
    ))
}

fn cylinder_core(
    n: usize,
    m: usize,
    wired: bool,
) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    if n < 3 {
        return Err(SurfaceError::TooSmall(3, n));
    }
    if m < 1 {
        return Err(SurfaceError::TooSmall(1, m));
    }
    let vid = |x: usize, y: usize| y * n + (x % n);
    let s = n * m;
    let mut edges = Vec::new();
    let mut h_id = vec![vec![0usize; n]; m];
    let mut v_id = vec![vec![0usize; n]; m];
    for y in 0..m {
        for x in 0..n {
            h_id[y][x] = edges.len();
            edges.push((vid(x, y), vid(x + 1, y), 1.0));
            if y + 1 < m {
                v_id[y][x] = edges.len();
                edges.push((vid(x, y), vid(x, y + 1), 1.0));
            }
        }
    }
    if wired {
        for x in 0..n {
            edges.push((s, vid(x, 0), 1.0));
        }
        for x in 0..n {
            edges.push((s, vid(x, m - 1), 1.0));
        }
    }
    let vcount = if wired { n * m + 1 } else { n * m };
    let g = WeightedGraph::build(vcount, &edges)?;
    let mut faces = Vec::new();
    for y in 0..m.saturating_sub(1) {
        for x in 0..n {
            faces.push(vec![
                OrientedEdge::forward(h_id[y][x]),
                OrientedEdge::forward(v_id[y][(x + 1) % n]),
                OrientedEdge::backward(h_id[y + 1][x]),
                OrientedEdge::backward(v_id[y][x]),
            ]);
        }
    }
    let mut cut_crossings = vec![vec![0]; g.edge_count()];
    for y in 0..m {
        cut_crossings[h_id[y][n - 1]][0] = 1;
    }
    let mut vertex_positions: Vec<(f64, f64)> =
        (0..n * m).map(|i| ((i % n) as f64, (i / n) as f64)).collect();
    let mut boundary: Vec<VertexId> = Vec::new();
    if wired {
        vertex_positions.push(((n as f64 - 1.0) / 2.0, -1.5));
        boundary.push(s);
    } else {
        boundary.extend(0..n);
        if m > 1 {
            boundary.extend((m - 1) * n..m * n);
        }
    }
    let face_count = faces.len();
    Ok((
        g,
        SurfaceModel {
            kind: if wired { SurfaceKind::CylinderWired } else { SurfaceKind::Annulus },
            face_curvature: vec![0.0; face_count],
            faces,
            cut_count: 1,
            cut_crossings,
            boundary,
            wired_vertex: if wired { Some(s) } else { None },
            puncture_face: None,
            closed: false,
            vertex_positions,
        },
    ))
}

/// Cylindrical grid with circumference n and height m, plus one super-vertex
/// wired to every top and bottom boundary vertex (two parallel edges per
/// vertex when m = 1).
pub fn make_wired_cylinder(n: usize, m: usize) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    cylinder_core(n, m, true)
}

/// Cylindrical grid with free boundary (an annulus).
pub fn make_annulus_grid(n: usize, m: usize) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    cylinder_core(n, m, false)
}

/// Half-width of the plane grid used for the sphere: the polar cap outside
/// the inscribed disk has area 4pi/(1+L^2) < 1e-3 * 4pi.
const SPHERE_GRID_HALFWIDTH: f64 = 32.0;

/// Square grid pulled back from the plane by inverse stereographic
/// projection of the unit sphere. The omitted polar cap is one distinguished
/// puncture face carrying the curvature residual, so Gauss-Bonnet holds
/// exactly and monodromy lifts are single-valued relative to the cap.
pub fn make_sphere_grid(k: usize) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    if k < 2 {
        return Err(SurfaceError::TooSmall(2, k));
    }
    let l = SPHERE_GRID_HALFWIDTH;
    let coord = |i: usize| -l + 2.0 * l * i as f64 / k as f64;
    let vid = |i: usize, j: usize| j * (k + 1) + i;
    let mut edges = Vec::new();
    let mut h_id = vec![vec![usize::MAX; k + 1]; k + 1];
    let mut v_id = vec![vec![usize::MAX; k + 1]; k + 1];
    for j in 0..=k {
        for i in 0..=k {
            if i < k {
                h_id[j][i] = edges.len();
                edges.push((vid(i, j), vid(i + 1, j), 1.0));
            }
            if j < k {
                v_id[j][i] = edges.len();
                edges.push((vid(i, j), vid(i, j + 1), 1.0));
            }
        }
    }
    let g = WeightedGraph::build((k + 1) * (k + 1), &edges)?;
    let density = |x: f64, y: f64| 4.0 / (1.0 + x * x + y * y).powi(2);
    let mut faces = Vec::new();
    let mut face_curvature = Vec::new();
    for j in 0..k {
        for i in 0..k {
            faces.push(vec![
                OrientedEdge::forward(h_id[j][i]),
                OrientedEdge::forward(v_id[j][i + 1]),
                OrientedEdge::backward(h_id[j + 1][i]),
                OrientedEdge::backward(v_id[j][i]),
            ]);
            face_curvature.push(quad_3x3(
                density,
                coord(i),
                coord(i + 1),
                coord(j),
                coord(j + 1),
            ));
        }
    }
    // polar cap: outer boundary traversed clockwise (the cap lies on its
    // left across the projection)
    let mut cap = Vec::new();
    for j in 0..k {
        cap.push(OrientedEdge::forward(v_id[j][0]));
    }
    for i in 0..k {
        cap.push(OrientedEdge::forward(h_id[k][i]));
    }
    for j in (0..k).rev() {
        cap.push(OrientedEdge::backward(v_id[j][k]));
    }
    for i in (0..k).rev() {
        cap.push(OrientedEdge::backward(h_id[0][i]));
    }
    let interior: f64 = face_curvature.iter().sum();
    faces.push(cap);
    face_curvature.push(4.0 * std::f64::consts::PI - interior);
    let puncture = faces.len() - 1;
    let positions = (0..(k + 1) * (k + 1))
        .map(|v| (coord(v % (k + 1)), coord(v / (k + 1))))
        .collect();
    let edge_count = g.edge_count();
    Ok((
        g,
        SurfaceModel {
            kind: SurfaceKind::Sphere,
            faces,
            face_curvature,
            cut_count: 0,
            cut_crossings: vec![Vec::new(); edge_count],
            boundary: Vec::new(),
            wired_vertex: None,
            puncture_face: Some(puncture),
            closed: true,
            vertex_positions: positions,
        },
    ))
}

/// Square grid in the Poincare disk intersected with the hyperbolic ball of
/// the given radius centered at the origin; K = -1, so face curvatures are
/// minus the hyperbolic face areas.
pub fn make_hyperbolic_ball_grid(
    radius: f64,
    k: usize,
) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    if !(radius > 0.0) {
        return Err(SurfaceError::BadParameter(format!("radius must be > 0, got {radius}")));
    }
    if k < 2 {
        return Err(SurfaceError::TooSmall(2, k));
    }
    let rho = (radius / 2.0).tanh();
    let coord = |i: usize| -rho + 2.0 * rho * i as f64 / k as f64;
    let inside = |x: f64, y: f64| (x * x + y * y).sqrt() < rho * (1.0 - 1e-12);
    let keep_face = |i: usize, j: usize| {
        inside(coord(i), coord(j))
            && inside(coord(i + 1), coord(j))
            && inside(coord(i), coord(j + 1))
            && inside(coord(i + 1), coord(j + 1))
    };
    // dense re-indexing of the vertices of kept faces
    let mut vmap = vec![usize::MAX; (k + 1) * (k + 1)];
    let gid = |i: usize, j: usize| j * (k + 1) + i;
    let mut positions = Vec::new();
    for j in 0..k {
        for i in 0..k {
            if keep_face(i, j) {
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    if vmap[gid(a, b)] == usize::MAX {
                        vmap[gid(a, b)] = positions.len();
                        positions.push((coord(a), coord(b)));
                    }
                }
            }
        }
    }
    if positions.is_empty() {
        return Err(SurfaceError::EmptyIntersection);
    }
    let mut edges = Vec::new();
    let mut h_id = vec![usize::MAX; (k + 1) * (k + 1)];
    let mut v_id = vec![usize::MAX; (k + 1) * (k + 1)];
    let mut faces = Vec::new();
    let mut face_curvature = Vec::new();
    let density = |x: f64, y: f64| -4.0 / (1.0 - x * x - y * y).powi(2);
    for j in 0..k {
        for i in 0..k {
            if !keep_face(i, j) {
                continue;
            }
            for (hx, hy) in [(i, j), (i, j + 1)] {
                if h_id[gid(hx, hy)] == usize::MAX {
                    h_id[gid(hx, hy)] = edges.len();
                    edges.push((vmap[gid(hx, hy)], vmap[gid(hx + 1, hy)], 1.0));
                }
            }
            for (vx, vy) in [(i, j), (i + 1, j)] {
                if v_id[gid(vx, vy)] == usize::MAX {
                    v_id[gid(vx, vy)] = edges.len();
                    edges.push((vmap[gid(vx, vy)], vmap[gid(vx, vy + 1)], 1.0));
                }
            }
            faces.push(vec![
                OrientedEdge::forward(h_id[gid(i, j)]),
                OrientedEdge::forward(v_id[gid(i + 1, j)]),
                OrientedEdge::backward(h_id[gid(i, j + 1)]),
                OrientedEdge::backward(v_id[gid(i, j)]),
            ]);
            face_curvature.push(quad_3x3(
                density,
                coord(i),
                coord(i + 1),
                coord(j),
                coord(j + 1),
            ));
        }
    }
    let g = WeightedGraph::build(positions.len(), &edges)?;
    let boundary: Vec<VertexId> = (0..g.vertex_count()).filter(|&v| g.adjacency(v).len() < 4).collect();
    let edge_count = g.edge_count();
    Ok((
        g,
        SurfaceModel {
            kind: SurfaceKind::HyperbolicBall,
            faces,
            face_curvature,
            cut_count: 0,
            cut_crossings: vec![Vec::new(); edge_count],
            boundary,
            wired_vertex: None,
            puncture_face: None,
            closed: false,
            vertex_positions: positions,
        },
    ))
}

/// Square grid on the rectangle [0,w] x [0,h] with the faces containing the
/// punctures removed; one winding cut per puncture (a rightward dual ray).
pub fn make_punctured_planar(
    w: f64,
    h: f64,
    punctures: &[(f64, f64)],
    k: usize,
) -> Result<(WeightedGraph, SurfaceModel), SurfaceError> {
    if !(w > 0.0 && h > 0.0) {
        return Err(SurfaceError::BadParameter(format!("rectangle {w} x {h}")));
    }
    if k < 2 {
        return Err(SurfaceError::TooSmall(2, k));
    }
    let s = w / k as f64;
    let nx = k;
    let ny = ((h / s).round() as usize).max(1);
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut edges = Vec::new();
    let mut h_id = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut v_id = vec![usize::MAX; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            if i < nx {
                h_id[vid(i, j)] = edges.len();
                edges.push((vid(i, j), vid(i + 1, j), 1.0));
            }
            if j < ny {
                v_id[vid(i, j)] = edges.len();
                edges.push((vid(i, j), vid(i, j + 1), 1.0));
            }
        }
    }
    let g = WeightedGraph::build((nx + 1) * (ny + 1), &edges)?;
    // map punctures to faces, rejecting grid-line hits deterministically
    let mut punctured = vec![usize::MAX; punctures.len()];
    for (p, &(px, py)) in punctures.iter().enumerate() {
        let (fx, fy) = (px / s, py / s);
        if (fx - fx.round()).abs() < 1e-9 || (fy - fy.round()).abs() < 1e-9 {
            return Err(SurfaceError::PunctureOnGridLine(px, py));
        }
        if !(0.0 < px && px < w && 0.0 < py && py < s * ny as f64) {
            return Err(SurfaceError::PunctureOutside(px, py));
        }
        let cell = (fy.floor() as usize) * nx + fx.floor() as usize;
        if punctured.contains(&cell) {
            return Err(SurfaceError::PunctureCollision);
        }
        punctured[p] = cell;
    }
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if punctured.contains(&(j * nx + i)) {
                continue;
            }
            faces.push(vec![
                OrientedEdge::forward(h_id[vid(i, j)]),
                OrientedEdge::forward(v_id[vid(i + 1, j)]),
                OrientedEdge::backward(h_id[vid(i, j + 1)]),
                OrientedEdge::backward(v_id[vid(i, j)]),
            ]);
        }
    }
    let mut cut_crossings = vec![vec![0; punctures.len()]; g.edge_count()];
    for (p, &(px, py)) in punctures.iter().enumerate() {
        let j = (py / s).floor() as usize;
        for i in 0..=nx {
            if coordinate(i, s) > px {
                cut_crossings[v_id[vid(i, j)]][p] = 1;
            }
        }
    }
    let boundary: Vec<VertexId> = (0..g.vertex_count())
        .filter(|&v| {
            let (i, j) = (v % (nx + 1), v / (nx + 1));
            i == 0 || i == nx || j == 0 || j == ny
        })
        .collect();
    let face_count = faces.len();
    let positions = (0..g.vertex_count())
        .map(|v| (coordinate(v % (nx + 1), s), coordinate(v / (nx + 1), s)))
        .collect();
    Ok((
        g,
        SurfaceModel {
            kind: SurfaceKind::PlanarPunctured,
            faces,
            face_curvature: vec![0.0; face_count],
            cut_count: punctures.len(),
            cut_crossings,
            boundary,
            wired_vertex: None,
            puncture_face: None,
            closed: false,
            vertex_positions: positions,
        },
    ))
}

fn coordinate(i: usize, s: f64) -> f64 {
    i as f64 * s
}
