//! U(1) and SU(2) connections on the graph's line/plane bundle.
//!
//! U(1) connections are stored as one real angle per edge in its forward
//! direction; reversal negates the angle exactly, and the real lift (not the
//! residue mod 2pi) is what monodromy computations return. SU(2) connections
//! store one special-unitary matrix per forward edge; the reverse transport
//! is the conjugate transpose.

use crate::graph::{EdgeId, OrientedEdge, WeightedGraph};
use crate::surface::SurfaceModel;
use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConnectionError {
    #[error("walk is not closed (edge {0} head does not match edge {1} tail)")]
    NotClosedWalk(usize, usize),
    #[error("empty walk")]
    EmptyWalk,
    #[error("connection has {0} edges, graph has {1}")]
    SizeMismatch(usize, usize),
    #[error("matrix on edge {0} is not special-unitary (defect {1:.3e})")]
    NotSpecialUnitary(EdgeId, f64),
    #[error("face constraints are inconsistent on the closed surface: Gauss-Bonnet residual {0:.3e}")]
    GaussBonnet(f64),
    #[error("face {0} uses its assignment edge with zero net coefficient")]
    DegenerateFace(usize),
    #[error("surface carries no torus cut metadata")]
    MissingCutData,
}

/// U(1) connection: per-edge angle in the forward direction.
#[derive(Debug, Clone, PartialEq)]
pub struct U1Connection {
    angle: Vec<f64>,
}

impl U1Connection {
    pub fn trivial(edge_count: usize) -> Self {
        U1Connection { angle: vec![0.0; edge_count] }
    }

    pub fn from_angles(angle: Vec<f64>) -> Self {
        U1Connection { angle }
    }

    pub fn edge_count(&self) -> usize {
        self.angle.len()
    }

    /// Angle of an oriented edge; antisymmetric under reversal by storage.
    pub fn angle(&self, e: OrientedEdge) -> f64 {
        if e.reversed {
            -self.angle[e.edge]
        } else {
            self.angle[e.edge]
        }
    }

    pub fn forward_angle(&self, id: EdgeId) -> f64 {
        self.angle[id]
    }

    pub fn set_forward_angle(&mut self, id: EdgeId, theta: f64) {
        self.angle[id] = theta;
    }

    pub fn phase(&self, e: OrientedEdge) -> Complex64 {
        Complex64::from_polar(1.0, self.angle(e))
    }

    /// The connection with all angles multiplied by t (the family Phi_t).
    pub fn scaled(&self, t: f64) -> Self {
        U1Connection { angle: self.angle.iter().map(|a| a * t).collect() }
    }
}

/// SU(2) connection: per-edge special-unitary matrix in the forward
/// direction; the reverse transport is the adjoint.
#[derive(Debug, Clone)]
pub struct Su2Connection {
    matrix: Vec<Matrix2<Complex64>>,
}

const SU2_TOL: f64 = 1e-12;

impl Su2Connection {
    pub fn identity(edge_count: usize) -> Self {
        Su2Connection { matrix: vec![Matrix2::identity(); edge_count] }
    }

    pub fn from_matrices(matrix: Vec<Matrix2<Complex64>>) -> Result<Self, ConnectionError> {
        for (id, m) in matrix.iter().enumerate() {
            let unitarity = (m * m.adjoint() - Matrix2::identity()).norm();
            let det_defect = (m.determinant() - Complex64::new(1.0, 0.0)).norm();
            if unitarity > SU2_TOL || det_defect > SU2_TOL {
                return Err(ConnectionError::NotSpecialUnitary(id, unitarity.max(det_defect)));
            }
        }
        Ok(Su2Connection { matrix })
    }

    /// SU(2) element from quaternion coordinates (a,b,c,d), |q| = 1:
    /// [[a+bi, c+di], [-c+di, a-bi]].
    pub fn element(a: f64, b: f64, c: f64, d: f64) -> Matrix2<Complex64> {
        let n = (a * a + b * b + c * c + d * d).sqrt();
        let (a, b, c, d) = (a / n, b / n, c / n, d / n);
        Matrix2::new(
            Complex64::new(a, b),
            Complex64::new(c, d),
            Complex64::new(-c, d),
            Complex64::new(a, -b),
        )
    }

    pub fn random<R: rand::Rng>(edge_count: usize, rng: &mut R) -> Self {
        use rand::distributions::Distribution;
        let normal = rand::distributions::Uniform::new(-1.0f64, 1.0);
        let matrix = (0..edge_count)
            .map(|_| {
                loop {
                    let (a, b, c, d) = (
                        normal.sample(rng),
                        normal.sample(rng),
                        normal.sample(rng),
                        normal.sample(rng),
                    );
                    let n2 = a * a + b * b + c * c + d * d;
                    if n2 > 1e-3 && n2 <= 1.0 {
                        break Self::element(a, b, c, d);
                    }
                }
            })
            .collect();
        Su2Connection { matrix }
    }

    pub fn edge_count(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self, e: OrientedEdge) -> Matrix2<Complex64> {
        if e.reversed {
            self.matrix[e.edge].adjoint()
        } else {
            self.matrix[e.edge]
        }
    }
}

/// Per-vertex U(1) gauge: rotates the fiber over each vertex by e^{i sigma}.
#[derive(Debug, Clone)]
pub struct U1Gauge {
    pub vertex_angle: Vec<f64>,
}

/// Per-vertex SU(2) gauge.
#[derive(Debug, Clone)]
pub struct Su2Gauge {
    pub vertex_matrix: Vec<Matrix2<Complex64>>,
}

/// Real lift of the monodromy around a closed oriented walk: the plain sum
/// of edge angles, not reduced mod 2pi. Reversing the walk negates it.
pub fn cycle_monodromy_angle(
    g: &WeightedGraph,
    conn: &U1Connection,
    cycle: &[OrientedEdge],
) -> Result<f64, ConnectionError> {
    check_closed(g, cycle)?;
    Ok(cycle.iter().map(|&e| conn.angle(e)).sum())
}

/// Ordered product of SU(2) transports along the closed walk, starting from
/// the tail of the first edge. The trace is independent of the start vertex.
pub fn cycle_monodromy_su2(
    g: &WeightedGraph,
    conn: &Su2Connection,
    cycle: &[OrientedEdge],
) -> Result<Matrix2<Complex64>, ConnectionError> {
    check_closed(g, cycle)?;
    let mut m = Matrix2::identity();
    for &e in cycle {
        m = conn.matrix(e) * m;
    }
    Ok(m)
}

fn check_closed(g: &WeightedGraph, cycle: &[OrientedEdge]) -> Result<(), ConnectionError> {
    if cycle.is_empty() {
        return Err(ConnectionError::EmptyWalk);
    }
    for i in 0..cycle.len() {
        let j = (i + 1) % cycle.len();
        if g.head(cycle[i]) != g.tail(cycle[j]) {
            return Err(ConnectionError::NotClosedWalk(i, j));
        }
    }
    Ok(())
}

/// Gauge action on angles: theta'_{uv} = theta_{uv} + sigma_v - sigma_u for
/// the edge oriented u -> v. Cycle lifts are unchanged mod 2pi.
pub fn apply_gauge_u1(g: &WeightedGraph, conn: &U1Connection, gauge: &U1Gauge) -> U1Connection {
    let angles = (0..g.edge_count())
        .map(|id| {
            let e = OrientedEdge::forward(id);
            conn.forward_angle(id) + gauge.vertex_angle[g.head(e)] - gauge.vertex_angle[g.tail(e)]
        })
        .collect();
    U1Connection::from_angles(angles)
}

/// Gauge action on SU(2) transports: omega'_e = psi_head omega_e psi_tail^dagger.
pub fn apply_gauge_su2(g: &WeightedGraph, conn: &Su2Connection, gauge: &Su2Gauge) -> Su2Connection {
    let matrices = (0..g.edge_count())
        .map(|id| {
            let e = OrientedEdge::forward(id);
            gauge.vertex_matrix[g.head(e)] * conn.matrix(e) * gauge.vertex_matrix[g.tail(e)].adjoint()
        })
        .collect();
    Su2Connection { matrix: matrices }
}

/// Builds a U(1) connection whose monodromy around each internal face equals
/// the prescribed curvature.
///
/// Angles vanish on a primal spanning tree; the remaining (cotree) edges are
/// in bijection with dual spanning-tree edges plus homology extras. Faces
/// are processed deepest-first along a dual BFS tree rooted at the puncture
/// face (closed surfaces) or the outer region (surfaces with boundary); each
/// face's parent cotree edge absorbs its constraint. Homology extras stay 0.
/// On a closed surface the root face's constraint must then hold on its own:
/// a Gauss-Bonnet residual above 1e-8 is an error.
pub fn connection_from_face_curvature(
    g: &WeightedGraph,
    surf: &SurfaceModel,
    face_curvature: &[f64],
) -> Result<U1Connection, ConnectionError> {
    assert_eq!(face_curvature.len(), surf.faces.len(), "one curvature per face");
    let n = g.vertex_count();
    // primal spanning tree by BFS from vertex 0
    let mut in_tree = vec![false; g.edge_count()];
    let mut seen = vec![false; n];
    if n > 0 {
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &e in g.adjacency(v) {
                let w = g.head(e);
                if !seen[w] {
                    seen[w] = true;
                    in_tree[e.edge] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    // which face contains each oriented edge
    let mut face_of = vec![usize::MAX; 2 * g.edge_count()];
    for (f, boundary) in surf.faces.iter().enumerate() {
        for &e in boundary {
            face_of[e.index()] = f;
        }
    }
    let face_count = surf.faces.len();
    let outer = face_count; // virtual node for every region not listed as a face
    let root = if surf.closed { surf.puncture_face.unwrap_or(0) } else { outer };
    // dual BFS over cotree edges
    let mut dual_adj: Vec<Vec<(usize, EdgeId)>> = vec![Vec::new(); face_count + 1];
    for id in 0..g.edge_count() {
        if in_tree[id] {
            continue;
        }
        let f1 = face_of[OrientedEdge::forward(id).index()].min(outer);
        let f2 = face_of[OrientedEdge::backward(id).index()].min(outer);
        dual_adj[f1].push((f2, id));
        dual_adj[f2].push((f1, id));
    }
    let mut parent_edge = vec![usize::MAX; face_count + 1];
    let mut order = Vec::new();
    let mut visited = vec![false; face_count + 1];
    visited[root] = true;
    let mut used = vec![false; g.edge_count()];
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(f) = queue.pop_front() {
        order.push(f);
        for &(f2, id) in &dual_adj[f] {
            if !visited[f2] && !used[id] {
                visited[f2] = true;
                used[id] = true;
                parent_edge[f2] = id;
                queue.push_back(f2);
            }
        }
    }
    // unused cotree edges (homology generators) keep angle 0
    let mut conn = U1Connection::trivial(g.edge_count());
    for &f in order.iter().rev() {
        if f == root || f == outer {
            continue;
        }
        let pe = parent_edge[f];
        let mut rest = 0.0;
        let mut coeff = 0i32;
        for &e in &surf.faces[f] {
            if e.edge == pe {
                coeff += if e.reversed { -1 } else { 1 };
            } else {
                rest += conn.angle(e);
            }
        }
        if coeff == 0 {
            return Err(ConnectionError::DegenerateFace(f));
        }
        conn.set_forward_angle(pe, (face_curvature[f] - rest) / coeff as f64);
    }
    if surf.closed && root < face_count {
        // the root lift may differ from the curvature by full turns (the
        // Gauss-Bonnet total 2*pi*chi); only the residual mod 2*pi matters
        let residual = cycle_monodromy_angle(g, &conn, &surf.faces[root])? - face_curvature[root];
        let tau = 2.0 * std::f64::consts::PI;
        let wrapped = residual - (residual / tau).round() * tau;
        if wrapped.abs() > 1e-8 {
            return Err(ConnectionError::GaussBonnet(wrapped));
        }
    }
    Ok(conn)
}

/// Flat connection on a torus grid with prescribed lifts (u, v) along the
/// two homology generators: theta_e = u * cross_0(e) + v * cross_1(e).
pub fn realize_flat_torus(
    g: &WeightedGraph,
    surf: &SurfaceModel,
    u: f64,
    v: f64,
) -> Result<U1Connection, ConnectionError> {
    if surf.cut_count != 2 {
        return Err(ConnectionError::MissingCutData);
    }
    let angles = (0..g.edge_count())
        .map(|id| {
            let c = &surf.cut_crossings[id];
            u * c[0] as f64 + v * c[1] as f64
        })
        .collect();
    Ok(U1Connection::from_angles(angles))
}
