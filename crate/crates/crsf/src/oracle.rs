//! Brute-force ground truth on tiny instances: exhaustive CRSF/CRST
//! enumeration over functional graphs, exact measures, and the property
//! checks (determinant identities, the loop-erased-walk density lemma, and
//! the Markov / restriction / domination properties).

use crate::connection::{cycle_monodromy_su2, Su2Connection, U1Connection};
use crate::graph::{
    crsf_edge_weight, EdgeId, OrientedCrsf, OrientedEdge, VertexId, WeightedGraph,
};
use crate::laplacian::{
    assemble_su2, assemble_u1, det_laplacian, green_function, spanning_tree_count, LaplacianError,
};
use crate::sampler::{loop_erased_walk, CycleWeightFn, SamplerError};
use crate::surface::SurfaceModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;
use thiserror::Error;

/// Default enumeration caps; beyond these the caller must opt in to a slow
/// run explicitly.
pub const CAP_VERTICES: usize = 8;
pub const CAP_EDGES: usize = 14;
/// Hard cap on the number of functional-graph configurations visited.
const CAP_CONFIGS: u128 = 200_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration cap exceeded ({vertices} vertices, {edges} edges); pass force=true for a slow run")]
    CapExceeded { vertices: usize, edges: usize },
    #[error("too many configurations to enumerate ({0})")]
    TooManyConfigs(u128),
    #[error("partition function is zero: the measure has empty support")]
    ZeroPartition,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Laplacian(#[from] LaplacianError),
}

/// Exhaustive list of weighted configurations with total mass `z`; indexed
/// by a caller-chosen key (oriented arc key or unoriented edge key).
pub struct EnumerationTable {
    pub entries: Vec<(OrientedCrsf, f64)>,
    pub z: f64,
    index: HashMap<Vec<usize>, usize>,
}

impl EnumerationTable {
    fn build(keyed: Vec<(OrientedCrsf, Vec<usize>, f64)>) -> Result<Self, OracleError> {
        let mut entries = Vec::with_capacity(keyed.len());
        let mut index = HashMap::with_capacity(keyed.len());
        let mut z = 0.0;
        for (crsf, key, w) in keyed {
            z += w;
            index.insert(key, entries.len());
            entries.push((crsf, w));
        }
        if z <= 0.0 {
            return Err(OracleError::ZeroPartition);
        }
        Ok(EnumerationTable { entries, z, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.entries[i].1 / self.z
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, w)| w / self.z).collect()
    }

    pub fn find(&self, key: &[usize]) -> Option<usize> {
        self.index.get(key).copied()
    }
}

fn check_caps(g: &WeightedGraph, force: bool) -> Result<(), OracleError> {
    if !force && (g.vertex_count() > CAP_VERTICES || g.edge_count() > CAP_EDGES) {
        return Err(OracleError::CapExceeded {
            vertices: g.vertex_count(),
            edges: g.edge_count(),
        });
    }
    Ok(())
}

/// Visits every functional-graph configuration (one outgoing arc per
/// non-root vertex) that is a valid (essential) CRSF, i.e. contains no
/// doubled-edge 2-cycle. The visitor gets the arc assignment.
pub fn for_each_crsf(
    g: &WeightedGraph,
    roots: &[VertexId],
    mut visit: impl FnMut(&[Option<OrientedEdge>]),
) -> Result<(), OracleError> {
    let n = g.vertex_count();
    let mut is_root = vec![false; n];
    for &r in roots {
        is_root[r] = true;
    }
    let free: Vec<VertexId> = (0..n).filter(|&v| !is_root[v]).collect();
    let mut configs: u128 = 1;
    for &v in &free {
        let d = g.adjacency(v).len();
        if d == 0 {
            return Ok(()); // no CRSF exists at all
        }
        configs = configs.saturating_mul(d as u128);
    }
    if configs > CAP_CONFIGS {
        return Err(OracleError::TooManyConfigs(configs));
    }
    let mut idx = vec![0usize; free.len()];
    let mut arcs: Vec<Option<OrientedEdge>> = vec![None; n];
    loop {
        for (k, &v) in free.iter().enumerate() {
            arcs[v] = Some(g.adjacency(v)[idx[k]]);
        }
        // reject doubled-edge 2-cycles
        let mut ok = true;
        'check: for &v in &free {
            let e = arcs[v].unwrap();
            let w = g.head(e);
            if w < v {
                continue; // pair checked from the smaller endpoint
            }
            if let Some(back) = arcs[w] {
                if back.edge == e.edge && g.head(back) == v {
                    ok = false;
                    break 'check;
                }
            }
        }
        if ok {
            visit(&arcs);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < g.adjacency(free[k]).len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Weighted enumeration with per-configuration weight from `weight`
/// (returning None drops the configuration from the support). `oriented`
/// keys the table by arc assignment; otherwise configurations are
/// deduplicated to unoriented CRSFs via the canonical orientation and keyed
/// by sorted edge ids.
fn enumerate_with_weight(
    g: &WeightedGraph,
    roots: &[VertexId],
    oriented: bool,
    force: bool,
    mut weight: impl FnMut(&OrientedCrsf, &[Vec<OrientedEdge>]) -> Option<f64>,
) -> Result<EnumerationTable, OracleError> {
    check_caps(g, force)?;
    let mut keyed = Vec::new();
    for_each_crsf(g, roots, |arcs| {
        let crsf = OrientedCrsf::from_arcs(arcs.to_vec());
        if !oriented {
            // keep only the canonical orientation representative
            let mut canon = crsf.clone();
            canon.canonicalize_orientations(g);
            if canon.arc_key() != crsf.arc_key() {
                return;
            }
        }
        let cycles = crsf.cycles(g);
        if let Some(w) = weight(&crsf, &cycles) {
            if w > 0.0 {
                let key = if oriented { crsf.arc_key() } else { crsf.edge_key() };
                keyed.push((crsf, key, w));
            }
        }
    })?;
    EnumerationTable::build(keyed)
}

/// All (essential) CRSFs with unit cycle weights: weight = product of
/// conductances. Oriented tables weight each orientation separately, so the
/// oriented total is sum over unoriented CRSFs of 2^{#cycles} * weight.
pub fn enumerate_crsfs(
    g: &WeightedGraph,
    roots: &[VertexId],
    oriented: bool,
    force: bool,
) -> Result<EnumerationTable, OracleError> {
    enumerate_with_weight(g, roots, oriented, force, |crsf, _| Some(crsf_edge_weight(g, crsf)))
}

/// Exact oriented measure with weight prod c(e) * prod alpha(cycle).
pub fn exact_measure_c_alpha(
    g: &WeightedGraph,
    alpha: &CycleWeightFn,
    roots: &[VertexId],
    force: bool,
) -> Result<EnumerationTable, OracleError> {
    let mut alpha_err: Option<SamplerError> = None;
    let table = enumerate_with_weight(g, roots, true, force, |crsf, cycles| {
        let mut w = crsf_edge_weight(g, crsf);
        for cyc in cycles {
            match alpha.eval(g, cyc) {
                Ok(a) => w *= a,
                Err(e) => {
                    alpha_err = Some(e);
                    return None;
                }
            }
        }
        Some(w)
    });
    if let Some(e) = alpha_err {
        return Err(OracleError::Sampler(e));
    }
    table
}

/// Exact unoriented connection measure: weight prod c * prod (2 - 2cos theta).
pub fn exact_measure_phi(
    g: &WeightedGraph,
    conn: &U1Connection,
    roots: &[VertexId],
    force: bool,
) -> Result<EnumerationTable, OracleError> {
    enumerate_with_weight(g, roots, false, force, |crsf, cycles| {
        let mut w = crsf_edge_weight(g, crsf);
        for cyc in cycles {
            let theta: f64 = cyc.iter().map(|&e| conn.angle(e)).sum();
            w *= 2.0 - 2.0 * theta.cos();
        }
        Some(w)
    })
}

/// Exact unoriented SU(2) measure: weight prod c * prod (2 - Tr omega).
pub fn exact_measure_su2(
    g: &WeightedGraph,
    conn: &Su2Connection,
    roots: &[VertexId],
    force: bool,
) -> Result<EnumerationTable, OracleError> {
    enumerate_with_weight(g, roots, false, force, |crsf, cycles| {
        let mut w = crsf_edge_weight(g, crsf);
        for cyc in cycles {
            let tr = cycle_monodromy_su2(g, conn, cyc).expect("cycles are closed").trace();
            w *= 2.0 - tr.re;
        }
        Some(w)
    })
}

/// Exact unoriented incompressible measure: uniform (conductance-weighted)
/// over CRSFs all of whose cycles are noncontractible.
pub fn exact_measure_inc(
    g: &WeightedGraph,
    surf: &SurfaceModel,
    roots: &[VertexId],
    force: bool,
) -> Result<EnumerationTable, OracleError> {
    enumerate_with_weight(g, roots, false, force, |crsf, cycles| {
        if cycles.iter().any(|c| surf.is_contractible(c)) {
            None
        } else {
            Some(crsf_edge_weight(g, crsf))
        }
    })
}

/// Exact unoriented squared-lift CRST measure: single-component CRSFs with
/// weight theta^2 * prod c.
pub fn exact_measure_lc0(
    g: &WeightedGraph,
    conn: &U1Connection,
    force: bool,
) -> Result<EnumerationTable, OracleError> {
    let n = g.vertex_count();
    enumerate_with_weight(g, &[], false, force, |crsf, cycles| {
        if cycles.len() != 1 {
            return None;
        }
        let comp = crsf.component_ids(g);
        if comp.iter().any(|&c| c != comp[0]) || comp.len() != n {
            return None;
        }
        let theta: f64 = cycles[0].iter().map(|&e| conn.angle(e)).sum();
        Some(theta * theta * crsf_edge_weight(g, crsf))
    })
}

/// Enumeration-side partition function of the squared-lift CRST measure
/// (route C for the three-way cross-check); 0 when no CRST has nonzero lift.
pub fn z_lc0_enumeration(
    g: &WeightedGraph,
    conn: &U1Connection,
    force: bool,
) -> Result<f64, OracleError> {
    match exact_measure_lc0(g, conn, force) {
        Ok(t) => Ok(t.z),
        Err(OracleError::ZeroPartition) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    pub determinant: f64,
    pub enumeration: f64,
    pub rel_err: f64,
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// det Delta_Phi against the unoriented CRSF sum with weights 2 - 2cos.
pub fn check_det_identity(
    g: &WeightedGraph,
    conn: &U1Connection,
    force: bool,
) -> Result<IdentityReport, OracleError> {
    let det = det_laplacian(&assemble_u1(g, conn, &[])?)?.value;
    let sum = match exact_measure_phi(g, conn, &[], force) {
        Ok(t) => t.z,
        Err(OracleError::ZeroPartition) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(IdentityReport { determinant: det, enumeration: sum, rel_err: rel_err(det, sum) })
}

/// sqrt(det Delta_Phi) against the SU(2) CRSF sum with weights 2 - Tr.
pub fn check_su2_identity(
    g: &WeightedGraph,
    conn: &Su2Connection,
    force: bool,
) -> Result<IdentityReport, OracleError> {
    let det = det_laplacian(&assemble_su2(g, conn, &[])?)?.value;
    let z = det.sqrt();
    let sum = match exact_measure_su2(g, conn, &[], force) {
        Ok(t) => t.z,
        Err(OracleError::ZeroPartition) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(IdentityReport { determinant: z, enumeration: sum, rel_err: rel_err(z, sum) })
}

/// Total conductance between two vertices (summing parallel edges).
fn total_conductance(g: &WeightedGraph, u: VertexId, v: VertexId) -> f64 {
    g.adjacency(u).iter().filter(|&&e| g.head(e) == v).map(|&e| g.conductance(e)).sum()
}

/// Exact probability that the loop erasure of the conductance-biased walk
/// from path[0], absorbed at path[last], equals the given simple path:
/// product over i of c(v_i, v_{i+1}) * (Delta_{A_i})^{-1}(v_i, v_i) with
/// A_i = V minus the target and the already-walked prefix.
pub fn lerw_path_probability(g: &WeightedGraph, path: &[VertexId]) -> Result<f64, OracleError> {
    assert!(path.len() >= 2, "path must move");
    let y = *path.last().unwrap();
    let mut dirichlet = vec![y];
    let mut p = 1.0;
    for i in 0..path.len() - 1 {
        let green = green_function(g, &dirichlet)?;
        p *= total_conductance(g, path[i], path[i + 1]) * green[(path[i], path[i])];
        dirichlet.push(path[i]);
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct LerwCycleCheck {
    pub cycle_key: Vec<EdgeId>,
    /// Exact P(cycle) under the squared-lift CRST measure.
    pub p_exact: f64,
    /// The density formula: |E| kappa / Z * theta^2/|cycle| * P_LERW(cycle).
    pub rhs_exact: f64,
    /// P_LERW by exact walk-measure computation.
    pub p_lerw_exact: f64,
    /// Monte Carlo estimate of P_LERW and its deviation in sigmas.
    pub p_lerw_mc: f64,
    pub mc_sigmas: f64,
}

/// Checks the loop-erased-walk density formula for every cycle in the CRST
/// enumeration. Exact on the enumeration side; P_LERW is computed both
/// exactly and by Monte Carlo over `mc_samples` uniform oriented edges.
/// The |E|/|cycle| bookkeeping assumes unit conductances.
pub fn check_lerw_lemma(
    g: &WeightedGraph,
    conn: &U1Connection,
    mc_samples: u64,
    seed: u64,
    force: bool,
) -> Result<Vec<LerwCycleCheck>, OracleError> {
    let table = exact_measure_lc0(g, conn, force)?;
    let kappa = spanning_tree_count(g)?;
    let m2 = 2 * g.edge_count();
    // group CRSTs by their cycle
    let mut by_cycle: HashMap<Vec<EdgeId>, (Vec<OrientedEdge>, f64)> = HashMap::new();
    for (crsf, w) in &table.entries {
        let cyc = crsf.cycles(g).pop().expect("CRST has one cycle");
        let mut key: Vec<EdgeId> = cyc.iter().map(|e| e.edge).collect();
        key.sort_unstable();
        let slot = by_cycle.entry(key).or_insert_with(|| (cyc, 0.0));
        slot.1 += w;
    }
    // vertex sequence per cycle, as tails of the oriented representative
    let mut reports: Vec<LerwCycleCheck> = Vec::new();
    let mut pair_key_of: HashMap<Vec<(VertexId, VertexId)>, usize> = HashMap::new();
    for (key, (cyc, mass)) in by_cycle.iter() {
        let verts: Vec<VertexId> = cyc.iter().map(|&e| g.tail(e)).collect();
        let k = verts.len();
        let theta: f64 = cyc.iter().map(|&e| conn.angle(e)).sum();
        let mut p_lerw = 0.0;
        for i in 0..k {
            // oriented edge (v_i -> v_{i+1}): remainder runs backwards
            let mut back = vec![verts[i]];
            for d in 1..k {
                back.push(verts[(i + k - d) % k]);
            }
            p_lerw += lerw_path_probability(g, &back)?;
            // oriented edge (v_{i+1} -> v_i): remainder runs forwards
            let mut fwd = Vec::with_capacity(k);
            for d in 1..=k {
                fwd.push(verts[(i + d) % k]);
            }
            p_lerw += lerw_path_probability(g, &fwd)?;
        }
        p_lerw /= m2 as f64;
        let rhs = (g.edge_count() as f64) * kappa / table.z * theta * theta / k as f64 * p_lerw;
        let mut pairs: Vec<(VertexId, VertexId)> = cyc
            .iter()
            .map(|&e| {
                let (a, b) = (g.tail(e), g.head(e));
                (a.min(b), a.max(b))
            })
            .collect();
        pairs.sort_unstable();
        pair_key_of.insert(pairs, reports.len());
        reports.push(LerwCycleCheck {
            cycle_key: key.clone(),
            p_exact: mass / table.z,
            rhs_exact: rhs,
            p_lerw_exact: p_lerw,
            p_lerw_mc: 0.0,
            mc_sigmas: 0.0,
        });
    }
    // Monte Carlo pass
    if mc_samples > 0 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut hits = vec![0u64; reports.len()];
        for _ in 0..mc_samples {
            let o = OrientedEdge::from_index(rng.gen_range(0..m2));
            let (x, y) = (g.tail(o), g.head(o));
            let path = loop_erased_walk(g, x, &[y], 10_000_000, &mut rng)?;
            let mut pairs: Vec<(VertexId, VertexId)> = path
                .windows(2)
                .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
                .collect();
            pairs.push((x.min(y), x.max(y)));
            pairs.sort_unstable();
            pairs.dedup();
            // the loop erasure is simple, so pairs has one entry per step;
            // equality with a cycle's pair set means: chosen edge on the
            // cycle and the walk traced the remainder
            if pairs.len() == path.len() {
                if let Some(&i) = pair_key_of.get(&pairs) {
                    hits[i] += 1;
                }
            }
        }
        for (i, r) in reports.iter_mut().enumerate() {
            r.p_lerw_mc = hits[i] as f64 / mc_samples as f64;
            let sigma =
                (r.p_lerw_exact * (1.0 - r.p_lerw_exact) / mc_samples as f64).sqrt();
            r.mc_sigmas = if sigma > 0.0 {
                (r.p_lerw_mc - r.p_lerw_exact).abs() / sigma
            } else if r.p_lerw_mc == r.p_lerw_exact {
                0.0
            } else {
                f64::INFINITY
            };
        }
    }
    reports.sort_by(|a, b| a.cycle_key.cmp(&b.cycle_key));
    Ok(reports)
}

/// Uniform random connected multigraph for randomized identity checks:
/// 2..=max_v vertices, a random spanning tree plus extra edges (parallels
/// allowed, no self-loops), conductances in [0.5, 2].
pub fn random_connected_graph<R: Rng>(rng: &mut R, max_v: usize, max_e: usize) -> WeightedGraph {
    let n = rng.gen_range(2..=max_v);
    let mut edges: Vec<(VertexId, VertexId, f64)> = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.5..2.0)));
    }
    let extra = rng.gen_range(1..=max_e.saturating_sub(n - 1).max(1));
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        while b == a {
            b = rng.gen_range(0..n);
        }
        edges.push((a, b, rng.gen_range(0.5..2.0)));
    }
    WeightedGraph::build(n, &edges).expect("constructed edges are valid")
}

/// Random U(1) connection with angles uniform in [-spread, spread].
pub fn random_u1<R: Rng>(rng: &mut R, edge_count: usize, spread: f64) -> U1Connection {
    U1Connection::from_angles((0..edge_count).map(|_| rng.gen_range(-spread..spread)).collect())
}

/// Per-cycle containment probabilities of a table: P(the unoriented cycle
/// with this sorted edge-id set occurs as a cycle of Gamma).
fn cycle_containment(g: &WeightedGraph, table: &EnumerationTable) -> HashMap<Vec<EdgeId>, f64> {
    let mut mass: HashMap<Vec<EdgeId>, f64> = HashMap::new();
    for (crsf, w) in &table.entries {
        for cyc in crsf.cycles(g) {
            let mut key: Vec<EdgeId> = cyc.iter().map(|e| e.edge).collect();
            key.sort_unstable();
            *mass.entry(key).or_insert(0.0) += w;
        }
    }
    for v in mass.values_mut() {
        *v /= table.z;
    }
    mass
}

/// Spatial Markov property on the 3x3 annulus under the incompressible
/// measure. Conditionally on the middle-row circle being a cycle of the
/// sample, the configurations of the two sides are independent, each with
/// the law of a height-2 annulus with the circle row as Dirichlet boundary.
/// Returns the largest absolute probability discrepancy.
pub fn check_markov_annulus() -> Result<f64, OracleError> {
    use crate::surface::make_annulus_grid;
    let (g, surf) = make_annulus_grid(3, 3).expect("3x3 annulus is valid");
    let alpha = crate::sampler::alpha_inc(&surf)?;
    let table = exact_measure_c_alpha(&g, &alpha, &[], true)?;
    // middle-row circle: horizontal edges of row 1
    let circle = [6usize, 8, 10];
    let pair = |e: OrientedEdge| (g.tail(e), g.head(e));
    let mut cond: HashMap<Vec<(VertexId, VertexId)>, f64> = HashMap::new();
    let mut cond_z = 0.0;
    for (crsf, w) in &table.entries {
        let mut ids: Vec<EdgeId> = [3, 4, 5].iter().map(|&v| crsf.arc(v).unwrap().edge).collect();
        ids.sort_unstable();
        if ids != circle {
            continue;
        }
        let key: Vec<(VertexId, VertexId)> =
            [0usize, 1, 2, 6, 7, 8].iter().map(|&v| pair(crsf.arc(v).unwrap())).collect();
        *cond.entry(key).or_insert(0.0) += w;
        cond_z += w;
    }
    // each half is a height-2 annulus with Dirichlet on the circle row
    let (gh, surf_h) = make_annulus_grid(3, 2).expect("3x2 annulus is valid");
    let alpha_h = crate::sampler::alpha_inc(&surf_h)?;
    let bottom = exact_measure_c_alpha(&gh, &alpha_h, &[3, 4, 5], true)?;
    let top = exact_measure_c_alpha(&gh, &alpha_h, &[0, 1, 2], true)?;
    let pair_h = |e: OrientedEdge| (gh.tail(e), gh.head(e));
    let mut p_bottom: HashMap<Vec<(VertexId, VertexId)>, f64> = HashMap::new();
    for (crsf, w) in &bottom.entries {
        let key = [0usize, 1, 2].iter().map(|&v| pair_h(crsf.arc(v).unwrap())).collect();
        *p_bottom.entry(key).or_insert(0.0) += w / bottom.z;
    }
    // the top half maps onto big-graph rows 1 and 2 by shifting ids up by 3
    let mut p_top: HashMap<Vec<(VertexId, VertexId)>, f64> = HashMap::new();
    for (crsf, w) in &top.entries {
        let key = [3usize, 4, 5]
            .iter()
            .map(|&v| {
                let (t, h) = pair_h(crsf.arc(v).unwrap());
                (t + 3, h + 3)
            })
            .collect();
        *p_top.entry(key).or_insert(0.0) += w / top.z;
    }
    let mut worst = 0.0f64;
    let mut product_total = 0.0;
    for (key, mass) in &cond {
        let observed = mass / cond_z;
        let kb: Vec<_> = key[..3].to_vec();
        let kt: Vec<_> = key[3..].to_vec();
        let expected =
            p_bottom.get(&kb).copied().unwrap_or(0.0) * p_top.get(&kt).copied().unwrap_or(0.0);
        worst = worst.max((observed - expected).abs());
        product_total += expected;
    }
    // supports must coincide: the product mass seen on the conditional
    // support has to be the full product measure
    worst = worst.max((product_total - 1.0).abs());
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct DominationEntry {
    pub cycle_key: Vec<EdgeId>,
    pub p_small_boundary: f64,
    pub p_large_boundary: f64,
}

/// Boundary monotonicity on the 3x3 annulus under the incompressible
/// measure: for nested Dirichlet sets S1 = {0} inside S2 = rows 0 and 2,
/// every cycle avoiding S2 is at least as likely under the S1 measure.
pub fn check_domination() -> Result<Vec<DominationEntry>, OracleError> {
    use crate::surface::make_annulus_grid;
    let (g, surf) = make_annulus_grid(3, 3).expect("3x3 annulus is valid");
    let alpha = crate::sampler::alpha_inc(&surf)?;
    // two nested pairs: S2 both rims (only the middle circle survives), and
    // S2 the bottom row (circles and winding cycles in the top two rows)
    let pairs: [(&[VertexId], &[VertexId]); 2] =
        [(&[0], &[0, 1, 2, 6, 7, 8]), (&[0], &[0, 1, 2])];
    let mut entries = Vec::new();
    for (s1, s2) in pairs {
        let t1 = exact_measure_c_alpha(&g, &alpha, s1, true)?;
        let t2 = exact_measure_c_alpha(&g, &alpha, s2, true)?;
        let c1 = cycle_containment(&g, &t1);
        let c2 = cycle_containment(&g, &t2);
        entries.extend(c2.into_iter().map(|(key, p2)| DominationEntry {
            p_small_boundary: c1.get(&key).copied().unwrap_or(0.0),
            p_large_boundary: p2,
            cycle_key: key,
        }));
    }
    Ok(entries)
}

/// Oriented essential-CRSF counts on the wired n x m cylinder, indexed by
/// number of (necessarily winding) loops: depth-first arc assignment over
/// interior vertices with the super-vertex as Dirichlet root, pruning any
/// assignment that closes a contractible cycle (which includes doubled
/// edges, whose winding cancels). The unoriented count with k loops is the
/// oriented count divided by 2^k.
pub fn count_wired_cylinder_loops(n: usize, m: usize) -> Result<Vec<u64>, OracleError> {
    use crate::surface::make_wired_cylinder;
    let (g, surf) = make_wired_cylinder(n, m).expect("valid cylinder dimensions");
    let interior = n * m; // vertices 0..interior, super-vertex = interior
    let cross = |e: OrientedEdge| -> i32 {
        let c = surf.crossings(e);
        if c.is_empty() {
            0
        } else {
            c[0]
        }
    };

    struct Dfs<'a> {
        g: &'a WeightedGraph,
        interior: usize,
        arcs: Vec<Option<OrientedEdge>>,
        stamp: Vec<u64>,
        generation: u64,
        counts: Vec<u64>,
        cross: Vec<i32>, // per oriented-edge index
    }

    impl Dfs<'_> {
        /// None: closes a contractible cycle (invalid). Some(w): winding of
        /// the newly closed cycle, 0 meaning no cycle closed.
        fn probe(&mut self, v: VertexId, e: OrientedEdge) -> Option<i32> {
            self.generation += 1;
            let gen = self.generation;
            let mut w = self.g.head(e);
            let mut winding = self.cross[e.index()];
            self.stamp[v] = gen;
            while w != self.interior && w != v {
                if self.stamp[w] == gen {
                    return Some(0); // ran into an older closed cycle
                }
                self.stamp[w] = gen;
                match self.arcs[w] {
                    Some(a) => {
                        winding += self.cross[a.index()];
                        w = self.g.head(a);
                    }
                    None => return Some(0),
                }
            }
            if w == self.interior {
                return Some(0);
            }
            if winding == 0 {
                None
            } else {
                Some(winding)
            }
        }

        fn go(&mut self, v: VertexId, loops: usize) {
            if v == self.interior {
                if self.counts.len() <= loops {
                    self.counts.resize(loops + 1, 0);
                }
                self.counts[loops] += 1;
                return;
            }
            for i in 0..self.g.adjacency(v).len() {
                let e = self.g.adjacency(v)[i];
                match self.probe(v, e) {
                    None => continue,
                    Some(w) => {
                        self.arcs[v] = Some(e);
                        self.go(v + 1, loops + (w != 0) as usize);
                        self.arcs[v] = None;
                    }
                }
            }
        }
    }

    let crossings: Vec<i32> = (0..2 * g.edge_count())
        .map(|i| cross(OrientedEdge::from_index(i)))
        .collect();
    // parallelize over the first two interior vertices' arc choices
    let first: Vec<(OrientedEdge, OrientedEdge)> = {
        let mut pairs = Vec::new();
        for &e0 in g.adjacency(0) {
            for &e1 in g.adjacency(1.min(interior - 1)) {
                pairs.push((e0, e1));
                if interior < 2 {
                    break;
                }
            }
            if interior < 2 {
                break;
            }
        }
        pairs
    };
    let threads = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1);
    let mut totals: Vec<u64> = Vec::new();
    let chunk_results = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let g = &g;
            let crossings = &crossings;
            let first = &first;
            handles.push(scope.spawn(move || {
                let mut dfs = Dfs {
                    g,
                    interior,
                    arcs: vec![None; g.vertex_count()],
                    stamp: vec![0; g.vertex_count()],
                    generation: 0,
                    counts: Vec::new(),
                    cross: crossings.clone(),
                };
                let mut i = t;
                while i < first.len() {
                    let (e0, e1) = first[i];
                    i += threads;
                    let w0 = match dfs.probe(0, e0) {
                        None => continue,
                        Some(w) => w,
                    };
                    dfs.arcs[0] = Some(e0);
                    if interior < 2 {
                        dfs.go(1, (w0 != 0) as usize);
                        dfs.arcs[0] = None;
                        continue;
                    }
                    let w1 = match dfs.probe(1, e1) {
                        None => {
                            dfs.arcs[0] = None;
                            continue;
                        }
                        Some(w) => w,
                    };
                    dfs.arcs[1] = Some(e1);
                    dfs.go(2, (w0 != 0) as usize + (w1 != 0) as usize);
                    dfs.arcs[1] = None;
                    dfs.arcs[0] = None;
                }
                dfs.counts
            }));
        }
        handles.into_iter().map(|h| h.join().expect("count thread panicked")).collect::<Vec<_>>()
    });
    for counts in chunk_results {
        if totals.len() < counts.len() {
            totals.resize(counts.len(), 0);
        }
        for (k, c) in counts.into_iter().enumerate() {
            totals[k] += c;
        }
    }
    Ok(totals)
}

/// Unoriented loop-count distribution on the wired cylinder from the
/// brute-force oriented counts.
pub fn wired_cylinder_loop_distribution(n: usize, m: usize) -> Result<Vec<f64>, OracleError> {
    let oriented = count_wired_cylinder_loops(n, m)?;
    let unoriented: Vec<f64> =
        oriented.iter().enumerate().map(|(k, &c)| c as f64 / (1u64 << k) as f64).collect();
    let total: f64 = unoriented.iter().sum();
    if total <= 0.0 {
        return Err(OracleError::ZeroPartition);
    }
    Ok(unoriented.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct RestrictionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

fn det_or_one(
    g: &WeightedGraph,
    conn: &U1Connection,
    dirichlet: &[VertexId],
) -> Result<f64, OracleError> {
    if dirichlet.len() == g.vertex_count() {
        return Ok(1.0); // empty matrix: det of nothing
    }
    Ok(det_laplacian(&assemble_u1(g, conn, dirichlet)?)?.value)
}

/// Restriction identity between a domain and a subdomain containing a fixed
/// cycle gamma: the ratio of containment probabilities under the two
/// connection measures equals a four-determinant ratio, because
/// P(gamma in Gamma) = w_gamma det Delta_gamma / det Delta on either domain
/// and the cycle weight w_gamma is shared.
///
/// `sub_vertices` induces the subdomain; `gamma_sub` lists its cycle's edge
/// ids in subdomain numbering.
pub fn check_restriction(
    g: &WeightedGraph,
    conn: &U1Connection,
    sub_vertices: &[VertexId],
    gamma_sub: &[EdgeId],
    force: bool,
) -> Result<RestrictionReport, OracleError> {
    // induced subgraph, preserving the connection edge by edge
    let mut small_of = vec![usize::MAX; g.vertex_count()];
    for (i, &v) in sub_vertices.iter().enumerate() {
        small_of[v] = i;
    }
    let mut sub_edges = Vec::new();
    let mut sub_angles = Vec::new();
    let mut big_edge_of = Vec::new();
    for (id, d) in g.edges().iter().enumerate() {
        let (sa, sb) = (small_of[d.a], small_of[d.b]);
        if sa != usize::MAX && sb != usize::MAX {
            sub_edges.push((sa, sb, d.conductance));
            sub_angles.push(conn.forward_angle(id));
            big_edge_of.push(id);
        }
    }
    let g1 = WeightedGraph::build(sub_vertices.len(), &sub_edges).expect("induced subgraph");
    let conn1 = U1Connection::from_angles(sub_angles);
    let mut gamma_big: Vec<EdgeId> = gamma_sub.iter().map(|&e| big_edge_of[e]).collect();
    gamma_big.sort_unstable();
    let mut gamma_small = gamma_sub.to_vec();
    gamma_small.sort_unstable();
    let gamma_vertices_big: Vec<VertexId> = {
        let mut vs: Vec<VertexId> = gamma_big
            .iter()
            .flat_map(|&e| [g.edge(e).a, g.edge(e).b])
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    };
    let gamma_vertices_small: Vec<VertexId> =
        gamma_vertices_big.iter().map(|&v| small_of[v]).collect();
    // enumeration side
    let t_big = exact_measure_phi(g, conn, &[], force)?;
    let t_small = exact_measure_phi(&g1, &conn1, &[], force)?;
    let contain = |g: &WeightedGraph, t: &EnumerationTable, gamma: &[EdgeId]| {
        let mut mass = 0.0;
        for (crsf, w) in &t.entries {
            let has = crsf.cycles(g).iter().any(|cyc| {
                let mut key: Vec<EdgeId> = cyc.iter().map(|e| e.edge).collect();
                key.sort_unstable();
                key == gamma
            });
            if has {
                mass += w;
            }
        }
        mass / t.z
    };
    let p_big = contain(g, &t_big, &gamma_big);
    let p_small = contain(&g1, &t_small, &gamma_small);
    let lhs = p_small / p_big;
    // determinant side
    let det_big = det_or_one(g, conn, &[])?;
    let det_big_gamma = det_or_one(g, conn, &gamma_vertices_big)?;
    let det_small = det_or_one(&g1, &conn1, &[])?;
    let det_small_gamma = det_or_one(&g1, &conn1, &gamma_vertices_small)?;
    let rhs = (det_big / det_big_gamma) / (det_small / det_small_gamma);
    Ok(RestrictionReport { lhs, rhs, rel_err: rel_err(lhs, rhs) })
}
