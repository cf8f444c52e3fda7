//! The generalized Wilson cycle-popping sampler.
//!
//! Repeatedly runs a conductance-biased walk from the lowest-id vertex not
//! yet in the forest. At the first self-intersection the closed cycle is
//! kept with probability alpha(cycle) and frozen, or popped (erased) and the
//! walk resumes from the intersection vertex. Walks also stop on hitting the
//! frozen part or the Dirichlet set. The output is an exact sample of the
//! CRSF measure with weight prod c(e) * prod alpha(cycle).

use crate::connection::U1Connection;
use crate::graph::{OrientedCrsf, OrientedEdge, VertexId, WeightedGraph};
use crate::surface::SurfaceModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum SamplerError {
    #[error("step cap exceeded after {0} steps (is some alpha positive, or a Dirichlet set given?)")]
    StepCapExceeded(u64),
    #[error("single-loop conditioning failed after {0} retries")]
    RetryCapExceeded(u32),
    #[error("cycle weight {value} outside [0,1] for measure {tag}: curvature condition violated (cycle lift {theta})")]
    AlphaOutOfRange { tag: String, value: f64, theta: f64 },
    #[error("vertex {0} has no outgoing edge")]
    DeadEnd(VertexId),
    #[error("surface carries no homology/winding metadata")]
    NoHomologyMetadata,
}

/// Keep-probability function on oriented simple cycles, tagged by the
/// measure it realizes. Values outside [0,1] abort sampling (this is how
/// the curvature condition failure surfaces) rather than being clamped.
#[derive(Clone)]
pub struct CycleWeightFn {
    tag: String,
    f: Arc<dyn Fn(&WeightedGraph, &[OrientedEdge]) -> (f64, f64) + Send + Sync>,
}

impl CycleWeightFn {
    /// Wraps a raw weight function returning (alpha, diagnostic lift).
    pub fn new(
        tag: impl Into<String>,
        f: impl Fn(&WeightedGraph, &[OrientedEdge]) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        CycleWeightFn { tag: tag.into(), f: Arc::new(f) }
    }

    pub fn constant(alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "constant alpha must lie in [0,1]");
        CycleWeightFn::new(format!("const({alpha})"), move |_, _| (alpha, 0.0))
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn eval(&self, g: &WeightedGraph, cycle: &[OrientedEdge]) -> Result<f64, SamplerError> {
        let (value, theta) = (self.f)(g, cycle);
        if !(0.0..=1.0).contains(&value) {
            return Err(SamplerError::AlphaOutOfRange { tag: self.tag.clone(), value, theta });
        }
        Ok(value)
    }
}

/// Uniform incompressible target: alpha = 0 on contractible cycles and 1/2
/// on the rest, so that discarding the orientation yields the uniform
/// unoriented incompressible CRSF.
pub fn alpha_inc(surf: &SurfaceModel) -> Result<CycleWeightFn, SamplerError> {
    if surf.cut_count == 0 {
        return Err(SamplerError::NoHomologyMetadata);
    }
    let surf = surf.clone();
    Ok(CycleWeightFn::new("inc", move |_, cycle| {
        if surf.is_contractible(cycle) {
            (0.0, 0.0)
        } else {
            (0.5, 0.0)
        }
    }))
}

/// Connection target with unoriented cycle weight 2 - 2 cos(theta): alpha is
/// half of that. Only samplable when every encountered lift keeps
/// 1 - cos(theta) inside [0,1]; violations abort with the offending lift.
pub fn alpha_lc(conn: &U1Connection) -> CycleWeightFn {
    let conn = conn.clone();
    CycleWeightFn::new("lc", move |_, cycle| {
        let theta: f64 = cycle.iter().map(|&e| conn.angle(e)).sum();
        (1.0 - theta.cos(), theta)
    })
}

/// Squared-lift target alpha = eps * theta^2, meant to be combined with
/// single-loop conditioning; the conditional law tends to the
/// squared-curvature CRST measure as eps -> 0.
pub fn alpha_lc0(conn: &U1Connection, eps: f64) -> CycleWeightFn {
    assert!(eps > 0.0, "eps must be positive");
    let conn = conn.clone();
    CycleWeightFn::new(format!("lc0({eps})"), move |_, cycle| {
        let theta: f64 = cycle.iter().map(|&e| conn.angle(e)).sum();
        (eps * theta * theta, theta)
    })
}

/// Advisory check for the connection target: single faces enclosing
/// curvature at or beyond pi/2 make cycles with out-of-range weights likely.
pub fn lc_curvature_warning(surf: &SurfaceModel) -> Option<String> {
    let max_face = surf.face_curvature.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let total: f64 = surf.face_curvature.iter().map(|c| c.abs()).sum();
    if max_face >= std::f64::consts::FRAC_PI_2 {
        Some(format!("a single face encloses curvature {max_face:.3} >= pi/2; sampling will abort on such a cycle"))
    } else if total >= std::f64::consts::FRAC_PI_2 {
        Some(format!("total |curvature| {total:.3} >= pi/2; cycles may violate the curvature condition"))
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub seed: u64,
    pub max_steps: u64,
    pub dirichlet: Vec<VertexId>,
    /// Discard the cycle orientations (canonicalize) in the output.
    pub unoriented: bool,
    pub condition_single_loop: bool,
    pub retry_cap: u32,
    /// Sweep vertices in descending id order instead of ascending; the
    /// sampled law is order-independent (tested), this exists to check that.
    pub sweep_descending: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            max_steps: 100_000_000,
            dirichlet: Vec::new(),
            unoriented: false,
            condition_single_loop: false,
            retry_cap: 1_000_000,
            sweep_descending: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub crsf: OrientedCrsf,
    /// Whole-sample retries spent on single-loop conditioning.
    pub retries: u32,
    pub steps: u64,
}

/// Reusable sampler holding per-walk scratch state.
pub struct CrsfSampler<'a> {
    g: &'a WeightedGraph,
    alpha: CycleWeightFn,
    cfg: SamplerConfig,
    stamp: Vec<u64>,
    generation: u64,
    vpos: Vec<usize>,
    cur_arc: Vec<OrientedEdge>,
    path: Vec<VertexId>,
    in_forest: Vec<bool>,
    next: Vec<Option<OrientedEdge>>,
}

impl<'a> CrsfSampler<'a> {
    pub fn new(g: &'a WeightedGraph, alpha: CycleWeightFn, cfg: SamplerConfig) -> Self {
        let n = g.vertex_count();
        CrsfSampler {
            g,
            alpha,
            cfg,
            stamp: vec![0; n],
            generation: 0,
            vpos: vec![0; n],
            cur_arc: vec![OrientedEdge::forward(0); n],
            path: Vec::with_capacity(n),
            in_forest: vec![false; n],
            next: vec![None; n],
        }
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Draws one sample with the given RNG, honoring single-loop
    /// conditioning by whole-sample retries.
    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> Result<SampleOutput, SamplerError> {
        let mut retries = 0u32;
        loop {
            let steps = self.sample_once(rng)?;
            let mut crsf = OrientedCrsf::from_arcs(self.next.clone());
            if self.cfg.condition_single_loop && crsf.cycles(self.g).len() != 1 {
                retries += 1;
                if retries > self.cfg.retry_cap {
                    return Err(SamplerError::RetryCapExceeded(retries - 1));
                }
                continue;
            }
            if self.cfg.unoriented {
                crsf.canonicalize_orientations(self.g);
            }
            return Ok(SampleOutput { crsf, retries, steps });
        }
    }

    fn sample_once<R: Rng>(&mut self, rng: &mut R) -> Result<u64, SamplerError> {
        let n = self.g.vertex_count();
        self.in_forest.iter_mut().for_each(|b| *b = false);
        self.next.iter_mut().for_each(|a| *a = None);
        for &s in &self.cfg.dirichlet {
            self.in_forest[s] = true;
        }
        let mut steps = 0u64;
        let order: Box<dyn Iterator<Item = usize>> = if self.cfg.sweep_descending {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        };
        for start in order {
            if self.in_forest[start] {
                continue;
            }
            self.walk_from(start, rng, &mut steps)?;
        }
        Ok(steps)
    }

    /// One run of the walk procedure: walk until hitting the frozen part or
    /// closing a kept cycle; popped cycles are erased in place.
    fn walk_from<R: Rng>(
        &mut self,
        start: VertexId,
        rng: &mut R,
        steps: &mut u64,
    ) -> Result<(), SamplerError> {
        self.generation += 1;
        let generation = self.generation;
        self.path.clear();
        self.stamp[start] = generation;
        self.vpos[start] = 0;
        self.path.push(start);
        loop {
            let u = *self.path.last().unwrap();
            *steps += 1;
            if *steps > self.cfg.max_steps {
                return Err(SamplerError::StepCapExceeded(*steps));
            }
            let e = self.pick_edge(u, rng)?;
            self.cur_arc[u] = e;
            let w = self.g.head(e);
            if self.in_forest[w] {
                break;
            }
            if self.stamp[w] == generation {
                let p = self.vpos[w];
                let len = self.path.len() - p;
                // a doubled edge (walk backtracking over the same edge) is
                // not a simple cycle: always popped
                let doubled = len == 2 && e.edge == self.cur_arc[w].edge;
                if !doubled {
                    let cycle: Vec<OrientedEdge> =
                        self.path[p..].iter().map(|&x| self.cur_arc[x]).collect();
                    let a = self.alpha.eval(self.g, &cycle)?;
                    if a > 0.0 && rng.gen::<f64>() < a {
                        break; // keep: freeze the whole walk including the cycle
                    }
                }
                // pop: erase the cycle, resume from w
                for &x in &self.path[p + 1..] {
                    self.stamp[x] = 0;
                }
                self.path.truncate(p + 1);
            } else {
                self.stamp[w] = generation;
                self.vpos[w] = self.path.len();
                self.path.push(w);
            }
        }
        for &x in &self.path {
            self.next[x] = Some(self.cur_arc[x]);
            self.in_forest[x] = true;
        }
        Ok(())
    }

    fn pick_edge<R: Rng>(&self, u: VertexId, rng: &mut R) -> Result<OrientedEdge, SamplerError> {
        let adj = self.g.adjacency(u);
        if adj.is_empty() {
            return Err(SamplerError::DeadEnd(u));
        }
        let mut r = rng.gen::<f64>() * self.g.weighted_degree(u);
        for &e in adj {
            r -= self.g.conductance(e);
            if r < 0.0 {
                return Ok(e);
            }
        }
        Ok(*adj.last().unwrap())
    }
}

/// One-shot sampling with the config's seed.
pub fn sample_crsf(
    g: &WeightedGraph,
    alpha: &CycleWeightFn,
    cfg: &SamplerConfig,
) -> Result<SampleOutput, SamplerError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    CrsfSampler::new(g, alpha.clone(), cfg.clone()).sample(&mut rng)
}

/// Deterministic parallel fan-out: sample i uses the base seed with RNG
/// stream i+1, so the output is byte-identical for a fixed seed regardless
/// of thread count. Results are returned in sample-id order.
pub fn sample_many(
    g: &WeightedGraph,
    alpha: &CycleWeightFn,
    cfg: &SamplerConfig,
    count: usize,
    threads: usize,
) -> Result<Vec<SampleOutput>, SamplerError> {
    let threads = threads.max(1);
    let mut results: Vec<Option<Result<SampleOutput, SamplerError>>> = vec![None; count];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let alpha = alpha.clone();
            let cfg = cfg.clone();
            handles.push(scope.spawn(move || {
                let mut sampler = CrsfSampler::new(g, alpha, cfg.clone());
                let mut out = Vec::new();
                let mut i = t;
                while i < count {
                    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(i as u64 + 1);
                    out.push((i, sampler.sample(&mut rng)));
                    i += threads;
                }
                out
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("sampler thread panicked") {
                results[i] = Some(r);
            }
        }
    });
    results.into_iter().map(|r| r.expect("all sample ids filled")).collect()
}

/// Loop erasure of a conductance-biased walk from `start` run until it hits
/// `absorbing`; returns the vertex sequence including both endpoints. This
/// is the alpha = 0 degenerate case of the walk procedure.
pub fn loop_erased_walk<R: Rng>(
    g: &WeightedGraph,
    start: VertexId,
    absorbing: &[VertexId],
    max_steps: u64,
    rng: &mut R,
) -> Result<Vec<VertexId>, SamplerError> {
    let mut is_absorbing = vec![false; g.vertex_count()];
    for &v in absorbing {
        is_absorbing[v] = true;
    }
    if is_absorbing[start] {
        return Ok(vec![start]);
    }
    let mut pos = vec![usize::MAX; g.vertex_count()];
    let mut path = vec![start];
    pos[start] = 0;
    let mut steps = 0u64;
    loop {
        let u = *path.last().unwrap();
        steps += 1;
        if steps > max_steps {
            return Err(SamplerError::StepCapExceeded(steps));
        }
        let adj = g.adjacency(u);
        if adj.is_empty() {
            return Err(SamplerError::DeadEnd(u));
        }
        let mut r = rng.gen::<f64>() * g.weighted_degree(u);
        let mut chosen = *adj.last().unwrap();
        for &e in adj {
            r -= g.conductance(e);
            if r < 0.0 {
                chosen = e;
                break;
            }
        }
        let w = g.head(chosen);
        if is_absorbing[w] {
            path.push(w);
            return Ok(path);
        }
        if pos[w] != usize::MAX {
            for &x in &path[pos[w] + 1..] {
                pos[x] = usize::MAX;
            }
            path.truncate(pos[w] + 1);
        } else {
            pos[w] = path.len();
            path.push(w);
        }
    }
}
