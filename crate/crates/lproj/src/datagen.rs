//! Synthetic dataset generators: Packing, MaxFlow, MinCostFlow, and a
//! Netlib-style objective perturbation with outliers.
//!
//! All randomness flows from `GenConfig::seed` through ChaCha streams, so a
//! seed reproduces a dataset bit-exactly. Graph datasets share one
//! constraint matrix across instances (only right-hand sides or objectives
//! move), which enables the min-rhs fast path of the final projection.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::densela::DenseMatrix;
use crate::error::Result;
use crate::lp::LpInstance;
use crate::reform::{remove_equalities, GeneralLp, Reformulation};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub count: usize,
    pub noise_level: f64,
    pub outlier_fraction: f64,
    pub outlier_scale: f64,
    /// Draw an independent noise factor per parameter entry instead of one
    /// shared factor per instance.
    pub per_entry_noise: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 300,
            noise_level: 0.1,
            outlier_fraction: 0.0,
            outlier_scale: 10.0,
            per_entry_noise: false,
        }
    }
}

impl GenConfig {
    fn check(&self) {
        assert!(self.noise_level >= 0.0);
        assert!((0.0..=1.0).contains(&self.outlier_fraction));
        assert!(self.count >= 1);
    }
}

/// An in-memory dataset; persisted through `mpsio::write_dataset`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub train: Vec<LpInstance>,
    pub test: Vec<LpInstance>,
    pub identical_a: bool,
}

impl Dataset {
    fn split(name: &str, instances: Vec<LpInstance>, identical_a: bool) -> Self {
        let train_count = instances.len() * 2 / 3;
        let mut train = instances;
        let test = train.split_off(train_count);
        Dataset { name: name.to_string(), train, test, identical_a }
    }

    pub fn all(&self) -> impl Iterator<Item = &LpInstance> {
        self.train.iter().chain(self.test.iter())
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

/// Packing LPs: non-negative `c`, `A`, `b` uniform on [0,1] with `b` scaled
/// by `n`; every parameter of the base then multiplied by `1 + omega` with
/// `omega` uniform on `[0, noise_level]` (one draw per instance by default).
///
/// The packing structure presupposes `x >= 0`; since the internal form has
/// free variables, the non-negativity appears as `n` extra `-x_j <= 0` rows
/// below the `m` random rows (without them the LP is unbounded almost
/// surely: the dual system has only `m < n` unknowns).
pub fn gen_packing(m: usize, n: usize, cfg: &GenConfig) -> Dataset {
    cfg.check();
    assert!(m >= 1 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base_c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut base_a = DenseMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            base_a.set(i, j, rng.gen_range(0.0..1.0));
        }
    }
    let base_b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0) * n as f64).collect();

    let assemble = |c: Vec<f64>, top: DenseMatrix, mut b: Vec<f64>, id: String| {
        let mut neg = DenseMatrix::zeros(n, n);
        for j in 0..n {
            neg.set(j, j, -1.0);
        }
        let a = top.vstack(&neg);
        b.extend(std::iter::repeat(0.0).take(n));
        LpInstance::new(c, a, b, id)
    };

    let mut instances = Vec::with_capacity(cfg.count);
    for idx in 0..cfg.count {
        let mut irng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5061636b ^ (idx as u64) << 8);
        let mut factor = || 1.0 + irng.gen_range(0.0..=cfg.noise_level);
        let id = format!("packing-{idx:04}");
        if cfg.per_entry_noise {
            let c: Vec<f64> = base_c.iter().map(|v| v * factor()).collect();
            let mut a = DenseMatrix::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    a.set(i, j, base_a.get(i, j) * factor());
                }
            }
            let b: Vec<f64> = base_b.iter().map(|v| v * factor()).collect();
            instances.push(assemble(c, a, b, id));
        } else {
            let f = factor();
            let c: Vec<f64> = base_c.iter().map(|v| v * f).collect();
            let a = base_a.scale(f);
            let b: Vec<f64> = base_b.iter().map(|v| v * f).collect();
            instances.push(assemble(c, a, b, id));
        }
    }
    Dataset::split("packing", instances, false)
}

// ---------------------------------------------------------------------------
// Flow graphs
// ---------------------------------------------------------------------------

struct Graph {
    num_vertices: usize,
    /// (from, to); arcs[0] is the guaranteed s -> t arc.
    arcs: Vec<(usize, usize)>,
}

impl Graph {
    fn source(&self) -> usize {
        0
    }

    fn sink(&self) -> usize {
        self.num_vertices - 1
    }
}

fn random_graph(num_vertices: usize, num_arcs: usize, rng: &mut impl Rng) -> Graph {
    assert!(num_vertices >= 2);
    assert!(num_arcs <= num_vertices * (num_vertices - 1));
    let s = 0;
    let t = num_vertices - 1;
    let mut seen = std::collections::HashSet::new();
    let mut arcs = vec![(s, t)];
    seen.insert((s, t));
    while arcs.len() < num_arcs {
        let from = rng.gen_range(0..num_vertices);
        let to = rng.gen_range(0..num_vertices);
        if from != to && seen.insert((from, to)) {
            arcs.push((from, to));
        }
    }
    Graph { num_vertices, arcs }
}

/// Flow-conservation rows `out - in = rhs` for the listed vertices.
fn conservation_rows(g: &Graph, vertices: &[usize], rhs: &[f64]) -> (DenseMatrix, Vec<f64>) {
    let mut a = DenseMatrix::zeros(vertices.len(), g.arcs.len());
    for (r, &v) in vertices.iter().enumerate() {
        for (j, &(from, to)) in g.arcs.iter().enumerate() {
            if from == v {
                a.set(r, j, 1.0);
            } else if to == v {
                a.set(r, j, -1.0);
            }
        }
    }
    (a, rhs.to_vec())
}

fn maxflow_general(g: &Graph, caps: &[f64]) -> GeneralLp {
    let s = g.source();
    let t = g.sink();
    let interior: Vec<usize> = (0..g.num_vertices).filter(|&v| v != s && v != t).collect();
    let (a_eq, b_eq) = conservation_rows(g, &interior, &vec![0.0; interior.len()]);
    // objective: net flow out of s
    let mut w = vec![0.0; g.arcs.len()];
    for (j, &(from, to)) in g.arcs.iter().enumerate() {
        if from == s {
            w[j] += 1.0;
        }
        if to == s {
            w[j] -= 1.0;
        }
    }
    GeneralLp {
        w,
        a_ineq: DenseMatrix::zeros(0, g.arcs.len()),
        b_ineq: vec![],
        a_eq,
        b_eq,
        bounds: caps.iter().map(|&c| (0.0, c)).collect(),
        id: "maxflow-base".into(),
    }
}

fn mincostflow_general(g: &Graph, costs: &[f64], caps: &[f64]) -> GeneralLp {
    let s = g.source();
    let t = g.sink();
    let vertices: Vec<usize> = (0..g.num_vertices).collect();
    let rhs: Vec<f64> = vertices
        .iter()
        .map(|&v| {
            if v == s {
                1.0
            } else if v == t {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let (a_eq, b_eq) = conservation_rows(g, &vertices, &rhs);
    GeneralLp {
        w: costs.iter().map(|c| -c).collect(),
        a_ineq: DenseMatrix::zeros(0, g.arcs.len()),
        b_ineq: vec![],
        a_eq,
        b_eq,
        bounds: caps.iter().map(|&c| (0.0, c)).collect(),
        id: "mincostflow-base".into(),
    }
}

/// Rebuild the inequality-form right-hand side of a bounds-only flow LP
/// after the anchor shift: rows alternate upper bound then lower bound per
/// arc, mirroring `fold_bounds`.
fn flow_rhs(caps: &[f64], x0: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(2 * caps.len());
    for (j, &cap) in caps.iter().enumerate() {
        b.push(cap - x0[j]);
        b.push(x0[j]);
    }
    b
}

const FLOW_VERTICES: usize = 50;
const FLOW_ARCS: usize = 500;

fn gen_maxflow_sized(
    num_vertices: usize,
    num_arcs: usize,
    cfg: &GenConfig,
) -> Result<(Dataset, Reformulation)> {
    cfg.check();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = random_graph(num_vertices, num_arcs, &mut rng);
    let base_caps = vec![1.0; num_arcs];
    let general = maxflow_general(&g, &base_caps);
    let x0 = vec![0.0; num_arcs];
    let reform = remove_equalities(&general, &x0)?;

    let mut instances = Vec::with_capacity(cfg.count);
    for idx in 0..cfg.count {
        let mut irng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4d617846 ^ (idx as u64) << 8);
        let mut factor = || 1.0 + irng.gen_range(0.0..=cfg.noise_level);
        let caps: Vec<f64> = if cfg.per_entry_noise {
            base_caps.iter().map(|c| c * factor()).collect()
        } else {
            let f = factor();
            base_caps.iter().map(|c| c * f).collect()
        };
        let mut inst = reform.instance.clone();
        inst.b = flow_rhs(&caps, &x0);
        inst.id = format!("maxflow-{idx:04}");
        instances.push(inst);
    }
    Ok((Dataset::split("maxflow", instances, true), reform))
}

/// MaxFlow dataset: 50 vertices, 500 arcs, unit base capacities perturbed
/// per instance, conservation equalities removed around the zero flow.
pub fn gen_maxflow(cfg: &GenConfig) -> Result<Dataset> {
    gen_maxflow_sized(FLOW_VERTICES, FLOW_ARCS, cfg).map(|(d, _)| d)
}

fn gen_mincostflow_sized(
    num_vertices: usize,
    num_arcs: usize,
    cfg: &GenConfig,
) -> Result<(Dataset, Reformulation)> {
    cfg.check();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = random_graph(num_vertices, num_arcs, &mut rng);
    let big_m = 10.0 * num_arcs as f64;
    let mut base_costs = vec![1.0; num_arcs];
    base_costs[0] = big_m; // the s -> t arc
    let caps = vec![1.0; num_arcs];
    let general = mincostflow_general(&g, &base_costs, &caps);
    // unit flow on the s -> t arc satisfies the supply/demand equalities
    let mut x0 = vec![0.0; num_arcs];
    x0[0] = 1.0;
    let reform = remove_equalities(&general, &x0)?;

    let mut instances = Vec::with_capacity(cfg.count);
    for idx in 0..cfg.count {
        let mut irng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4d43466c ^ (idx as u64) << 8);
        let mut factor = || 1.0 + irng.gen_range(0.0..=cfg.noise_level);
        let costs: Vec<f64> = if cfg.per_entry_noise {
            base_costs.iter().map(|c| c * factor()).collect()
        } else {
            let f = factor();
            base_costs.iter().map(|c| c * f).collect()
        };
        let w: Vec<f64> = costs.iter().map(|c| -c).collect();
        let mut inst = reform.instance.clone();
        inst.c = reform.projector.matvec_t(&w);
        inst.id = format!("mincostflow-{idx:04}");
        instances.push(inst);
    }
    Ok((Dataset::split("mincostflow", instances, true), reform))
}

/// MinCostFlow dataset: same graph scheme, unit supply at `s` and demand at
/// `t`, base costs 1 except a large cost on the guaranteed `s -> t` arc;
/// costs perturbed per instance, equalities removed around the unit flow on
/// that arc. The anchor offset makes reduced optima non-negative.
pub fn gen_mincostflow(cfg: &GenConfig) -> Result<Dataset> {
    gen_mincostflow_sized(FLOW_VERTICES, FLOW_ARCS, cfg).map(|(d, _)| d)
}

// ---------------------------------------------------------------------------
// Netlib-style perturbation
// ---------------------------------------------------------------------------

/// Perturb only the objective of `g`: outlier instances multiply each entry
/// by `1 + noise_level * outlier_scale * omega`, others by
/// `1 + noise_level * omega`, with `omega` standard normal. Outlier status
/// is a deterministic function of the seed so a fraction `f` over `count`
/// instances yields exactly `floor(f * count)` outliers.
pub fn perturb_objective_netlib(g: &GeneralLp, cfg: &GenConfig, index: usize) -> GeneralLp {
    cfg.check();
    assert!(index < cfg.count);
    let num_outliers = (cfg.outlier_fraction * cfg.count as f64).floor() as usize;
    let mut order: Vec<usize> = (0..cfg.count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4f75746c));
    let is_outlier = order[..num_outliers].contains(&index);

    let scale = if is_outlier {
        cfg.noise_level * cfg.outlier_scale
    } else {
        cfg.noise_level
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4e65746c ^ (index as u64) << 8);
    let mut out = g.clone();
    out.w = g
        .w
        .iter()
        .map(|v| v * (1.0 + scale * standard_normal(&mut rng)))
        .collect();
    out.id = format!("{}-{index:04}", g.id);
    out
}
