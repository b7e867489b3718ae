//! Benchmark orchestration: train projection matrices, evaluate them on
//! held-out instances against the full-size solve, and emit CSV rows.
//!
//! CSV schema (stable): `dataset,method,k,instance_id,objective,ratio,
//! solve_time_ms,feasible,seed`. The `k` column is blank for full solves,
//! `seed` is blank except for colrand rows; colrand additionally emits
//! `mean` / `std` summary pseudo-instances aggregating over its seeds.
//! Timing wraps only the solve call, never training.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learn::{
    final_projection, learn_colrand, learn_pca, learn_sga, SgaConfig, TrainingSet,
};
use crate::lp::{check_feasible, solve_lp, LpInstance, SolveStatus, SolverConfig};
use crate::mpsio::{read_instances, read_manifest, DatasetManifest};
use crate::polyproj::ProjectionConfig;
use crate::project::{
    build_projected, objective_ratio, ProjectionMatrix, DEFAULT_RATIO_GUARD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Full,
    Colrand,
    Pca,
    Sga,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Colrand => "colrand",
            Method::Pca => "pca",
            Method::Sga => "sga",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "full" => Ok(Method::Full),
            "colrand" => Ok(Method::Colrand),
            "pca" => Ok(Method::Pca),
            "sga" => Ok(Method::Sga),
            other => Err(Error::ConfigError(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRecord {
    pub dataset: String,
    pub method: String,
    pub k: Option<usize>,
    pub instance_id: String,
    pub objective: f64,
    pub ratio: Option<f64>,
    pub solve_time_ms: f64,
    pub feasible: bool,
    pub seed: Option<u64>,
}

impl BenchmarkRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.method,
            self.k.map_or(String::new(), |k| k.to_string()),
            self.instance_id,
            self.objective,
            self.ratio.map_or(String::new(), |r| r.to_string()),
            self.solve_time_ms,
            self.feasible,
            self.seed.map_or(String::new(), |s| s.to_string()),
        )
    }
}

pub const CSV_HEADER: &str =
    "dataset,method,k,instance_id,objective,ratio,solve_time_ms,feasible,seed";

pub fn write_csv(records: &[BenchmarkRecord], path: &Path) -> Result<()> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Default schedule: multiples of `n/100` up to `n/10`.
pub fn default_k_schedule(n: usize) -> Vec<usize> {
    let step = n / 100;
    if step == 0 {
        return vec![1.min(n)];
    }
    (1..)
        .map(|j| j * step)
        .take_while(|k| *k <= n / 10)
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Defaults to `default_k_schedule` when empty.
    pub k_schedule: Vec<usize>,
    pub colrand_seeds: Vec<u64>,
    pub sga: SgaConfig,
    pub solver: SolverConfig,
    pub projection: ProjectionConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k_schedule: vec![],
            colrand_seeds: (0..10).collect(),
            sga: SgaConfig::default(),
            solver: SolverConfig::default(),
            projection: ProjectionConfig::default(),
        }
    }
}

struct FullBaseline {
    objectives: HashMap<String, f64>,
    records: Vec<BenchmarkRecord>,
}

fn solve_full(
    manifest: &DatasetManifest,
    test: &[LpInstance],
    cfg: &BenchConfig,
) -> Result<FullBaseline> {
    let mut objectives = HashMap::new();
    let mut records = Vec::new();
    for inst in test {
        let t0 = Instant::now();
        let sol = solve_lp(inst, &cfg.solver)?;
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        if sol.status != SolveStatus::Optimal {
            return Err(Error::NumericalFailure(format!(
                "full solve of '{}' returned {:?}",
                inst.id, sol.status
            )));
        }
        let obj = sol.objective.unwrap();
        objectives.insert(inst.id.clone(), obj);
        records.push(BenchmarkRecord {
            dataset: manifest.name.clone(),
            method: "full".into(),
            k: None,
            instance_id: inst.id.clone(),
            objective: obj,
            ratio: Some(1.0),
            solve_time_ms: ms,
            feasible: true,
            seed: None,
        });
    }
    Ok(FullBaseline { objectives, records })
}

/// Evaluate one projection matrix on one instance: solve the reduced LP,
/// recover, and score against the full optimum.
pub fn evaluate_record(
    dataset: &str,
    inst: &LpInstance,
    pm: &ProjectionMatrix,
    full_objective: f64,
    seed: Option<u64>,
    solver: &SolverConfig,
) -> Result<BenchmarkRecord> {
    let reduced = build_projected(inst, pm)?;
    let t0 = Instant::now();
    let sol = solve_lp(&reduced, solver)?;
    let ms = t0.elapsed().as_secs_f64() * 1e3;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NumericalFailure(format!(
            "projected solve of '{}' returned {:?}",
            inst.id, sol.status
        )));
    }
    let u = sol.objective.unwrap();
    let recovered = pm.p.matvec(sol.x.as_ref().unwrap());
    let feasible = check_feasible(inst, &recovered, 1e-6);
    Ok(BenchmarkRecord {
        dataset: dataset.into(),
        method: pm.method_tag.as_str().into(),
        k: Some(pm.k),
        instance_id: inst.id.clone(),
        objective: u,
        ratio: objective_ratio(u, full_objective, DEFAULT_RATIO_GUARD),
        solve_time_ms: ms,
        feasible,
        seed,
    })
}

fn colrand_summary(
    dataset: &str,
    k: usize,
    rows: &[BenchmarkRecord],
) -> Vec<BenchmarkRecord> {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let objs: Vec<f64> = rows.iter().map(|r| r.objective).collect();
    let stats = |v: &[f64]| {
        if v.is_empty() {
            return (0.0, 0.0);
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (obj_mean, obj_std) = stats(&objs);
    let (ratio_mean, ratio_std) = stats(&ratios);
    let make = |id: &str, obj, ratio| BenchmarkRecord {
        dataset: dataset.into(),
        method: "colrand".into(),
        k: Some(k),
        instance_id: id.into(),
        objective: obj,
        ratio: Some(ratio),
        solve_time_ms: 0.0,
        feasible: rows.iter().all(|r| r.feasible),
        seed: None,
    };
    vec![make("mean", obj_mean, ratio_mean), make("std", obj_std, ratio_std)]
}

/// Run the full benchmark on a dataset directory, returning every CSV row.
pub fn run_benchmark(dir: &Path, methods: &[Method], cfg: &BenchConfig) -> Result<Vec<BenchmarkRecord>> {
    let manifest = read_manifest(dir)?;
    let train = read_instances(dir, &manifest, &manifest.train_ids)?;
    let test = read_instances(dir, &manifest, &manifest.test_ids)?;
    let n = manifest.n;
    let schedule = if cfg.k_schedule.is_empty() {
        default_k_schedule(n)
    } else {
        cfg.k_schedule.clone()
    };

    let baseline = solve_full(&manifest, &test, cfg)?;
    let mut records = Vec::new();
    if methods.contains(&Method::Full) {
        records.extend(baseline.records.iter().cloned());
    }

    let mut ts = TrainingSet::new(train, manifest.identical_a);
    let needs_training = methods.iter().any(|m| matches!(m, Method::Pca | Method::Sga));
    if needs_training {
        ts.ensure_solutions(&cfg.solver)?;
    }

    let kmax = schedule.iter().copied().max().unwrap_or(1);

    if methods.contains(&Method::Pca) {
        // learn once at the largest k, project each column into the
        // training intersection, then slice prefixes: column-wise
        // projection commutes with taking prefixes
        let pm = learn_pca(&ts, kmax)?;
        let pm = final_projection(&pm, &ts, &cfg.projection)?;
        for &k in &schedule {
            let pk = pm.prefix(k);
            for inst in &test {
                records.push(evaluate_record(
                    &manifest.name,
                    inst,
                    &pk,
                    baseline.objectives[&inst.id],
                    None,
                    &cfg.solver,
                )?);
            }
        }
    }

    if methods.contains(&Method::Sga) {
        for &k in &schedule {
            let pm = learn_sga(&ts, k, &cfg.sga)?;
            let pm = final_projection(&pm, &ts, &cfg.projection)?;
            for inst in &test {
                records.push(evaluate_record(
                    &manifest.name,
                    inst,
                    &pm,
                    baseline.objectives[&inst.id],
                    Some(cfg.sga.seed),
                    &cfg.solver,
                )?);
            }
        }
    }

    if methods.contains(&Method::Colrand) {
        for &k in &schedule {
            let mut seed_rows = Vec::new();
            for &seed in &cfg.colrand_seeds {
                let pm = learn_colrand(n, k, seed);
                for inst in &test {
                    seed_rows.push(evaluate_record(
                        &manifest.name,
                        inst,
                        &pm,
                        baseline.objectives[&inst.id],
                        Some(seed),
                        &cfg.solver,
                    )?);
                }
            }
            let summary = colrand_summary(&manifest.name, k, &seed_rows);
            records.extend(seed_rows);
            records.extend(summary);
        }
    }

    Ok(records)
}

// ---------------------------------------------------------------------------
// Generalization-gap probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GapRecord {
    pub dataset: String,
    pub method: String,
    pub k: usize,
    pub n_train: usize,
    pub seed: u64,
    pub gap: f64,
}

pub const GAP_CSV_HEADER: &str = "dataset,method,k,n_train,seed,gap";

pub fn write_gap_csv(records: &[GapRecord], path: &Path) -> Result<()> {
    let mut out = String::from(GAP_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.dataset, r.method, r.k, r.n_train, r.seed, r.gap
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Mean projected value of `pm` over `instances`.
fn mean_u(
    instances: &[LpInstance],
    pm: &ProjectionMatrix,
    solver: &SolverConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for inst in instances {
        let reduced = build_projected(inst, pm)?;
        let sol = solve_lp(&reduced, solver)?;
        if sol.status != SolveStatus::Optimal {
            return Err(Error::NumericalFailure(format!(
                "projected solve of '{}' returned {:?}",
                inst.id, sol.status
            )));
        }
        total += sol.objective.unwrap();
    }
    Ok(total / instances.len() as f64)
}

/// For each training-set size in `grid` and each split seed: train on a
/// random size-N subset of the training pool, then report the absolute
/// difference between mean projected value on that subset and on the rest
/// of the pool.
pub fn gap_probe(
    dir: &Path,
    method: Method,
    k: usize,
    split_seeds: &[u64],
    grid: &[usize],
    cfg: &BenchConfig,
) -> Result<Vec<GapRecord>> {
    let manifest = read_manifest(dir)?;
    let pool = read_instances(dir, &manifest, &manifest.train_ids)?;
    let mut records = Vec::new();
    for &n_train in grid {
        if n_train > pool.len() {
            return Err(Error::ConfigError(format!(
                "grid size {n_train} exceeds the {} available instances",
                pool.len()
            )));
        }
        for &seed in split_seeds {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let train_idx = &order[..n_train];
            let held_idx = &order[n_train..];
            let train: Vec<LpInstance> =
                train_idx.iter().map(|&i| pool[i].clone()).collect();
            let held: Vec<LpInstance> = if held_idx.is_empty() {
                train.clone()
            } else {
                held_idx.iter().map(|&i| pool[i].clone()).collect()
            };
            let mut ts = TrainingSet::new(train, manifest.identical_a);
            ts.ensure_solutions(&cfg.solver)?;
            let pm = match method {
                Method::Pca => {
                    let pm = learn_pca(&ts, k)?;
                    final_projection(&pm, &ts, &cfg.projection)?
                }
                Method::Sga => {
                    let mut sga = cfg.sga.clone();
                    sga.seed = seed;
                    let pm = learn_sga(&ts, k, &sga)?;
                    final_projection(&pm, &ts, &cfg.projection)?
                }
                Method::Colrand => learn_colrand(manifest.n, k, seed),
                Method::Full => {
                    return Err(Error::ConfigError(
                        "gap probe needs a projection method".into(),
                    ))
                }
            };
            let gap = (mean_u(&ts.instances, &pm, &cfg.solver)?
                - mean_u(&held, &pm, &cfg.solver)?)
            .abs();
            records.push(GapRecord {
                dataset: manifest.name.clone(),
                method: method.as_str().into(),
                k,
                n_train,
                seed,
                gap,
            });
        }
    }
    Ok(records)
}
