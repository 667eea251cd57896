//! Assembling a worker's task from a query pool: pick probe originals and
//! fillers, build disguised counterfactuals, lay out the plan.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::counterfactual::{make_probe_pair, DisguiseConfig};
use crate::error::{Error, Result};
use crate::model::{ProbePair, Query, Schema, SensitiveSpec, TaskPlan};
use crate::rng::derived_stream;
use crate::scheduler::{build_plan, PlanConfig};

/// A worker's plan together with the probe pairs it hides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerAssignment {
    pub plan: TaskPlan,
    pub pairs: Vec<ProbePair>,
}

pub struct AssemblyContext<'a> {
    pub schema: &'a Schema,
    pub spec: &'a SensitiveSpec,
    pub disguise: &'a DisguiseConfig,
    pub plan: &'a PlanConfig,
}

/// Draws probe originals from `eligible` (indices into `pool`) and fillers
/// from the rest of the pool, then builds the worker's plan. All draws come
/// from streams derived from the plan seed and the worker id.
pub fn assemble_worker_plan(
    worker_id: &str,
    pool: &[Query],
    eligible: &[usize],
    ctx: &AssemblyContext<'_>,
) -> Result<WorkerAssignment> {
    ctx.plan.check()?;
    let (x, n) = (ctx.plan.total_items, ctx.plan.probe_pairs);
    if eligible.len() < n {
        return Err(Error::Config(format!(
            "only {} queries are eligible as probes, {n} needed",
            eligible.len()
        )));
    }
    if pool.len() < x - n {
        return Err(Error::Config(format!(
            "pool of {} queries cannot fill {x} items with {n} pairs",
            pool.len()
        )));
    }
    let seed = ctx.plan.rng_seed;
    let mut select = derived_stream(seed, &["select", worker_id]);
    let probes: Vec<usize> = eligible.choose_multiple(&mut select, n).copied().collect();
    let probe_set: BTreeSet<usize> = probes.iter().copied().collect();
    let mut rest: Vec<usize> = (0..pool.len()).filter(|i| !probe_set.contains(i)).collect();
    rest.shuffle(&mut select);
    rest.truncate(x - 2 * n);
    rest.sort_unstable();
    let fillers: Vec<Query> = rest.iter().map(|&i| pool[i].clone()).collect();

    let mut disguise = derived_stream(seed, &["disguise", worker_id]);
    let pairs = probes
        .iter()
        .map(|&i| make_probe_pair(&pool[i], ctx.spec, ctx.schema, ctx.disguise, None, &mut disguise))
        .collect::<Result<Vec<_>>>()?;
    let plan = build_plan(worker_id, &fillers, &pairs, ctx.plan)?;
    Ok(WorkerAssignment { plan, pairs })
}
