//! Per-worker task plans.
//!
//! Probe originals and counterfactuals are spread among filler items so that
//! every counterfactual comes at least `min_separation` positions after its
//! original.
//!
//! Placement works on the set `S` of probe slots. Sorting `S` as
//! `s_0 < .. < s_{2n-1}`, a valid matching exists iff `s_{k+n} - s_k >= d` for
//! every `k`, and then `(s_k, s_{k+n})` is one. The canonical layout puts
//! originals at `0..n` and counterfactuals at `m..m+n` with `m = max(n, d)`;
//! it fits exactly when `2n <= x` and `n <= x - d`. Plans start from the
//! canonical layout and take seeded random moves that keep `S` feasible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DisplayItem, HiddenEntry, ProbePair, Query, Role, TaskPlan};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Items shown to each worker (x).
    pub total_items: usize,
    /// Probe pairs per worker (n).
    pub probe_pairs: usize,
    /// Minimum distance between a pair's two items (d); `ceil(x / 3)` when
    /// unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<usize>,
    pub rng_seed: u64,
}

impl PlanConfig {
    pub fn new(total_items: usize, probe_pairs: usize, min_separation: Option<usize>, rng_seed: u64) -> Self {
        Self {
            total_items,
            probe_pairs,
            min_separation,
            rng_seed,
        }
    }

    pub fn separation(&self) -> usize {
        self.min_separation
            .unwrap_or_else(|| self.total_items.div_ceil(3))
    }

    pub fn check(&self) -> Result<()> {
        let (x, n, d) = (self.total_items, self.probe_pairs, self.separation());
        if n < 1 {
            return Err(Error::InfeasiblePlan("at least one probe pair is required".into()));
        }
        if d < 1 {
            return Err(Error::InfeasiblePlan("minimum separation must be at least 1".into()));
        }
        if 2 * n > x {
            return Err(Error::InfeasiblePlan(format!(
                "{n} pairs need {} slots but only {x} items are planned (x >= 2n)",
                2 * n
            )));
        }
        let max = max_feasible_pairs(x, d);
        if n > max {
            return Err(Error::InfeasiblePlan(format!(
                "{n} pairs at separation {d} do not fit in {x} slots: at most {max} \
                 (pigeonhole bound: n <= x - d = {})",
                x.saturating_sub(d)
            )));
        }
        Ok(())
    }

    /// Seed for one worker's plan.
    pub fn worker_seed(&self, worker_id: &str) -> u64 {
        derive_seed(self.rng_seed, &["plan", worker_id])
    }
}

/// Canonical slot layout for `n` pairs, or `None` when it does not fit.
fn canonical_layout(x: usize, n: usize, d: usize) -> Option<Vec<usize>> {
    let offset = n.max(d);
    if n == 0 || offset + n > x {
        return None;
    }
    Some((0..n).chain(offset..offset + n).collect())
}

fn layout_feasible(sorted: &[usize], d: usize) -> bool {
    let n = sorted.len() / 2;
    (0..n).all(|k| sorted[k + n] - sorted[k] >= d)
}

/// Largest number of pairs placeable in `x` slots with distance at least
/// `d`, using the same canonical layout [`build_plan`] starts from.
pub fn max_feasible_pairs(x: usize, d: usize) -> usize {
    (1..=x / 2)
        .rev()
        .find(|&n| canonical_layout(x, n, d.max(1)).is_some())
        .unwrap_or(0)
}

/// Seeded random feasible probe-slot set, sorted.
fn random_layout<R: Rng + ?Sized>(x: usize, n: usize, d: usize, rng: &mut R) -> Option<Vec<usize>> {
    let mut slots = canonical_layout(x, n, d)?;
    let mut taken: BTreeSet<usize> = slots.iter().copied().collect();
    let moves = 8 * x;
    for _ in 0..moves {
        let i = rng.random_range(0..slots.len());
        let target = rng.random_range(0..x);
        if taken.contains(&target) {
            continue;
        }
        let mut candidate = slots.clone();
        candidate[i] = target;
        candidate.sort_unstable();
        if layout_feasible(&candidate, d) {
            taken.remove(&slots[i]);
            taken.insert(target);
            slots = candidate;
        }
    }
    Some(slots)
}

/// Assembles one worker's plan.
pub fn build_plan(
    worker_id: &str,
    fillers: &[Query],
    pairs: &[ProbePair],
    config: &PlanConfig,
) -> Result<TaskPlan> {
    config.check()?;
    let (x, n, d) = (config.total_items, config.probe_pairs, config.separation());
    if pairs.len() != n {
        return Err(Error::CountMismatch {
            what: "probe pairs",
            expected: n,
            found: pairs.len(),
        });
    }
    if fillers.len() != x - 2 * n {
        return Err(Error::CountMismatch {
            what: "filler queries",
            expected: x - 2 * n,
            found: fillers.len(),
        });
    }
    let mut rng = stream(config.worker_seed(worker_id));
    let layout = random_layout(x, n, d, &mut rng)
        .ok_or_else(|| Error::InfeasiblePlan(format!("no layout for x={x}, n={n}, d={d}")))?;

    let mut pair_order: Vec<usize> = (0..n).collect();
    pair_order.shuffle(&mut rng);
    let mut filler_order: Vec<usize> = (0..fillers.len()).collect();
    filler_order.shuffle(&mut rng);

    let mut slots: Vec<Option<(&Query, Role, Option<&str>)>> = vec![None; x];
    for (k, &p) in pair_order.iter().enumerate() {
        let pair = &pairs[p];
        slots[layout[k]] = Some((&pair.original, Role::Original, Some(&pair.pair_id)));
        slots[layout[k + n]] = Some((&pair.counterfactual, Role::Counterfactual, Some(&pair.pair_id)));
    }
    let mut filler_iter = filler_order.iter().map(|&i| &fillers[i]);
    let mut used_ids = BTreeSet::new();
    let mut items = Vec::with_capacity(x);
    let mut hidden_map = BTreeMap::new();
    for slot in slots {
        let (query, role, pair_id) = match slot {
            Some(s) => s,
            None => (filler_iter.next().expect("filler count checked"), Role::Filler, None),
        };
        let display_id = loop {
            let id = format!("{:016x}", rng.random::<u64>());
            if used_ids.insert(id.clone()) {
                break id;
            }
        };
        hidden_map.insert(
            display_id.clone(),
            HiddenEntry {
                query_id: query.query_id.clone(),
                role,
                pair_id: pair_id.map(str::to_string),
            },
        );
        items.push(DisplayItem {
            display_id,
            features: query.features.clone(),
        });
    }
    Ok(TaskPlan {
        worker_id: worker_id.to_string(),
        items,
        hidden_map,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    DuplicateDisplayId(String),
    UnmappedItem(String),
    OrphanHiddenEntry(String),
    UnmatchedPairMember(String),
    DuplicatePairMember(String),
    CounterfactualFirst(String),
    TooClose {
        pair_id: String,
        distance: usize,
        required: usize,
    },
    MissingPairId(String),
    ItemCount { expected: usize, found: usize },
    PairCount { expected: usize, found: usize },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PlanViolation::*;
        match self {
            DuplicateDisplayId(id) => write!(f, "duplicate display id `{id}`"),
            UnmappedItem(id) => write!(f, "item `{id}` has no hidden-map entry"),
            OrphanHiddenEntry(id) => write!(f, "hidden-map entry `{id}` has no item"),
            UnmatchedPairMember(p) => write!(f, "unmatched pair member in pair `{p}`"),
            DuplicatePairMember(p) => write!(f, "pair `{p}` has a repeated member"),
            CounterfactualFirst(p) => write!(f, "pair `{p}`: counterfactual precedes original"),
            TooClose {
                pair_id,
                distance,
                required,
            } => write!(f, "pair `{pair_id}`: distance {distance} < {required}"),
            MissingPairId(id) => write!(f, "probe item `{id}` has no pair id"),
            ItemCount { expected, found } => write!(f, "expected {expected} items, found {found}"),
            PairCount { expected, found } => write!(f, "expected {expected} pairs, found {found}"),
        }
    }
}

/// Independent checker for plans: separation, uniqueness, ordering and
/// counts.
pub fn validate_plan(plan: &TaskPlan, config: &PlanConfig) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    let d = config.separation();
    let mut positions: BTreeMap<&str, usize> = BTreeMap::new();
    for (pos, item) in plan.items.iter().enumerate() {
        if positions.insert(&item.display_id, pos).is_some() {
            out.push(PlanViolation::DuplicateDisplayId(item.display_id.clone()));
        }
        if !plan.hidden_map.contains_key(&item.display_id) {
            out.push(PlanViolation::UnmappedItem(item.display_id.clone()));
        }
    }
    let mut members: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (id, entry) in &plan.hidden_map {
        let Some(&pos) = positions.get(id.as_str()) else {
            out.push(PlanViolation::OrphanHiddenEntry(id.clone()));
            continue;
        };
        if entry.role == Role::Filler {
            continue;
        }
        let Some(pid) = entry.pair_id.as_deref() else {
            out.push(PlanViolation::MissingPairId(id.clone()));
            continue;
        };
        let slot = members.entry(pid).or_default();
        match entry.role {
            Role::Original => slot.0.push(pos),
            _ => slot.1.push(pos),
        }
    }
    for (pid, (orig, cf)) in &members {
        match (orig.as_slice(), cf.as_slice()) {
            ([o], [c]) => {
                if c < o {
                    out.push(PlanViolation::CounterfactualFirst(pid.to_string()));
                }
                let distance = o.abs_diff(*c);
                if distance < d {
                    out.push(PlanViolation::TooClose {
                        pair_id: pid.to_string(),
                        distance,
                        required: d,
                    });
                }
            }
            (o, c) if o.len() > 1 || c.len() > 1 => {
                out.push(PlanViolation::DuplicatePairMember(pid.to_string()))
            }
            _ => out.push(PlanViolation::UnmatchedPairMember(pid.to_string())),
        }
    }
    if plan.items.len() != config.total_items {
        out.push(PlanViolation::ItemCount {
            expected: config.total_items,
            found: plan.items.len(),
        });
    }
    if members.len() != config.probe_pairs {
        out.push(PlanViolation::PairCount {
            expected: config.probe_pairs,
            found: members.len(),
        });
    }
    out
}
