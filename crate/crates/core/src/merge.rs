//! Region growing over a superpixel adjacency graph.
//!
//! Each iteration runs three phases:
//!
//! 1. every region picks its most similar neighbour among those scoring at
//!    least the adaptive threshold `S_it` ([`best_local`]);
//! 2. only mutual choices survive, and mutual pairs whose common border runs
//!    along a global contour are dropped and disconnected for good
//!    ([`validate_mutual`]);
//! 3. surviving pairs scoring strictly above `S_it` are merged
//!    ([`apply_merges`]).
//!
//! The threshold then moves by `α = 1 + merged / candidates` after a
//! productive iteration, or decays geometrically after a barren one
//! ([`update_threshold`]). The loop stops after a barren pass at the floor
//! `S_0`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjacency::{circumferences, SuperpixelAdjacency};
use crate::canny::ContourMap;
use crate::error::{Error, Result};
use crate::features::{merge_descriptor, FeatureVector, MultiScaleDescriptor, RegionAggregate};
use crate::labels::LabelMap;
use crate::similarity::{
    border_similarity, combine, content_similarity, content_similarity_features, RegionShape,
    SimilarityBreakdown, SimilarityParams,
};

pub const DEFAULT_S0: f64 = 0.4;
pub const DEFAULT_GAMMA_DECAY: f64 = 0.95;
/// Fraction of border pixel pairs next to a contour at which a merge is
/// refused.
pub const CONTOUR_BLOCK_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeParams {
    /// Stopping similarity `S_0`.
    pub s0: f64,
    /// Threshold decay applied after an iteration without merges.
    pub gamma_decay: f64,
    pub similarity: SimilarityParams,
    /// Collect a per-pair similarity trace.
    #[serde(default)]
    pub trace: bool,
}

impl Default for MergeParams {
    fn default() -> Self {
        MergeParams {
            s0: DEFAULT_S0,
            gamma_decay: DEFAULT_GAMMA_DECAY,
            similarity: SimilarityParams::default(),
            trace: false,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stopping similarity S0 must lie in (0, 1], got {}",
                self.s0
            )));
        }
        if !(self.gamma_decay > 0.0 && self.gamma_decay < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold decay must lie in (0, 1), got {}",
                self.gamma_decay
            )));
        }
        self.similarity.validate()
    }
}

/// A superpixel couple straddling a region border, with its precomputed
/// content similarity. Stored as `(lower id, higher id)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Couple {
    lo: u32,
    hi: u32,
    similarity: f64,
}

#[derive(Debug, Clone, Default)]
struct Edge {
    couples: Vec<Couple>,
    /// Common border length `β` in pixel pairs.
    beta: usize,
    near_contour: usize,
}

impl Edge {
    fn contour_blocked(&self) -> bool {
        self.near_contour as f64 >= CONTOUR_BLOCK_RATIO * self.beta as f64
    }
}

/// A non-empty cluster of superpixels.
#[derive(Debug, Clone)]
pub struct Region {
    pub id: u32,
    /// Member superpixel ids, sorted.
    pub superpixels: Vec<u32>,
    pub descriptor: MultiScaleDescriptor,
    pub aggregate: RegionAggregate,
    pub pixel_area: usize,
    pub circumference: usize,
    /// Depth in the merge hierarchy; superpixels are level 0.
    pub level: usize,
}

/// One applied merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub iteration: usize,
    pub parent: u32,
    pub children: [u32; 2],
    pub sim: f64,
    pub sim_c: f64,
    pub sim_b: f64,
    /// Threshold in force when the merge happened.
    pub threshold: f64,
}

/// Counters for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub threshold: f64,
    /// Regions that found a qualifying neighbour.
    pub choices: usize,
    /// Validated mutual pairs submitted to aggregation.
    pub candidates: usize,
    pub merged: usize,
    pub blocked: usize,
    pub regions_after: usize,
}

/// Scored region pair, emitted when tracing is on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTrace {
    pub iteration: usize,
    pub a: u32,
    pub b: u32,
    #[serde(flatten)]
    pub sim: SimilarityBreakdown,
}

/// The full merge hierarchy: leaves are superpixels `0..num_superpixels`,
/// inner nodes get ids counting up from `num_superpixels`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeHistory {
    pub num_superpixels: usize,
    pub records: Vec<MergeRecord>,
    pub iterations: Vec<IterationStats>,
}

impl MergeHistory {
    /// One JSON record per merge, one merge per line.
    pub fn write_jsonl(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Region id of every superpixel after the first `iterations` iterations
    /// (`0` gives the superpixels themselves).
    pub fn superpixel_regions(&self, iterations: usize) -> Vec<u32> {
        let mut owner: Vec<u32> = (0..self.num_superpixels as u32).collect();
        let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for sp in 0..self.num_superpixels as u32 {
            members.insert(sp, vec![sp]);
        }
        for r in self.records.iter().filter(|r| r.iteration < iterations) {
            let mut merged = members.remove(&r.children[0]).unwrap_or_default();
            merged.extend(members.remove(&r.children[1]).unwrap_or_default());
            for &sp in &merged {
                owner[sp as usize] = r.parent;
            }
            members.insert(r.parent, merged);
        }
        owner
    }

    /// The partition after `iterations` iterations, as a dense label map.
    pub fn partition_at(&self, superpixels: &LabelMap, iterations: usize) -> Result<LabelMap> {
        let owner = self.superpixel_regions(iterations);
        let labels = superpixels
            .as_slice()
            .iter()
            .map(|&sp| owner[sp as usize])
            .collect();
        Ok(LabelMap::new(superpixels.width(), superpixels.height(), labels)?.relabel_compact())
    }

    /// Region count after each iteration, starting with the superpixel count.
    pub fn region_counts(&self) -> Vec<usize> {
        std::iter::once(self.num_superpixels)
            .chain(self.iterations.iter().map(|s| s.regions_after))
            .collect()
    }
}

/// Mutable state of the region-growing loop.
#[derive(Debug, Clone)]
pub struct MergeState {
    params: MergeParams,
    superpixels: LabelMap,
    regions: BTreeMap<u32, Region>,
    edges: BTreeMap<(u32, u32), Edge>,
    neighbors: BTreeMap<u32, BTreeSet<u32>>,
    /// Current region of every superpixel.
    sp_region: Vec<u32>,
    /// Straddling pixel pairs per superpixel couple, for circumference
    /// updates.
    sp_borders: BTreeMap<(u32, u32), Vec<(u32, u32)>>,
    threshold: f64,
    iteration: usize,
    merged_prev: usize,
    candidates_prev: usize,
    blocked_pairs: BTreeSet<(u32, u32)>,
    next_id: u32,
    history: MergeHistory,
    trace: Vec<PairTrace>,
}

#[inline]
fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Builds the initial state: one region per superpixel, threshold 1.
pub fn init_state(
    superpixels: &LabelMap,
    features: &[FeatureVector],
    contours: &ContourMap,
    params: &MergeParams,
) -> Result<MergeState> {
    params.validate()?;
    if superpixels.dims() != contours.dims() {
        return Err(Error::DimensionMismatch {
            expected: superpixels.dims(),
            found: contours.dims(),
        });
    }
    if !superpixels.is_dense() {
        return Err(Error::Partition("superpixel labels must be dense".into()));
    }
    let n = superpixels.num_labels();
    if n < 2 {
        return Err(Error::TooFewSuperpixels(n));
    }
    if features.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} descriptors for {} superpixels",
            features.len(),
            n
        )));
    }

    let near = contours.dilated();
    let adjacency = SuperpixelAdjacency::build(superpixels, Some(&near));
    let areas = superpixels.region_sizes();
    let circ = circumferences(superpixels);

    let regions: BTreeMap<u32, Region> = (0..n as u32)
        .map(|id| {
            let fv = features[id as usize].clone();
            (
                id,
                Region {
                    id,
                    superpixels: vec![id],
                    descriptor: MultiScaleDescriptor::leaf(id, fv.clone()),
                    aggregate: RegionAggregate::single(fv, areas[id as usize]),
                    pixel_area: areas[id as usize],
                    circumference: circ[id as usize],
                    level: 0,
                },
            )
        })
        .collect();

    let borders: Vec<(&(u32, u32), &crate::adjacency::BorderStats)> =
        adjacency.borders().iter().collect();
    let sims: Vec<f64> = borders
        .par_iter()
        .map(|((a, b), _)| {
            content_similarity_features(
                &features[*a as usize],
                &features[*b as usize],
                &params.similarity,
            )
        })
        .collect();

    let mut edges = BTreeMap::new();
    let mut neighbors: BTreeMap<u32, BTreeSet<u32>> =
        (0..n as u32).map(|id| (id, BTreeSet::new())).collect();
    let mut sp_borders = BTreeMap::new();
    for (((a, b), stats), sim) in borders.into_iter().zip(sims) {
        edges.insert(
            (*a, *b),
            Edge {
                couples: vec![Couple {
                    lo: *a,
                    hi: *b,
                    similarity: sim,
                }],
                beta: stats.length(),
                near_contour: stats.near_contour,
            },
        );
        neighbors.get_mut(a).unwrap().insert(*b);
        neighbors.get_mut(b).unwrap().insert(*a);
        sp_borders.insert((*a, *b), stats.pixel_pairs.clone());
    }

    Ok(MergeState {
        params: *params,
        superpixels: superpixels.clone(),
        regions,
        edges,
        neighbors,
        sp_region: (0..n as u32).collect(),
        sp_borders,
        threshold: 1.0,
        iteration: 0,
        merged_prev: 0,
        candidates_prev: 0,
        blocked_pairs: BTreeSet::new(),
        next_id: n as u32,
        history: MergeHistory {
            num_superpixels: n,
            ..Default::default()
        },
        trace: Vec::new(),
    })
}

/// Result of phase 1: every scored pair and each region's chosen neighbour.
#[derive(Debug, Clone, Default)]
pub struct Choices {
    pub scores: BTreeMap<(u32, u32), SimilarityBreakdown>,
    pub best: BTreeMap<u32, u32>,
}

/// A validated mutual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergePair {
    pub a: u32,
    pub b: u32,
    pub sim: SimilarityBreakdown,
}

impl MergeState {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn params(&self) -> &MergeParams {
        &self.params
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn region(&self, id: u32) -> Option<&Region> {
        self.regions.get(&id)
    }

    pub fn neighbors(&self, id: u32) -> impl Iterator<Item = u32> + '_ {
        self.neighbors.get(&id).into_iter().flatten().copied()
    }

    pub fn are_adjacent(&self, a: u32, b: u32) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    /// Common border length between two regions, in pixel pairs.
    pub fn border_length(&self, a: u32, b: u32) -> Option<usize> {
        self.edges.get(&key(a, b)).map(|e| e.beta)
    }

    pub fn blocked_pairs(&self) -> &BTreeSet<(u32, u32)> {
        &self.blocked_pairs
    }

    pub fn merged_prev(&self) -> usize {
        self.merged_prev
    }

    pub fn candidates_prev(&self) -> usize {
        self.candidates_prev
    }

    pub fn history(&self) -> &MergeHistory {
        &self.history
    }

    pub fn trace(&self) -> &[PairTrace] {
        &self.trace
    }

    /// The current partition as a dense label map (labels ordered by region
    /// id).
    pub fn label_map(&self) -> LabelMap {
        let labels = self
            .superpixels
            .as_slice()
            .iter()
            .map(|&sp| self.sp_region[sp as usize])
            .collect();
        LabelMap::new(self.superpixels.width(), self.superpixels.height(), labels)
            .expect("dimensions unchanged")
            .relabel_compact()
    }

    /// Combined similarity of two adjacent regions.
    pub fn similarity(&self, a: u32, b: u32) -> Result<SimilarityBreakdown> {
        let edge = self.edges.get(&key(a, b)).ok_or(Error::NotAdjacent(a, b))?;
        let ra = self.regions.get(&a).ok_or(Error::NotAdjacent(a, b))?;
        let rb = self.regions.get(&b).ok_or(Error::NotAdjacent(a, b))?;
        let content = content_similarity(&ra.aggregate, &rb.aggregate, &self.params.similarity);
        let couple_sims: Vec<f64> = edge.couples.iter().map(|c| c.similarity).collect();
        let border = border_similarity(&couple_sims).ok_or(Error::NotAdjacent(a, b))?;
        combine(
            content,
            border,
            RegionShape {
                superpixels: ra.superpixels.len(),
                circumference: ra.circumference,
            },
            RegionShape {
                superpixels: rb.superpixels.len(),
                circumference: rb.circumference,
            },
            edge.beta,
        )
    }

    fn merge_pair(&mut self, a: u32, b: u32, sim: &SimilarityBreakdown) -> u32 {
        let (a, b) = key(a, b);
        let ra = self.regions.remove(&a).expect("live region");
        let rb = self.regions.remove(&b).expect("live region");
        let id = self.next_id;
        self.next_id += 1;

        let edge = self.edges.remove(&(a, b)).expect("adjacent regions");
        self.neighbors.get_mut(&a).unwrap().remove(&b);
        self.neighbors.get_mut(&b).unwrap().remove(&a);

        for &sp in ra.superpixels.iter().chain(&rb.superpixels) {
            self.sp_region[sp as usize] = id;
        }

        // Interface pixels stop counting towards the circumference once
        // their last foreign neighbour is absorbed.
        let mut interface: BTreeSet<u32> = BTreeSet::new();
        for c in &edge.couples {
            for &(p, q) in &self.sp_borders[&(c.lo, c.hi)] {
                interface.insert(p);
                interface.insert(q);
            }
        }
        let (w, h) = self.superpixels.dims();
        let labels = self.superpixels.as_slice();
        let absorbed = interface
            .iter()
            .filter(|&&p| {
                let p = p as usize;
                let (x, y) = (p % w, p / w);
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    return false;
                }
                [p - 1, p + 1, p - w, p + w]
                    .iter()
                    .all(|&q| self.sp_region[labels[q] as usize] == id)
            })
            .count();

        let mut superpixels = ra.superpixels.clone();
        superpixels.extend_from_slice(&rb.superpixels);
        superpixels.sort_unstable();
        let region = Region {
            id,
            superpixels,
            descriptor: merge_descriptor(&ra.descriptor, &rb.descriptor)
                .expect("regions are disjoint"),
            aggregate: ra.aggregate.merge(&rb.aggregate),
            pixel_area: ra.pixel_area + rb.pixel_area,
            circumference: ra.circumference + rb.circumference - absorbed,
            level: ra.level.max(rb.level) + 1,
        };

        // Contract the two nodes into one.
        let mut new_neighbors = BTreeSet::new();
        for old in [a, b] {
            let nbrs = self.neighbors.remove(&old).unwrap_or_default();
            for r in nbrs {
                let e = self.edges.remove(&key(old, r)).expect("symmetric edges");
                self.neighbors.get_mut(&r).unwrap().remove(&old);
                let merged = self.edges.entry(key(id, r)).or_default();
                merged.couples.extend(e.couples);
                merged.beta += e.beta;
                merged.near_contour += e.near_contour;
                new_neighbors.insert(r);
            }
        }
        for &r in &new_neighbors {
            self.neighbors.get_mut(&r).unwrap().insert(id);
            let e = self.edges.get_mut(&key(id, r)).unwrap();
            e.couples.sort_by_key(|c| (c.lo, c.hi));
        }
        self.neighbors.insert(id, new_neighbors);
        self.regions.insert(id, region);

        self.history.records.push(MergeRecord {
            iteration: self.iteration,
            parent: id,
            children: [a, b],
            sim: sim.total,
            sim_c: sim.content,
            sim_b: sim.border,
            threshold: self.threshold,
        });
        id
    }
}

/// Phase 1: each region's best neighbour with `Sim >= S_it`, ties to the
/// lower region id.
pub fn best_local(state: &MergeState) -> Result<Choices> {
    let keys: Vec<(u32, u32)> = state.edges.keys().copied().collect();
    let scored: Vec<SimilarityBreakdown> = keys
        .par_iter()
        .map(|&(a, b)| state.similarity(a, b))
        .collect::<Result<_>>()?;
    let scores: BTreeMap<(u32, u32), SimilarityBreakdown> = keys.into_iter().zip(scored).collect();

    let mut best: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    for (&(a, b), s) in &scores {
        if s.total < state.threshold {
            continue;
        }
        for (from, to) in [(a, b), (b, a)] {
            let slot = best.entry(from).or_insert((s.total, to));
            if s.total > slot.0 || (s.total == slot.0 && to < slot.1) {
                *slot = (s.total, to);
            }
        }
    }
    Ok(Choices {
        scores,
        best: best.into_iter().map(|(r, (_, n))| (r, n)).collect(),
    })
}

/// Phase 2: keeps mutual choices; mutual pairs separated by a contour are
/// recorded as blocked and their edge is removed. Returned pairs are in
/// priority order: decreasing similarity, then increasing ids.
pub fn validate_mutual(state: &mut MergeState, choices: &Choices) -> Vec<MergePair> {
    let mut pairs = Vec::new();
    for (&p, &q) in &choices.best {
        if p >= q || choices.best.get(&q) != Some(&p) {
            continue;
        }
        let k = (p, q);
        if state.edges[&k].contour_blocked() {
            state.edges.remove(&k);
            state.neighbors.get_mut(&p).unwrap().remove(&q);
            state.neighbors.get_mut(&q).unwrap().remove(&p);
            state.blocked_pairs.insert(k);
            continue;
        }
        pairs.push(MergePair {
            a: p,
            b: q,
            sim: choices.scores[&k],
        });
    }
    pairs.sort_by(|x, y| {
        y.sim
            .total
            .total_cmp(&x.sim.total)
            .then((x.a, x.b).cmp(&(y.a, y.b)))
    });
    pairs
}

/// Phase 3: merges every pair with `Sim > S_it`. Returns the number merged
/// and records the counts that drive the next threshold update.
pub fn apply_merges(state: &mut MergeState, pairs: &[MergePair]) -> usize {
    let mut merged = 0;
    for pair in pairs {
        if pair.sim.total <= state.threshold {
            continue;
        }
        if !state.regions.contains_key(&pair.a) || !state.regions.contains_key(&pair.b) {
            continue;
        }
        if !state.are_adjacent(pair.a, pair.b) {
            continue;
        }
        state.merge_pair(pair.a, pair.b, &pair.sim);
        merged += 1;
    }
    state.merged_prev = merged;
    state.candidates_prev = pairs.len();
    merged
}

/// `α = 1 + merged / candidates` from the iteration just finished.
pub fn alpha(merged: usize, candidates: usize) -> f64 {
    if candidates == 0 {
        1.0
    } else {
        1.0 + merged as f64 / candidates as f64
    }
}

/// Raises the threshold by `α` (capped at 1) after merges, otherwise decays
/// it by `gamma_decay`.
pub fn update_threshold(state: &mut MergeState) {
    if state.merged_prev > 0 {
        let a = alpha(state.merged_prev, state.candidates_prev);
        state.threshold = (a * state.threshold).min(1.0);
    } else {
        state.threshold *= state.params.gamma_decay;
    }
}

/// Runs one full iteration and returns its statistics.
pub fn step(state: &mut MergeState) -> Result<IterationStats> {
    let threshold = state.threshold;
    let choices = best_local(state)?;
    if state.params.trace {
        let it = state.iteration;
        state
            .trace
            .extend(choices.scores.iter().map(|(&(a, b), s)| PairTrace {
                iteration: it,
                a,
                b,
                sim: *s,
            }));
    }
    let blocked_before = state.blocked_pairs.len();
    let pairs = validate_mutual(state, &choices);
    let merged = apply_merges(state, &pairs);
    let stats = IterationStats {
        iteration: state.iteration,
        threshold,
        choices: choices.best.len(),
        candidates: pairs.len(),
        merged,
        blocked: state.blocked_pairs.len() - blocked_before,
        regions_after: state.regions.len(),
    };
    state.history.iterations.push(stats.clone());
    state.iteration += 1;
    update_threshold(state);
    Ok(stats)
}

/// Final partition and merge history of a completed run.
#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub labels: LabelMap,
    pub history: MergeHistory,
    pub trace: Vec<PairTrace>,
}

/// Iterates until a barren pass at the floor threshold `S_0`, or until no
/// region has a neighbour left.
pub fn run(mut state: MergeState) -> Result<MergeOutcome> {
    let s0 = state.params.s0;
    loop {
        if state.edges.is_empty() {
            break;
        }
        let at_floor = state.threshold <= s0;
        let stats = step(&mut state)?;
        if stats.merged == 0 {
            if at_floor {
                break;
            }
            if state.threshold < s0 {
                state.threshold = s0;
            }
        }
    }
    Ok(MergeOutcome {
        labels: state.label_map(),
        history: state.history,
        trace: state.trace,
    })
}
