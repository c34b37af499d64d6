//! Grain addition, relaxation and wave decomposition.
//!
//! A vertex with more than 3 grains topples: it loses 3 and each neighbour
//! gains one. Degree-2 vertices shed their third grain into the implicit sink.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recurrence;
use crate::sweep;
use crate::topology::{split_at_origin, CactusGraph, CellId, Extracted, VertexId};

pub const THRESHOLD: u8 = 3;

/// Heights indexed by vertex. Every height is at least 1; heights above 3 are
/// only legal in transient states during relaxation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    heights: Vec<u8>,
}

impl Configuration {
    pub fn new(heights: Vec<u8>) -> Result<Self> {
        if let Some(i) = heights.iter().position(|&h| h == 0) {
            return Err(Error::InvalidConfiguration(format!(
                "vertex {} has height 0; heights are positive",
                VertexId::from_index(i)
            )));
        }
        Ok(Configuration { heights })
    }

    pub fn uniform(graph: &CactusGraph, height: u8) -> Self {
        Configuration {
            heights: vec![height.max(1); graph.num_vertices()],
        }
    }

    /// The stable configuration with the given sweep index.
    pub fn from_index(vertices: usize, index: u64) -> Self {
        let mut heights = vec![1; vertices];
        sweep::decode(index, &mut heights);
        Configuration { heights }
    }

    pub fn random_stable<R: Rng>(graph: &CactusGraph, rng: &mut R) -> Self {
        Configuration {
            heights: (0..graph.num_vertices())
                .map(|_| rng.gen_range(1..=3))
                .collect(),
        }
    }

    pub fn heights(&self) -> &[u8] {
        &self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn get(&self, v: VertexId) -> u8 {
        self.heights[v.index()]
    }

    pub fn set(&mut self, v: VertexId, h: u8) {
        self.heights[v.index()] = h;
    }

    pub fn is_stable(&self) -> bool {
        self.heights.iter().all(|&h| h <= THRESHOLD)
    }

    pub fn index(&self) -> u64 {
        sweep::encode(&self.heights)
    }

    pub fn check_for(&self, graph: &CactusGraph) -> Result<()> {
        if self.heights.len() != graph.num_vertices() {
            return Err(Error::InvalidConfiguration(format!(
                "configuration has {} heights but the graph has {} vertices",
                self.heights.len(),
                graph.num_vertices()
            )));
        }
        Ok(())
    }

    fn check_stable_for(&self, graph: &CactusGraph) -> Result<()> {
        self.check_for(graph)?;
        match self.heights.iter().position(|&h| h > THRESHOLD) {
            Some(i) => Err(Error::Unstable {
                vertex: VertexId::from_index(i).to_string(),
                height: self.heights[i],
            }),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> ConfigurationJson {
        ConfigurationJson {
            heights: self
                .heights
                .iter()
                .enumerate()
                .map(|(i, &h)| (VertexId::from_index(i).to_string(), h))
                .collect(),
        }
    }

    pub fn from_json(graph: &CactusGraph, json: &ConfigurationJson) -> Result<Self> {
        let mut heights = vec![0u8; graph.num_vertices()];
        for (key, &h) in &json.heights {
            let v: VertexId = key.parse()?;
            if v.index() >= heights.len() {
                return Err(Error::InvalidConfiguration(format!(
                    "vertex {v} is not in the graph"
                )));
            }
            heights[v.index()] = h;
        }
        if let Some(i) = heights.iter().position(|&h| h == 0) {
            return Err(Error::InvalidConfiguration(format!(
                "no positive height given for vertex {}",
                VertexId::from_index(i)
            )));
        }
        Configuration::new(heights)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationJson {
    pub heights: BTreeMap<String, u8>,
}

/// Ordered topplings of one avalanche.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TopplingLog {
    pub sequence: Vec<VertexId>,
    /// Positions in `sequence` at which the origin topples.
    pub wave_marks: Vec<usize>,
    counts: Vec<u32>,
}

impl TopplingLog {
    fn new(vertices: usize) -> Self {
        TopplingLog {
            sequence: Vec::new(),
            wave_marks: Vec::new(),
            counts: vec![0; vertices],
        }
    }

    fn push(&mut self, v: VertexId, origin: VertexId) {
        if v == origin {
            self.wave_marks.push(self.sequence.len());
        }
        self.sequence.push(v);
        self.counts[v.index()] += 1;
    }

    pub fn count(&self, v: VertexId) -> u32 {
        self.counts.get(v.index()).copied().unwrap_or(0)
    }

    pub fn per_vertex_counts(&self) -> BTreeMap<VertexId, u32> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (VertexId::from_index(i), c))
            .collect()
    }

    pub fn toppled_vertices(&self) -> BTreeSet<VertexId> {
        self.sequence.iter().copied().collect()
    }

    pub fn toppled_cells(&self) -> BTreeSet<CellId> {
        self.sequence.iter().map(|v| v.cell()).collect()
    }

    pub fn num_waves(&self) -> usize {
        self.wave_marks.len()
    }

    /// The topplings before the origin's second toppling.
    pub fn first_wave(&self) -> &[VertexId] {
        let end = self
            .wave_marks
            .get(1)
            .copied()
            .unwrap_or(self.sequence.len());
        &self.sequence[..end]
    }

    /// The topplings of wave `k` (0-based), delimited by the origin's topplings.
    pub fn wave(&self, k: usize) -> &[VertexId] {
        let start = self.wave_marks[k];
        let end = self
            .wave_marks
            .get(k + 1)
            .copied()
            .unwrap_or(self.sequence.len());
        &self.sequence[start..end]
    }

    pub fn first_wave_cells(&self) -> BTreeSet<CellId> {
        self.first_wave().iter().map(|v| v.cell()).collect()
    }

    /// The first vertex that appears a second time.
    pub fn first_repeat(&self) -> Option<VertexId> {
        let mut seen = BTreeSet::new();
        self.sequence.iter().copied().find(|v| !seen.insert(*v))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sequence": self.sequence.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "wave_marks": self.wave_marks,
            "per_vertex_counts": self
                .per_vertex_counts()
                .into_iter()
                .map(|(v, c)| (v.to_string(), c))
                .collect::<BTreeMap<_, _>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvalancheReport {
    pub final_config: Configuration,
    pub log: TopplingLog,
    pub vertex_mass: usize,
    pub cell_mass: usize,
    /// Cells toppling before the origin's second toppling, in the wave order
    /// in which the origin topples only when nothing else can.
    pub first_wave_cells: BTreeSet<CellId>,
}

impl AvalancheReport {
    fn finish(
        graph: &CactusGraph,
        final_config: Configuration,
        log: TopplingLog,
        first_wave: Option<BTreeSet<CellId>>,
    ) -> Self {
        let vertex_mass = log.toppled_vertices().len();
        let cell_mass = log.toppled_cells().len();
        let first_wave_cells = first_wave.unwrap_or_else(|| {
            if log.sequence.first() == Some(&graph.origin()) {
                log.first_wave_cells()
            } else {
                log.toppled_cells()
            }
        });
        AvalancheReport {
            final_config,
            log,
            vertex_mass,
            cell_mass,
            first_wave_cells,
        }
    }

    pub fn to_json(&self, with_log: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "final": self.final_config.to_json(),
            "vertex_mass": self.vertex_mass,
            "cell_mass": self.cell_mass,
            "waves": self.log.num_waves(),
            "first_wave_cells": self.first_wave_cells.iter().map(|c| c.0).collect::<Vec<_>>(),
        });
        if with_log {
            v["log"] = self.log.to_json();
        }
        v
    }
}

/// FIFO relaxation of `heights`, restricted to vertices with `region[v]` set.
/// Grains still cross into vertices outside the region but those never topple.
fn relax_fifo(
    graph: &CactusGraph,
    heights: &mut [u8],
    region: Option<&[bool]>,
    start: &[VertexId],
    log: &mut TopplingLog,
) {
    let inside = |v: VertexId| region.map_or(true, |r| r[v.index()]);
    let mut queued = vec![false; heights.len()];
    let mut queue = VecDeque::new();
    for &v in start {
        if inside(v) && heights[v.index()] > THRESHOLD && !queued[v.index()] {
            queued[v.index()] = true;
            queue.push_back(v);
        }
    }
    let origin = graph.origin();
    while let Some(v) = queue.pop_front() {
        queued[v.index()] = false;
        heights[v.index()] -= 3;
        log.push(v, origin);
        for w in graph.neighbors(v) {
            heights[w.index()] += 1;
            if inside(w) && heights[w.index()] > THRESHOLD && !queued[w.index()] {
                queued[w.index()] = true;
                queue.push_back(w);
            }
        }
        if heights[v.index()] > THRESHOLD {
            queued[v.index()] = true;
            queue.push_back(v);
        }
    }
}

/// Adds a grain at `vertex` and relaxes with a FIFO queue of over-full vertices.
pub fn add_and_relax(
    graph: &CactusGraph,
    config: &Configuration,
    vertex: VertexId,
) -> Result<AvalancheReport> {
    config.check_stable_for(graph)?;
    if vertex.index() >= graph.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "vertex {vertex} is not in the graph"
        )));
    }
    let mut heights = config.heights.clone();
    heights[vertex.index()] += 1;
    let mut log = TopplingLog::new(heights.len());
    relax_fifo(graph, &mut heights, None, &[vertex], &mut log);
    let first_wave = (vertex == graph.origin()).then(|| first_wave_cells_unchecked(graph, config));
    Ok(AvalancheReport::finish(
        graph,
        Configuration { heights },
        log,
        first_wave,
    ))
}

/// Membership masks of the two halves obtained by cutting the origin's
/// inter-cell edge.
pub fn split_masks(graph: &CactusGraph) -> (Vec<bool>, Vec<bool>) {
    let split = split_at_origin(graph);
    let mask = |ex: &Extracted| {
        let mut m = vec![false; graph.num_vertices()];
        for v in &ex.to_original {
            m[v.index()] = true;
        }
        m
    };
    (mask(&split.u1), mask(&split.u2))
}

/// Adds a grain at the origin and relaxes wave by wave: the origin side is
/// relaxed with the origin's outside edge cut, then the far side, and so on
/// while grains keep crossing the cut.
pub fn wave_decompose(
    graph: &CactusGraph,
    config: &Configuration,
    origin: VertexId,
) -> Result<AvalancheReport> {
    config.check_stable_for(graph)?;
    if origin != graph.origin() {
        return Err(Error::InvalidArgument(format!(
            "wave decomposition starts at the origin {}, not {origin}",
            graph.origin()
        )));
    }
    let (u1, u2) = split_masks(graph);
    let mut heights = config.heights.clone();
    let mut log = TopplingLog::new(heights.len());
    let o2 = graph.external(origin);
    heights[origin.index()] += 1;
    loop {
        if heights[origin.index()] <= THRESHOLD {
            break;
        }
        relax_fifo(graph, &mut heights, Some(&u1), &[origin], &mut log);
        // the origin's toppling already pushed one grain across the cut
        let Some(o2) = o2 else { break };
        if heights[o2.index()] <= THRESHOLD {
            break;
        }
        relax_fifo(graph, &mut heights, Some(&u2), &[o2], &mut log);
    }
    let final_config = Configuration { heights };
    let first = log.first_wave_cells();
    Ok(AvalancheReport::finish(
        graph,
        final_config,
        log,
        Some(first),
    ))
}

/// First-wave cells for raw stable heights, with the split masks from
/// [`split_masks`] computed once by the caller. Sweeps use this directly.
pub fn first_wave_cells_with(
    graph: &CactusGraph,
    masks: &(Vec<bool>, Vec<bool>),
    heights: &[u8],
) -> BTreeSet<CellId> {
    let origin = graph.origin();
    if heights[origin.index()] < THRESHOLD {
        return BTreeSet::new();
    }
    let mut h = heights.to_vec();
    let mut log = TopplingLog::new(h.len());
    h[origin.index()] += 1;
    relax_fifo(graph, &mut h, Some(&masks.0), &[origin], &mut log);
    if let Some(o2) = graph.external(origin) {
        if h[o2.index()] > THRESHOLD {
            relax_fifo(graph, &mut h, Some(&masks.1), &[o2], &mut log);
        }
    }
    log.toppled_cells()
}

fn first_wave_cells_unchecked(graph: &CactusGraph, config: &Configuration) -> BTreeSet<CellId> {
    wave_decompose(graph, config, graph.origin())
        .map(|r| r.first_wave_cells)
        .unwrap_or_default()
}

/// Cells with a vertex toppling before the origin's second toppling.
pub fn first_wave_cells(
    graph: &CactusGraph,
    config: &Configuration,
    origin: VertexId,
) -> Result<BTreeSet<CellId>> {
    Ok(wave_decompose(graph, config, origin)?.first_wave_cells)
}

/// The same set, assembled from standalone avalanches on the two halves.
pub fn first_wave_cells_by_split(
    graph: &CactusGraph,
    config: &Configuration,
    origin: VertexId,
) -> Result<BTreeSet<CellId>> {
    config.check_stable_for(graph)?;
    if origin != graph.origin() {
        return Err(Error::InvalidArgument(format!(
            "{origin} is not the origin"
        )));
    }
    let split = split_at_origin(graph);
    let mut cells = BTreeSet::new();
    if config.get(origin) < THRESHOLD {
        return Ok(cells);
    }
    let mut side = |ex: &Extracted| -> Result<()> {
        let sub = ex.subtree.graph().expect("non-empty half");
        let restricted = Configuration {
            heights: ex.to_original.iter().map(|&v| config.get(v)).collect(),
        };
        let report = add_and_relax(sub, &restricted, sub.origin())?;
        cells.extend(
            report
                .log
                .sequence
                .iter()
                .map(|v| ex.to_original[v.index()].cell()),
        );
        Ok(())
    };
    side(&split.u1)?;
    if let Some(o2) = graph.external(origin) {
        if config.get(o2) == THRESHOLD {
            side(&split.u2)?;
        }
    }
    Ok(cells)
}

/// Replays `sequence` from `config` plus one grain at `added`; true when every
/// toppling is legal and the result is stable.
pub fn is_legal_sequence(
    graph: &CactusGraph,
    config: &Configuration,
    added: VertexId,
    sequence: &[VertexId],
) -> bool {
    let mut heights: Vec<i32> = config.heights.iter().map(|&h| h as i32).collect();
    heights[added.index()] += 1;
    for &v in sequence {
        if heights[v.index()] <= THRESHOLD as i32 {
            return false;
        }
        heights[v.index()] -= 3;
        for w in graph.neighbors(v) {
            heights[w.index()] += 1;
        }
    }
    heights.iter().all(|&h| h <= THRESHOLD as i32)
}

/// A stable configuration and a vertex that topples in the avalanche from the
/// origin without toppling in the first wave.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub config: Configuration,
    pub vertex: VertexId,
    pub report: AvalancheReport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessOutcome {
    Found {
        witness: Box<Witness>,
        examined: u64,
    },
    NotFound {
        examined: u64,
        exhaustive: bool,
    },
}

impl WitnessOutcome {
    pub fn witness(&self) -> Option<&Witness> {
        match self {
            WitnessOutcome::Found { witness, .. } => Some(witness),
            WitnessOutcome::NotFound { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WitnessSearch {
    /// Maximum number of configurations to examine.
    pub budget: u64,
    pub seed: u64,
    /// Only accept recurrent configurations.
    pub recurrent_only: bool,
}

/// Largest graph searched exhaustively by [`find_multiwave_witness`].
pub const EXHAUSTIVE_WITNESS_VERTICES: usize = 13;

/// Looks for a configuration in which some vertex topples only after the
/// first wave. Exhaustive in index order on small graphs, seeded sampling
/// otherwise.
pub fn find_multiwave_witness(graph: &CactusGraph, search: WitnessSearch) -> WitnessOutcome {
    let n = graph.num_vertices();
    let origin = graph.origin();
    let check = |heights: Vec<u8>| -> Option<Witness> {
        if heights[origin.index()] != THRESHOLD {
            return None;
        }
        let config = Configuration { heights };
        if search.recurrent_only && !recurrence::is_recurrent(graph, &config) {
            return None;
        }
        let report = wave_decompose(graph, &config, origin).ok()?;
        let first: BTreeSet<VertexId> = report.log.first_wave().iter().copied().collect();
        let late = report
            .log
            .sequence
            .iter()
            .copied()
            .find(|v| !first.contains(v))?;
        Some(Witness {
            config,
            vertex: late,
            report,
        })
    };
    if n <= EXHAUSTIVE_WITNESS_VERTICES {
        let total = sweep::num_stable(n);
        let limit = total.min(search.budget);
        let mut heights = vec![1u8; n];
        for i in 0..limit {
            sweep::decode(i, &mut heights);
            if let Some(w) = check(heights.clone()) {
                return WitnessOutcome::Found {
                    witness: Box::new(w),
                    examined: i + 1,
                };
            }
        }
        return WitnessOutcome::NotFound {
            examined: limit,
            exhaustive: limit == total,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    for i in 0..search.budget {
        let heights: Vec<u8> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
        if let Some(w) = check(heights) {
            return WitnessOutcome::Found {
                witness: Box::new(w),
                examined: i + 1,
            };
        }
    }
    WitnessOutcome::NotFound {
        examined: search.budget,
        exhaustive: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_rooted_subtree, TreeShape};

    fn triangle(o: u8, a: u8, b: u8) -> (CactusGraph, Configuration) {
        (
            CactusGraph::ball(0),
            Configuration::new(vec![o, a, b]).unwrap(),
        )
    }

    #[test]
    fn triangle_full_avalanche() {
        let (g, c) = triangle(3, 3, 3);
        let r = add_and_relax(&g, &c, g.origin()).unwrap();
        assert_eq!(r.final_config.heights(), &[3, 2, 2]);
        assert_eq!(r.log.sequence.len(), 3);
        assert!(r.log.per_vertex_counts().values().all(|&n| n == 1));
        assert_eq!((r.vertex_mass, r.cell_mass), (3, 1));
        assert_eq!(r.first_wave_cells, BTreeSet::from([CellId(0)]));
    }

    #[test]
    fn triangle_single_toppling() {
        let (g, c) = triangle(3, 2, 2);
        let r = add_and_relax(&g, &c, g.origin()).unwrap();
        assert_eq!(r.final_config.heights(), &[1, 3, 3]);
        assert_eq!(r.log.sequence, vec![g.origin()]);
    }

    #[test]
    fn below_threshold_adds_a_grain() {
        let g = CactusGraph::ball(1);
        let c = Configuration::uniform(&g, 2);
        for v in g.vertices() {
            let r = add_and_relax(&g, &c, v).unwrap();
            assert!(r.log.sequence.is_empty());
            let mut expect = c.clone();
            expect.set(v, 3);
            assert_eq!(r.final_config, expect);
            assert!(r.first_wave_cells.is_empty());
        }
    }

    #[test]
    fn unstable_input_is_rejected() {
        let g = CactusGraph::ball(0);
        let c = Configuration::new(vec![4, 1, 1]).unwrap();
        assert!(matches!(
            add_and_relax(&g, &c, g.origin()),
            Err(Error::Unstable { .. })
        ));
        assert!(Configuration::new(vec![0, 1, 1]).is_err());
    }

    #[test]
    fn no_waves_below_threshold() {
        let g = CactusGraph::ball(2);
        let mut c = Configuration::uniform(&g, 3);
        c.set(g.origin(), 2);
        let r = wave_decompose(&g, &c, g.origin()).unwrap();
        assert_eq!(r.log.num_waves(), 0);
        assert!(r.log.sequence.is_empty());
        assert!(first_wave_cells_by_split(&g, &c, g.origin())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn one_wave_when_far_side_is_low() {
        let g = CactusGraph::ball(2);
        let mut c = Configuration::uniform(&g, 3);
        let o2 = g.external(g.origin()).unwrap();
        c.set(o2, 2);
        let r = wave_decompose(&g, &c, g.origin()).unwrap();
        assert_eq!(r.log.num_waves(), 1);
        let (u1, _) = split_masks(&g);
        assert!(r.log.sequence.iter().all(|v| u1[v.index()]));
        // the origin side is a rooted subtree of height-3 vertices; all of it topples
        assert_eq!(r.log.toppled_vertices().len(), 21);
    }

    #[test]
    fn both_sides_union() {
        let g = CactusGraph::ball(1);
        let c = Configuration::uniform(&g, 3);
        let direct = first_wave_cells(&g, &c, g.origin()).unwrap();
        let split = first_wave_cells_by_split(&g, &c, g.origin()).unwrap();
        assert_eq!(direct, split);
        assert_eq!(direct.len(), 4);
    }

    #[test]
    fn wave_marks_are_origin_topplings() {
        let g = CactusGraph::ball(1);
        let c = Configuration::uniform(&g, 3);
        let r = wave_decompose(&g, &c, g.origin()).unwrap();
        for &m in &r.log.wave_marks {
            assert_eq!(r.log.sequence[m], g.origin());
        }
        assert_eq!(r.log.wave_marks[0], 0);
        assert!(is_legal_sequence(&g, &c, g.origin(), &r.log.sequence));
    }

    #[test]
    fn json_roundtrip() {
        let g = CactusGraph::ball(1);
        let c = Configuration::from_index(12, 12345);
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let back = Configuration::from_json(&g, &serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, c);
        let mut partial = c.to_json();
        partial.heights.remove("0:0");
        assert!(Configuration::from_json(&g, &partial).is_err());
    }

    #[test]
    fn no_witness_on_small_trees() {
        let search = WitnessSearch {
            budget: u64::MAX,
            seed: 0,
            recurrent_only: false,
        };
        let out = find_multiwave_witness(&CactusGraph::ball(0), search);
        assert_eq!(
            out,
            WitnessOutcome::NotFound {
                examined: 27,
                exhaustive: true
            }
        );
        let sub = build_rooted_subtree(&TreeShape::path(3)).unwrap();
        assert!(find_multiwave_witness(sub.graph().unwrap(), search)
            .witness()
            .is_none());
    }

    #[test]
    fn witness_on_small_ball() {
        let g = CactusGraph::ball(1);
        let search = WitnessSearch {
            budget: u64::MAX,
            seed: 0,
            recurrent_only: true,
        };
        let w = find_multiwave_witness(&g, search)
            .witness()
            .cloned()
            .expect("a witness exists");
        let r = add_and_relax(&g, &w.config, g.origin()).unwrap();
        assert!(r.log.count(w.vertex) > 0);
        assert!(!w.report.log.first_wave().contains(&w.vertex));
    }

    #[test]
    fn zero_budget_finds_nothing() {
        let search = WitnessSearch {
            budget: 0,
            seed: 7,
            recurrent_only: false,
        };
        let out = find_multiwave_witness(&CactusGraph::ball(2), search);
        assert_eq!(
            out,
            WitnessOutcome::NotFound {
                examined: 0,
                exhaustive: false
            }
        );
    }
}
