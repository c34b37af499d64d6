//! Filling rules: cell-by-cell descriptions of the recurrent configurations
//! whose avalanche from the origin topples exactly a given cluster.
//!
//! Every cluster cell gets one of a few height patterns, chosen by its class,
//! and each pattern puts a requirement on the radicals hanging off the cell's
//! free vertices. On a full cactus the first wave is described the same way,
//! plus the liberty rule: some radical attached to a height-3 vertex joined to
//! the origin through height-3 vertices must be strong.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::engine::{add_and_relax, first_wave_cells_with, split_masks, Configuration, THRESHOLD};
use crate::error::{Error, Result};
use crate::radicals::{
    census_recursive, classify_radical, classify_region, RadicalCensus, RadicalClass,
};
use crate::recurrence::region_burns;
use crate::sweep;
use crate::topology::{
    infinite_clusters, CactusGraph, CellClass, CellId, ClusterShape, DecoratedRootedSubtree,
    Extracted, VertexId,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SlotRequirement {
    MustBeStopper,
    MustBeStrong,
    /// Both radicals allowed and at least one strong; always on a pair of slots.
    PairRule322,
}

impl SlotRequirement {
    fn admits_alone(self, class: RadicalClass) -> bool {
        match self {
            SlotRequirement::MustBeStopper => class.stopper,
            SlotRequirement::MustBeStrong => class.is_strong(),
            SlotRequirement::PairRule322 => class.is_allowed(),
        }
    }
}

/// One admissible height pattern for a cell, as heights of locals 0, 1, 2,
/// with the requirement on the radical at each free local.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellOption {
    pub heights: [u8; 3],
    pub requirements: Vec<(u8, SlotRequirement)>,
}

impl CellOption {
    pub fn is_pair(&self) -> bool {
        self.requirements
            .iter()
            .any(|(_, r)| *r == SlotRequirement::PairRule322)
    }
}

fn option(heights: [u8; 3], requirements: &[(u8, SlotRequirement)]) -> CellOption {
    CellOption {
        heights,
        requirements: requirements.to_vec(),
    }
}

/// The patterns for a cell whose children in the cluster sit at `child_locals`.
pub fn cell_options(class: CellClass, child_locals: &[u8]) -> Vec<CellOption> {
    use SlotRequirement::*;
    match class {
        CellClass::Internal => vec![
            option([3, 3, 3], &[]),
            option([3, 3, 2], &[]),
            option([3, 2, 3], &[]),
        ],
        CellClass::Medial => {
            let a = child_locals[0];
            let b = 3 - a;
            let at = |ha: u8, hb: u8| {
                let mut h = [3u8; 3];
                h[a as usize] = ha;
                h[b as usize] = hb;
                h
            };
            vec![
                option(at(3, 3), &[(b, MustBeStopper)]),
                option(at(3, 1), &[(b, MustBeStrong)]),
                option(at(3, 2), &[(b, MustBeStopper)]),
                option(at(2, 3), &[(b, MustBeStopper)]),
            ]
        }
        CellClass::Terminal => {
            let stop = [(1, MustBeStopper), (2, MustBeStopper)];
            vec![
                option([3, 3, 3], &stop),
                option([3, 3, 2], &stop),
                option([3, 2, 3], &stop),
                option([3, 3, 1], &[(1, MustBeStopper), (2, MustBeStrong)]),
                option([3, 1, 3], &[(1, MustBeStrong), (2, MustBeStopper)]),
                option([3, 2, 2], &[(1, PairRule322), (2, PairRule322)]),
                option([3, 2, 1], &[(1, MustBeStrong), (2, MustBeStrong)]),
                option([3, 1, 2], &[(1, MustBeStrong), (2, MustBeStrong)]),
            ]
        }
    }
}

/// Weight of a cell's options when each pair-rule cell counts 5.
pub fn class_weight(class: CellClass) -> u32 {
    match class {
        CellClass::Internal => 3,
        CellClass::Medial => 4,
        CellClass::Terminal => 12,
    }
}

/// A choice of pattern for every cluster cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FillingAssignment {
    pub cell_configs: BTreeMap<CellId, [u8; 3]>,
    pub slot_requirements: BTreeMap<usize, SlotRequirement>,
    /// Number of terminal cells filled 3-2-2.
    pub s: usize,
}

/// The per-slot radicals of a cluster, and the patterns available per cell.
struct Layout {
    slot_of_vertex: HashMap<VertexId, usize>,
    options: Vec<(CellId, Vec<CellOption>)>,
}

fn child_locals(graph: &CactusGraph, cluster: &ClusterShape, c: CellId) -> Vec<u8> {
    [1u8, 2]
        .into_iter()
        .filter(|&l| {
            graph
                .external(c.vertex(l))
                .is_some_and(|w| cluster.contains(w.cell()))
        })
        .collect()
}

fn layout(graph: &CactusGraph, cluster: &ClusterShape) -> Layout {
    let slot_of_vertex = cluster
        .radical_slots()
        .iter()
        .map(|s| (s.vertex, s.id))
        .collect();
    let options = cluster
        .cells()
        .iter()
        .map(|&c| {
            let class = cluster.class_of(c).expect("cluster cell");
            (c, cell_options(class, &child_locals(graph, cluster, c)))
        })
        .collect();
    Layout {
        slot_of_vertex,
        options,
    }
}

fn origin_slot(graph: &CactusGraph, layout: &Layout) -> Option<usize> {
    layout.slot_of_vertex.get(&graph.origin()).copied()
}

/// The Cartesian product of the per-cell patterns, with slot requirements.
pub fn fill_cluster(graph: &CactusGraph, cluster: &ClusterShape) -> Vec<FillingAssignment> {
    let lay = layout(graph, cluster);
    let mut out = Vec::new();
    let mut choice = vec![0usize; lay.options.len()];
    loop {
        let mut cell_configs = BTreeMap::new();
        let mut slot_requirements = BTreeMap::new();
        let mut s = 0;
        for (k, (c, opts)) in lay.options.iter().enumerate() {
            let opt = &opts[choice[k]];
            cell_configs.insert(*c, opt.heights);
            s += opt.is_pair() as usize;
            for &(l, req) in &opt.requirements {
                slot_requirements.insert(lay.slot_of_vertex[&c.vertex(l)], req);
            }
        }
        if let Some(o) = origin_slot(graph, &lay) {
            slot_requirements.insert(o, SlotRequirement::MustBeStopper);
        }
        out.push(FillingAssignment {
            cell_configs,
            slot_requirements,
            s,
        });
        // odometer over the option indices
        let mut k = 0;
        loop {
            if k == choice.len() {
                return out;
            }
            choice[k] += 1;
            if choice[k] < lay.options[k].1.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// `3^i 4^m 12^t`.
pub fn effective_weight(cluster: &ClusterShape) -> BigUint {
    let (i, m, t) = cluster.class_counts();
    BigUint::from(3u32).pow(i as u32)
        * BigUint::from(4u32).pow(m as u32)
        * BigUint::from(12u32).pow(t as u32)
}

/// `Σ 5^s` over the fillings of a cluster.
pub fn filling_weight_sum(fillings: &[FillingAssignment]) -> BigUint {
    fillings
        .iter()
        .map(|f| BigUint::from(5u32).pow(f.s as u32))
        .sum()
}

/// Slots whose attachment vertex is joined to the origin through height-3
/// cluster vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LibertyView {
    pub liberties: BTreeSet<usize>,
    pub count: usize,
}

fn reached_from_origin(
    graph: &CactusGraph,
    cluster: &ClusterShape,
    height: impl Fn(VertexId) -> u8,
) -> HashSet<VertexId> {
    let o = graph.origin();
    let mut seen = HashSet::new();
    if height(o) != THRESHOLD {
        return seen;
    }
    seen.insert(o);
    let mut queue = VecDeque::from([o]);
    while let Some(v) = queue.pop_front() {
        for w in graph.neighbors(v) {
            if cluster.contains(w.cell()) && height(w) == THRESHOLD && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen
}

fn liberties_by(
    graph: &CactusGraph,
    cluster: &ClusterShape,
    height: impl Fn(VertexId) -> u8,
) -> LibertyView {
    let reached = reached_from_origin(graph, cluster, height);
    let liberties: BTreeSet<usize> = cluster
        .radical_slots()
        .iter()
        .filter(|s| reached.contains(&s.vertex))
        .map(|s| s.id)
        .collect();
    LibertyView {
        count: liberties.len(),
        liberties,
    }
}

pub fn liberties_of(
    graph: &CactusGraph,
    cluster: &ClusterShape,
    assignment: &FillingAssignment,
) -> LibertyView {
    liberties_by(graph, cluster, |v| {
        assignment.cell_configs[&v.cell()][v.local() as usize]
    })
}

/// Fillings for the first wave on a full cactus, each with the slots at which
/// a strong radical satisfies the liberty rule.
pub fn extended_fill(
    graph: &CactusGraph,
    cluster: &ClusterShape,
) -> Vec<(FillingAssignment, LibertyView)> {
    fill_cluster(graph, cluster)
        .into_iter()
        .map(|f| {
            let l = liberties_of(graph, cluster, &f);
            (f, l)
        })
        .collect()
}

/// The radical hanging off one slot, located in the host graph.
struct SlotRadical {
    /// `None` for the empty radical.
    region: Option<(Vec<bool>, VertexId, Extracted)>,
}

fn slot_radicals(graph: &CactusGraph, cluster: &ClusterShape) -> Vec<SlotRadical> {
    cluster
        .radical_slots()
        .iter()
        .map(|&slot| {
            let region = graph.external(slot.vertex).map(|root| {
                let ex = graph.hanging_subtree(root);
                let mut mask = vec![false; graph.num_vertices()];
                for v in &ex.to_original {
                    mask[v.index()] = true;
                }
                (mask, root, ex)
            });
            SlotRadical { region }
        })
        .collect()
}

/// Evaluates the filling rules against concrete configurations.
pub struct RuleChecker<'g> {
    graph: &'g CactusGraph,
    cluster: ClusterShape,
    layout: Layout,
    radicals: Vec<SlotRadical>,
}

impl<'g> RuleChecker<'g> {
    pub fn new(graph: &'g CactusGraph, cluster: &ClusterShape) -> Self {
        RuleChecker {
            graph,
            cluster: cluster.clone(),
            layout: layout(graph, cluster),
            radicals: slot_radicals(graph, cluster),
        }
    }

    pub fn cluster(&self) -> &ClusterShape {
        &self.cluster
    }

    fn classify(&self, heights: &[u8], slot: usize) -> RadicalClass {
        match &self.radicals[slot].region {
            None => RadicalClass::EMPTY,
            Some((mask, root, _)) => classify_region(self.graph, heights, mask, *root),
        }
    }

    /// The requirement at every slot, if each cluster cell matches a pattern.
    fn requirements(&self, heights: &[u8]) -> Option<Vec<SlotRequirement>> {
        let mut reqs = vec![SlotRequirement::MustBeStopper; self.radicals.len()];
        for (c, opts) in &self.layout.options {
            let base = c.index() * 3;
            let h = [heights[base], heights[base + 1], heights[base + 2]];
            let opt = opts.iter().find(|o| o.heights == h)?;
            for &(l, req) in &opt.requirements {
                reqs[self.layout.slot_of_vertex[&c.vertex(l)]] = req;
            }
        }
        Some(reqs)
    }

    /// True when the configuration follows the (extended) filling rules, and
    /// the liberty rule too if `liberty` is set.
    pub fn satisfies(&self, heights: &[u8], liberty: bool) -> bool {
        let Some(reqs) = self.requirements(heights) else {
            return false;
        };
        let classes: Vec<RadicalClass> = (0..self.radicals.len())
            .map(|s| self.classify(heights, s))
            .collect();
        if !requirements_hold(&self.cluster, &reqs, &classes) {
            return false;
        }
        if liberty {
            let lib = liberties_by(self.graph, &self.cluster, |v| heights[v.index()]);
            if !lib.liberties.iter().any(|&s| classes[s].is_strong()) {
                return false;
            }
        }
        true
    }

    /// Every configuration produced by expanding each filling's slot
    /// requirements into concrete radicals, as sorted sweep indices.
    pub fn generate(&self, liberty: bool) -> Result<Vec<u64>> {
        sweep::check_size(self.graph.num_vertices())?;
        // all radicals per slot, with their classes, as (vertices, heights, class)
        let per_slot: Vec<Vec<(Vec<u8>, RadicalClass)>> = self
            .radicals
            .iter()
            .map(|r| match &r.region {
                None => Ok(vec![(Vec::new(), RadicalClass::EMPTY)]),
                Some((_, _, ex)) => {
                    let sub = &ex.subtree;
                    let n = sub.num_vertices();
                    (0..sweep::num_stable(n))
                        .map(|i| {
                            let c = Configuration::from_index(n, i);
                            let class = classify_radical(sub, &c)?;
                            Ok((c.heights().to_vec(), class))
                        })
                        .filter(|r| r.as_ref().map_or(true, |(_, class)| class.is_allowed()))
                        .collect::<Result<Vec<_>>>()
                }
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for f in fill_cluster(self.graph, &self.cluster) {
            let mut heights = vec![0u8; self.graph.num_vertices()];
            for (c, h) in &f.cell_configs {
                heights[c.index() * 3..c.index() * 3 + 3].copy_from_slice(h);
            }
            let reqs: Vec<SlotRequirement> = (0..self.radicals.len())
                .map(|s| f.slot_requirements[&s])
                .collect();
            let lib = liberties_of(self.graph, &self.cluster, &f);
            let candidates: Vec<Vec<usize>> = (0..self.radicals.len())
                .map(|s| {
                    (0..per_slot[s].len())
                        .filter(|&k| reqs[s].admits_alone(per_slot[s][k].1))
                        .collect()
                })
                .collect();
            let mut pick = vec![0usize; candidates.len()];
            if candidates.iter().any(Vec::is_empty) {
                continue;
            }
            'product: loop {
                let classes: Vec<RadicalClass> = (0..pick.len())
                    .map(|s| per_slot[s][candidates[s][pick[s]]].1)
                    .collect();
                let ok = requirements_hold(&self.cluster, &reqs, &classes)
                    && (!liberty || lib.liberties.iter().any(|&s| classes[s].is_strong()));
                if ok {
                    for (s, r) in self.radicals.iter().enumerate() {
                        if let Some((_, _, ex)) = &r.region {
                            let h = &per_slot[s][candidates[s][pick[s]]].0;
                            for (i, v) in ex.to_original.iter().enumerate() {
                                heights[v.index()] = h[i];
                            }
                        }
                    }
                    out.push(sweep::encode(&heights));
                }
                let mut k = 0;
                loop {
                    if k == pick.len() {
                        break 'product;
                    }
                    pick[k] += 1;
                    if pick[k] < candidates[k].len() {
                        break;
                    }
                    pick[k] = 0;
                    k += 1;
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Exact number of configurations satisfying the rules, from the slot
    /// censuses: `Σ_fillings (A − B)`, with `A` the product of admissible
    /// radical counts and `B` the part in which every liberty is weak.
    pub fn count_by_rules(&self, liberty: bool) -> BigUint {
        let censuses: Vec<RadicalCensus> = self
            .radicals
            .iter()
            .map(|r| match &r.region {
                None => RadicalCensus::empty(),
                Some((_, _, ex)) => census_recursive(&ex.subtree),
            })
            .collect();
        let mut total = BigUint::zero();
        for f in fill_cluster(self.graph, &self.cluster) {
            let lib = liberties_of(self.graph, &self.cluster, &f);
            let mut all = BigUint::one();
            let mut weak_libs = BigUint::one();
            let mut done_pairs = BTreeSet::new();
            for (&s, &req) in &f.slot_requirements {
                let c = &censuses[s];
                let factor = match req {
                    SlotRequirement::MustBeStopper => c.n_stopper.clone(),
                    SlotRequirement::MustBeStrong => c.n_strong.clone(),
                    SlotRequirement::PairRule322 => {
                        if !done_pairs.insert(s) {
                            continue;
                        }
                        let t = partner(&self.cluster, s, &f);
                        done_pairs.insert(t);
                        let d = &censuses[t];
                        &c.n_strong * &d.n_strong
                            + &c.n_weak * &d.n_strong
                            + &c.n_strong * &d.n_weak
                    }
                };
                let restricted = if lib.liberties.contains(&s) {
                    // liberty slots only carry stopper requirements
                    debug_assert_eq!(req, SlotRequirement::MustBeStopper);
                    c.n_weak_stopper()
                } else {
                    factor.clone()
                };
                all *= factor;
                weak_libs *= restricted;
            }
            total += if liberty { all - weak_libs } else { all };
        }
        total
    }
}

fn partner(cluster: &ClusterShape, slot: usize, f: &FillingAssignment) -> usize {
    let cell = cluster.radical_slots()[slot].vertex.cell();
    cluster
        .radical_slots()
        .iter()
        .find(|o| {
            o.id != slot
                && o.vertex.cell() == cell
                && f.slot_requirements[&o.id] == SlotRequirement::PairRule322
        })
        .map(|o| o.id)
        .expect("pair-rule slots come in pairs")
}

fn requirements_hold(
    cluster: &ClusterShape,
    reqs: &[SlotRequirement],
    classes: &[RadicalClass],
) -> bool {
    for (s, (&req, &class)) in reqs.iter().zip(classes).enumerate() {
        if !req.admits_alone(class) {
            return false;
        }
        if req == SlotRequirement::PairRule322 && !class.is_strong() {
            let cell = cluster.radical_slots()[s].vertex.cell();
            let other = cluster
                .radical_slots()
                .iter()
                .find(|o| {
                    o.id != s
                        && o.vertex.cell() == cell
                        && reqs[o.id] == SlotRequirement::PairRule322
                })
                .expect("pair-rule slots come in pairs");
            if !classes[other.id].is_strong() {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TheoremReport {
    pub cluster: Vec<u32>,
    /// Configurations produced by the rules.
    pub generated: usize,
    /// Configurations found by brute force.
    pub brute_force: usize,
    /// Brute-force configurations the rules miss.
    pub missing: usize,
    /// Rule configurations brute force rejects.
    pub extra: usize,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.missing == 0 && self.extra == 0 && self.generated == self.brute_force
    }
}

fn cluster_ids(cluster: &ClusterShape) -> Vec<u32> {
    cluster.cells().iter().map(|c| c.0).collect()
}

fn compare_sets(cluster: &ClusterShape, generated: &[u64], brute: &[u64]) -> TheoremReport {
    let g: HashSet<u64> = generated.iter().copied().collect();
    let b: HashSet<u64> = brute.iter().copied().collect();
    TheoremReport {
        cluster: cluster_ids(cluster),
        generated: g.len(),
        brute_force: b.len(),
        missing: b.difference(&g).count(),
        extra: g.difference(&b).count(),
    }
}

/// On a rooted subtree: the configurations generated by the filling rules
/// are exactly the recurrent ones whose avalanche from the root topples
/// exactly the cells of `cluster`.
pub fn verify_filling_theorem(
    subtree: &DecoratedRootedSubtree,
    cluster: &ClusterShape,
) -> Result<TheoremReport> {
    let g = subtree
        .graph()
        .ok_or_else(|| Error::InvalidArgument("the empty subtree has no clusters".into()))?;
    let checker = RuleChecker::new(g, cluster);
    let generated = checker.generate(false)?;
    let target = cluster.cells().clone();
    let mut brute = sweep::fold(
        g.num_vertices(),
        None,
        Vec::new,
        |acc, i, h| {
            if !region_burns(g, h, None, None) || h[g.origin().index()] != THRESHOLD {
                return;
            }
            let c = Configuration::new(h.to_vec()).expect("positive heights");
            let r = add_and_relax(g, &c, g.origin()).expect("stable input");
            if r.log.toppled_cells() == target {
                acc.push(i);
            }
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    )?;
    brute.sort_unstable();
    Ok(compare_sets(cluster, &generated, &brute))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FirstWaveReport {
    pub cluster: Vec<u32>,
    /// Configurations on both sides of the equivalence.
    pub both: u64,
    pub rules_only: u64,
    pub brute_only: u64,
    /// Size of the set generated from the fillings.
    pub generated: usize,
    /// Exact count from the slot censuses.
    #[serde(serialize_with = "crate::text::display")]
    pub counted: BigUint,
}

impl FirstWaveReport {
    pub fn passed(&self) -> bool {
        self.rules_only == 0
            && self.brute_only == 0
            && self.generated as u64 == self.both
            && self.counted == BigUint::from(self.both)
    }
}

/// Checks, for every stable configuration of `graph` and each given cluster,
/// that being recurrent with first-wave cells equal to the cluster is
/// equivalent to satisfying the extended filling rules and the liberty rule.
pub fn verify_first_wave_theorem(
    graph: &CactusGraph,
    clusters: &[ClusterShape],
    workers: Option<usize>,
) -> Result<Vec<FirstWaveReport>> {
    let checkers: Vec<RuleChecker> = clusters
        .iter()
        .map(|c| RuleChecker::new(graph, c))
        .collect();
    let masks = split_masks(graph);
    let k = clusters.len();
    let tallies = sweep::fold(
        graph.num_vertices(),
        workers,
        || vec![[0u64; 3]; k],
        |acc, _, h| {
            let recurrent = region_burns(graph, h, None, None);
            let wave = if recurrent {
                first_wave_cells_with(graph, &masks, h)
            } else {
                BTreeSet::new()
            };
            for (j, chk) in checkers.iter().enumerate() {
                let brute = recurrent && &wave == chk.cluster().cells();
                let rules = chk.satisfies(h, true);
                match (brute, rules) {
                    (true, true) => acc[j][0] += 1,
                    (false, true) => acc[j][1] += 1,
                    (true, false) => acc[j][2] += 1,
                    (false, false) => {}
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for t in 0..3 {
                    x[t] += y[t];
                }
            }
            a
        },
    )?;
    checkers
        .iter()
        .zip(tallies)
        .map(|(chk, t)| {
            Ok(FirstWaveReport {
                cluster: cluster_ids(chk.cluster()),
                both: t[0],
                rules_only: t[1],
                brute_only: t[2],
                generated: chk.generate(true)?.len(),
                counted: chk.count_by_rules(true),
            })
        })
        .collect()
}

/// Number of configurations whose first wave topples exactly `cluster`, by
/// the rules.
pub fn first_wave_count_by_rules(graph: &CactusGraph, cluster: &ClusterShape) -> BigUint {
    RuleChecker::new(graph, cluster).count_by_rules(true)
}

/// Limiting weak-to-strong ratio of deep radicals.
pub fn limit_x() -> BigRational {
    BigRational::from_integer(2.into())
}

/// Limiting fraction of stoppers that are weak: `1 − 7/20`.
pub fn limit_weak_stopper_fraction() -> BigRational {
    BigRational::new(13.into(), 20.into())
}

/// `Σ w(f) z^ℓ(f)` over the fillings of a cluster, where a 3-2-2 terminal
/// weighs `1 + 2x` and every other pattern weighs 1. Computed cell by cell:
/// a cell is reached when its origin-facing vertex is joined to the origin
/// through height-3 vertices.
pub fn liberty_polynomial(
    graph: &CactusGraph,
    cluster: &ClusterShape,
    x: &BigRational,
    z: &BigRational,
) -> BigRational {
    let pair = BigRational::one() + BigRational::from_integer(2.into()) * x;
    fn cell(
        graph: &CactusGraph,
        cluster: &ClusterShape,
        c: CellId,
        reached: bool,
        pair: &BigRational,
        z: &BigRational,
    ) -> BigRational {
        let class = cluster.class_of(c).expect("cluster cell");
        let kids = child_locals(graph, cluster, c);
        let mut total = BigRational::zero();
        for opt in cell_options(class, &kids) {
            let mut term = if opt.is_pair() {
                pair.clone()
            } else {
                BigRational::one()
            };
            for l in 1..3u8 {
                let through = reached && opt.heights[l as usize] == THRESHOLD;
                if kids.contains(&l) {
                    let child = graph.external(c.vertex(l)).expect("child").cell();
                    term *= cell(graph, cluster, child, through, pair, z);
                } else if through {
                    term *= z;
                }
            }
            total += term;
        }
        total
    }
    let oc = graph.origin_cell();
    let mut p = cell(graph, cluster, oc, true, &pair, z);
    match graph.opposite_cell().filter(|&d| cluster.contains(d)) {
        Some(d) => p *= cell(graph, cluster, d, true, &pair, z),
        // the radical across the origin is always a liberty
        None => p *= z,
    }
    p
}

/// `φ(C) = Σ 5^s (1 − (13/20)^ℓ) / Σ 5^s`, with the limiting ratios.
pub fn phi_of_cluster(graph: &CactusGraph, cluster: &ClusterShape) -> BigRational {
    phi_with(graph, cluster, &limit_x(), &limit_weak_stopper_fraction())
}

/// `φ(C)` for radicals with weak-to-strong ratio `x` and weak stopper fraction `q`.
pub fn phi_with(
    graph: &CactusGraph,
    cluster: &ClusterShape,
    x: &BigRational,
    q: &BigRational,
) -> BigRational {
    let all = liberty_polynomial(graph, cluster, x, &BigRational::one());
    let weak = liberty_polynomial(graph, cluster, x, q);
    BigRational::one() - weak / all
}

/// Weighted fraction of fillings with no liberty.
pub fn zero_liberty_fraction(graph: &CactusGraph, cluster: &ClusterShape) -> BigRational {
    let x = limit_x();
    liberty_polynomial(graph, cluster, &x, &BigRational::zero())
        / liberty_polynomial(graph, cluster, &x, &BigRational::one())
}

/// Largest cluster size accepted by [`phi_n`].
pub const MAX_PHI_CELLS: usize = 8;

/// `φ_n`: the average of `φ(C)` over clusters of `n` cells, weighted by `3^i 4^m 12^t`.
pub fn phi_n(n: usize) -> Result<BigRational> {
    if n > MAX_PHI_CELLS {
        return Err(Error::SizeGuard {
            what: "phi cluster",
            size: n,
            limit: MAX_PHI_CELLS,
        });
    }
    let (g, clusters) = infinite_clusters(n)?;
    let mut num = BigRational::zero();
    let mut den = BigRational::zero();
    for c in &clusters {
        let w = BigRational::from_integer(BigInt::from(effective_weight(c)));
        num += phi_of_cluster(&g, c) * &w;
        den += w;
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RepairReport {
    /// Weighted count of zero-liberty fillings.
    #[serde(serialize_with = "crate::text::display")]
    pub zero_weight: BigUint,
    /// Weighted count of fillings with at least one liberty.
    #[serde(serialize_with = "crate::text::display")]
    pub positive_weight: BigUint,
    /// Weighted count of the distinct repaired fillings.
    #[serde(serialize_with = "crate::text::display")]
    pub image_weight: BigUint,
    /// Every repaired filling has a liberty.
    pub images_have_liberties: bool,
    /// Zero-liberty fillings that differ away from the repaired cell have
    /// disjoint images.
    pub disjoint: bool,
}

impl RepairReport {
    /// Images weigh exactly 5/7 of the zero-liberty fillings, so those are at
    /// most 7/12 of all fillings.
    pub fn holds(&self) -> bool {
        self.images_have_liberties
            && self.disjoint
            && &self.image_weight * 7u32 == &self.zero_weight * 5u32
            && &self.image_weight <= &self.positive_weight
    }
}

const REPAIRS: [[u8; 3]; 5] = [[3, 3, 3], [3, 3, 2], [3, 2, 3], [3, 3, 1], [3, 1, 3]];

/// Repairs each zero-liberty filling by refilling the first terminal cell
/// reached from the origin with one of five liberty-creating patterns.
pub fn repair_map(graph: &CactusGraph, cluster: &ClusterShape) -> RepairReport {
    let fillings = fill_cluster(graph, cluster);
    let weight = |f: &FillingAssignment| BigUint::from(5u32).pow(f.s as u32);
    let mut zero_weight = BigUint::zero();
    let mut positive_weight = BigUint::zero();
    let mut images_have_liberties = true;
    let mut owner: HashMap<Vec<(CellId, [u8; 3])>, Vec<(CellId, [u8; 3])>> = HashMap::new();
    let mut disjoint = true;
    for f in &fillings {
        if liberties_of(graph, cluster, f).count > 0 {
            positive_weight += weight(f);
            continue;
        }
        zero_weight += weight(f);
        let Some(target) = first_reached_terminal(graph, cluster, f) else {
            images_have_liberties = false;
            continue;
        };
        let mut key: Vec<(CellId, [u8; 3])> =
            f.cell_configs.iter().map(|(c, h)| (*c, *h)).collect();
        key.retain(|(c, _)| *c != target);
        for r in REPAIRS {
            let mut img = f.clone();
            if img.cell_configs.insert(target, r) == Some([3, 2, 2]) {
                img.s -= 1;
            }
            if liberties_of(graph, cluster, &img).count == 0 {
                images_have_liberties = false;
            }
            let image: Vec<(CellId, [u8; 3])> =
                img.cell_configs.iter().map(|(c, h)| (*c, *h)).collect();
            match owner.get(&image) {
                Some(k) if *k != key => disjoint = false,
                _ => {
                    owner.insert(image, key.clone());
                }
            }
        }
    }
    let fill_weight: HashMap<Vec<(CellId, [u8; 3])>, BigUint> = fillings
        .iter()
        .map(|f| {
            (
                f.cell_configs.iter().map(|(c, h)| (*c, *h)).collect(),
                weight(f),
            )
        })
        .collect();
    let image_weight = owner
        .keys()
        .map(|k| fill_weight.get(k).cloned().unwrap_or_default())
        .sum();
    RepairReport {
        zero_weight,
        positive_weight,
        image_weight,
        images_have_liberties,
        disjoint,
    }
}

fn first_reached_terminal(
    graph: &CactusGraph,
    cluster: &ClusterShape,
    f: &FillingAssignment,
) -> Option<CellId> {
    let reached = reached_from_origin(graph, cluster, |v| {
        f.cell_configs[&v.cell()][v.local() as usize]
    });
    let mut cells: Vec<CellId> = reached
        .iter()
        .map(|v| v.cell())
        .filter(|&c| cluster.class_of(c) == Some(CellClass::Terminal))
        .collect();
    cells.sort();
    cells.first().copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_rooted_subtree, enumerate_clusters, TreeShape};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn terminal_cell_has_eight_patterns() {
        let (g, c) = infinite_clusters(1).unwrap();
        let f = fill_cluster(&g, &c[0]);
        assert_eq!(f.len(), 8);
        assert_eq!(filling_weight_sum(&f), BigUint::from(12u32));
        assert_eq!(effective_weight(&c[0]), BigUint::from(12u32));
        assert!(f.iter().all(|a| a.cell_configs.values().all(|h| h[0] == 3)));
    }

    #[test]
    fn class_weights() {
        assert_eq!(
            cell_options(CellClass::Internal, &[1, 2]).len() as u32,
            class_weight(CellClass::Internal)
        );
        assert_eq!(
            cell_options(CellClass::Medial, &[2]).len() as u32,
            class_weight(CellClass::Medial)
        );
        let w: u32 = cell_options(CellClass::Terminal, &[])
            .iter()
            .map(|o| if o.is_pair() { 5 } else { 1 })
            .sum();
        assert_eq!(w, class_weight(CellClass::Terminal));
    }

    #[test]
    fn two_cell_weights() {
        let (g, c) = infinite_clusters(2).unwrap();
        let mut weights: Vec<u32> = c
            .iter()
            .map(|k| effective_weight(k).try_into().unwrap())
            .collect();
        weights.sort();
        assert_eq!(weights, vec![48, 48, 144]);
        for k in &c {
            let f = fill_cluster(&g, k);
            assert_eq!(filling_weight_sum(&f), effective_weight(k));
            if !k.origin_opposite_flag() {
                assert_eq!(f.len(), 32);
            }
        }
    }

    #[test]
    fn weight_consistency_up_to_six_cells() {
        for n in 1..=6 {
            let (g, clusters) = infinite_clusters(n).unwrap();
            for c in &clusters {
                assert_eq!(
                    filling_weight_sum(&fill_cluster(&g, c)),
                    effective_weight(c)
                );
            }
        }
    }

    #[test]
    fn liberty_examples() {
        let (g, c) = infinite_clusters(1).unwrap();
        let fill = |h: [u8; 3]| {
            fill_cluster(&g, &c[0])
                .into_iter()
                .find(|f| f.cell_configs[&CellId(0)] == h)
                .unwrap()
        };
        assert_eq!(liberties_of(&g, &c[0], &fill([3, 3, 3])).count, 3);
        let l = liberties_of(&g, &c[0], &fill([3, 2, 1]));
        assert_eq!(l.count, 1);
        let o_slot = c[0]
            .radical_slots()
            .iter()
            .find(|s| s.vertex == g.origin())
            .unwrap()
            .id;
        assert!(l.liberties.contains(&o_slot));
    }

    #[test]
    fn zero_liberties_when_blocked() {
        let (g, clusters) = infinite_clusters(2).unwrap();
        let both = clusters.iter().find(|c| c.origin_opposite_flag()).unwrap();
        let blocked = fill_cluster(&g, both)
            .into_iter()
            .find(|f| f.cell_configs.values().all(|h| *h == [3, 2, 1]))
            .unwrap();
        assert_eq!(liberties_of(&g, both, &blocked).count, 0);
    }

    #[test]
    fn polynomial_matches_enumeration() {
        for n in 1..=4 {
            let (g, clusters) = infinite_clusters(n).unwrap();
            for c in &clusters {
                let fillings = fill_cluster(&g, c);
                let z = r(13, 20);
                let direct: BigRational = fillings
                    .iter()
                    .map(|f| {
                        let l = liberties_of(&g, c, f).count as i32;
                        BigRational::from_integer(BigInt::from(5u32).pow(f.s as u32)) * z.pow(l)
                    })
                    .sum();
                assert_eq!(liberty_polynomial(&g, c, &limit_x(), &z), direct);
            }
        }
    }

    #[test]
    fn phi_single_cell() {
        let (g, c) = infinite_clusters(1).unwrap();
        let phi = phi_of_cluster(&g, &c[0]);
        // all eight fillings keep the origin slot; 333 adds two more, four patterns add one
        let q = r(13, 20);
        let expect = BigRational::one()
            - (q.pow(3)
                + (r(1, 1) + r(1, 1) + r(1, 1) + r(1, 1)) * q.pow(2)
                + (r(5, 1) + r(2, 1)) * &q)
                / r(12, 1);
        assert_eq!(phi, expect);
        assert!(phi > r(7, 20));
        assert_eq!(phi_n(1).unwrap(), phi);
    }

    #[test]
    fn phi_bounds_small_n() {
        for n in 1..=5 {
            let p = phi_n(n).unwrap();
            assert!(p > r(7, 48) && p <= BigRational::one(), "n = {n}");
            let (g, clusters) = infinite_clusters(n).unwrap();
            for c in &clusters {
                assert!(zero_liberty_fraction(&g, c) <= r(7, 12));
                if !c.origin_opposite_flag() {
                    assert!(phi_of_cluster(&g, c) >= r(7, 20));
                }
            }
        }
        assert!(phi_n(MAX_PHI_CELLS + 1).is_err());
    }

    #[test]
    fn repair_accounting() {
        for n in 2..=5 {
            let (g, clusters) = infinite_clusters(n).unwrap();
            for c in clusters.iter().filter(|c| c.origin_opposite_flag()) {
                let rep = repair_map(&g, c);
                assert!(rep.zero_weight > BigUint::zero());
                assert!(rep.holds(), "cluster {:?}: {rep:?}", c.cells());
            }
        }
    }

    #[test]
    fn theorem_on_single_cell() {
        let s = build_rooted_subtree(&TreeShape::leaf()).unwrap();
        let g = s.graph().unwrap();
        let c = ClusterShape::new(g, [CellId(0)]).unwrap();
        let rep = verify_filling_theorem(&s, &c).unwrap();
        assert!(rep.passed(), "{rep:?}");
        // every terminal pattern survives: the radicals are all empty
        assert_eq!(rep.generated, 8);
    }

    #[test]
    fn theorem_on_two_cells() {
        let s = build_rooted_subtree(&TreeShape::path(2)).unwrap();
        let g = s.graph().unwrap();
        for n in 1..=2 {
            for c in enumerate_clusters(g, n).unwrap() {
                let rep = verify_filling_theorem(&s, &c).unwrap();
                assert!(rep.passed(), "{rep:?}");
            }
        }
    }

    #[test]
    fn count_by_rules_matches_generation() {
        let s = build_rooted_subtree(&TreeShape::balanced(1)).unwrap();
        let g = s.graph().unwrap();
        for n in 1..=3 {
            for c in enumerate_clusters(g, n).unwrap() {
                let chk = RuleChecker::new(g, &c);
                assert_eq!(
                    chk.count_by_rules(false),
                    BigUint::from(chk.generate(false).unwrap().len())
                );
            }
        }
    }

    #[test]
    fn finite_depth_phi_on_small_ball() {
        // on the radius-1 ball the single-cell cluster sees three one-cell radicals
        let g = CactusGraph::ball(1);
        let c = ClusterShape::new(&g, [g.origin_cell()]).unwrap();
        let count = first_wave_count_by_rules(&g, &c);
        let x = BigRational::one();
        let q = r(5, 8);
        let all = liberty_polynomial(&g, &c, &x, &BigRational::one());
        let expect = phi_with(&g, &c, &x, &q) * all * BigRational::from_integer(512.into());
        assert_eq!(BigRational::from_integer(BigInt::from(count)), expect);
    }
}
