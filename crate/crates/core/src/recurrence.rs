//! The burning test for recurrence, and exact counts of recurrent configurations.
//!
//! A vertex burns once its height exceeds the number of its still unburnt
//! neighbours. Missing edges lead to the implicit sink, which starts burnt.
//! A configuration is recurrent iff every vertex burns; otherwise the unburnt
//! set is a forbidden subconfiguration (FSC): each member's height is at most
//! its number of neighbours inside the set.

use std::collections::{BTreeSet, VecDeque};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use rand::Rng;

use crate::engine::{add_and_relax, Configuration};
use crate::error::{Error, Result};
use crate::radicals::{census_recursive, RadicalCensus};
use crate::sweep;
use crate::topology::{CactusGraph, CellId, ClusterShape, VertexId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BurnResult {
    pub burned_order: Vec<VertexId>,
    pub unburned: BTreeSet<VertexId>,
}

impl BurnResult {
    pub fn is_recurrent(&self) -> bool {
        self.unburned.is_empty()
    }
}

/// Burns the vertices with `region[v]` set (all vertices when `None`);
/// neighbours outside the region count as burnt. With `pendant`, that vertex
/// carries one extra unburnt neighbour of height 1 until it burns itself.
///
/// Candidates are examined in id order and newly eligible neighbours are
/// appended to the worklist, so the order is reproducible.
pub fn burn_heights(
    graph: &CactusGraph,
    heights: &[u8],
    region: Option<&[bool]>,
    pendant: Option<VertexId>,
) -> (Vec<VertexId>, Vec<bool>) {
    let n = graph.num_vertices();
    let inside = |v: VertexId| region.map_or(true, |r| r[v.index()]);
    let mut unburnt = vec![0u8; n];
    let mut burnt = vec![true; n];
    for v in graph.vertices().filter(|&v| inside(v)) {
        burnt[v.index()] = false;
        unburnt[v.index()] = graph.neighbors(v).filter(|&w| inside(w)).count() as u8;
    }
    if let Some(p) = pendant {
        unburnt[p.index()] += 1;
    }
    let mut order = Vec::new();
    let mut queued = vec![false; n];
    let mut queue: VecDeque<VertexId> = VecDeque::new();
    for v in graph.vertices() {
        if !burnt[v.index()] && heights[v.index()] > unburnt[v.index()] {
            queued[v.index()] = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        burnt[v.index()] = true;
        order.push(v);
        for w in graph.neighbors(v) {
            if burnt[w.index()] {
                continue;
            }
            unburnt[w.index()] -= 1;
            if !queued[w.index()] && heights[w.index()] > unburnt[w.index()] {
                queued[w.index()] = true;
                queue.push_back(w);
            }
        }
    }
    (order, burnt)
}

/// Whether every vertex of the region burns.
pub fn region_burns(
    graph: &CactusGraph,
    heights: &[u8],
    region: Option<&[bool]>,
    pendant: Option<VertexId>,
) -> bool {
    let (order, _) = burn_heights(graph, heights, region, pendant);
    let size = region.map_or(graph.num_vertices(), |r| r.iter().filter(|&&b| b).count());
    order.len() == size
}

pub fn burn(graph: &CactusGraph, config: &Configuration) -> BurnResult {
    let (burned_order, burnt) = burn_heights(graph, config.heights(), None, None);
    let unburned = graph.vertices().filter(|v| !burnt[v.index()]).collect();
    BurnResult {
        burned_order,
        unburned,
    }
}

pub fn is_recurrent(graph: &CactusGraph, config: &Configuration) -> bool {
    region_burns(graph, config.heights(), None, None)
}

/// The maximal forbidden subconfiguration, or `None` for a recurrent configuration.
pub fn find_fsc(graph: &CactusGraph, config: &Configuration) -> Result<Option<BTreeSet<VertexId>>> {
    config.check_for(graph)?;
    if !config.is_stable() {
        return Err(Error::InvalidConfiguration(
            "burning needs a stable configuration".into(),
        ));
    }
    let r = burn(graph, config);
    Ok((!r.unburned.is_empty()).then_some(r.unburned))
}

/// True when every vertex of `set` has height at most its degree inside `set`.
pub fn is_fsc(graph: &CactusGraph, config: &Configuration, set: &BTreeSet<VertexId>) -> bool {
    !set.is_empty()
        && set.iter().all(|&v| {
            let inner = graph.neighbors(v).filter(|w| set.contains(w)).count();
            (config.get(v) as usize) <= inner
        })
}

/// A recurrent configuration drawn by dropping `steps` grains at uniformly
/// random vertices onto the maximal configuration, relaxing after each.
/// Recurrent configurations are closed under this move, and for enough steps
/// the result is close to uniform over them.
pub fn random_recurrent<R: Rng>(graph: &CactusGraph, rng: &mut R, steps: usize) -> Configuration {
    let mut config = Configuration::uniform(graph, crate::engine::THRESHOLD);
    for _ in 0..steps {
        let v = VertexId::from_index(rng.gen_range(0..graph.num_vertices()));
        config = add_and_relax(graph, &config, v)
            .expect("relaxation of a stable configuration")
            .final_config;
    }
    config
}

pub fn count_recurrent_bruteforce(graph: &CactusGraph, workers: Option<usize>) -> Result<BigUint> {
    let n = sweep::count(graph.num_vertices(), workers, |h| {
        region_burns(graph, h, None, None)
    })?;
    Ok(BigUint::from(n))
}

/// Recurrent combinations at a cell, aggregated over its 16 allowed
/// configurations: coefficients of `[SSS, WSS, SWS, SSW, WWS, WSW, SWW, WWW]`.
pub const ORIGIN_AGGREGATE: [u32; 8] = [16, 8, 8, 8, 3, 3, 3, 0];

/// Orders the cells of a chain cluster from one end to the other.
fn chain_order(graph: &CactusGraph, cluster: &ClusterShape) -> Result<Vec<CellId>> {
    let cells = cluster.cells();
    let nbrs = |c: CellId| {
        graph
            .cell_neighbors(c)
            .filter(|d| cells.contains(d))
            .collect::<Vec<_>>()
    };
    if cells.iter().any(|&c| nbrs(c).len() > 2) {
        return Err(Error::NotAChain);
    }
    let Some(&start) = cells.iter().find(|&&c| nbrs(c).len() <= 1) else {
        return Err(Error::NotAChain);
    };
    let mut order = vec![start];
    let mut prev = None;
    let mut cur = start;
    while let Some(next) = nbrs(cur).into_iter().find(|&d| Some(d) != prev) {
        order.push(next);
        prev = Some(cur);
        cur = next;
    }
    if order.len() != cells.len() {
        return Err(Error::NotAChain);
    }
    Ok(order)
}

/// The census of the radical hanging beyond `v`'s inter-cell edge.
fn census_beyond(graph: &CactusGraph, v: VertexId) -> RadicalCensus {
    match graph.external(v) {
        Some(w) => census_recursive(&graph.hanging_subtree(w).subtree),
        None => RadicalCensus::empty(),
    }
}

fn ratio(c: &RadicalCensus) -> BigRational {
    c.x()
}

fn int(n: &BigUint) -> BigRational {
    BigRational::from_integer(n.clone().into())
}

/// Counts recurrent configurations by cutting the graph along a chain of
/// cells: the subtrees `T_k` grow one chain cell at a time by the strong and
/// weak recursions, and the last cell is closed with [`ORIGIN_AGGREGATE`].
pub fn count_recurrent_via_decomposition(
    graph: &CactusGraph,
    chain: &ClusterShape,
) -> Result<BigUint> {
    let order = chain_order(graph, chain)?;
    let cells: BTreeSet<CellId> = order.iter().copied().collect();
    // radicals hanging off a chain cell at vertices not joined to other chain cells
    let outer = |c: CellId| -> Vec<RadicalCensus> {
        c.vertices()
            .into_iter()
            .filter(|&v| !graph.external(v).is_some_and(|w| cells.contains(&w.cell())))
            .map(|v| census_beyond(graph, v))
            .collect()
    };
    let last = *order.last().expect("clusters are non-empty");
    let (closing, rest) = if order.len() == 1 {
        let r = outer(last);
        (r, None)
    } else {
        // T_1 from the two radicals at the first cell, then T_k for 1 < k < n
        let first = outer(order[0]);
        let mut t = grow(&first[0], &first[1]);
        for &c in &order[1..order.len() - 1] {
            let u = outer(c);
            t = grow(&u[0], &t);
        }
        (outer(last), Some(t))
    };
    let mut three: Vec<RadicalCensus> = closing;
    if let Some(t) = rest {
        three.insert(0, t);
    }
    debug_assert_eq!(three.len(), 3);
    let x: Vec<BigRational> = three.iter().map(ratio).collect();
    let k = ORIGIN_AGGREGATE.map(|c| BigRational::from_integer(c.into()));
    let bracket = &k[0]
        + &k[1] * &x[0]
        + &k[2] * &x[1]
        + &k[3] * &x[2]
        + &k[4] * &x[0] * &x[1]
        + &k[5] * &x[0] * &x[2]
        + &k[6] * &x[1] * &x[2]
        + &k[7] * &x[0] * &x[1] * &x[2];
    let product = three
        .iter()
        .fold(BigRational::one(), |acc, c| acc * int(&c.n_strong));
    let total = bracket * product;
    if !total.is_integer() || total < BigRational::zero() {
        return Err(Error::InvalidArgument(
            "decomposition produced a non-integral count".into(),
        ));
    }
    Ok(total.to_integer().to_biguint().expect("non-negative"))
}

/// One step of the chain recursion: the subtree rooted at a chain cell whose
/// two hanging radicals have censuses `a` and `b`.
fn grow(a: &RadicalCensus, b: &RadicalCensus) -> RadicalCensus {
    let (xa, xb) = (ratio(a), ratio(b));
    let three = BigRational::from_integer(3.into());
    let five = BigRational::from_integer(5.into());
    let eight = BigRational::from_integer(8.into());
    let base = int(&a.n_strong) * int(&b.n_strong);
    let strong = (&eight + &three * &xa + &three * &xb) * &base;
    let weak = (&three * &xa * &xb + &five * &xa + &five * &xb + &eight) * &base;
    let to_uint = |r: BigRational| {
        r.to_integer()
            .to_biguint()
            .expect("counts are non-negative")
    };
    RadicalCensus {
        n_strong: to_uint(strong),
        n_weak: to_uint(weak),
        ..RadicalCensus::empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(h: [u8; 3]) -> (CactusGraph, Configuration) {
        (
            CactusGraph::ball(0),
            Configuration::new(h.to_vec()).unwrap(),
        )
    }

    #[test]
    fn triangle_fscs() {
        let (g, c) = tri([1, 1, 3]);
        let fsc = find_fsc(&g, &c).unwrap().unwrap();
        assert_eq!(
            fsc,
            BTreeSet::from([CellId(0).vertex(0), CellId(0).vertex(1)])
        );
        assert!(is_fsc(&g, &c, &fsc));

        let (g, c) = tri([2, 2, 2]);
        assert_eq!(find_fsc(&g, &c).unwrap().unwrap().len(), 3);

        let (g, c) = tri([3, 2, 2]);
        assert_eq!(find_fsc(&g, &c).unwrap(), None);
        let r = burn(&g, &c);
        assert_eq!(r.burned_order.len(), 3);
        assert_eq!(r.burned_order[0], g.origin());
    }

    #[test]
    fn triangle_count() {
        assert_eq!(
            count_recurrent_bruteforce(&CactusGraph::ball(0), None).unwrap(),
            BigUint::from(16u32)
        );
    }

    #[test]
    fn decomposition_on_triangle() {
        let g = CactusGraph::ball(0);
        let c = ClusterShape::new(&g, [CellId(0)]).unwrap();
        assert_eq!(
            count_recurrent_via_decomposition(&g, &c).unwrap(),
            BigUint::from(16u32)
        );
    }

    #[test]
    fn decomposition_rejects_non_chains() {
        let g = CactusGraph::ball(1);
        let star = ClusterShape::new(&g, g.cells()).unwrap();
        assert!(matches!(
            count_recurrent_via_decomposition(&g, &star),
            Err(Error::NotAChain)
        ));
    }

    #[test]
    fn decomposition_matches_brute_force_on_small_graphs() {
        let g = CactusGraph::ball(1);
        let brute = count_recurrent_bruteforce(&g, None).unwrap();
        assert_eq!(brute, BigUint::from(25088u32));
        let mut chains = 0;
        for n in 1..=3 {
            for c in crate::topology::enumerate_clusters(&g, n).unwrap() {
                match count_recurrent_via_decomposition(&g, &c) {
                    Ok(v) => {
                        chains += 1;
                        assert_eq!(v, brute);
                    }
                    Err(Error::NotAChain) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
        assert_eq!(chains, 7);
    }

    #[test]
    fn fsc_pointwise_definition() {
        let g = CactusGraph::ball(1);
        for i in (0..sweep::num_stable(12)).step_by(997) {
            let c = Configuration::from_index(12, i);
            if let Some(set) = find_fsc(&g, &c).unwrap() {
                assert!(is_fsc(&g, &c, &set));
            }
        }
    }
}
