//! Radicals: configurations on the rooted subtrees hanging off a cluster.
//!
//! A radical with no FSC of its own is *strong* if it still has none after a
//! height-1 vertex is attached to its root, and *weak* otherwise. The empty
//! radical is strong. A *stopper* is an allowed radical whose root has height
//! 1 or 2, or the empty radical.
//!
//! Whether a radical is forbidden, weak or strong depends only on its root
//! cell and on the classes of its two subradicals. That dependence is derived
//! here by attaching single-cell gadget radicals of known class to every cell
//! configuration, and drives the fast census recursion.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::engine::Configuration;
use crate::error::Result;
use crate::recurrence::region_burns;
use crate::sweep;
use crate::topology::{
    build_rooted_subtree, CactusGraph, CellId, DecoratedRootedSubtree, TreeShape, VertexId,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Allowance {
    Forbidden,
    Weak,
    Strong,
}

impl Allowance {
    pub fn is_allowed(self) -> bool {
        self != Allowance::Forbidden
    }

    fn letter(self) -> char {
        match self {
            Allowance::Weak => 'W',
            Allowance::Strong => 'S',
            Allowance::Forbidden => 'F',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RadicalClass {
    pub allowance: Allowance,
    pub stopper: bool,
}

impl RadicalClass {
    pub const EMPTY: RadicalClass = RadicalClass {
        allowance: Allowance::Strong,
        stopper: true,
    };

    pub fn is_strong(self) -> bool {
        self.allowance == Allowance::Strong
    }

    pub fn is_allowed(self) -> bool {
        self.allowance.is_allowed()
    }
}

/// Classifies the radical on the vertices of `region`, rooted at `root`.
/// Neighbours outside the region are treated as sinks.
pub fn classify_region(
    graph: &CactusGraph,
    heights: &[u8],
    region: &[bool],
    root: VertexId,
) -> RadicalClass {
    let allowance = if !region_burns(graph, heights, Some(region), None) {
        Allowance::Forbidden
    } else if region_burns(graph, heights, Some(region), Some(root)) {
        Allowance::Strong
    } else {
        Allowance::Weak
    };
    RadicalClass {
        allowance,
        stopper: allowance.is_allowed() && heights[root.index()] <= 2,
    }
}

fn classify_whole(graph: &CactusGraph, heights: &[u8]) -> Allowance {
    let root = graph.origin();
    if !region_burns(graph, heights, None, None) {
        Allowance::Forbidden
    } else if region_burns(graph, heights, None, Some(root)) {
        Allowance::Strong
    } else {
        Allowance::Weak
    }
}

pub fn classify_radical(
    subtree: &DecoratedRootedSubtree,
    config: &Configuration,
) -> Result<RadicalClass> {
    let Some(graph) = subtree.graph() else {
        return Ok(RadicalClass::EMPTY);
    };
    config.check_for(graph)?;
    let allowance = classify_whole(graph, config.heights());
    let root = graph.origin();
    Ok(RadicalClass {
        allowance,
        stopper: allowance.is_allowed() && config.get(root) <= 2,
    })
}

/// Exact counts of the radicals on one subtree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RadicalCensus {
    #[serde(serialize_with = "crate::text::display")]
    pub n_strong: BigUint,
    #[serde(serialize_with = "crate::text::display")]
    pub n_weak: BigUint,
    #[serde(serialize_with = "crate::text::display")]
    pub n_stopper: BigUint,
    #[serde(serialize_with = "crate::text::display")]
    pub n_strong_stopper: BigUint,
}

impl RadicalCensus {
    pub fn empty() -> Self {
        RadicalCensus {
            n_strong: BigUint::one(),
            n_weak: BigUint::zero(),
            n_stopper: BigUint::one(),
            n_strong_stopper: BigUint::one(),
        }
    }

    /// `n_weak / n_strong`.
    pub fn x(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.n_weak.clone()),
            BigInt::from(self.n_strong.clone()),
        )
    }

    pub fn n_weak_stopper(&self) -> BigUint {
        &self.n_stopper - &self.n_strong_stopper
    }

    fn from_classes(c: &ClassCounts<BigUint>) -> Self {
        RadicalCensus {
            n_strong: c.total(STRONG),
            n_weak: c.total(WEAK),
            n_stopper: c.stoppers(),
            n_strong_stopper: c.strong_stoppers(),
        }
    }
}

const WEAK: usize = 0;
const STRONG: usize = 1;

/// Weights the census recursion can run over.
pub trait Weight:
    Clone + Zero + One + std::ops::Add<Output = Self> + std::ops::Mul<Output = Self>
{
    fn from_u32(k: u32) -> Self;
}

impl Weight for BigUint {
    fn from_u32(k: u32) -> Self {
        BigUint::from(k)
    }
}

impl Weight for BigRational {
    fn from_u32(k: u32) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }
}

/// Radical counts by allowance (weak, strong) and root height (1, 2, 3).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassCounts<T> {
    pub counts: [[T; 3]; 2],
}

impl<T: Weight> ClassCounts<T> {
    fn zero() -> Self {
        ClassCounts {
            counts: std::array::from_fn(|_| std::array::from_fn(|_| T::zero())),
        }
    }

    pub fn total(&self, allowance: usize) -> T {
        self.counts[allowance]
            .iter()
            .cloned()
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn stoppers(&self) -> T {
        self.counts[WEAK][0].clone() + self.counts[WEAK][1].clone() + self.strong_stoppers()
    }

    pub fn strong_stoppers(&self) -> T {
        self.counts[STRONG][0].clone() + self.counts[STRONG][1].clone()
    }

    /// `(weak, strong)` totals, the only information a parent cell sees.
    fn as_child(&self) -> [T; 2] {
        [self.total(WEAK), self.total(STRONG)]
    }
}

fn empty_child<T: Weight>() -> [T; 2] {
    [T::zero(), T::one()]
}

/// Multiplicities `k[result][root height - 1][class at local 1][class at local 2]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transitions {
    pub k: [[[[u32; 2]; 2]; 3]; 2],
    /// Allowance of the whole radical for each root cell `(h0, h1, h2)` and
    /// pair of subradical classes `(local 1, local 2)`.
    pub outcome: BTreeMap<([u8; 3], [Allowance; 2]), Allowance>,
}

/// Single-cell gadget radicals as heights of locals `(0, 1, 2)`, local 0 being
/// the root: a weak one (the cell 2-3-1 rooted at the 1) and a strong one
/// (3-3-2 rooted at the 2).
pub const WEAK_GADGET: [u8; 3] = [1, 2, 3];
pub const STRONG_GADGET: [u8; 3] = [2, 3, 3];

fn gadget(a: Allowance) -> [u8; 3] {
    match a {
        Allowance::Weak => WEAK_GADGET,
        _ => STRONG_GADGET,
    }
}

fn all_cells() -> impl Iterator<Item = [u8; 3]> {
    (0..27u32).map(|i| [(i % 3) as u8 + 1, (i / 3 % 3) as u8 + 1, (i / 9) as u8 + 1])
}

const CLASSES: [Allowance; 2] = [Allowance::Weak, Allowance::Strong];

fn derive_transitions() -> Transitions {
    let whole = build_rooted_subtree(&TreeShape::balanced(1)).expect("balanced tree is valid");
    let g = whole.graph().expect("non-empty");
    let mut outcome = BTreeMap::new();
    let mut k = [[[[0u32; 2]; 2]; 3]; 2];
    for cell in all_cells() {
        for (i1, &c1) in CLASSES.iter().enumerate() {
            for (i2, &c2) in CLASSES.iter().enumerate() {
                let mut heights = vec![0u8; 9];
                heights[..3].copy_from_slice(&cell);
                heights[3..6].copy_from_slice(&gadget(c1));
                heights[6..].copy_from_slice(&gadget(c2));
                let a = classify_whole(g, &heights);
                outcome.insert((cell, [c1, c2]), a);
                let r = match a {
                    Allowance::Weak => WEAK,
                    Allowance::Strong => STRONG,
                    Allowance::Forbidden => continue,
                };
                k[r][cell[0] as usize - 1][i1][i2] += 1;
            }
        }
    }
    Transitions { k, outcome }
}

pub fn transitions() -> &'static Transitions {
    static T: OnceLock<Transitions> = OnceLock::new();
    T.get_or_init(derive_transitions)
}

/// Class counts of a radical whose root cell has subradicals with `(weak,
/// strong)` totals `a` (at local 1) and `b` (at local 2).
fn combine<T: Weight>(a: &[T; 2], b: &[T; 2]) -> ClassCounts<T> {
    let k = &transitions().k;
    let mut out = ClassCounts::<T>::zero();
    for (r, by_height) in k.iter().enumerate() {
        for (h, m) in by_height.iter().enumerate() {
            let mut acc = T::zero();
            for (i, row) in m.iter().enumerate() {
                for (j, &mult) in row.iter().enumerate() {
                    if mult > 0 {
                        acc = acc + T::from_u32(mult) * a[i].clone() * b[j].clone();
                    }
                }
            }
            out.counts[r][h] = acc;
        }
    }
    out
}

fn recurse_graph(g: &CactusGraph, c: CellId) -> ClassCounts<BigUint> {
    let child = |l: u8| match g.external(c.vertex(l)) {
        Some(w) => recurse_graph(g, w.cell()).as_child(),
        None => empty_child(),
    };
    combine(&child(1), &child(2))
}

/// Census by recursion over the subtree's cells.
pub fn census_recursive(subtree: &DecoratedRootedSubtree) -> RadicalCensus {
    match subtree.graph() {
        None => RadicalCensus::empty(),
        Some(g) => RadicalCensus::from_classes(&recurse_graph(g, g.origin_cell())),
    }
}

pub fn census_of_shape(shape: &TreeShape) -> RadicalCensus {
    fn walk(s: &TreeShape) -> ClassCounts<BigUint> {
        let child = |i: usize| {
            s.children
                .get(i)
                .map_or_else(empty_child, |c| walk(c).as_child())
        };
        combine(&child(0), &child(1))
    }
    RadicalCensus::from_classes(&walk(shape))
}

/// Exact census of the balanced subtree `B_depth`, sharing equal subtrees.
pub fn balanced_census(depth: usize) -> RadicalCensus {
    let mut c = combine::<BigUint>(&empty_child(), &empty_child());
    for _ in 0..depth {
        let child = c.as_child();
        c = combine(&child, &child);
    }
    RadicalCensus::from_classes(&c)
}

/// Census ratios relative to the number of strong radicals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NormalizedCensus {
    #[serde(serialize_with = "crate::text::display")]
    pub x: BigRational,
    #[serde(serialize_with = "crate::text::display")]
    pub stopper_ratio: BigRational,
    #[serde(serialize_with = "crate::text::display")]
    pub strong_stopper_ratio: BigRational,
}

/// The ratios on `B_depth`, renormalising at every level so that the numbers
/// stay small.
pub fn balanced_normalized(depth: usize) -> NormalizedCensus {
    let normalize = |c: ClassCounts<BigRational>| {
        let s = c.total(STRONG);
        ClassCounts {
            counts: c.counts.map(|row| row.map(|v| v / &s)),
        }
    };
    let mut c = normalize(combine::<BigRational>(&empty_child(), &empty_child()));
    for _ in 0..depth {
        let child = c.as_child();
        c = normalize(combine(&child, &child));
    }
    NormalizedCensus {
        x: c.total(WEAK),
        stopper_ratio: c.stoppers(),
        strong_stopper_ratio: c.strong_stoppers(),
    }
}

/// `(n_stopper / n_strong, n_strong_stopper / n_strong)` on `B_depth`.
pub fn stopper_fractions(depth: usize) -> (BigRational, BigRational) {
    let n = balanced_normalized(depth);
    (n.stopper_ratio, n.strong_stopper_ratio)
}

/// The weak-to-strong ratio of a radical whose subradicals have ratios `x1`, `x2`.
pub fn x_map(x1: &BigRational, x2: &BigRational) -> BigRational {
    let k = |n: i64| BigRational::from_integer(BigInt::from(n));
    (k(3) * x1 * x2 + k(5) * x1 + k(5) * x2 + k(8)) / (k(3) * x1 + k(3) * x2 + k(8))
}

/// Census by classifying every stable configuration of the subtree.
pub fn census_bruteforce(
    subtree: &DecoratedRootedSubtree,
    workers: Option<usize>,
) -> Result<RadicalCensus> {
    let Some(g) = subtree.graph() else {
        return Ok(RadicalCensus::empty());
    };
    let root = g.origin();
    let counts = sweep::fold(
        g.num_vertices(),
        workers,
        || [[0u64; 3]; 2],
        |acc, _, h| {
            let r = match classify_whole(g, h) {
                Allowance::Weak => WEAK,
                Allowance::Strong => STRONG,
                Allowance::Forbidden => return,
            };
            acc[r][h[root.index()] as usize - 1] += 1;
        },
        |mut a, b| {
            for r in 0..2 {
                for h in 0..3 {
                    a[r][h] += b[r][h];
                }
            }
            a
        },
    )?;
    let c = ClassCounts {
        counts: counts.map(|row| row.map(BigUint::from)),
    };
    Ok(RadicalCensus::from_classes(&c))
}

/// A cell configuration as printed in the tables, e.g. `3-2-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellDigits(pub [u8; 3]);

impl fmt::Display for CellDigits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.0[0], self.0[1], self.0[2])
    }
}

impl CellDigits {
    fn parse(s: &str) -> Self {
        let d: Vec<u8> = s
            .split('-')
            .map(|p| p.parse().expect("table cell digits"))
            .collect();
        CellDigits([d[0], d[1], d[2]])
    }

    /// Group of the height multiset, in the order rows are listed.
    fn group(self) -> usize {
        let mut s = self.0;
        s.sort_unstable();
        match s {
            [1, 2, 3] => 0,
            [2, 2, 3] => 1,
            [1, 3, 3] => 2,
            [2, 3, 3] => 3,
            [3, 3, 3] => 4,
            _ => 5,
        }
    }
}

/// Which radicals make the whole configuration recurrent around a cell.
/// Digits are the heights of locals 0, 1, 2; combination letters follow the
/// same order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OriginRow {
    pub cell: CellDigits,
    pub combos: Vec<String>,
}

/// Digits `a-b-r`: `r` is the root (local 0), `a` and `b` sit at locals 1
/// and 2; a combination `XY` puts `X` at local 1 and `Y` at local 2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RadicalRow {
    pub cell: CellDigits,
    pub weak: Vec<String>,
    pub strong: Vec<String>,
}

/// Root-cell counts by subradical pair, in the order WW, WS, SW, SS.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Aggregates {
    pub weak: [u32; 4],
    pub strong: [u32; 4],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tables {
    pub origin: Vec<OriginRow>,
    pub radical: Vec<RadicalRow>,
    pub aggregates: Aggregates,
}

const ORIGIN_COMBOS: [&str; 8] = ["SSS", "WSS", "SWS", "SSW", "WWS", "WSW", "SWW", "WWW"];
const PAIR_COMBOS: [&str; 4] = ["SS", "WS", "SW", "WW"];

fn letters(s: &str) -> Vec<Allowance> {
    s.chars()
        .map(|c| {
            if c == 'W' {
                Allowance::Weak
            } else {
                Allowance::Strong
            }
        })
        .collect()
}

fn sort_rows<R>(rows: &mut [R], key: impl Fn(&R) -> CellDigits) {
    rows.sort_by_key(|r| {
        let c = key(r);
        (c.group(), c)
    });
}

/// Regenerates the three tables from gadget attachments.
pub fn derive_tables() -> Tables {
    // around a cell with all three vertices carrying radicals
    let g = CactusGraph::ball(1);
    let mut origin = Vec::new();
    for cell in all_cells() {
        let combos: Vec<String> = ORIGIN_COMBOS
            .iter()
            .filter(|combo| {
                let mut heights = vec![0u8; 12];
                heights[..3].copy_from_slice(&cell);
                for (l, a) in letters(combo).into_iter().enumerate() {
                    let c = g
                        .external(CellId(0).vertex(l as u8))
                        .expect("ball(1) is full")
                        .cell();
                    heights[c.index() * 3..c.index() * 3 + 3].copy_from_slice(&gadget(a));
                }
                region_burns(&g, &heights, None, None)
            })
            .map(|s| s.to_string())
            .collect();
        if !combos.is_empty() {
            origin.push(OriginRow {
                cell: CellDigits(cell),
                combos,
            });
        }
    }
    sort_rows(&mut origin, |r| r.cell);

    let t = transitions();
    let mut radical = Vec::new();
    for cell in all_cells() {
        let mut weak = Vec::new();
        let mut strong = Vec::new();
        for combo in PAIR_COMBOS {
            let l = letters(combo);
            match t.outcome[&(cell, [l[0], l[1]])] {
                Allowance::Weak => weak.push(combo.to_string()),
                Allowance::Strong => strong.push(combo.to_string()),
                Allowance::Forbidden => {}
            }
        }
        if !weak.is_empty() || !strong.is_empty() {
            // printed as a-b-r
            radical.push(RadicalRow {
                cell: CellDigits([cell[1], cell[2], cell[0]]),
                weak,
                strong,
            });
        }
    }
    sort_rows(&mut radical, |r| r.cell);
    let aggregates = aggregate(&radical);
    Tables {
        origin,
        radical,
        aggregates,
    }
}

fn aggregate(rows: &[RadicalRow]) -> Aggregates {
    let order = ["WW", "WS", "SW", "SS"];
    let count = |pick: fn(&RadicalRow) -> &Vec<String>| {
        order.map(|c| {
            rows.iter()
                .filter(|r| pick(r).iter().any(|x| x == c))
                .count() as u32
        })
    };
    Aggregates {
        weak: count(|r| &r.weak),
        strong: count(|r| &r.strong),
    }
}

const EXPECTED_ORIGIN: [(&str, &str); 16] = [
    ("1-2-3", "SSS"),
    ("1-3-2", "SSS"),
    ("2-1-3", "SSS"),
    ("2-3-1", "SSS"),
    ("3-1-2", "SSS"),
    ("3-2-1", "SSS"),
    ("2-2-3", "SSS WSS SWS"),
    ("2-3-2", "SSS WSS SSW"),
    ("3-2-2", "SSS SWS SSW"),
    ("1-3-3", "SSS SWS SSW"),
    ("3-1-3", "SSS WSS SSW"),
    ("3-3-1", "SSS WSS SWS"),
    ("2-3-3", "SSS WSS SWS SSW WWS WSW"),
    ("3-2-3", "SSS WSS SWS SSW WWS SWW"),
    ("3-3-2", "SSS WSS SWS SSW WSW SWW"),
    ("3-3-3", "SSS WSS SWS SSW WWS WSW SWW"),
];

const EXPECTED_RADICAL: [(&str, &str, &str); 16] = [
    ("1-2-3", "SS", ""),
    ("1-3-2", "SS", ""),
    ("2-1-3", "SS", ""),
    ("2-3-1", "SS", ""),
    ("3-1-2", "SS", ""),
    ("3-2-1", "SS", ""),
    ("2-2-3", "SS WS SW", ""),
    ("2-3-2", "WS", "SS"),
    ("3-2-2", "SW", "SS"),
    ("1-3-3", "SW", "SS"),
    ("3-1-3", "WS", "SS"),
    ("3-3-1", "SS WS SW", ""),
    ("2-3-3", "SW WW", "SS WS"),
    ("3-2-3", "WS WW", "SS SW"),
    ("3-3-2", "", "SS WS SW"),
    ("3-3-3", "WW", "SS WS SW"),
];

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// The published tables, row for row.
pub fn expected_tables() -> Tables {
    let origin = EXPECTED_ORIGIN
        .iter()
        .map(|(c, k)| OriginRow {
            cell: CellDigits::parse(c),
            combos: words(k),
        })
        .collect();
    let radical: Vec<RadicalRow> = EXPECTED_RADICAL
        .iter()
        .map(|(c, w, s)| RadicalRow {
            cell: CellDigits::parse(c),
            weak: words(w),
            strong: words(s),
        })
        .collect();
    Tables {
        origin,
        radical,
        aggregates: Aggregates {
            weak: [3, 5, 5, 8],
            strong: [0, 3, 3, 8],
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableDiff {
    pub table: u8,
    pub row: String,
    pub expected: String,
    pub derived: String,
}

/// Row-level differences between two sets of tables.
pub fn compare_tables(derived: &Tables, expected: &Tables) -> Vec<TableDiff> {
    let mut diffs = Vec::new();
    let origin = |rows: &[OriginRow]| -> BTreeMap<String, String> {
        rows.iter()
            .map(|r| (r.cell.to_string(), r.combos.join(", ")))
            .collect()
    };
    let radical = |rows: &[RadicalRow]| -> BTreeMap<String, String> {
        rows.iter()
            .map(|r| {
                (
                    r.cell.to_string(),
                    format!(
                        "weak [{}] strong [{}]",
                        r.weak.join(", "),
                        r.strong.join(", ")
                    ),
                )
            })
            .collect()
    };
    let mut diff_maps = |table: u8,
                         d: BTreeMap<String, String>,
                         e: BTreeMap<String, String>,
                         d_order: Vec<String>,
                         e_order: Vec<String>| {
        let keys: std::collections::BTreeSet<&String> = d.keys().chain(e.keys()).collect();
        for k in keys {
            let (dv, ev) = (
                d.get(k).cloned().unwrap_or_default(),
                e.get(k).cloned().unwrap_or_default(),
            );
            if dv != ev {
                diffs.push(TableDiff {
                    table,
                    row: k.clone(),
                    expected: ev,
                    derived: dv,
                });
            }
        }
        if d_order != e_order && d.len() == e.len() && d == e {
            diffs.push(TableDiff {
                table,
                row: "order".into(),
                expected: e_order.join(" "),
                derived: d_order.join(" "),
            });
        }
    };
    diff_maps(
        1,
        origin(&derived.origin),
        origin(&expected.origin),
        derived.origin.iter().map(|r| r.cell.to_string()).collect(),
        expected.origin.iter().map(|r| r.cell.to_string()).collect(),
    );
    diff_maps(
        2,
        radical(&derived.radical),
        radical(&expected.radical),
        derived.radical.iter().map(|r| r.cell.to_string()).collect(),
        expected
            .radical
            .iter()
            .map(|r| r.cell.to_string())
            .collect(),
    );
    if derived.aggregates != expected.aggregates {
        diffs.push(TableDiff {
            table: 3,
            row: "aggregates".into(),
            expected: format!(
                "{:?}/{:?}",
                expected.aggregates.weak, expected.aggregates.strong
            ),
            derived: format!(
                "{:?}/{:?}",
                derived.aggregates.weak, derived.aggregates.strong
            ),
        });
    }
    diffs
}

impl fmt::Display for RadicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            self.allowance.letter(),
            if self.stopper { " stopper" } else { "" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use proptest::prelude::*;

    fn single(h: [u8; 3]) -> (DecoratedRootedSubtree, Configuration) {
        (
            build_rooted_subtree(&TreeShape::leaf()).unwrap(),
            Configuration::new(h.to_vec()).unwrap(),
        )
    }

    /// heights given as printed `a-b-r`
    fn printed(a: u8, b: u8, r: u8) -> [u8; 3] {
        [r, a, b]
    }

    #[test]
    fn single_cell_classes() {
        let (s, c) = single(printed(3, 3, 2));
        assert_eq!(
            classify_radical(&s, &c).unwrap(),
            RadicalClass {
                allowance: Allowance::Strong,
                stopper: true
            }
        );
        let (s, c) = single(printed(2, 3, 1));
        assert_eq!(
            classify_radical(&s, &c).unwrap(),
            RadicalClass {
                allowance: Allowance::Weak,
                stopper: true
            }
        );
        let (s, c) = single(printed(2, 2, 3));
        assert_eq!(
            classify_radical(&s, &c).unwrap(),
            RadicalClass {
                allowance: Allowance::Weak,
                stopper: false
            }
        );
        assert_eq!(
            classify_radical(
                &DecoratedRootedSubtree::empty(),
                &Configuration::new(vec![]).unwrap()
            )
            .unwrap(),
            RadicalClass::EMPTY
        );
    }

    #[test]
    fn gadgets_have_the_claimed_classes() {
        let (s, c) = single(WEAK_GADGET);
        assert_eq!(classify_radical(&s, &c).unwrap().allowance, Allowance::Weak);
        let (s, c) = single(STRONG_GADGET);
        assert_eq!(
            classify_radical(&s, &c).unwrap().allowance,
            Allowance::Strong
        );
    }

    #[test]
    fn tables_match() {
        let d = derive_tables();
        assert_eq!(compare_tables(&d, &expected_tables()), vec![]);
        assert_eq!(d.origin.len(), 16);
        assert_eq!(d.radical.len(), 16);
        assert_eq!(d.origin[15].combos.len(), 7);
        assert_eq!(
            d.aggregates,
            Aggregates {
                weak: [3, 5, 5, 8],
                strong: [0, 3, 3, 8]
            }
        );
    }

    #[test]
    fn fault_is_reported_by_row() {
        let mut d = derive_tables();
        let row = d
            .radical
            .iter_mut()
            .find(|r| r.cell.to_string() == "2-3-2")
            .unwrap();
        std::mem::swap(&mut row.weak, &mut row.strong);
        let diffs = compare_tables(&d, &expected_tables());
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].row, "2-3-2");
        assert_eq!(diffs[0].table, 2);
    }

    #[test]
    fn single_cell_census() {
        let leaf = build_rooted_subtree(&TreeShape::leaf()).unwrap();
        let brute = census_bruteforce(&leaf, None).unwrap();
        assert_eq!(
            (brute.n_strong.clone(), brute.n_weak.clone()),
            (BigUint::from(8u32), BigUint::from(8u32))
        );
        assert_eq!(brute.x(), BigRational::one());
        assert_eq!(census_recursive(&leaf), brute);
        // three of the eight strong single cells have their root at 1 or 2
        assert_eq!(brute.n_strong_stopper, BigUint::from(3u32));
        assert_eq!(brute.n_stopper, brute.n_strong);
        let e = census_bruteforce(&DecoratedRootedSubtree::empty(), None).unwrap();
        assert_eq!(e, RadicalCensus::empty());
    }

    #[test]
    fn two_level_balanced() {
        let b1 = build_rooted_subtree(&TreeShape::balanced(1)).unwrap();
        let brute = census_bruteforce(&b1, None).unwrap();
        assert_eq!(brute.x(), BigRational::new(3.into(), 2.into()));
        assert_eq!(census_recursive(&b1), brute);
        assert_eq!(balanced_census(1), brute);
    }

    #[test]
    fn recursion_matches_brute_force_on_all_small_shapes() {
        for shape in TreeShape::all_up_to(4) {
            let s = build_rooted_subtree(&shape).unwrap();
            let brute = census_bruteforce(&s, None).unwrap();
            assert_eq!(census_recursive(&s), brute, "shape {shape}");
            assert_eq!(census_of_shape(&shape), brute, "shape {shape}");
            assert_eq!(brute.n_stopper, brute.n_strong, "shape {shape}");
        }
    }

    #[test]
    fn balanced_x_sequence() {
        for n in 0..=20usize {
            let expect = BigRational::from_integer(2.into())
                - BigRational::new(1.into(), BigInt::from(2u32).pow(n as u32));
            assert_eq!(balanced_normalized(n).x, expect, "n = {n}");
        }
        for n in 0..=6 {
            assert_eq!(balanced_census(n).x(), balanced_normalized(n).x);
        }
    }

    #[test]
    fn strong_stopper_fraction() {
        let (s0, ss0) = stopper_fractions(0);
        assert_eq!(s0, BigRational::one());
        assert_eq!(ss0, BigRational::new(3.into(), 8.into()));
        let (s12, ss12) = stopper_fractions(12);
        assert_eq!(s12, BigRational::one());
        let target = BigRational::new(7.into(), 20.into());
        let gap = (ss12 - target).abs();
        assert!(gap < BigRational::new(1.into(), 1000.into()));
    }

    #[test]
    fn direct_pendant_characterisation() {
        // Burn the subtree together with an explicit height-1 vertex hung off the root.
        fn burns(adj: &[Vec<usize>], h: &[u8]) -> bool {
            let n = adj.len();
            let mut burnt = vec![false; n];
            loop {
                let mut progress = false;
                for v in 0..n {
                    if burnt[v] {
                        continue;
                    }
                    let unburnt = adj[v].iter().filter(|&&w| !burnt[w]).count();
                    if h[v] as usize > unburnt {
                        burnt[v] = true;
                        progress = true;
                    }
                }
                if !progress {
                    return burnt.iter().all(|&b| b);
                }
            }
        }
        for shape in TreeShape::all_up_to(2) {
            let s = build_rooted_subtree(&shape).unwrap();
            let g = s.graph().unwrap();
            let n = g.num_vertices();
            let mut adj: Vec<Vec<usize>> = g
                .vertices()
                .map(|v| g.neighbors(v).map(|w| w.index()).collect())
                .collect();
            adj.push(vec![g.origin().index()]);
            adj[g.origin().index()].push(n);
            for i in 0..sweep::num_stable(n) {
                let c = Configuration::from_index(n, i);
                let class = classify_radical(&s, &c).unwrap();
                let mut h = c.heights().to_vec();
                h.push(1);
                let standalone = crate::recurrence::is_recurrent(g, &c);
                let with_pendant = burns(&adj, &h);
                let expect = match (standalone, with_pendant) {
                    (false, _) => Allowance::Forbidden,
                    (true, true) => Allowance::Strong,
                    (true, false) => Allowance::Weak,
                };
                assert_eq!(class.allowance, expect);
            }
        }
    }

    #[test]
    fn embedded_balanced_bound() {
        let two = BigRational::from_integer(2.into());
        for shape in TreeShape::all_up_to(7) {
            let x = census_of_shape(&shape).x();
            assert!(x < two);
            // every shape contains B_0, and B_1 when the root has two children
            assert!(x >= BigRational::one());
            if shape.children.len() == 2 {
                assert!(x >= BigRational::new(3.into(), 2.into()));
            }
        }
        let grown = TreeShape::node(vec![TreeShape::balanced(3), TreeShape::path(2)]);
        let x = census_of_shape(&grown).x();
        assert!(x >= balanced_normalized(1).x && x < two);
        let deep = TreeShape::node(vec![TreeShape::balanced(4), TreeShape::balanced(4)]);
        assert!(census_of_shape(&deep).x() >= balanced_normalized(5).x);
    }

    proptest! {
        #[test]
        fn x_map_is_increasing(a in 0u32..40, b in 0u32..40, d in 1u32..20) {
            let r = |n: u32| BigRational::new(BigInt::from(n), BigInt::from(20));
            let (x1, x2) = (r(a), r(b));
            let up = BigRational::new(BigInt::from(d), BigInt::from(1000));
            let base = x_map(&x1, &x2);
            prop_assert!(x_map(&(&x1 + &up), &x2) > base);
            prop_assert!(x_map(&x1, &(&x2 + &up)) > base);
            prop_assert!(base < BigRational::from_integer(2.into()));
        }

        #[test]
        fn census_ratio_follows_x_map(i in 0usize..8, j in 0usize..8) {
            let shapes = TreeShape::all_up_to(4);
            let (a, b) = (&shapes[i], &shapes[j]);
            let joined = TreeShape::node(vec![a.clone(), b.clone()]);
            let expect = x_map(&census_of_shape(a).x(), &census_of_shape(b).x());
            prop_assert_eq!(census_of_shape(&joined).x(), expect);
        }
    }
}
