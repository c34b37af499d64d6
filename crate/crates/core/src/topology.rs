//! Finite pieces of the expanded cactus: the decorated 3-regular tree in which
//! every tree node is replaced by a triangle ("cell").
//!
//! Vertices are addressed as `(cell, local)` with `local` in `0..3`. Local 0 is
//! always the origin-facing vertex of its cell; for the origin cell it is the
//! origin vertex itself. Every graph built or imported here is checked against
//! that convention, so "origin-facing" is a constant-time lookup everywhere.
//!
//! Vertices of degree 2 lose grains to an implicit sink; no sink vertices are
//! stored.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest cluster size accepted by [`enumerate_clusters`].
pub const MAX_CLUSTER_CELLS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn vertex(self, local: u8) -> VertexId {
        VertexId::new(self, local)
    }

    pub fn vertices(self) -> [VertexId; 3] {
        [self.vertex(0), self.vertex(1), self.vertex(2)]
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A vertex, stored as the flat index `3 * cell + local`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn new(cell: CellId, local: u8) -> Self {
        debug_assert!(local < 3);
        VertexId(cell.0 * 3 + local as u32)
    }

    pub fn from_index(index: usize) -> Self {
        VertexId(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn cell(self) -> CellId {
        CellId(self.0 / 3)
    }

    pub fn local(self) -> u8 {
        (self.0 % 3) as u8
    }

    /// The other two vertices of this vertex's cell.
    pub fn cellmates(self) -> [VertexId; 2] {
        let base = self.0 - self.0 % 3;
        let l = self.0 % 3;
        [VertexId(base + (l + 1) % 3), VertexId(base + (l + 2) % 3)]
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cell().0, self.local())
    }
}

impl FromStr for VertexId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidConfiguration(format!("bad vertex key {s:?}, expected \"cell:local\""))
        };
        let (c, l) = s.split_once(':').ok_or_else(bad)?;
        let cell: u32 = c.trim().parse().map_err(|_| bad())?;
        let local: u8 = l.trim().parse().map_err(|_| bad())?;
        if local > 2 {
            return Err(bad());
        }
        Ok(VertexId::new(CellId(cell), local))
    }
}

/// Up to three neighbours, without allocating.
#[derive(Clone, Copy, Debug)]
pub struct Neighbors {
    items: [VertexId; 3],
    len: u8,
    pos: u8,
}

impl Iterator for Neighbors {
    type Item = VertexId;

    fn next(&mut self) -> Option<VertexId> {
        if self.pos < self.len {
            self.pos += 1;
            Some(self.items[self.pos as usize - 1])
        } else {
            None
        }
    }
}

/// A finite expanded cactus: a tree of triangles with a designated origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CactusGraph {
    external: Vec<Option<VertexId>>,
    origin: VertexId,
}

impl CactusGraph {
    /// Builds and validates a graph from its inter-cell edges.
    pub fn from_parts(
        num_cells: usize,
        inter_edges: &[(VertexId, VertexId)],
        origin: VertexId,
    ) -> Result<Self> {
        if num_cells == 0 {
            return Err(Error::InvalidGraph(
                "a graph needs at least one cell".into(),
            ));
        }
        let nv = num_cells * 3;
        let mut external = vec![None; nv];
        for &(a, b) in inter_edges {
            if a.index() >= nv || b.index() >= nv {
                return Err(Error::InvalidGraph(format!(
                    "edge {a}-{b} names a missing vertex"
                )));
            }
            if a.cell() == b.cell() {
                return Err(Error::InvalidGraph(format!(
                    "edge {a}-{b} lies inside one cell"
                )));
            }
            for v in [a, b] {
                if external[v.index()].is_some() {
                    return Err(Error::InvalidGraph(format!(
                        "vertex {v} has more than one inter-cell edge"
                    )));
                }
            }
            external[a.index()] = Some(b);
            external[b.index()] = Some(a);
        }
        if origin.index() >= nv {
            return Err(Error::InvalidGraph(format!(
                "origin {origin} is not in the graph"
            )));
        }
        let graph = CactusGraph { external, origin };
        graph.validate(inter_edges.len())?;
        Ok(graph)
    }

    fn validate(&self, num_inter_edges: usize) -> Result<()> {
        if self.origin.local() != 0 {
            return Err(Error::InvalidGraph(format!(
                "origin {} must be local vertex 0 of its cell",
                self.origin
            )));
        }
        let n = self.num_cells();
        if num_inter_edges + 1 != n {
            return Err(Error::InvalidGraph(format!(
                "{n} cells joined by {num_inter_edges} edges cannot form a tree"
            )));
        }
        // Walk outward from the origin cell; every cell must be entered through
        // its local vertex 0.
        let mut seen = vec![false; n];
        let origin_cell = self.origin_cell();
        seen[origin_cell.index()] = true;
        let mut queue = VecDeque::from([origin_cell]);
        while let Some(c) = queue.pop_front() {
            for v in c.vertices() {
                let Some(w) = self.external(v) else { continue };
                let d = w.cell();
                if seen[d.index()] {
                    continue;
                }
                if w.local() != 0 {
                    return Err(Error::InvalidGraph(format!(
                        "cell {d} is entered through vertex {w}; origin-facing vertices must be local 0"
                    )));
                }
                if c != origin_cell && v.local() == 0 {
                    return Err(Error::InvalidGraph(format!(
                        "vertex {v} faces the origin but leads away from it"
                    )));
                }
                seen[d.index()] = true;
                queue.push_back(d);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidGraph(format!(
                "cell {i} is disconnected from the origin"
            )));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.external.len() / 3
    }

    pub fn num_vertices(&self) -> usize {
        self.external.len()
    }

    pub fn num_inter_edges(&self) -> usize {
        self.external.iter().filter(|e| e.is_some()).count() / 2
    }

    pub fn num_edges(&self) -> usize {
        3 * self.num_cells() + self.num_inter_edges()
    }

    pub fn origin(&self) -> VertexId {
        self.origin
    }

    pub fn origin_cell(&self) -> CellId {
        self.origin.cell()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.num_cells() as u32).map(CellId)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.num_vertices() as u32).map(VertexId)
    }

    /// The neighbour across `v`'s inter-cell edge, if it has one.
    pub fn external(&self, v: VertexId) -> Option<VertexId> {
        self.external[v.index()]
    }

    pub fn neighbors(&self, v: VertexId) -> Neighbors {
        let [a, b] = v.cellmates();
        match self.external(v) {
            Some(w) => Neighbors {
                items: [a, b, w],
                len: 3,
                pos: 0,
            },
            None => Neighbors {
                items: [a, b, a],
                len: 2,
                pos: 0,
            },
        }
    }

    pub fn degree(&self, v: VertexId) -> usize {
        2 + self.external(v).is_some() as usize
    }

    pub fn are_adjacent(&self, a: VertexId, b: VertexId) -> bool {
        (a != b && a.cell() == b.cell()) || self.external(a) == Some(b)
    }

    /// Inter-cell edges as ordered pairs with the smaller vertex first.
    pub fn inter_cell_edges(&self) -> Vec<(VertexId, VertexId)> {
        self.vertices()
            .filter_map(|v| self.external(v).filter(|&w| v < w).map(|w| (v, w)))
            .collect()
    }

    /// The cell across the origin vertex's inter-cell edge.
    pub fn opposite_cell(&self) -> Option<CellId> {
        self.external(self.origin).map(VertexId::cell)
    }

    /// Cells hanging off the non-origin-facing vertices (locals 1 and 2) of `c`.
    pub fn child_cells(&self, c: CellId) -> impl Iterator<Item = CellId> + '_ {
        [1u8, 2]
            .into_iter()
            .filter_map(move |l| self.external(c.vertex(l)).map(VertexId::cell))
    }

    /// Cell adjacencies of the underlying tree.
    pub fn cell_neighbors(&self, c: CellId) -> impl Iterator<Item = CellId> + '_ {
        c.vertices()
            .into_iter()
            .filter_map(move |v| self.external(v).map(VertexId::cell))
    }

    /// `true` when contracting every cell leaves a connected acyclic graph.
    pub fn contracted_is_tree(&self) -> bool {
        let n = self.num_cells();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let edges = self.inter_cell_edges();
        for (a, b) in &edges {
            let (ra, rb) = (
                find(&mut parent, a.cell().index()),
                find(&mut parent, b.cell().index()),
            );
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        edges.len() + 1 == n
    }

    /// A string that is equal for graphs isomorphic as origin-rooted cacti.
    pub fn canonical_form(&self) -> String {
        fn below(g: &CactusGraph, c: CellId) -> String {
            let mut kids: Vec<String> = g.child_cells(c).map(|d| below(g, d)).collect();
            kids.sort();
            format!("({})", kids.concat())
        }
        let oc = self.origin_cell();
        let opposite = self
            .opposite_cell()
            .map(|d| below(self, d))
            .unwrap_or_default();
        format!("[{}|{}]", opposite, below(self, oc))
    }

    /// The decoration of the ball of the given radius in the 3-regular tree.
    pub fn ball(radius: usize) -> Self {
        let mut edges = Vec::new();
        let mut next = 1u32;
        let mut frontier: Vec<(CellId, Vec<u8>)> = Vec::new();
        let origin_cell = CellId(0);
        if radius >= 1 {
            for l in 0..3u8 {
                let child = CellId(next);
                next += 1;
                edges.push((origin_cell.vertex(l), child.vertex(0)));
                frontier.push((child, vec![1, 2]));
            }
        }
        for _ in 1..radius {
            let mut grown = Vec::new();
            for (c, locals) in frontier {
                for l in locals {
                    let child = CellId(next);
                    next += 1;
                    edges.push((c.vertex(l), child.vertex(0)));
                    grown.push((child, vec![1, 2]));
                }
            }
            frontier = grown;
        }
        CactusGraph::from_parts(next as usize, &edges, origin_cell.vertex(0))
            .expect("ball construction is always a valid cactus")
    }

    /// The component containing `root` once `root`'s inter-cell edge is cut,
    /// relabelled as a rooted subtree with `root` as its origin.
    pub fn hanging_subtree(&self, root: VertexId) -> Extracted {
        let n = self.num_cells();
        let mut new_cell = vec![u32::MAX; n];
        let mut local_map = vec![[0u8; 3]; n];
        let mut order: Vec<CellId> = Vec::new();
        let mut edges = Vec::new();

        let rc = root.cell();
        new_cell[rc.index()] = 0;
        local_map[rc.index()] = entry_relabel(root.local());
        order.push(rc);
        let cut = self.external(root);
        let mut queue = VecDeque::from([rc]);
        while let Some(c) = queue.pop_front() {
            for v in c.vertices() {
                let Some(w) = self.external(v) else { continue };
                if v == root || Some(v) == cut {
                    continue;
                }
                let d = w.cell();
                if new_cell[d.index()] != u32::MAX {
                    continue;
                }
                new_cell[d.index()] = order.len() as u32;
                local_map[d.index()] = entry_relabel(w.local());
                order.push(d);
                queue.push_back(d);
                let nv =
                    CellId(new_cell[c.index()]).vertex(local_map[c.index()][v.local() as usize]);
                let nw = CellId(new_cell[d.index()]).vertex(0);
                edges.push((nv, nw));
            }
        }
        let mut to_original = vec![VertexId(0); order.len() * 3];
        for &c in &order {
            for v in c.vertices() {
                let nv =
                    CellId(new_cell[c.index()]).vertex(local_map[c.index()][v.local() as usize]);
                to_original[nv.index()] = v;
            }
        }
        let graph = CactusGraph::from_parts(order.len(), &edges, CellId(0).vertex(0))
            .expect("a hanging subtree of a valid cactus is a valid cactus");
        Extracted {
            subtree: DecoratedRootedSubtree { graph: Some(graph) },
            to_original,
        }
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            cells: (0..self.num_cells() as u32).collect(),
            inter_edges: self
                .inter_cell_edges()
                .into_iter()
                .map(|(a, b)| [a.cell().0, a.local() as u32, b.cell().0, b.local() as u32])
                .collect(),
            origin: [self.origin.cell().0, self.origin.local() as u32],
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let index: BTreeMap<u32, u32> = json
            .cells
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32))
            .collect();
        if index.len() != json.cells.len() {
            return Err(Error::InvalidGraph("duplicate cell ids".into()));
        }
        let vertex = |cell: u32, local: u32| -> Result<VertexId> {
            let c = index
                .get(&cell)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown cell id {cell}")))?;
            if local > 2 {
                return Err(Error::InvalidGraph(format!(
                    "local index {local} out of range"
                )));
            }
            Ok(VertexId::new(CellId(*c), local as u8))
        };
        let edges = json
            .inter_edges
            .iter()
            .map(|e| Ok((vertex(e[0], e[1])?, vertex(e[2], e[3])?)))
            .collect::<Result<Vec<_>>>()?;
        CactusGraph::from_parts(
            json.cells.len(),
            &edges,
            vertex(json.origin[0], json.origin[1])?,
        )
    }
}

/// Local relabelling that sends the entry vertex to 0 and keeps the others in order.
fn entry_relabel(entry: u8) -> [u8; 3] {
    let mut map = [0u8; 3];
    let mut next = 1;
    for l in 0..3u8 {
        if l == entry {
            map[l as usize] = 0;
        } else {
            map[l as usize] = next;
            next += 1;
        }
    }
    map
}

/// On-disk graph format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub cells: Vec<u32>,
    /// `[cell_a, local_a, cell_b, local_b]`
    pub inter_edges: Vec<[u32; 4]>,
    pub origin: [u32; 2],
}

/// An underlying rooted tree; each node has at most two children, which are
/// attached to local vertices 1 and 2 of the node's cell, in order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeShape {
    pub children: Vec<TreeShape>,
}

impl TreeShape {
    pub fn leaf() -> Self {
        TreeShape {
            children: Vec::new(),
        }
    }

    pub fn node(children: Vec<TreeShape>) -> Self {
        TreeShape { children }
    }

    pub fn path(len: usize) -> Self {
        assert!(len >= 1, "a path needs at least one node");
        let mut shape = TreeShape::leaf();
        for _ in 1..len {
            shape = TreeShape::node(vec![shape]);
        }
        shape
    }

    /// `B_depth`: the balanced tree in which every node above the leaves has two children.
    pub fn balanced(depth: usize) -> Self {
        let mut shape = TreeShape::leaf();
        for _ in 0..depth {
            shape = TreeShape::node(vec![shape.clone(), shape]);
        }
        shape
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeShape::size).sum::<usize>()
    }

    fn check_degrees(&self) -> Result<()> {
        if self.children.len() > 2 {
            return Err(Error::InvalidShape(format!(
                "a node with {} children exceeds degree 3",
                self.children.len()
            )));
        }
        self.children.iter().try_for_each(TreeShape::check_degrees)
    }

    /// Every shape with at most `max_cells` nodes (children ordered; an only
    /// child sits at local 1).
    pub fn all_up_to(max_cells: usize) -> Vec<TreeShape> {
        let mut by_size: Vec<Vec<TreeShape>> = vec![Vec::new(); max_cells + 1];
        for n in 1..=max_cells {
            let mut shapes = vec![];
            if n == 1 {
                shapes.push(TreeShape::leaf());
            } else {
                for s in &by_size[n - 1] {
                    shapes.push(TreeShape::node(vec![s.clone()]));
                }
                for left in 1..n - 1 {
                    let right = n - 1 - left;
                    for a in &by_size[left] {
                        for b in &by_size[right] {
                            shapes.push(TreeShape::node(vec![a.clone(), b.clone()]));
                        }
                    }
                }
            }
            by_size[n] = shapes;
        }
        by_size.into_iter().flatten().collect()
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for c in &self.children {
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for TreeShape {
    type Err = Error;

    /// Parses nested parentheses: `()` is one cell, `(()())` is `B_1`.
    fn from_str(s: &str) -> Result<Self> {
        fn parse(bytes: &[u8], pos: &mut usize) -> Result<TreeShape> {
            if bytes.get(*pos) != Some(&b'(') {
                return Err(Error::InvalidShape(format!("expected '(' at offset {pos}")));
            }
            *pos += 1;
            let mut children = Vec::new();
            while bytes.get(*pos) == Some(&b'(') {
                children.push(parse(bytes, pos)?);
            }
            if bytes.get(*pos) != Some(&b')') {
                return Err(Error::InvalidShape(format!("expected ')' at offset {pos}")));
            }
            *pos += 1;
            Ok(TreeShape { children })
        }
        let compact: Vec<u8> = s.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        let mut pos = 0;
        let shape = parse(&compact, &mut pos)?;
        if pos != compact.len() {
            return Err(Error::InvalidShape(format!(
                "trailing input after offset {pos}"
            )));
        }
        Ok(shape)
    }
}

/// A decorated rooted subtree; the wrapped graph's origin is the root vertex,
/// which has no inter-cell edge inside the subtree. `None` is the null subtree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoratedRootedSubtree {
    graph: Option<CactusGraph>,
}

impl DecoratedRootedSubtree {
    pub fn empty() -> Self {
        DecoratedRootedSubtree { graph: None }
    }

    pub fn from_graph(graph: CactusGraph) -> Result<Self> {
        if graph.external(graph.origin()).is_some() {
            return Err(Error::InvalidGraph(
                "the root vertex of a rooted subtree must have degree 2".into(),
            ));
        }
        Ok(DecoratedRootedSubtree { graph: Some(graph) })
    }

    pub fn graph(&self) -> Option<&CactusGraph> {
        self.graph.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_none()
    }

    pub fn root_vertex(&self) -> Option<VertexId> {
        self.graph.as_ref().map(CactusGraph::origin)
    }

    pub fn root_cell(&self) -> Option<CellId> {
        self.graph.as_ref().map(CactusGraph::origin_cell)
    }

    pub fn num_cells(&self) -> usize {
        self.graph.as_ref().map_or(0, CactusGraph::num_cells)
    }

    pub fn num_vertices(&self) -> usize {
        3 * self.num_cells()
    }

    /// The underlying tree shape, rooted at the root cell.
    pub fn shape(&self) -> Option<TreeShape> {
        fn walk(g: &CactusGraph, c: CellId) -> TreeShape {
            TreeShape::node(g.child_cells(c).map(|d| walk(g, d)).collect())
        }
        self.graph.as_ref().map(|g| walk(g, g.origin_cell()))
    }
}

/// Each node of `shape` becomes a cell; children hang off locals 1 and 2.
pub fn build_rooted_subtree(shape: &TreeShape) -> Result<DecoratedRootedSubtree> {
    shape.check_degrees()?;
    let mut edges = Vec::new();
    let mut next = 1u32;
    let mut stack = vec![(CellId(0), shape)];
    while let Some((c, node)) = stack.pop() {
        for (i, child) in node.children.iter().enumerate() {
            let d = CellId(next);
            next += 1;
            edges.push((c.vertex(i as u8 + 1), d.vertex(0)));
            stack.push((d, child));
        }
    }
    let graph = CactusGraph::from_parts(next as usize, &edges, CellId(0).vertex(0))?;
    DecoratedRootedSubtree::from_graph(graph)
}

/// A subtree cut out of a larger graph, with the map back to original vertices.
#[derive(Clone, Debug)]
pub struct Extracted {
    pub subtree: DecoratedRootedSubtree,
    /// Indexed by subtree vertex index.
    pub to_original: Vec<VertexId>,
}

impl Extracted {
    fn empty() -> Self {
        Extracted {
            subtree: DecoratedRootedSubtree::empty(),
            to_original: Vec::new(),
        }
    }
}

/// The two rooted subtrees obtained by cutting the origin's inter-cell edge.
#[derive(Clone, Debug)]
pub struct SplitAtOrigin {
    /// Contains the origin cell, rooted at the origin.
    pub u1: Extracted,
    /// Rooted at the origin's outside neighbour; empty when there is none.
    pub u2: Extracted,
}

impl SplitAtOrigin {
    /// Re-attaches the two halves along the cut edge.
    pub fn rejoin(&self) -> CactusGraph {
        let g1 = self
            .u1
            .subtree
            .graph()
            .expect("U1 always contains the origin cell");
        let mut edges = g1.inter_cell_edges();
        let offset = g1.num_cells() as u32;
        let mut cells = g1.num_cells();
        if let Some(g2) = self.u2.subtree.graph() {
            let shift = |v: VertexId| VertexId::new(CellId(v.cell().0 + offset), v.local());
            edges.extend(
                g2.inter_cell_edges()
                    .into_iter()
                    .map(|(a, b)| (shift(a), shift(b))),
            );
            edges.push((g1.origin(), shift(g2.origin())));
            cells += g2.num_cells();
        }
        CactusGraph::from_parts(cells, &edges, g1.origin()).expect("rejoined halves form a cactus")
    }
}

pub fn split_at_origin(graph: &CactusGraph) -> SplitAtOrigin {
    let o = graph.origin();
    let u1 = graph.hanging_subtree(o);
    let u2 = match graph.external(o) {
        Some(o2) => graph.hanging_subtree(o2),
        None => Extracted::empty(),
    };
    SplitAtOrigin { u1, u2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellClass {
    Internal,
    Medial,
    Terminal,
}

/// Where a radical hangs off a cluster: the cluster vertex it is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RadicalSlot {
    pub id: usize,
    pub vertex: VertexId,
}

/// A connected union of cells containing the origin cell, embedded in a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterShape {
    cells: BTreeSet<CellId>,
    classes: BTreeMap<CellId, CellClass>,
    slots: Vec<RadicalSlot>,
    opposite_included: bool,
}

impl ClusterShape {
    pub fn new(graph: &CactusGraph, cells: impl IntoIterator<Item = CellId>) -> Result<Self> {
        let cells: BTreeSet<CellId> = cells.into_iter().collect();
        if let Some(c) = cells.iter().find(|c| c.index() >= graph.num_cells()) {
            return Err(Error::InvalidCluster(format!(
                "cell {c} is not in the graph"
            )));
        }
        let oc = graph.origin_cell();
        if !cells.contains(&oc) {
            return Err(Error::InvalidCluster(
                "a cluster must contain the origin cell".into(),
            ));
        }
        // Connected iff every cell's parent (towards the origin cell) is present.
        for &c in &cells {
            if c == oc {
                continue;
            }
            let parent = graph.external(c.vertex(0)).map(VertexId::cell);
            if !parent.is_some_and(|p| cells.contains(&p)) {
                return Err(Error::InvalidCluster(format!(
                    "cell {c} is not connected to the origin cell"
                )));
            }
        }
        let in_cluster = |v: VertexId| graph.external(v).is_some_and(|w| cells.contains(&w.cell()));
        let classes = cells
            .iter()
            .map(|&c| {
                let attached = [1u8, 2]
                    .iter()
                    .filter(|&&l| in_cluster(c.vertex(l)))
                    .count();
                let class = match attached {
                    2 => CellClass::Internal,
                    1 => CellClass::Medial,
                    _ => CellClass::Terminal,
                };
                (c, class)
            })
            .collect();
        let mut slot_vertices = Vec::new();
        for &c in &cells {
            for v in c.vertices() {
                let is_slot = if v.local() == 0 {
                    c == oc && !in_cluster(v)
                } else {
                    !in_cluster(v)
                };
                if is_slot {
                    slot_vertices.push(v);
                }
            }
        }
        let slots = slot_vertices
            .into_iter()
            .enumerate()
            .map(|(id, vertex)| RadicalSlot { id, vertex })
            .collect();
        let opposite_included = graph.opposite_cell().is_some_and(|d| cells.contains(&d));
        Ok(ClusterShape {
            cells,
            classes,
            slots,
            opposite_included,
        })
    }

    pub fn cells(&self) -> &BTreeSet<CellId> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: CellId) -> bool {
        self.cells.contains(&c)
    }

    pub fn class_of(&self, c: CellId) -> Option<CellClass> {
        self.classes.get(&c).copied()
    }

    pub fn radical_slots(&self) -> &[RadicalSlot] {
        &self.slots
    }

    /// Whether the cell across the origin's inter-cell edge is in the cluster.
    pub fn origin_opposite_flag(&self) -> bool {
        self.opposite_included
    }

    /// `(internal, medial, terminal)` cell counts.
    pub fn class_counts(&self) -> (usize, usize, usize) {
        let count = |k| self.classes.values().filter(|&&c| c == k).count();
        (
            count(CellClass::Internal),
            count(CellClass::Medial),
            count(CellClass::Terminal),
        )
    }
}

pub fn classify_cells(cluster: &ClusterShape) -> &BTreeMap<CellId, CellClass> {
    &cluster.classes
}

/// All clusters of `n` cells about the origin of `graph`, as labelled cell subsets.
pub fn enumerate_clusters(graph: &CactusGraph, n: usize) -> Result<Vec<ClusterShape>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "clusters have at least one cell".into(),
        ));
    }
    if n > MAX_CLUSTER_CELLS {
        return Err(Error::SizeGuard {
            what: "cluster",
            size: n,
            limit: MAX_CLUSTER_CELLS,
        });
    }
    // Grow connected subsets of the cell tree: take some frontier cell, and
    // permanently exclude the frontier cells before it. Each subset appears once.
    fn grow(
        graph: &CactusGraph,
        n: usize,
        current: &mut Vec<CellId>,
        frontier: &[CellId],
        out: &mut Vec<Vec<CellId>>,
    ) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for (i, &c) in frontier.iter().enumerate() {
            let mut next: Vec<CellId> = frontier[i + 1..].to_vec();
            next.extend(graph.child_cells(c));
            current.push(c);
            grow(graph, n, current, &next, out);
            current.pop();
        }
    }
    let oc = graph.origin_cell();
    let mut frontier: Vec<CellId> = graph.opposite_cell().into_iter().collect();
    frontier.extend(graph.child_cells(oc));
    let mut subsets = Vec::new();
    grow(graph, n, &mut vec![oc], &frontier, &mut subsets);
    subsets
        .into_iter()
        .map(|cells| ClusterShape::new(graph, cells))
        .collect()
}

/// Clusters of `n` cells in the infinite cactus, realised inside a ball large
/// enough to hold every one of them.
pub fn infinite_clusters(n: usize) -> Result<(CactusGraph, Vec<ClusterShape>)> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "clusters have at least one cell".into(),
        ));
    }
    if n > MAX_CLUSTER_CELLS {
        return Err(Error::SizeGuard {
            what: "cluster",
            size: n,
            limit: MAX_CLUSTER_CELLS,
        });
    }
    let graph = CactusGraph::ball(n - 1);
    let clusters = enumerate_clusters(&graph, n)?;
    Ok((graph, clusters))
}
