//! Brute-force cross-checks of the filling rules on small graphs.

use std::collections::BTreeMap;

use cactus_sandpile::engine::{first_wave_cells_with, split_masks};
use cactus_sandpile::filling::{verify_filling_theorem, verify_first_wave_theorem};
use cactus_sandpile::recurrence::{count_recurrent_bruteforce, region_burns};
use cactus_sandpile::sweep;
use cactus_sandpile::topology::{build_rooted_subtree, enumerate_clusters, TreeShape};
use cactus_sandpile::CactusGraph;
use num_bigint::BigUint;

#[test]
fn filling_rules_on_every_small_subtree() {
    let mut checked = 0;
    for shape in TreeShape::all_up_to(3) {
        let sub = build_rooted_subtree(&shape).unwrap();
        let g = sub.graph().unwrap();
        for n in 1..=g.num_cells() {
            for c in enumerate_clusters(g, n).unwrap() {
                let rep = verify_filling_theorem(&sub, &c).unwrap();
                assert!(rep.passed(), "shape {shape}: {rep:?}");
                checked += 1;
            }
        }
    }
    // leaf, 2-path, 3-path, cherry: one cluster per rooted connected subset
    assert_eq!(checked, 1 + 2 + 3 + 4);
}

#[test]
fn first_wave_rules_on_radius_one_ball() {
    let g = CactusGraph::ball(1);
    let clusters: Vec<_> = (1..=4)
        .flat_map(|n| enumerate_clusters(&g, n).unwrap())
        .collect();
    let reports = verify_first_wave_theorem(&g, &clusters, None).unwrap();
    for r in &reports {
        assert!(r.passed(), "{r:?}");
    }
    // every recurrent configuration has some first wave, possibly empty
    let quiet = sweep::count(g.num_vertices(), None, |h| {
        region_burns(&g, h, None, None) && h[g.origin().index()] < 3
    })
    .unwrap();
    let waves: u64 = reports.iter().map(|r| r.both).sum();
    assert_eq!(
        BigUint::from(quiet + waves),
        count_recurrent_bruteforce(&g, None).unwrap()
    );
}

#[test]
fn first_wave_histogram_by_size() {
    let g = CactusGraph::ball(1);
    let masks = split_masks(&g);
    let hist = sweep::fold(
        g.num_vertices(),
        None,
        BTreeMap::<usize, u64>::new,
        |acc, _, h| {
            if region_burns(&g, h, None, None) {
                *acc.entry(first_wave_cells_with(&g, &masks, h).len())
                    .or_default() += 1;
            }
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    )
    .unwrap();
    for n in 1..=4 {
        let clusters = enumerate_clusters(&g, n).unwrap();
        let by_rules: u64 = verify_first_wave_theorem(&g, &clusters, None)
            .unwrap()
            .iter()
            .map(|r| r.both)
            .sum();
        assert_eq!(hist.get(&n).copied().unwrap_or(0), by_rules, "n = {n}");
    }
}
