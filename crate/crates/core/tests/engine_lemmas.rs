//! Toppling lemmas on random recurrent configurations of the radius-2 ball.

use std::collections::{BTreeSet, VecDeque};

use cactus_sandpile::recurrence::{is_recurrent, random_recurrent};
use cactus_sandpile::{add_and_relax, wave_decompose, CactusGraph, VertexId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn connected(g: &CactusGraph, set: &BTreeSet<VertexId>) -> bool {
    let Some(&start) = set.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v) {
            if set.contains(&w) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.len() == set.len()
}

fn config(seed: u64) -> cactus_sandpile::Configuration {
    let g = CactusGraph::ball(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_recurrent(&g, &mut rng, 200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_are_recurrent(seed in any::<u64>()) {
        prop_assert!(is_recurrent(&CactusGraph::ball(2), &config(seed)));
    }

    #[test]
    fn origin_repeats_first(seed in any::<u64>()) {
        let g = CactusGraph::ball(2);
        let r = add_and_relax(&g, &config(seed), g.origin()).unwrap();
        prop_assert!(r.log.first_repeat().map_or(true, |v| v == g.origin()));
    }

    #[test]
    fn toppled_prefixes_are_connected(seed in any::<u64>(), pick in 0usize..30) {
        let g = CactusGraph::ball(2);
        let r = add_and_relax(&g, &config(seed), VertexId::from_index(pick)).unwrap();
        let mut prefix = BTreeSet::new();
        for &v in &r.log.sequence {
            prefix.insert(v);
            prop_assert!(connected(&g, &prefix));
        }
    }

    #[test]
    fn degree_two_vertices_topple_once(seed in any::<u64>(), pick in 0usize..30) {
        let g = CactusGraph::ball(2);
        let v = VertexId::from_index(pick);
        prop_assume!(g.degree(v) == 2);
        let r = add_and_relax(&g, &config(seed), v).unwrap();
        prop_assert!(r.log.per_vertex_counts().values().all(|&k| k <= 1));
    }

    #[test]
    fn waves_reach_the_same_state(seed in any::<u64>()) {
        let g = CactusGraph::ball(2);
        let c = config(seed);
        let a = add_and_relax(&g, &c, g.origin()).unwrap();
        let w = wave_decompose(&g, &c, g.origin()).unwrap();
        prop_assert_eq!(a.final_config, w.final_config);
    }
}
