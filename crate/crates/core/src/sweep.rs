//! Exhaustive sweeps over stable configurations.
//!
//! A configuration on `n` vertices is the base-3 number whose digit `i` is
//! `height(i) - 1`. The index space is cut into blocks that share a prefix of
//! high digits; each block is walked with an odometer on the low digits.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest vertex count accepted by exhaustive sweeps (3^15 configurations).
pub const MAX_SWEEP_VERTICES: usize = 15;

const INNER_DIGITS: usize = 7;

pub fn num_stable(vertices: usize) -> u64 {
    3u64.pow(vertices as u32)
}

pub fn check_size(vertices: usize) -> Result<()> {
    if vertices > MAX_SWEEP_VERTICES {
        return Err(Error::SizeGuard {
            what: "exhaustive sweep",
            size: vertices,
            limit: MAX_SWEEP_VERTICES,
        });
    }
    Ok(())
}

/// Writes the heights encoded by `index` into `out`.
pub fn decode(mut index: u64, out: &mut [u8]) {
    for h in out.iter_mut() {
        *h = (index % 3) as u8 + 1;
        index /= 3;
    }
}

pub fn encode(heights: &[u8]) -> u64 {
    heights
        .iter()
        .rev()
        .fold(0u64, |acc, &h| acc * 3 + (h as u64 - 1))
}

/// Advances the low `digits` heights like an odometer; returns false on wrap.
fn step(heights: &mut [u8], digits: usize) -> bool {
    for h in heights[..digits].iter_mut() {
        if *h < 3 {
            *h += 1;
            return true;
        }
        *h = 1;
    }
    false
}

/// Folds `visit` over every stable configuration on `vertices` vertices.
///
/// `visit` receives the configuration index and heights. Partial results are
/// merged with `merge`, which must be associative and commutative for the
/// total to be independent of scheduling.
pub fn fold<A, I, V, M>(
    vertices: usize,
    workers: Option<usize>,
    init: I,
    visit: V,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, u64, &[u8]) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    check_size(vertices)?;
    let inner = vertices.min(INNER_DIGITS);
    let block = num_stable(inner);
    let blocks = num_stable(vertices - inner);
    let run = || {
        (0..blocks)
            .into_par_iter()
            .fold(&init, |mut acc, b| {
                let mut heights = vec![1u8; vertices];
                decode(b * block, &mut heights);
                let mut index = b * block;
                loop {
                    visit(&mut acc, index, &heights);
                    index += 1;
                    if !step(&mut heights, inner) {
                        break;
                    }
                }
                acc
            })
            .reduce(&init, &merge)
    };
    match workers {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        _ => Ok(run()),
    }
}

/// Counts configurations satisfying `pred`.
pub fn count<P>(vertices: usize, workers: Option<usize>, pred: P) -> Result<u64>
where
    P: Fn(&[u8]) -> bool + Sync + Send,
{
    fold(
        vertices,
        workers,
        || 0u64,
        |acc, _, h| *acc += pred(h) as u64,
        |a, b| a + b,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_encode_roundtrip() {
        let mut h = vec![0u8; 5];
        for i in 0..num_stable(5) {
            decode(i, &mut h);
            assert!(h.iter().all(|&x| (1..=3).contains(&x)));
            assert_eq!(encode(&h), i);
        }
    }

    #[test]
    fn fold_visits_every_index_once() {
        for n in [0, 1, 3, 8, 9] {
            let (count, sum) = fold(
                n,
                None,
                || (0u64, 0u64),
                |acc, i, h| {
                    assert_eq!(encode(h), i);
                    acc.0 += 1;
                    acc.1 += i;
                },
                |a, b| (a.0 + b.0, a.1 + b.1),
            )
            .unwrap();
            let total = num_stable(n);
            assert_eq!(count, total);
            assert_eq!(sum, total * (total - 1) / 2);
        }
    }

    #[test]
    fn worker_count_does_not_change_totals() {
        let pred = |h: &[u8]| h.iter().map(|&x| x as u32).sum::<u32>() % 4 == 0;
        let a = count(9, Some(1), pred).unwrap();
        let b = count(9, Some(3), pred).unwrap();
        let c = count(9, None, pred).unwrap();
        assert_eq!((a, a), (b, c));
    }

    #[test]
    fn size_guard() {
        assert!(matches!(
            count(MAX_SWEEP_VERTICES + 1, None, |_| true),
            Err(Error::SizeGuard { .. })
        ));
    }
}
