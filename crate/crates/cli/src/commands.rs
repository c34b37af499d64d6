use std::collections::BTreeMap;
use std::fmt::Write as _;

use cactus_sandpile::engine::{
    find_multiwave_witness, first_wave_cells_with, split_masks, WitnessOutcome, WitnessSearch,
};
use cactus_sandpile::filling::{
    phi_n, phi_of_cluster, verify_filling_theorem, verify_first_wave_theorem,
};
use cactus_sandpile::radicals::{
    balanced_census, balanced_normalized, census_bruteforce, compare_tables, derive_tables,
    expected_tables,
};
use cactus_sandpile::recurrence::{
    count_recurrent_bruteforce, count_recurrent_via_decomposition, region_burns,
};
use cactus_sandpile::series::{fit_exponent, g_coeffs_fast, scaled_coeffs};
use cactus_sandpile::sweep;
use cactus_sandpile::topology::{build_rooted_subtree, infinite_clusters, GraphJson};
use cactus_sandpile::{
    CactusGraph, CellId, ClusterShape, DecoratedRootedSubtree, Error, TreeShape,
};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::manifest::Defaults;
use crate::{Command, Globals, GraphSource, Mode};

pub struct Run {
    pub output: String,
    pub status: u8,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SizeGuard { .. } => 2,
            _ => 3,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: String) -> CliError {
    CliError { code: 3, message }
}

type Res = Result<Run, CliError>;

fn done(output: String) -> Res {
    Ok(Run {
        output,
        status: 0,
        seed: None,
    })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn load_graph(source: &GraphSource) -> Result<CactusGraph, CliError> {
    if let Some(r) = source.ball {
        if r > 6 {
            return Err(Error::SizeGuard {
                what: "ball radius",
                size: r,
                limit: 6,
            }
            .into());
        }
        return Ok(CactusGraph::ball(r));
    }
    if let Some(text) = &source.shape {
        let shape: TreeShape = text.parse()?;
        let sub = build_rooted_subtree(&shape)?;
        return Ok(sub.graph().expect("shapes have at least one cell").clone());
    }
    let path = source.graph.as_ref().expect("clap requires a graph source");
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let json: GraphJson =
        serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(CactusGraph::from_json(&json)?)
}

fn cluster_of(graph: &CactusGraph, cells: &[u32]) -> Result<ClusterShape, CliError> {
    Ok(ClusterShape::new(graph, cells.iter().map(|&c| CellId(c)))?)
}

pub fn run(command: &Command, g: &Globals) -> Res {
    let defaults = Defaults::load();
    match command {
        Command::VerifyTables { inject_fault } => verify_tables(g, *inject_fault),
        Command::BruteCount { source, chain } => brute_count(g, source, chain.as_deref()),
        Command::RadicalCensus { max_depth } => radical_census(
            max_depth.unwrap_or(defaults.radical_census.max_depth),
            defaults.radical_census.brute_depth,
        ),
        Command::FillCheck {
            source,
            cluster,
            first_wave,
        } => fill_check(g, source, cluster, *first_wave),
        Command::FirstWaveDist { source, mode } => first_wave_dist(g, source, *mode, &defaults),
        Command::Witness { source } => witness(g, source, &defaults),
        Command::Series { n } => {
            series(n.unwrap_or(defaults.series.n), defaults.series.exact_limit)
        }
        Command::ExponentFit { n_min, n_max } => exponent_fit(
            n_min.unwrap_or(defaults.exponent_fit.n_min),
            n_max.unwrap_or(defaults.exponent_fit.n_max),
        ),
        Command::Phi { n } => phi(g, n.unwrap_or(defaults.phi.n)),
        Command::Ball { radius } => {
            if *radius > 6 {
                return Err(Error::SizeGuard {
                    what: "ball radius",
                    size: *radius,
                    limit: 6,
                }
                .into());
            }
            done(pretty(
                &serde_json::to_value(CactusGraph::ball(*radius).to_json()).unwrap(),
            ))
        }
    }
}

fn verify_tables(g: &Globals, inject_fault: bool) -> Res {
    let mut derived = derive_tables();
    if inject_fault {
        if let Some(row) = derived
            .radical
            .iter_mut()
            .find(|r| r.cell.to_string() == "2-3-2")
        {
            std::mem::swap(&mut row.weak, &mut row.strong);
        }
    }
    let expected = expected_tables();
    let diffs = compare_tables(&derived, &expected);
    let rows = expected.origin.len();
    let a = &derived.aggregates;
    let output = if g.json {
        pretty(&json!({
            "rows": rows,
            "origin_rows_matching": rows - diffs.iter().filter(|d| d.table == 1).count(),
            "radical_rows_matching": rows - diffs.iter().filter(|d| d.table == 2).count(),
            "aggregates": a,
            "diffs": diffs.iter().map(|d| json!({
                "table": d.table, "row": d.row, "expected": d.expected, "derived": d.derived,
            })).collect::<Vec<_>>(),
        }))
    } else if diffs.is_empty() {
        let t = |v: &[u32; 4]| v.map(|x| x.to_string()).join(",");
        format!(
            "{rows}/{rows} rows match, aggregates ({})/({})",
            t(&a.weak),
            t(&a.strong)
        )
    } else {
        let mut s = format!("{} rows differ\n", diffs.len());
        for d in &diffs {
            writeln!(
                s,
                "table {} row {}: expected [{}], derived [{}]",
                d.table, d.row, d.expected, d.derived
            )
            .unwrap();
        }
        s
    };
    Ok(Run {
        output,
        status: if diffs.is_empty() { 0 } else { 1 },
        seed: None,
    })
}

fn brute_count(g: &Globals, source: &GraphSource, chain: Option<&[u32]>) -> Res {
    let graph = load_graph(source)?;
    let n = graph.num_vertices();
    sweep::check_size(n)?;
    let recurrent = count_recurrent_bruteforce(&graph, g.workers)?;
    let stable = sweep::num_stable(n);
    let mut status = 0;
    let decomposition = match chain {
        Some(cells) => {
            let c = cluster_of(&graph, cells)?;
            let d = count_recurrent_via_decomposition(&graph, &c)?;
            if d != recurrent {
                status = 1;
            }
            Some(d)
        }
        None => None,
    };
    let output = if g.json {
        pretty(&json!({
            "vertices": n,
            "stable": stable,
            "recurrent": recurrent.to_string(),
            "decomposition": decomposition.as_ref().map(ToString::to_string),
        }))
    } else {
        let mut s = format!("recurrent {recurrent} of {stable}");
        if let Some(d) = &decomposition {
            write!(
                s,
                "\ndecomposition {d} ({})",
                if status == 0 { "agrees" } else { "MISMATCH" }
            )
            .unwrap();
        }
        s
    };
    Ok(Run {
        output,
        status,
        seed: None,
    })
}

fn radical_census(max_depth: usize, brute_depth: usize) -> Res {
    let mut s =
        String::from("depth,cells,x,stopper_ratio,strong_stopper_ratio,n_strong,n_weak,brute_x\n");
    for depth in 0..=max_depth {
        let norm = balanced_normalized(depth);
        // exact counts grow like 3^(3 cells); only print them while short
        let (strong, weak) = if depth <= 4 {
            let c = balanced_census(depth);
            (c.n_strong.to_string(), c.n_weak.to_string())
        } else {
            (String::new(), String::new())
        };
        let brute = if depth <= brute_depth {
            let sub = build_rooted_subtree(&TreeShape::balanced(depth))?;
            census_bruteforce(&sub, None)?.x().to_string()
        } else {
            String::new()
        };
        writeln!(
            s,
            "{depth},{},{},{:.12},{:.12},{strong},{weak},{brute}",
            (1usize << (depth + 1)) - 1,
            norm.x,
            norm.stopper_ratio.to_f64().unwrap_or(f64::NAN),
            norm.strong_stopper_ratio.to_f64().unwrap_or(f64::NAN),
        )
        .unwrap();
    }
    done(s)
}

fn fill_check(g: &Globals, source: &GraphSource, cells: &[u32], first_wave: bool) -> Res {
    let graph = load_graph(source)?;
    sweep::check_size(graph.num_vertices())?;
    let cluster = cluster_of(&graph, cells)?;
    let (report, passed) = if first_wave {
        let r =
            verify_first_wave_theorem(&graph, std::slice::from_ref(&cluster), g.workers)?.remove(0);
        let passed = r.passed();
        (
            json!({
                "rules": "first-wave",
                "cluster": r.cluster,
                "both": r.both,
                "rules_only": r.rules_only,
                "brute_only": r.brute_only,
                "generated": r.generated,
                "counted": r.counted.to_string(),
                "passed": passed,
            }),
            passed,
        )
    } else {
        let sub = DecoratedRootedSubtree::from_graph(graph.clone())?;
        let r = verify_filling_theorem(&sub, &cluster)?;
        let passed = r.passed();
        let mut v = serde_json::to_value(&r).unwrap();
        v["rules"] = json!("filling");
        v["passed"] = json!(passed);
        (v, passed)
    };
    let output = if g.json {
        pretty(&report)
    } else {
        format!(
            "{}: {}",
            if passed { "PASS" } else { "FAIL" },
            serde_json::to_string(&report).unwrap()
        )
    };
    Ok(Run {
        output,
        status: if passed { 0 } else { 1 },
        seed: None,
    })
}

fn first_wave_dist(g: &Globals, source: &GraphSource, mode: Mode, defaults: &Defaults) -> Res {
    let graph = load_graph(source)?;
    let n = graph.num_vertices();
    let masks = split_masks(&graph);
    let mass = |h: &[u8]| first_wave_cells_with(&graph, &masks, h).len();
    let (hist, seed, attempts) = match mode {
        Mode::Exhaustive => {
            let hist = sweep::fold(
                n,
                g.workers,
                BTreeMap::<usize, u64>::new,
                |acc, _, h| {
                    if region_burns(&graph, h, None, None) {
                        *acc.entry(mass(h)).or_default() += 1;
                    }
                },
                |mut a, b| {
                    for (k, v) in b {
                        *a.entry(k).or_default() += v;
                    }
                    a
                },
            )?;
            (hist, None, None)
        }
        Mode::Sampled => {
            let seed = g.seed.unwrap_or(defaults.first_wave_dist.seed);
            let attempts = g.budget.unwrap_or(defaults.first_wave_dist.samples);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hist = BTreeMap::new();
            let mut h = vec![0u8; n];
            for _ in 0..attempts {
                h.iter_mut().for_each(|x| *x = rng.gen_range(1..=3));
                if region_burns(&graph, &h, None, None) {
                    *hist.entry(mass(&h)).or_default() += 1;
                }
            }
            (hist, Some(seed), Some(attempts))
        }
    };
    let output = if g.json {
        pretty(&json!({
            "mode": mode,
            "seed": seed,
            "attempts": attempts,
            "recurrent": hist.values().sum::<u64>(),
            "histogram": hist.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        }))
    } else {
        let mut s = String::from("cells,count\n");
        for (k, v) in &hist {
            writeln!(s, "{k},{v}").unwrap();
        }
        s
    };
    Ok(Run {
        output,
        status: 0,
        seed,
    })
}

fn witness(g: &Globals, source: &GraphSource, defaults: &Defaults) -> Res {
    let graph = load_graph(source)?;
    let seed = g.seed.unwrap_or(defaults.witness.seed);
    let budget = g.budget.unwrap_or(defaults.witness.budget);
    if graph.degree(graph.origin()) == 2 {
        let output = if g.json {
            pretty(&json!({ "found": false, "reason": "none possible: the origin has degree 2" }))
        } else {
            "none possible: the origin has degree 2".into()
        };
        return Ok(Run {
            output,
            status: 0,
            seed: None,
        });
    }
    let outcome = find_multiwave_witness(
        &graph,
        WitnessSearch {
            budget,
            seed,
            recurrent_only: true,
        },
    );
    let output = match &outcome {
        WitnessOutcome::Found { witness, examined } => {
            let v = json!({
                "found": true,
                "examined": examined,
                "vertex": witness.vertex.to_string(),
                "config": witness.config.to_json(),
                "waves": witness.report.log.num_waves(),
                "avalanche": witness.report.to_json(true),
            });
            if g.json {
                pretty(&v)
            } else {
                format!(
                    "witness after {examined} configurations: vertex {} topples only after the first wave\n{}",
                    witness.vertex,
                    pretty(&v)
                )
            }
        }
        WitnessOutcome::NotFound {
            examined,
            exhaustive,
        } => {
            let reason = if *exhaustive {
                "none exists"
            } else {
                "none found within budget"
            };
            if g.json {
                pretty(
                    &json!({ "found": false, "examined": examined, "exhaustive": exhaustive, "reason": reason }),
                )
            } else {
                format!("{reason} ({examined} configurations examined)")
            }
        }
    };
    Ok(Run {
        output,
        status: 0,
        seed: Some(seed),
    })
}

fn series(n: usize, exact_limit: usize) -> Res {
    if n > 200_000 {
        return Err(Error::SizeGuard {
            what: "series length",
            size: n,
            limit: 200_000,
        }
        .into());
    }
    let c = scaled_coeffs(n);
    let b = g_coeffs_fast(n.min(exact_limit));
    let mut s = String::from("n,b_n,c_n,c_n_n1.5\n");
    for k in 1..=n {
        let exact = b.get(k).map(ToString::to_string).unwrap_or_default();
        writeln!(
            s,
            "{k},{exact},{:e},{:.12}",
            c[k],
            c[k] * (k as f64).powf(1.5)
        )
        .unwrap();
    }
    done(s)
}

fn exponent_fit(n_min: usize, n_max: usize) -> Res {
    if n_max > 200_000 {
        return Err(Error::SizeGuard {
            what: "series length",
            size: n_max,
            limit: 200_000,
        }
        .into());
    }
    let c = scaled_coeffs(n_max);
    let fit = fit_exponent(&c, n_min, n_max)?;
    done(pretty(&json!({
        "slope": fit.slope,
        "intercept": fit.intercept,
        "stderr": fit.stderr,
        "window": [fit.window.0, fit.window.1],
    })))
}

fn phi(g: &Globals, n: usize) -> Res {
    let value = phi_n(n)?;
    let (graph, clusters) = infinite_clusters(n)?;
    let per: Vec<Value> = clusters
        .iter()
        .map(|c| {
            let p = phi_of_cluster(&graph, c);
            json!({
                "cells": c.cells().iter().map(|c| c.0).collect::<Vec<_>>(),
                "phi": p.to_string(),
                "phi_float": p.to_f64(),
            })
        })
        .collect();
    let output = if g.json {
        pretty(
            &json!({ "n": n, "phi_n": value.to_string(), "phi_n_float": value.to_f64(), "clusters": per }),
        )
    } else {
        format!(
            "phi_{n} = {value} ~ {:.10}",
            value.to_f64().unwrap_or(f64::NAN)
        )
    };
    done(output)
}
