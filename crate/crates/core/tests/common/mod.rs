#![allow(dead_code)]

use std::collections::BTreeSet;

use num::{BigInt, BigRational, ToPrimitive, Zero};
use pvtx_core::graph::PvtDependencyGraph;
use pvtx_core::tabular::{Column, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A mixed-type dataset with missing cells; `rows` may be small.
pub fn random_dataset(seed: u64, rows: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let miss = rng.gen_range(0.0..0.3);
    let slope = rng.gen_range(-2.0..2.0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut c = Vec::new();
    let mut e = Vec::new();
    let mut t = Vec::new();
    for _ in 0..rows {
        let xv: f64 = (rng.gen_range(-50.0..50.0f64) * 10.0).round() / 10.0;
        let noise: f64 = rng.gen_range(-5.0..5.0);
        let outlier = if rng.gen_bool(0.05) { 500.0 } else { 0.0 };
        x.push((!rng.gen_bool(miss)).then_some(xv + outlier));
        y.push((!rng.gen_bool(miss)).then_some(slope * xv + noise));
        let cv = ["a", "b", "c", "d"][rng.gen_range(0..4)];
        c.push((!rng.gen_bool(miss)).then_some(cv.to_string()));
        let ev = if rng.gen_bool(0.7) {
            cv.to_uppercase()
        } else {
            "Z".to_string()
        };
        e.push((!rng.gen_bool(miss)).then_some(ev));
        let tv = if rng.gen_bool(0.8) {
            format!("ab-{}", rng.gen_range(100..100_000))
        } else {
            format!("{}", rng.gen_range(0..1000))
        };
        t.push((!rng.gen_bool(miss)).then_some(tv));
    }
    Dataset::with_row_count(
        vec![
            Column::numerical("x", x),
            Column::numerical("y", y),
            Column::categorical("c", c),
            Column::categorical("e", e),
            Column::text("t", t),
        ],
        rows,
    )
    .unwrap()
}

/// Pearson's chi-square statistic in exact rational arithmetic.
pub fn chi_square_exact(table: &[Vec<u64>]) -> BigRational {
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let n: u64 = rows.iter().sum();
    let live_r = rows.iter().filter(|&&v| v > 0).count();
    let live_c = cols.iter().filter(|&&v| v > 0).count();
    let mut chi = BigRational::zero();
    if n == 0 || live_r < 2 || live_c < 2 {
        return chi;
    }
    let big = |v: u64| BigRational::from_integer(BigInt::from(v));
    for (i, r) in table.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            if rows[i] == 0 || cols[j] == 0 {
                continue;
            }
            let e = big(rows[i]) * big(cols[j]) / big(n);
            let diff = big(o) - e.clone();
            chi += diff.clone() * diff / e;
        }
    }
    chi
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Calls `f` on every table of the given shape with total at most `max_n`.
pub fn for_each_table(rows: usize, cols: usize, max_n: u64, f: &mut impl FnMut(&[Vec<u64>])) {
    let cells = rows * cols;
    let mut flat = vec![0u64; cells];
    fn rec(i: usize, left: u64, flat: &mut Vec<u64>, rows: usize, cols: usize, f: &mut impl FnMut(&[Vec<u64>])) {
        if i == flat.len() {
            let t: Vec<Vec<u64>> = (0..rows).map(|r| flat[r * cols..(r + 1) * cols].to_vec()).collect();
            f(&t);
            return;
        }
        for v in 0..=left {
            flat[i] = v;
            rec(i + 1, left - v, flat, rows, cols, f);
        }
        flat[i] = 0;
    }
    rec(0, max_n, &mut flat, rows, cols, f);
}

/// Minimum balanced cut by enumerating every half of size ⌈n/2⌉.
pub fn brute_force_min_cut(g: &PvtDependencyGraph, nodes: &[String]) -> usize {
    let n = nodes.len();
    let k = n.div_ceil(2);
    let mut best = usize::MAX;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let (a, b): (Vec<String>, Vec<String>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, x) in nodes.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    a.push(x.clone());
                } else {
                    b.push(x.clone());
                }
            }
            (a, b)
        };
        best = best.min(g.cut_size(&a, &b));
    }
    best
}

/// Erdős–Rényi graph on `n` nodes named `p0..`.
pub fn random_graph(seed: u64, n: usize, p: f64) -> (PvtDependencyGraph, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((nodes[i].clone(), nodes[j].clone()));
            }
        }
    }
    (PvtDependencyGraph::from_edges(&nodes, &edges), nodes)
}

pub fn two_cliques(k: usize) -> (PvtDependencyGraph, Vec<String>) {
    let nodes: Vec<String> = (0..2 * k).map(|i| format!("p{i}")).collect();
    let mut edges = Vec::new();
    for side in 0..2 {
        for i in 0..k {
            for j in i + 1..k {
                edges.push((nodes[side * k + i].clone(), nodes[side * k + j].clone()));
            }
        }
    }
    (PvtDependencyGraph::from_edges(&nodes, &edges), nodes)
}

pub fn path(n: usize) -> (PvtDependencyGraph, Vec<String>) {
    let nodes: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let edges: Vec<(String, String)> = (1..n).map(|i| (nodes[i - 1].clone(), nodes[i].clone())).collect();
    (PvtDependencyGraph::from_edges(&nodes, &edges), nodes)
}

pub fn ids(xs: &[pvtx_core::PvtTriplet]) -> BTreeSet<String> {
    xs.iter().map(|x| x.id.clone()).collect()
}
