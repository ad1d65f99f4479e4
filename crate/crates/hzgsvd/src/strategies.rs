//! Parallel pivot orderings and the stripe routing derived from them.

use std::collections::HashSet;
use std::fmt::Write;

use crate::config::StrategyKind;
use crate::{Error, Result};

/// Steps of disjoint pivot pairs `(i, j)`, `i < j`, covering `0..order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyTable {
    pub order: usize,
    pub kind: StrategyKind,
    pub steps: Vec<Vec<(usize, usize)>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TableReport {
    pub cyclic: bool,
    pub coverage_ok: bool,
    pub disjoint_ok: bool,
}

/// Where the two stripes held by one worker go next.
///
/// Destinations are encoded as `±(rank + 1)`: negative for the first slot
/// at the destination, positive for the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Route {
    pub p: usize,
    pub q: usize,
    pub t0: i64,
    pub t1: i64,
}

/// `routes[k][r]` routes the stripes held by worker `r` in step `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommMapping {
    pub routes: Vec<Vec<Route>>,
}

/// Slot at the destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    First,
    Second,
}

pub fn encode_destination(rank: usize, slot: Slot) -> i64 {
    let t = rank as i64 + 1;
    match slot {
        Slot::First => -t,
        Slot::Second => t,
    }
}

pub fn decode_destination(t: i64) -> (usize, Slot) {
    assert_ne!(t, 0, "destination 0 is not a valid encoding");
    let slot = if t < 0 { Slot::First } else { Slot::Second };
    (t.unsigned_abs() as usize - 1, slot)
}

pub fn gen_table(kind: StrategyKind, n: usize) -> Result<StrategyTable> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Invalid(format!("strategy order must be even and positive, got {n}")));
    }
    let steps = match kind {
        StrategyKind::Me => round_robin(n),
        StrategyKind::Mm => modulus(n),
    };
    Ok(StrategyTable { order: n, kind, steps })
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Circle method: index 0 stays put, the rest rotate by one each step.
fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut ring: Vec<usize> = (0..n).collect();
    let mut steps = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let mut step: Vec<(usize, usize)> =
            (0..n / 2).map(|i| ordered(ring[i], ring[n - 1 - i])).collect();
        step.sort_unstable();
        steps.push(step);
        ring[1..].rotate_right(1);
    }
    steps
}

/// Step `k` pairs every `i ≠ j` with `i + j ≡ k (mod n)`; for even `k` the
/// two fixed points `k/2` and `k/2 + n/2` are paired with each other.
fn modulus(n: usize) -> Vec<Vec<(usize, usize)>> {
    (0..n)
        .map(|k| {
            let mut step = Vec::with_capacity(n / 2);
            let mut fixed = Vec::new();
            for i in 0..n {
                let j = (k + n - i) % n;
                if i < j {
                    step.push((i, j));
                } else if i == j {
                    fixed.push(i);
                }
            }
            if let [a, b] = fixed[..] {
                step.push(ordered(a, b));
            }
            step.sort_unstable();
            step
        })
        .collect()
}

pub fn validate_table(t: &StrategyTable) -> TableReport {
    let n = t.order;
    let disjoint_ok = t.steps.iter().all(|step| {
        let mut seen = HashSet::new();
        step.len() == n / 2
            && step.iter().all(|&(i, j)| i < j && j < n && seen.insert(i) && seen.insert(j))
    });
    let mut counts = std::collections::HashMap::new();
    for &(i, j) in t.steps.iter().flatten() {
        *counts.entry(ordered(i, j)).or_insert(0usize) += 1;
    }
    let all_pairs = n * (n - 1) / 2;
    let covered = (0..n).all(|i| (i + 1..n).all(|j| counts.contains_key(&(i, j))));
    let coverage_ok = covered && counts.len() == all_pairs;
    let cyclic = coverage_ok && counts.values().all(|&c| c == 1);
    TableReport { cyclic, coverage_ok, disjoint_ok }
}

/// For every step and holder, routes each held stripe to the holder and slot
/// that needs it in the following step (wrapping to step 0 after the last).
pub fn comm_mapping(t: &StrategyTable) -> CommMapping {
    let s = t.steps.len();
    let routes = (0..s)
        .map(|k| {
            let next = &t.steps[(k + 1) % s];
            let find = |stripe: usize| -> i64 {
                for (r, &(a, b)) in next.iter().enumerate() {
                    if a == stripe {
                        return encode_destination(r, Slot::First);
                    }
                    if b == stripe {
                        return encode_destination(r, Slot::Second);
                    }
                }
                unreachable!("stripe {stripe} missing from a valid step")
            };
            t.steps[k].iter().map(|&(p, q)| Route { p, q, t0: find(p), t1: find(q) }).collect()
        })
        .collect();
    CommMapping { routes }
}

/// One step per line, pairs as `i-j` separated by spaces.
pub fn dump_table(t: &StrategyTable) -> String {
    let mut out = String::new();
    for step in &t.steps {
        let line: Vec<String> = step.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// One step per line, one `p-q:t0,t1` entry per holder.
pub fn dump_mapping(m: &CommMapping) -> String {
    let mut out = String::new();
    for step in &m.routes {
        let line: Vec<String> =
            step.iter().map(|r| format!("{}-{}:{},{}", r.p, r.q, r.t0, r.t1)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}
