#![allow(dead_code)]

use std::collections::BTreeSet;

use dynmatroid::harness::{generate, FamilySpec, GenParams, Op, Pattern, TraceRecord};
use dynmatroid::{BitVector, DynamicMatroid, ElementDescriptor, ElementId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn spec(s: &str) -> FamilySpec {
    s.parse().expect("valid family")
}

/// Small instances of every family.
pub fn small_families() -> Vec<FamilySpec> {
    [
        "graphic:5",
        "binary:4",
        "uniform:2",
        "uniform:3",
        "partition:1,2,2",
    ]
    .into_iter()
    .map(spec)
    .collect()
}

/// One family per kind, for criteria phrased "per family".
pub fn family_kinds() -> Vec<FamilySpec> {
    ["graphic:5", "binary:4", "uniform:3", "partition:1,2,2"]
        .into_iter()
        .map(spec)
        .collect()
}

/// A random descriptor; loops only when `loops` is set.
pub fn descriptor(family: &FamilySpec, rng: &mut ChaCha8Rng, loops: bool) -> ElementDescriptor {
    match family {
        FamilySpec::Uniform { .. } => ElementDescriptor::Plain,
        FamilySpec::Partition { capacities } => ElementDescriptor::Block {
            block: rng.gen_range(0..capacities.len() as u32),
        },
        FamilySpec::Graphic { vertices } => loop {
            let (u, v) = (rng.gen_range(0..*vertices), rng.gen_range(0..*vertices));
            if u != v || loops {
                break ElementDescriptor::Edge {
                    u: u.min(v),
                    v: u.max(v),
                };
            }
        },
        FamilySpec::Binary { dim } => loop {
            let bits = rng.gen::<u64>() & ((1u64 << dim) - 1);
            if bits != 0 || loops {
                break ElementDescriptor::Vector {
                    bits: BitVector::new(bits, *dim),
                };
            }
        },
    }
}

pub fn instance(
    family: &FamilySpec,
    n: usize,
    rng: &mut ChaCha8Rng,
    loops: bool,
) -> DynamicMatroid {
    let mut m = DynamicMatroid::new(family.matroid_family(), n.max(16));
    // Partition blocks with capacity 0 hold loops only.
    let loop_free = |d: &ElementDescriptor| match (family, d) {
        (FamilySpec::Partition { capacities }, ElementDescriptor::Block { block }) => {
            capacities[*block as usize] > 0
        }
        (FamilySpec::Uniform { rank }, _) => *rank > 0,
        _ => true,
    };
    let mut i = 0;
    while m.len() < n {
        let d = descriptor(family, rng, loops);
        if !loops && !loop_free(&d) {
            continue;
        }
        m.insert_element(ElementId(i), d).unwrap();
        i += 1;
    }
    m
}

/// Drops candidate records until every prefix satisfies `keep`; deletes of
/// dropped inserts are dropped too. Returns `length` records renumbered,
/// or `None` when the candidate runs out.
pub fn filter_trace(
    candidate: &[TraceRecord],
    family: &FamilySpec,
    n_max: usize,
    length: usize,
    keep: impl Fn(&DynamicMatroid) -> bool,
) -> Option<Vec<TraceRecord>> {
    let mut m = DynamicMatroid::new(family.matroid_family(), n_max);
    let mut dropped = BTreeSet::new();
    let mut out = Vec::with_capacity(length);
    for rec in candidate {
        if out.len() == length {
            break;
        }
        match rec.op {
            Op::Insert => {
                if m.len() >= n_max {
                    dropped.insert(rec.id);
                    continue;
                }
                m.insert_element(rec.id, rec.desc.clone().unwrap()).unwrap();
                if !keep(&m) {
                    m.delete_element(rec.id).unwrap();
                    dropped.insert(rec.id);
                    continue;
                }
            }
            Op::Delete => {
                if dropped.contains(&rec.id) {
                    continue;
                }
                let d = m.delete_element(rec.id).unwrap();
                if !keep(&m) {
                    m.insert_element(rec.id, d).unwrap();
                    continue;
                }
            }
        }
        let mut r = rec.clone();
        r.seq = out.len() as u64;
        out.push(r);
    }
    (out.len() == length).then_some(out)
}

/// Generates candidates from successive seeds until one filters down to
/// `length` records.
pub fn bounded_trace(
    family: &FamilySpec,
    pattern: Pattern,
    seed: u64,
    length: usize,
    window: usize,
    n_max: usize,
    keep: impl Fn(&DynamicMatroid) -> bool,
) -> Vec<TraceRecord> {
    for attempt in 0..64 {
        let params = GenParams {
            family: family.clone(),
            pattern,
            length: length * 8,
            seed: seed * 1000 + attempt,
            window,
        };
        let candidate = generate(&params).unwrap();
        if let Some(t) = filter_trace(&candidate, family, n_max, length, &keep) {
            if trace_is_consistent(&t) {
                return t;
            }
        }
    }
    panic!("no {pattern} trace of length {length} for {family} satisfies the filter");
}

/// Inserts and deletes of each id alternate, starting with an insert.
pub fn trace_is_consistent(t: &[TraceRecord]) -> bool {
    let mut live = BTreeSet::new();
    t.iter().all(|r| match r.op {
        Op::Insert => live.insert(r.id),
        Op::Delete => live.remove(&r.id),
    })
}

pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            name,
            passed,
            detail: detail.into(),
        }
    }
}
