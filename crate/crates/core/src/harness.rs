//! Trace files, generators, replay, verification and query benchmarks.
//!
//! A trace is JSON lines, one [`TraceRecord`] per update:
//!
//! ```text
//! {"seq":0,"op":"insert","id":3,"desc":{"kind":"edge","u":0,"v":2}}
//! {"seq":1,"op":"delete","id":3}
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collection::Update;
use crate::covering::{
    CoveringConfig, CoveringEstimatorDet, SampledConfig, SampledCoveringEstimator,
};
use crate::estimator::{Estimator, EstimatorError};
use crate::matroid::{
    BitVector, DynamicMatroid, ElementDescriptor, ElementId, MatroidError, MatroidFamily,
    RankOracle,
};
use crate::min_base::{CompositeWeight, MinBaseError, MinBaseState};
use crate::oracle::{static_min_weight_base, OracleError, RankTable, ORACLE_CAP};
use crate::packing::{PackingConfig, PackingEstimator, PackingMode};
use crate::value::{parse_rational, Estimate, Rational};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("trace line {line}: {message}")]
    BadTrace { line: usize, message: String },
    #[error("update seq {seq} rejected: {source}")]
    Replay { seq: u64, source: EstimatorError },
    #[error("prefix at seq {seq} has {n} elements; exact verification handles at most {cap}; use a shorter trace or a smaller window")]
    CapExceeded { seq: u64, n: usize, cap: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Insert,
    Delete,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub seq: u64,
    pub op: Op,
    pub id: ElementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desc: Option<ElementDescriptor>,
}

impl TraceRecord {
    pub fn insert(seq: u64, id: ElementId, desc: ElementDescriptor) -> Self {
        TraceRecord {
            seq,
            op: Op::Insert,
            id,
            desc: Some(desc),
        }
    }

    pub fn delete(seq: u64, id: ElementId) -> Self {
        TraceRecord {
            seq,
            op: Op::Delete,
            id,
            desc: None,
        }
    }

    pub fn to_update(&self) -> Result<Update, String> {
        match (self.op, &self.desc) {
            (Op::Insert, Some(d)) => Ok(Update::Insert(self.id, d.clone())),
            (Op::Insert, None) => Err("insert without desc".into()),
            (Op::Delete, None) => Ok(Update::Delete(self.id)),
            (Op::Delete, Some(_)) => Err("delete must not carry desc".into()),
        }
    }
}

pub fn write_trace<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<(), HarnessError> {
    for r in trace {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Parses a trace and checks that `seq` counts up from 0 and that inserts
/// and deletes of each id alternate, starting with an insert.
pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>, HarnessError> {
    let mut out = Vec::new();
    let mut live = BTreeSet::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| HarnessError::BadTrace {
            line: i + 1,
            message,
        };
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.seq != out.len() as u64 {
            return Err(bad(format!(
                "expected seq {}, found {}",
                out.len(),
                rec.seq
            )));
        }
        rec.to_update().map_err(bad)?;
        let ok = match rec.op {
            Op::Insert => live.insert(rec.id),
            Op::Delete => live.remove(&rec.id),
        };
        if !ok {
            return Err(bad(format!(
                "{:?} of id {} does not match its live state",
                rec.op, rec.id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// A matroid family together with what the generators need to draw
/// elements from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilySpec {
    Uniform { rank: usize },
    Partition { capacities: Vec<usize> },
    Graphic { vertices: u32 },
    Binary { dim: u8 },
}

impl FamilySpec {
    pub fn matroid_family(&self) -> MatroidFamily {
        match self {
            FamilySpec::Uniform { rank } => MatroidFamily::Uniform { rank: *rank },
            FamilySpec::Partition { capacities } => MatroidFamily::Partition {
                capacities: capacities
                    .iter()
                    .enumerate()
                    .map(|(b, &c)| (b as u32, c))
                    .collect(),
            },
            FamilySpec::Graphic { .. } => MatroidFamily::Graphic,
            FamilySpec::Binary { dim } => MatroidFamily::BinaryLinear { dim: *dim },
        }
    }
}

impl FromStr for FamilySpec {
    type Err = HarnessError;

    /// `uniform:R`, `partition:C0,C1,...`, `graphic:V` or `binary:D`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            HarnessError::InvalidParam(format!(
                "family `{s}`; expected uniform:R, partition:C0,C1,..., graphic:V or binary:D"
            ))
        };
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let spec = match kind {
            "uniform" => FamilySpec::Uniform {
                rank: arg.parse().map_err(|_| bad())?,
            },
            "partition" => FamilySpec::Partition {
                capacities: arg
                    .split(',')
                    .map(|c| c.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?,
            },
            "graphic" => FamilySpec::Graphic {
                vertices: arg.parse().map_err(|_| bad())?,
            },
            "binary" => FamilySpec::Binary {
                dim: arg.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        match &spec {
            FamilySpec::Graphic { vertices } if *vertices < 2 => Err(bad()),
            FamilySpec::Binary { dim } if *dim == 0 || *dim > 64 => Err(bad()),
            FamilySpec::Partition { capacities } if capacities.is_empty() => Err(bad()),
            _ => Ok(spec),
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySpec::Uniform { rank } => write!(f, "uniform:{rank}"),
            FamilySpec::Partition { capacities } => {
                let caps: Vec<String> = capacities.iter().map(usize::to_string).collect();
                write!(f, "partition:{}", caps.join(","))
            }
            FamilySpec::Graphic { vertices } => write!(f, "graphic:{vertices}"),
            FamilySpec::Binary { dim } => write!(f, "binary:{dim}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// Random inserts and deletes with at most `window` live elements.
    Mix,
    /// Inserts only; for graphic families, the distinct edges of the
    /// complete graph in a random order.
    Growth,
    /// Inserts; once `window` elements are live, the oldest is deleted.
    Window,
    /// Background mix interleaved with toggles of an element that raises
    /// the rank whenever it is present.
    Oscillation,
}

impl FromStr for Pattern {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mix" => Ok(Pattern::Mix),
            "growth" | "insert-only" => Ok(Pattern::Growth),
            "window" => Ok(Pattern::Window),
            "oscillation" => Ok(Pattern::Oscillation),
            _ => Err(HarnessError::InvalidParam(format!(
                "pattern `{s}`; expected mix, growth, window or oscillation"
            ))),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Mix => "mix",
            Pattern::Growth => "growth",
            Pattern::Window => "window",
            Pattern::Oscillation => "oscillation",
        })
    }
}

#[derive(Clone, Debug)]
pub struct GenParams {
    pub family: FamilySpec,
    pub pattern: Pattern,
    pub length: usize,
    pub seed: u64,
    /// Live-element cap for mix, window and oscillation.
    pub window: usize,
}

/// Draws loop-free descriptors; `reserved` keeps one vertex, bit or block
/// apart for the oscillating element.
struct Drawer<'a> {
    family: &'a FamilySpec,
    reserved: bool,
}

impl Drawer<'_> {
    fn background(&self, rng: &mut ChaCha8Rng) -> ElementDescriptor {
        let r = self.reserved as u32;
        match self.family {
            FamilySpec::Uniform { .. } => ElementDescriptor::Plain,
            FamilySpec::Partition { capacities } => {
                let blocks = (capacities.len() as u32 - r).max(1);
                ElementDescriptor::Block {
                    block: rng.gen_range(0..blocks),
                }
            }
            FamilySpec::Graphic { vertices } => {
                let n = (*vertices - r).max(2);
                let u = rng.gen_range(0..n);
                let mut v = rng.gen_range(0..n - 1);
                if v >= u {
                    v += 1;
                }
                ElementDescriptor::Edge {
                    u: u.min(v),
                    v: u.max(v),
                }
            }
            FamilySpec::Binary { dim } => {
                let usable = (*dim as u32 - r).max(1);
                let mask = if usable == 64 {
                    u64::MAX
                } else {
                    (1u64 << usable) - 1
                };
                let bits = loop {
                    let b = rng.next_u64() & mask;
                    if b != 0 {
                        break b;
                    }
                };
                ElementDescriptor::Vector {
                    bits: BitVector::new(bits, *dim),
                }
            }
        }
    }

    /// An element outside the span of every background element.
    fn oscillating(&self, rng: &mut ChaCha8Rng) -> ElementDescriptor {
        match self.family {
            FamilySpec::Uniform { .. } => ElementDescriptor::Plain,
            FamilySpec::Partition { capacities } => ElementDescriptor::Block {
                block: capacities.len() as u32 - 1,
            },
            FamilySpec::Graphic { vertices } => ElementDescriptor::Edge {
                u: rng.gen_range(0..*vertices - 1),
                v: *vertices - 1,
            },
            FamilySpec::Binary { dim } => {
                let low = if *dim > 1 {
                    rng.next_u64() & ((1u64 << (*dim - 1)) - 1)
                } else {
                    0
                };
                ElementDescriptor::Vector {
                    bits: BitVector::new(low | 1u64 << (*dim - 1), *dim),
                }
            }
        }
    }
}

pub fn generate(params: &GenParams) -> Result<Vec<TraceRecord>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::with_capacity(params.length);
    let mut next_id = 0u64;
    let mut live: Vec<ElementId> = Vec::new();
    let window = params.window.max(1);
    let push_insert =
        |out: &mut Vec<TraceRecord>, live: &mut Vec<ElementId>, next_id: &mut u64, d| {
            let id = ElementId(*next_id);
            *next_id += 1;
            out.push(TraceRecord::insert(out.len() as u64, id, d));
            live.push(id);
        };
    match params.pattern {
        Pattern::Growth => {
            if let FamilySpec::Graphic { vertices } = params.family {
                let mut edges: Vec<(u32, u32)> = (0..vertices)
                    .flat_map(|u| (u + 1..vertices).map(move |v| (u, v)))
                    .collect();
                edges.shuffle(&mut rng);
                for (u, v) in edges.into_iter().take(params.length) {
                    push_insert(
                        &mut out,
                        &mut live,
                        &mut next_id,
                        ElementDescriptor::Edge { u, v },
                    );
                }
            } else {
                let d = Drawer {
                    family: &params.family,
                    reserved: false,
                };
                for _ in 0..params.length {
                    let desc = d.background(&mut rng);
                    push_insert(&mut out, &mut live, &mut next_id, desc);
                }
            }
        }
        Pattern::Mix => {
            let d = Drawer {
                family: &params.family,
                reserved: false,
            };
            while out.len() < params.length {
                if live.is_empty() || (live.len() < window && rng.gen_bool(0.6)) {
                    let desc = d.background(&mut rng);
                    push_insert(&mut out, &mut live, &mut next_id, desc);
                } else {
                    let id = live.swap_remove(rng.gen_range(0..live.len()));
                    out.push(TraceRecord::delete(out.len() as u64, id));
                }
            }
        }
        Pattern::Window => {
            let d = Drawer {
                family: &params.family,
                reserved: false,
            };
            let mut queue: VecDeque<ElementId> = VecDeque::new();
            while out.len() < params.length {
                if queue.len() >= window {
                    let id = queue.pop_front().expect("window is nonempty");
                    out.push(TraceRecord::delete(out.len() as u64, id));
                } else {
                    let desc = d.background(&mut rng);
                    let id = ElementId(next_id);
                    next_id += 1;
                    out.push(TraceRecord::insert(out.len() as u64, id, desc));
                    queue.push_back(id);
                }
            }
        }
        Pattern::Oscillation => {
            let d = Drawer {
                family: &params.family,
                reserved: true,
            };
            // Uniform has no spare direction: the background stays below the
            // rank so every new element raises it.
            let cap = match params.family {
                FamilySpec::Uniform { rank } => {
                    rank.saturating_sub(1).min(window.saturating_sub(1))
                }
                _ => window.saturating_sub(1),
            };
            let mut toggled: Option<ElementId> = None;
            while out.len() < params.length {
                if rng.gen_bool(0.5) {
                    match toggled.take() {
                        Some(id) => out.push(TraceRecord::delete(out.len() as u64, id)),
                        None => {
                            let id = ElementId(next_id);
                            next_id += 1;
                            out.push(TraceRecord::insert(
                                out.len() as u64,
                                id,
                                d.oscillating(&mut rng),
                            ));
                            toggled = Some(id);
                        }
                    }
                } else if !live.is_empty() && (live.len() >= cap || rng.gen_bool(0.4)) {
                    let id = live.swap_remove(rng.gen_range(0..live.len()));
                    out.push(TraceRecord::delete(out.len() as u64, id));
                } else if live.len() < cap {
                    let desc = d.background(&mut rng);
                    push_insert(&mut out, &mut live, &mut next_id, desc);
                }
            }
        }
    }
    Ok(out)
}

/// Which estimator a run drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    PackWorstCase,
    PackAmortized,
    CoverDet,
    CoverSampled,
    MinBase,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::PackWorstCase,
        EstimatorKind::PackAmortized,
        EstimatorKind::CoverDet,
        EstimatorKind::CoverSampled,
        EstimatorKind::MinBase,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::PackWorstCase => "pack-wc",
            EstimatorKind::PackAmortized => "pack-amortized",
            EstimatorKind::CoverDet => "cover-det",
            EstimatorKind::CoverSampled => "cover-sampled",
            EstimatorKind::MinBase => "minbase",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            HarnessError::InvalidParam(format!(
                "estimator `{s}`; expected pack-wc, pack-amortized, cover-det, cover-sampled or minbase"
            ))
        })
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(serialize_with = "ser_display")]
    pub eps: Rational,
    pub phi_max: u64,
    pub beta_max: u64,
    pub n_max: usize,
    pub seed: u64,
    pub c: u32,
    pub sampling_constant: f64,
    /// Weights of the `minbase` estimator are drawn from `0..=max_weight`.
    pub max_weight: u64,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eps: Rational::new(1, 4),
            phi_max: 3,
            beta_max: 4,
            n_max: 16,
            seed: 0,
            c: 2,
            sampling_constant: SampledConfig::DEFAULT_SAMPLING_CONSTANT,
            max_weight: 8,
        }
    }
}

impl RunConfig {
    pub fn parse_eps(s: &str) -> Result<Rational, HarnessError> {
        parse_rational(s).map_err(|e| HarnessError::InvalidParam(e.to_string()))
    }
}

/// Weight of element `id` for the `minbase` estimator.
pub fn element_weight(seed: u64, id: ElementId, max_weight: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng.set_word_pos(id.0 as u128 * 2);
    rng.next_u64() % (max_weight + 1)
}

/// Dynamic min-weight base under seeded weights; its "estimate" is the
/// total weight of the base.
pub struct MinBaseRunner {
    state: MinBaseState,
    seed: u64,
    max_weight: u64,
}

impl MinBaseRunner {
    pub fn new(seed: u64, max_weight: u64) -> Self {
        MinBaseRunner {
            state: MinBaseState::new(),
            seed,
            max_weight,
        }
    }

    pub fn state(&self) -> &MinBaseState {
        &self.state
    }

    fn wrap(e: MinBaseError) -> EstimatorError {
        match e {
            MinBaseError::Matroid(m) => EstimatorError::Matroid(m),
            other => EstimatorError::Collection(other.into()),
        }
    }
}

impl Estimator for MinBaseRunner {
    fn name(&self) -> &'static str {
        "minbase"
    }

    fn apply(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<Estimate, EstimatorError> {
        match update {
            Update::Insert(e, desc) => {
                m.insert_element(*e, desc.clone())?;
                let w = element_weight(self.seed, *e, self.max_weight);
                self.state.insert(m, *e, w).map_err(Self::wrap)?;
            }
            Update::Delete(e) => {
                self.state.delete(m, *e).map_err(Self::wrap)?;
                m.delete_element(*e)?;
            }
        }
        Ok(self.estimate())
    }

    fn estimate(&self) -> Estimate {
        Estimate::finite(self.state.base_weight() as i64, 1)
    }
}

pub enum AnyEstimator {
    Packing(PackingEstimator),
    CoverDet(CoveringEstimatorDet),
    CoverSampled(Box<SampledCoveringEstimator>),
    MinBase(MinBaseRunner),
}

impl AnyEstimator {
    pub fn build(
        kind: EstimatorKind,
        m: &DynamicMatroid,
        cfg: &RunConfig,
    ) -> Result<Self, EstimatorError> {
        Ok(match kind {
            EstimatorKind::PackWorstCase | EstimatorKind::PackAmortized => {
                let mode = if kind == EstimatorKind::PackWorstCase {
                    PackingMode::WorstCase
                } else {
                    PackingMode::Amortized
                };
                AnyEstimator::Packing(PackingEstimator::new(
                    m,
                    PackingConfig {
                        eps: cfg.eps,
                        phi_max: cfg.phi_max,
                        mode,
                    },
                )?)
            }
            EstimatorKind::CoverDet => AnyEstimator::CoverDet(CoveringEstimatorDet::new(
                m,
                CoveringConfig {
                    eps: cfg.eps,
                    beta_max: cfg.beta_max,
                },
            )?),
            EstimatorKind::CoverSampled => {
                AnyEstimator::CoverSampled(Box::new(SampledCoveringEstimator::new(
                    m,
                    SampledConfig {
                        eps: cfg.eps,
                        c: cfg.c,
                        seed: cfg.seed,
                        sampling_constant: cfg.sampling_constant,
                    },
                )?))
            }
            EstimatorKind::MinBase => {
                AnyEstimator::MinBase(MinBaseRunner::new(cfg.seed, cfg.max_weight))
            }
        })
    }

    pub fn as_dyn(&mut self) -> &mut dyn Estimator {
        match self {
            AnyEstimator::Packing(p) => p,
            AnyEstimator::CoverDet(d) => d,
            AnyEstimator::CoverSampled(s) => s.as_mut(),
            AnyEstimator::MinBase(b) => b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub seq: u64,
    pub estimator: String,
    pub estimate: String,
    pub queries: u64,
    pub cumulative: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub family: String,
    pub estimator: String,
    #[serde(flatten)]
    pub run: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub config: ConfigEcho,
    /// Rank queries charged to the matroid over the whole run.
    pub total_queries: u64,
}

pub const CSV_HEADER: &str = "seq,estimator,estimate,queries,cumulative";

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.seq, r.estimator, r.estimate, r.queries, r.cumulative
            ));
        }
        s
    }

    /// One JSON object per row, then `{"config": ...}`.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&serde_json::to_string(r).expect("row serializes"));
            s.push('\n');
        }
        s.push_str(
            &serde_json::to_string(&serde_json::json!({ "config": self.config }))
                .expect("config serializes"),
        );
        s.push('\n');
        s
    }
}

fn replay_error(seq: u64) -> impl Fn(EstimatorError) -> HarnessError {
    move |source| HarnessError::Replay { seq, source }
}

/// Replays `trace` through one estimator, from an empty matroid.
pub fn run(
    trace: &[TraceRecord],
    family: &FamilySpec,
    kind: EstimatorKind,
    cfg: &RunConfig,
) -> Result<RunReport, HarnessError> {
    let mut m = DynamicMatroid::new(family.matroid_family(), cfg.n_max);
    let mut est = AnyEstimator::build(kind, &m, cfg).map_err(replay_error(0))?;
    let mut rows = Vec::with_capacity(trace.len());
    for rec in trace {
        let update = rec.to_update().map_err(|message| HarnessError::BadTrace {
            line: rec.seq as usize + 1,
            message,
        })?;
        m.counter().reset_per_update();
        let value = est
            .as_dyn()
            .apply(&mut m, &update)
            .map_err(replay_error(rec.seq))?;
        rows.push(ReportRow {
            seq: rec.seq,
            estimator: kind.name().to_string(),
            estimate: value.to_string(),
            queries: m.counter().per_update(),
            cumulative: m.counter().total(),
        });
    }
    Ok(RunReport {
        rows,
        config: ConfigEcho {
            family: family.to_string(),
            estimator: kind.name().into(),
            run: cfg.clone(),
        },
        total_queries: m.counter().total(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub seq: u64,
    /// Live elements after the update, in id order.
    pub snapshot: Vec<(ElementId, ElementDescriptor)>,
    pub expected: String,
    pub got: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub estimator: String,
    pub steps: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// One CSV row per violation, then a `# ... PASS|FAIL` summary line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("seq,reason,expected,got,snapshot\n");
        for v in &self.violations {
            let snapshot = serde_json::to_string(&v.snapshot).expect("snapshot serializes");
            s.push_str(&format!(
                "{},{},\"{}\",{},'{}'\n",
                v.seq, v.reason, v.expected, v.got, snapshot
            ));
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        s.push_str(&format!(
            "# {} {verdict}: {} steps, {} violations\n",
            self.estimator,
            self.steps,
            self.violations.len()
        ));
        s
    }
}

/// Replays `trace` and checks every prefix against the exact oracles.
///
/// Packing and covering estimates must lie in `[(1-ε)·v, (1+ε)·v]` for the
/// true value `v` (or both be `+inf`); a true value above `phi_max` or
/// `beta_max` is reported as a violation of the caller's promise. The min
/// base must equal the static greedy base.
pub fn verify(
    trace: &[TraceRecord],
    family: &FamilySpec,
    kind: EstimatorKind,
    cfg: &RunConfig,
) -> Result<VerifyReport, HarnessError> {
    let mut live = 0usize;
    for rec in trace {
        live = if rec.op == Op::Insert {
            live + 1
        } else {
            live - 1
        };
        if live > ORACLE_CAP {
            return Err(HarnessError::CapExceeded {
                seq: rec.seq,
                n: live,
                cap: ORACLE_CAP,
            });
        }
    }
    let mut m = DynamicMatroid::new(family.matroid_family(), cfg.n_max);
    let mut est = AnyEstimator::build(kind, &m, cfg).map_err(replay_error(0))?;
    let mut violations = Vec::new();
    for rec in trace {
        let update = rec.to_update().map_err(|message| HarnessError::BadTrace {
            line: rec.seq as usize + 1,
            message,
        })?;
        let got = est
            .as_dyn()
            .apply(&mut m, &update)
            .map_err(replay_error(rec.seq))?;
        let mut flag = |expected: String, reason: &str| {
            let snapshot = m
                .ground_set()
                .into_iter()
                .map(|e| (e, m.descriptor(e).cloned().expect("live")))
                .collect();
            violations.push(Violation {
                seq: rec.seq,
                snapshot,
                expected,
                got: got.to_string(),
                reason: reason.into(),
            });
        };
        match &est {
            AnyEstimator::MinBase(runner) => {
                let weights: BTreeMap<ElementId, CompositeWeight> = m
                    .ground_set()
                    .into_iter()
                    .map(|e| {
                        (
                            e,
                            CompositeWeight::new(element_weight(cfg.seed, e, cfg.max_weight), e),
                        )
                    })
                    .collect();
                let want = static_min_weight_base(&m, &weights)?;
                if runner.state().current_base() != want {
                    let ids: Vec<String> = want.iter().map(|e| e.to_string()).collect();
                    flag(
                        format!("base {{{}}}", ids.join(",")),
                        "maintained base differs from the static greedy base",
                    );
                }
            }
            AnyEstimator::Packing(_) => {
                let truth = RankTable::new(&m)?.packing_number();
                let (lo, hi) = truth.interval(cfg.eps);
                if truth > Estimate::finite(cfg.phi_max as i64, 1) && !truth.is_infinite() {
                    flag(
                        format!("phi <= {}", cfg.phi_max),
                        "true packing number exceeds phi_max",
                    );
                } else if !got.within(&truth, cfg.eps) {
                    flag(format!("[{lo}, {hi}]"), "estimate outside the guarantee");
                }
            }
            AnyEstimator::CoverDet(_) | AnyEstimator::CoverSampled(_) => {
                let table = RankTable::new(&m)?;
                let truth = table.covering_number().unwrap_or(Estimate::Infinite);
                let (lo, hi) = truth.interval(cfg.eps);
                let bounded = matches!(est, AnyEstimator::CoverDet(_));
                if bounded
                    && truth > Estimate::finite(cfg.beta_max as i64, 1)
                    && !truth.is_infinite()
                {
                    flag(
                        format!("beta <= {}", cfg.beta_max),
                        "true covering number exceeds beta_max",
                    );
                } else if !got.within(&truth, cfg.eps) {
                    flag(format!("[{lo}, {hi}]"), "estimate outside the guarantee");
                }
            }
        }
    }
    Ok(VerifyReport {
        estimator: kind.name().into(),
        steps: trace.len(),
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub trace: String,
    pub estimator: String,
    pub updates: usize,
    pub total: u64,
    pub max: u64,
    pub mean: f64,
    pub p99: u64,
}

pub const BENCH_HEADER: &str = "trace,estimator,updates,total,max,mean,p99";

impl BenchRow {
    pub fn from_report(trace: &str, report: &RunReport) -> Self {
        let mut q: Vec<u64> = report.rows.iter().map(|r| r.queries).collect();
        q.sort_unstable();
        let total: u64 = q.iter().sum();
        let p99 = if q.is_empty() {
            0
        } else {
            q[((q.len() as f64 * 0.99).ceil() as usize).clamp(1, q.len()) - 1]
        };
        BenchRow {
            trace: trace.to_string(),
            estimator: report.config.estimator.clone(),
            updates: q.len(),
            total,
            max: q.last().copied().unwrap_or(0),
            mean: if q.is_empty() {
                0.0
            } else {
                total as f64 / q.len() as f64
            },
            p99,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3},{}",
            self.trace, self.estimator, self.updates, self.total, self.max, self.mean, self.p99
        )
    }
}

pub fn bench(
    traces: &[(String, Vec<TraceRecord>)],
    family: &FamilySpec,
    kinds: &[EstimatorKind],
    cfg: &RunConfig,
) -> Result<Vec<BenchRow>, HarnessError> {
    let mut rows = Vec::new();
    for (name, trace) in traces {
        for &kind in kinds {
            let report = run(trace, family, kind, cfg)?;
            rows.push(BenchRow::from_report(name, &report));
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

/// Rebuilds the live matroid after each prefix, for callers that check
/// their own properties along a trace.
pub fn prefixes(
    trace: &[TraceRecord],
    family: &FamilySpec,
    n_max: usize,
) -> Result<Vec<DynamicMatroid>, MatroidError> {
    let mut m = DynamicMatroid::new(family.matroid_family(), n_max);
    let mut out = Vec::with_capacity(trace.len());
    for rec in trace {
        match &rec.desc {
            Some(d) if rec.op == Op::Insert => m.insert_element(rec.id, d.clone())?,
            _ => {
                m.delete_element(rec.id)?;
            }
        }
        out.push(m.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(family: &str, pattern: Pattern, length: usize, seed: u64) -> GenParams {
        GenParams {
            family: family.parse().unwrap(),
            pattern,
            length,
            seed,
            window: 8,
        }
    }

    #[test]
    fn k4_growth_is_six_edges() {
        let t = generate(&params("graphic:4", Pattern::Growth, 100, 7)).unwrap();
        assert_eq!(t.len(), 6);
        let edges: BTreeSet<String> = t.iter().map(|r| format!("{:?}", r.desc)).collect();
        assert_eq!(edges.len(), 6);
        assert!(t
            .iter()
            .enumerate()
            .all(|(i, r)| r.seq == i as u64 && r.id == ElementId(i as u64)));
    }

    #[test]
    fn same_seed_same_bytes() {
        for pattern in [
            Pattern::Mix,
            Pattern::Growth,
            Pattern::Window,
            Pattern::Oscillation,
        ] {
            let a = trace_to_string(&generate(&params("binary:4", pattern, 60, 3)).unwrap());
            let b = trace_to_string(&generate(&params("binary:4", pattern, 60, 3)).unwrap());
            assert_eq!(a, b);
            let back = read_trace(a.as_bytes()).unwrap();
            assert_eq!(trace_to_string(&back), a);
        }
    }

    #[test]
    fn window_caps_live_elements() {
        let t = generate(&GenParams {
            window: 5,
            ..params("uniform:1", Pattern::Window, 50, 1)
        })
        .unwrap();
        assert_eq!(t.len(), 50);
        let mut live = 0i64;
        for r in &t {
            live += if r.op == Op::Insert { 1 } else { -1 };
            assert!((0..=5).contains(&live));
        }
    }

    #[test]
    fn oscillation_toggles_coloops() {
        for family in ["graphic:5", "binary:4", "uniform:3", "partition:2,2,1"] {
            let spec: FamilySpec = family.parse().unwrap();
            let t = generate(&params(family, Pattern::Oscillation, 120, 11)).unwrap();
            let ms = prefixes(&t, &spec, 64).unwrap();
            let mut rank_changes = 0;
            for i in 0..t.len() {
                let before = if i == 0 { 0 } else { ms[i - 1].full_rank() };
                if before != ms[i].full_rank() {
                    rank_changes += 1;
                }
            }
            assert!(rank_changes > 20, "{family}: {rank_changes}");
        }
    }

    #[test]
    fn trace_json_shape() {
        let r = TraceRecord::insert(0, ElementId(3), ElementDescriptor::Edge { u: 0, v: 2 });
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"seq":0,"op":"insert","id":3,"desc":{"kind":"edge","u":0,"v":2}}"#
        );
        let d = TraceRecord::delete(1, ElementId(3));
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"seq":1,"op":"delete","id":3}"#
        );
        assert!(read_trace(r#"{"seq":0,"op":"delete","id":3}"#.as_bytes()).is_err());
        assert!(
            read_trace(r#"{"seq":1,"op":"insert","id":3,"desc":{"kind":"plain"}}"#.as_bytes())
                .is_err()
        );
        assert!(read_trace(
            r#"{"seq":0,"op":"insert","id":3,"desc":{"kind":"plain"},"x":1}"#.as_bytes()
        )
        .is_err());
    }

    #[test]
    fn family_strings() {
        for s in ["uniform:2", "partition:1,2,3", "graphic:5", "binary:8"] {
            assert_eq!(s.parse::<FamilySpec>().unwrap().to_string(), s);
        }
        for s in [
            "graphic",
            "graphic:1",
            "binary:65",
            "matching:3",
            "partition:",
        ] {
            assert!(s.parse::<FamilySpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn k4_runs_and_verifies() {
        let t = generate(&params("graphic:4", Pattern::Growth, 6, 7)).unwrap();
        let spec: FamilySpec = "graphic:4".parse().unwrap();
        let cfg = RunConfig {
            phi_max: 2,
            beta_max: 2,
            n_max: 6,
            ..RunConfig::default()
        };
        for kind in [
            EstimatorKind::CoverDet,
            EstimatorKind::PackWorstCase,
            EstimatorKind::PackAmortized,
            EstimatorKind::MinBase,
        ] {
            let report = run(&t, &spec, kind, &cfg).unwrap();
            assert_eq!(report.rows.len(), 6);
            assert_eq!(report.rows.last().unwrap().cumulative, report.total_queries);
            assert_eq!(
                report.rows.iter().map(|r| r.queries).sum::<u64>(),
                report.total_queries
            );
            let v = verify(&t, &spec, kind, &cfg).unwrap();
            assert!(v.passed(), "{kind}: {:?}", v.violations);
        }
        let final_cover: Estimate = run(&t, &spec, EstimatorKind::CoverDet, &cfg).unwrap().rows[5]
            .estimate
            .parse()
            .unwrap();
        assert!(final_cover.within(&Estimate::finite(2, 1), cfg.eps));
    }

    #[test]
    fn beta_max_breach_is_a_violation() {
        let t = generate(&params("graphic:4", Pattern::Growth, 6, 7)).unwrap();
        let spec: FamilySpec = "graphic:4".parse().unwrap();
        let cfg = RunConfig {
            beta_max: 1,
            n_max: 6,
            ..RunConfig::default()
        };
        let v = verify(&t, &spec, EstimatorKind::CoverDet, &cfg).unwrap();
        assert!(!v.passed());
        assert_eq!(v.violations[0].expected, "beta <= 1");
    }

    #[test]
    fn empty_trace_header_only() {
        let spec: FamilySpec = "uniform:2".parse().unwrap();
        let r = run(
            &[],
            &spec,
            EstimatorKind::PackWorstCase,
            &RunConfig::default(),
        )
        .unwrap();
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
        assert_eq!(r.total_queries, 0);
    }

    #[test]
    fn bench_summaries() {
        let t = generate(&params("uniform:2", Pattern::Growth, 1, 0)).unwrap();
        let spec: FamilySpec = "uniform:2".parse().unwrap();
        let rows = bench(
            &[("one".into(), t)],
            &spec,
            &[EstimatorKind::MinBase],
            &RunConfig::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].updates, 1);
    }

    #[test]
    fn verify_refuses_large_prefixes() {
        let t = generate(&params("uniform:2", Pattern::Growth, 17, 0)).unwrap();
        let spec: FamilySpec = "uniform:2".parse().unwrap();
        let cfg = RunConfig {
            n_max: 32,
            ..RunConfig::default()
        };
        assert!(matches!(
            verify(&t, &spec, EstimatorKind::MinBase, &cfg),
            Err(HarnessError::CapExceeded { .. })
        ));
    }
}
