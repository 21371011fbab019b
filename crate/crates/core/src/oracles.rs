//! Reversible classical-function gates with query instrumentation.
//!
//! An oracle gate acts as `|x, v, y⟩ ↦ |x, v, y ⊕ enc(O(x, v))⟩`. Oracles whose
//! answers can be `⊥` carry a validity bit above the data bits: a valid answer
//! `a` encodes as `1 ∥ a` and `⊥` as all zeros. Plain gates have no validity bit.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::f2::F2Subspace;
use crate::linalg::{CMatrix, ONE};
use crate::qsim::PURE_QUBIT_CAP;

/// A total function `[N] → [2^m]` stored as a table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassicalFunction {
    width: usize,
    table: Vec<u64>,
}

impl ClassicalFunction {
    pub fn new(width: usize, table: Vec<u64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidParameter("function domain is empty".into()));
        }
        if width > 32 {
            return Err(Error::WidthOverflow(format!("{width} output bits")));
        }
        if let Some(bad) = table.iter().find(|&&y| y >> width != 0) {
            return Err(Error::InvalidParameter(format!(
                "value {bad} does not fit in {width} bits"
            )));
        }
        Ok(Self { width, table })
    }

    pub fn from_fn(domain: usize, width: usize, f: impl Fn(u64) -> u64) -> Result<Self> {
        Self::new(width, (0..domain as u64).map(f).collect())
    }

    /// Uniformly random table; the same generator state gives the same table.
    pub fn random<R: Rng + ?Sized>(domain: usize, width: usize, rng: &mut R) -> Result<Self> {
        let mask = (1u64 << width) - 1;
        Self::new(
            width,
            (0..domain).map(|_| rng.gen::<u64>() & mask).collect(),
        )
    }

    pub fn domain(&self) -> usize {
        self.table.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Bits needed to address the domain (at least one).
    pub fn input_bits(&self) -> usize {
        bits_for(self.table.len())
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    /// `f(x)`; inputs outside the domain are reduced modulo `N`.
    pub fn eval(&self, x: u64) -> u64 {
        self.table[(x as usize) % self.table.len()]
    }

    pub fn xor(&self, other: &ClassicalFunction) -> Result<ClassicalFunction> {
        if self.domain() != other.domain() || self.width != other.width {
            return Err(Error::InvalidParameter(
                "functions differ in domain or width".into(),
            ));
        }
        Self::new(
            self.width,
            self.table
                .iter()
                .zip(&other.table)
                .map(|(a, b)| a ^ b)
                .collect(),
        )
    }
}

pub(crate) fn bits_for(n: usize) -> usize {
    if n <= 2 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

type Semantic = Arc<dyn Fn(u64, u64) -> Option<u64> + Send + Sync>;
type FlagPredicate = Arc<dyn Fn(usize, u64, u64) -> bool + Send + Sync>;

/// A named set of oracle inputs whose query weight is recorded.
#[derive(Clone)]
pub struct FlagSet {
    pub name: String,
    pred: FlagPredicate,
}

impl FlagSet {
    pub fn new(
        name: impl Into<String>,
        pred: impl Fn(usize, u64, u64) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            pred: Arc::new(pred),
        }
    }

    pub fn contains(&self, query_index: usize, x: u64, v: u64) -> bool {
        (self.pred)(query_index, x, v)
    }
}

impl std::fmt::Debug for FlagSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FlagSet({})", self.name)
    }
}

/// Name of the flag set added by [`bbbv_modify`].
pub const BBBV_FLAG: &str = "bbbv_F";

#[derive(Clone)]
pub struct InstrumentedOracle {
    id: String,
    x_bits: usize,
    v_bits: usize,
    data_bits: usize,
    validity: bool,
    semantic: Semantic,
    flag_sets: Vec<FlagSet>,
    modified: Option<Arc<HashSet<(usize, u64)>>>,
}

impl std::fmt::Debug for InstrumentedOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InstrumentedOracle")
            .field("id", &self.id)
            .field("x_bits", &self.x_bits)
            .field("v_bits", &self.v_bits)
            .field("data_bits", &self.data_bits)
            .field("validity", &self.validity)
            .field("flag_sets", &self.flag_sets)
            .finish()
    }
}

impl InstrumentedOracle {
    pub fn new(
        id: impl Into<String>,
        x_bits: usize,
        v_bits: usize,
        data_bits: usize,
        validity: bool,
        semantic: impl Fn(u64, u64) -> Option<u64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let total = x_bits + v_bits + data_bits + validity as usize;
        if total > PURE_QUBIT_CAP {
            return Err(Error::WidthOverflow(format!(
                "gate needs {total} wires, cap is {PURE_QUBIT_CAP}"
            )));
        }
        Ok(Self {
            id: id.into(),
            x_bits,
            v_bits,
            data_bits,
            validity,
            semantic: Arc::new(semantic),
            flag_sets: Vec::new(),
            modified: None,
        })
    }

    pub fn with_flag_set(mut self, set: FlagSet) -> Self {
        self.flag_sets.retain(|s| s.name != set.name);
        self.flag_sets.push(set);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn x_bits(&self) -> usize {
        self.x_bits
    }

    pub fn v_bits(&self) -> usize {
        self.v_bits
    }

    pub fn data_bits(&self) -> usize {
        self.data_bits
    }

    pub fn has_validity(&self) -> bool {
        self.validity
    }

    /// Width of the output wire: data bits plus the validity bit if present.
    pub fn output_bits(&self) -> usize {
        self.data_bits + self.validity as usize
    }

    pub fn flag_sets(&self) -> &[FlagSet] {
        &self.flag_sets
    }

    /// Packs `(x, v)` into one input word, `x` most significant.
    pub fn pack_input(&self, x: u64, v: u64) -> u64 {
        (x << self.v_bits) | v
    }

    /// The semantic answer at a given query index, after any modification.
    pub fn answer(&self, query_index: usize, x: u64, v: u64) -> Option<u64> {
        if let Some(f) = &self.modified {
            if f.contains(&(query_index, self.pack_input(x, v))) {
                return None;
            }
        }
        (self.semantic)(x, v)
    }

    /// Unmodified semantic answer.
    pub fn semantic(&self, x: u64, v: u64) -> Option<u64> {
        (self.semantic)(x, v)
    }

    /// Value XORed into the output wire.
    pub fn encoded(&self, query_index: usize, x: u64, v: u64) -> u64 {
        match self.answer(query_index, x, v) {
            None => 0,
            Some(a) if self.validity => (1 << self.data_bits) | a,
            Some(a) => a,
        }
    }

    /// Inverse of the output encoding: `None` for `⊥`.
    pub fn decode(&self, y: u64) -> Option<u64> {
        if !self.validity {
            return Some(y);
        }
        if y >> self.data_bits & 1 == 1 {
            Some(y & ((1 << self.data_bits) - 1))
        } else {
            None
        }
    }

    /// Encoded answers for every packed input at a query index.
    pub(crate) fn encoded_table(&self, query_index: usize) -> Vec<u64> {
        let nv = 1u64 << self.v_bits;
        (0..(1u64 << (self.x_bits + self.v_bits)))
            .map(|i| self.encoded(query_index, i / nv, i % nv))
            .collect()
    }

    /// The gate as an explicit permutation matrix on `x ∥ v ∥ y`.
    pub fn unitary(&self, query_index: usize) -> Result<CMatrix> {
        let bits = self.x_bits + self.v_bits + self.output_bits();
        if bits > 12 {
            return Err(Error::Resource {
                what: "explicit oracle matrix (qubits)",
                requested: bits,
                cap: 12,
            });
        }
        let ob = self.output_bits();
        let table = self.encoded_table(query_index);
        let d = 1usize << bits;
        let mut u = CMatrix::zeros(d, d);
        for i in 0..d {
            let input = i >> ob;
            u[(i ^ table[input] as usize, i)] = ONE;
        }
        Ok(u)
    }
}

/// `U_f |x, y⟩ = |x, y ⊕ f(x)⟩`.
pub fn classical_gate(f: &ClassicalFunction) -> Result<InstrumentedOracle> {
    let f = f.clone();
    InstrumentedOracle::new("U_f", f.input_bits(), 0, f.width(), false, {
        let f = f.clone();
        move |x, _| Some(f.eval(x))
    })
}

/// One-bit plain oracle: 1 iff `v ∈ S` and `v ≠ 0`.
pub fn membership_oracle(s: &F2Subspace) -> Result<InstrumentedOracle> {
    let sem = s.clone();
    let flag = s.clone();
    Ok(
        InstrumentedOracle::new("U_S", 0, s.ambient_dim(), 1, false, move |_, v| {
            Some((v != 0 && sem.contains_bits(v)) as u64)
        })?
        .with_flag_set(FlagSet::new("member", move |_, _, v| {
            v != 0 && flag.contains_bits(v)
        })),
    )
}

/// Flag set names carried by the copy-protection oracles.
pub const FLAG_A: &str = "A";
pub const FLAG_A_PERP: &str = "A_perp";

fn subspace_flags(
    o: InstrumentedOracle,
    a: &F2Subspace,
    a_perp: &F2Subspace,
) -> InstrumentedOracle {
    let (a1, a2) = (a.clone(), a_perp.clone());
    o.with_flag_set(FlagSet::new(FLAG_A, move |_, _, v| {
        v != 0 && a1.contains_bits(v)
    }))
    .with_flag_set(FlagSet::new(FLAG_A_PERP, move |_, _, v| {
        v != 0 && a2.contains_bits(v)
    }))
}

fn gated_oracle(
    id: &str,
    gate: &F2Subspace,
    payload: ClassicalFunction,
    a: &F2Subspace,
    a_perp: &F2Subspace,
) -> Result<InstrumentedOracle> {
    let g = gate.clone();
    let o = InstrumentedOracle::new(
        id,
        payload.input_bits(),
        gate.ambient_dim(),
        payload.width(),
        true,
        move |x, v| (v != 0 && g.contains_bits(v)).then(|| payload.eval(x)),
    )?;
    Ok(subspace_flags(o, a, a_perp))
}

/// `O₁(x, v) = f(x) ⊕ g(x)` for `v ∈ A \ {0}` and `O₂(x, v) = g(x)` for
/// `v ∈ A⊥ \ {0}`; `⊥` elsewhere.
pub fn cp_oracles(
    a: &F2Subspace,
    f: &ClassicalFunction,
    g: &ClassicalFunction,
) -> Result<(InstrumentedOracle, InstrumentedOracle)> {
    let dual = a.dual();
    let o1 = gated_oracle("O1", a, f.xor(g)?, a, &dual)?;
    let o2 = gated_oracle("O2", &dual, g.clone(), a, &dual)?;
    Ok((o1, o2))
}

/// Payload-swapped pair: `O₁′ = g` on `A \ {0}`, `O₂′ = f ⊕ g` on `A⊥ \ {0}`.
pub fn swapped_cp_oracles(
    a: &F2Subspace,
    f: &ClassicalFunction,
    g: &ClassicalFunction,
) -> Result<(InstrumentedOracle, InstrumentedOracle)> {
    let dual = a.dual();
    let o1 = gated_oracle("O1'", a, g.clone(), a, &dual)?;
    let o2 = gated_oracle("O2'", &dual, f.xor(g)?, a, &dual)?;
    Ok((o1, o2))
}

/// Answers `⊥` everywhere; the gate is the identity.
pub fn bot_oracle(x_bits: usize, v_bits: usize, data_bits: usize) -> Result<InstrumentedOracle> {
    InstrumentedOracle::new("O_bot", x_bits, v_bits, data_bits, true, |_, _| None)
}

/// [`bot_oracle`] with the same wires and flag sets as `like`.
pub fn bot_like(like: &InstrumentedOracle) -> Result<InstrumentedOracle> {
    let mut o = bot_oracle(like.x_bits, like.v_bits, like.data_bits)?;
    o.validity = like.validity;
    o.flag_sets = like.flag_sets.clone();
    Ok(o)
}

/// Replaces answers on `F` (pairs of query index and packed input) by the
/// `⊥` encoding, which leaves the output wire untouched. Adds the flag set
/// [`BBBV_FLAG`] so the weight of `F` is recorded.
pub fn bbbv_modify(
    oracle: &InstrumentedOracle,
    f: impl IntoIterator<Item = (usize, u64)>,
) -> InstrumentedOracle {
    let mut set: HashSet<(usize, u64)> = oracle
        .modified
        .as_ref()
        .map(|m| m.as_ref().clone())
        .unwrap_or_default();
    set.extend(f);
    let set = Arc::new(set);
    let mut o = oracle.clone();
    o.modified = Some(set.clone());
    let v_bits = o.v_bits;
    o.with_flag_set(FlagSet::new(BBBV_FLAG, move |i, x, v| {
        set.contains(&(i, (x << v_bits) | v))
    }))
}

/// One flattened transcript row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryWeightRecord {
    pub trial: u64,
    pub oracle: String,
    pub query_index: usize,
    pub flag_set: String,
    pub weight: f64,
}

/// One gate application.
#[derive(Clone, Debug)]
pub struct QueryRecord {
    pub oracle: String,
    pub query_index: usize,
    pub weights: Vec<(String, f64)>,
    /// Distribution of the packed query input, when capture is enabled.
    pub inputs: Option<Vec<f64>>,
}

/// Per-run query log: weights per flagged set, never full states.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    trial: u64,
    capture_inputs: bool,
    queries: Vec<QueryRecord>,
    known: BTreeSet<(String, String)>,
    counters: BTreeMap<String, usize>,
}

impl Transcript {
    pub fn new(trial: u64) -> Self {
        Self {
            trial,
            ..Self::default()
        }
    }

    /// Also record the full input distribution of every query.
    pub fn capturing_inputs(mut self) -> Self {
        self.capture_inputs = true;
        self
    }

    pub fn captures_inputs(&self) -> bool {
        self.capture_inputs
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    pub fn queries(&self) -> &[QueryRecord] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Declares an oracle slot so its flag sets are known even before any query.
    pub fn register(&mut self, slot: &str, oracle: &InstrumentedOracle) {
        for f in &oracle.flag_sets {
            self.known.insert((slot.to_string(), f.name.clone()));
        }
    }

    /// Number of queries already made to a slot; also the next query index.
    pub fn queries_to(&self, slot: &str) -> usize {
        self.counters.get(slot).copied().unwrap_or(0)
    }

    pub(crate) fn next_index(&mut self, slot: &str) -> usize {
        let c = self.counters.entry(slot.to_string()).or_insert(0);
        *c += 1;
        *c - 1
    }

    pub(crate) fn push(&mut self, record: QueryRecord) {
        for (name, _) in &record.weights {
            self.known.insert((record.oracle.clone(), name.clone()));
        }
        self.queries.push(record);
    }

    pub fn records(&self) -> Vec<QueryWeightRecord> {
        self.queries
            .iter()
            .flat_map(|q| {
                q.weights.iter().map(move |(name, w)| QueryWeightRecord {
                    trial: self.trial,
                    oracle: q.oracle.clone(),
                    query_index: q.query_index,
                    flag_set: name.clone(),
                    weight: *w,
                })
            })
            .collect()
    }

    /// CSV with header `trial,oracle,query_index,flag_set,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records_csv(&self.records(), out)
    }
}

pub fn write_records_csv<W: Write>(records: &[QueryWeightRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

/// Total weight `Σᵢ Wᵢ` on a flagged set, optionally restricted to one slot.
pub fn query_weight(transcript: &Transcript, slot: Option<&str>, flag_set: &str) -> Result<f64> {
    let known = transcript
        .known
        .iter()
        .any(|(s, f)| f == flag_set && slot.is_none_or(|want| want == s));
    if !known {
        return Err(Error::UnknownFlagSet(flag_set.to_string()));
    }
    Ok(transcript
        .queries
        .iter()
        .filter(|q| slot.is_none_or(|want| want == q.oracle))
        .flat_map(|q| q.weights.iter())
        .filter(|(name, _)| name == flag_set)
        .map(|(_, w)| w)
        .sum())
}
