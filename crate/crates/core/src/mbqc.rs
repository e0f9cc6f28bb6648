//! Measurement-based delegated computation: graph states, adaptive rotated
//! measurements, the client's angle masking and outcome decoding, and an
//! exact audit of what the server gets to see.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path as FsPath;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processor::HeraldPattern;
use crate::qubit::Qubit;
use crate::state::Block;
use crate::Angle;

pub const DEFAULT_QUBIT_CAP: usize = 16;
pub const PATTERN_SCHEMA_VERSION: u32 = 1;

/// Undirected simple graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSpec {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Pattern(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Pattern(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(GraphSpec { n, edges: set })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }
}

/// A one-way program: graph, measurement order, base angles and the
/// dependency sets feeding the adaptation of each angle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementPattern {
    graph: GraphSpec,
    order: Vec<usize>,
    phi: Vec<Angle>,
    x_deps: Vec<Vec<usize>>,
    z_deps: Vec<Vec<usize>>,
    outputs: Vec<usize>,
}

/// On-disk pattern document. Angles are integers `k` meaning `kπ/4`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PatternFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub order: Vec<usize>,
    pub phi: Vec<i64>,
    pub xdeps: Vec<Vec<usize>>,
    pub zdeps: Vec<Vec<usize>>,
    pub outputs: Vec<usize>,
}

fn default_version() -> u32 {
    PATTERN_SCHEMA_VERSION
}

impl MeasurementPattern {
    pub fn new(
        graph: GraphSpec,
        order: Vec<usize>,
        phi: Vec<Angle>,
        x_deps: Vec<Vec<usize>>,
        z_deps: Vec<Vec<usize>>,
        outputs: Vec<usize>,
    ) -> Result<Self> {
        let n = graph.n;
        if order.len() != n || phi.len() != n || x_deps.len() != n || z_deps.len() != n {
            return Err(Error::Pattern(format!(
                "order, phi, xdeps and zdeps must all have {n} entries"
            )));
        }
        let mut position = vec![usize::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::Pattern("order is not a permutation of the vertices".into()));
            }
            position[v] = i;
        }
        for v in 0..n {
            for &d in x_deps[v].iter().chain(&z_deps[v]) {
                if d >= n || position[d] >= position[v] {
                    return Err(Error::Pattern(format!(
                        "vertex {v} depends on {d}, which is not measured earlier"
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for &o in &outputs {
            if o >= n || !seen.insert(o) {
                return Err(Error::Pattern(format!("bad output vertex {o}")));
            }
        }
        Ok(MeasurementPattern {
            graph,
            order,
            phi,
            x_deps,
            z_deps,
            outputs,
        })
    }

    /// 1D cluster measured left to right: vertex `j` takes its X dependency
    /// from `j−1` and its Z dependency from `j−2`; the last vertex is the output.
    pub fn linear_cluster(phi: &[Angle]) -> Result<Self> {
        let n = phi.len();
        let graph = GraphSpec::new(n, (1..n).map(|j| (j - 1, j)))?;
        let x = (0..n).map(|j| if j >= 1 { vec![j - 1] } else { vec![] }).collect();
        let z = (0..n).map(|j| if j >= 2 { vec![j - 2] } else { vec![] }).collect();
        let outputs = if n > 0 { vec![n - 1] } else { vec![] };
        Self::new(graph, (0..n).collect(), phi.to_vec(), x, z, outputs)
    }

    pub fn graph(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn phi(&self, v: usize) -> Angle {
        self.phi[v]
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.n
    }

    pub fn from_file(file: PatternFile) -> Result<Self> {
        if file.version != PATTERN_SCHEMA_VERSION {
            return Err(Error::Pattern(format!(
                "unsupported pattern schema version {}",
                file.version
            )));
        }
        let graph = GraphSpec::new(file.n, file.edges.iter().map(|e| (e[0], e[1])))?;
        Self::new(
            graph,
            file.order,
            file.phi.into_iter().map(Angle::new).collect(),
            file.xdeps,
            file.zdeps,
            file.outputs,
        )
    }

    pub fn to_file(&self) -> PatternFile {
        PatternFile {
            version: PATTERN_SCHEMA_VERSION,
            n: self.graph.n,
            edges: self.graph.edges().map(|(a, b)| [a, b]).collect(),
            order: self.order.clone(),
            phi: self.phi.iter().map(|a| a.k() as i64).collect(),
            xdeps: self.x_deps.clone(),
            zdeps: self.z_deps.clone(),
            outputs: self.outputs.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Dense state vector; vertex `v` is bit `v` of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitRegister {
    n: usize,
    amps: Vec<Complex64>,
    measured: u32,
}

impl QubitRegister {
    /// Product of `inputs` with CZ on every edge.
    pub fn graph_state(graph: &GraphSpec, inputs: &[Qubit]) -> Result<Self> {
        Self::graph_state_capped(graph, inputs, DEFAULT_QUBIT_CAP)
    }

    pub fn graph_state_capped(graph: &GraphSpec, inputs: &[Qubit], cap: usize) -> Result<Self> {
        let n = graph.n;
        // Basis indices and the measured mask are 32-bit.
        if n > cap || n > 30 {
            return Err(Error::RegisterTooLarge(n, cap));
        }
        if inputs.len() != n {
            return Err(Error::Pattern(format!("{} inputs for {n} vertices", inputs.len())));
        }
        let normalized: Vec<Qubit> = inputs.iter().map(Qubit::normalized).collect();
        let mut amps = vec![Complex64::new(1.0, 0.0); 1 << n];
        for (i, a) in amps.iter_mut().enumerate() {
            for (v, q) in normalized.iter().enumerate() {
                *a *= q.0[(i >> v) & 1];
            }
        }
        for (a, b) in graph.edges() {
            let mask = (1 << a) | (1 << b);
            for (i, amp) in amps.iter_mut().enumerate() {
                if i & mask == mask {
                    *amp = -*amp;
                }
            }
        }
        Ok(QubitRegister { n, amps, measured: 0 })
    }

    /// `|+_{θ_j}⟩` on every vertex, then CZ on every edge.
    pub fn plus_graph(graph: &GraphSpec, thetas: &[Angle]) -> Result<Self> {
        let inputs: Vec<Qubit> = thetas.iter().map(|&t| Qubit::plus_theta(t)).collect();
        Self::graph_state(graph, &inputs)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_measured(&self, v: usize) -> bool {
        self.measured >> v & 1 == 1
    }

    /// Probability of outcomes 0 (`|+_ξ⟩`) and 1 (`|−_ξ⟩`) on vertex `v`.
    pub fn outcome_probabilities(&self, v: usize, xi: Angle) -> Result<[f64; 2]> {
        self.check_unmeasured(v)?;
        let bit = 1usize << v;
        let ph = xi.phase().conj();
        let mut p = [0.0; 2];
        for i in (0..self.amps.len()).filter(|i| i & bit == 0) {
            let (a0, a1) = (self.amps[i], self.amps[i | bit] * ph);
            p[0] += (a0 + a1).norm_sqr() / 2.0;
            p[1] += (a0 - a1).norm_sqr() / 2.0;
        }
        Ok(p)
    }

    /// Projects `v` onto `(|0⟩ + (−1)^outcome e^{iξ}|1⟩)/√2`. Returns the
    /// outcome probability and the renormalized post-state with `v` reset to `|0⟩`.
    pub fn project(&self, v: usize, xi: Angle, outcome: bool) -> Result<(f64, QubitRegister)> {
        self.check_unmeasured(v)?;
        let bit = 1usize << v;
        let ph = xi.phase().conj() * if outcome { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
        let mut amps = vec![Complex64::default(); self.amps.len()];
        let mut p = 0.0;
        for i in (0..self.amps.len()).filter(|i| i & bit == 0) {
            let a = self.amps[i] * FRAC_1_SQRT_2 + self.amps[i | bit] * ph;
            p += a.norm_sqr();
            amps[i] = a;
        }
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            amps.iter_mut().for_each(|a| *a *= s);
        }
        Ok((
            p,
            QubitRegister {
                n: self.n,
                amps,
                measured: self.measured | bit as u32,
            },
        ))
    }

    /// Samples a measurement of `v` in the `{|±_ξ⟩}` basis.
    ///
    /// One uniform draw decides the outcome in the canonical labelling of the
    /// basis (angle reduced mod π); adding π to ξ relabels the same basis, so
    /// it flips the reported bit while leaving the physical branch unchanged.
    pub fn measure_rotated<R: Rng + ?Sized>(
        &self,
        v: usize,
        xi: Angle,
        rng: &mut R,
    ) -> Result<(bool, QubitRegister)> {
        let canonical = Angle::new(i64::from(xi.k() % 4));
        let relabel = xi.k() >= 4;
        let p = self.outcome_probabilities(v, canonical)?;
        let u: f64 = rng.random();
        let c = u >= p[0];
        let b = c ^ relabel;
        let (_, next) = self.project(v, xi, b)?;
        Ok((b, next))
    }

    fn check_unmeasured(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::Pattern(format!("vertex {v} out of range")));
        }
        if self.is_measured(v) {
            return Err(Error::AlreadyMeasured(v));
        }
        Ok(())
    }
}

/// `φ'_j = (−1)^{s_X} φ_j + s_Z π` from the decoded outcomes of earlier vertices.
pub fn adapted_angle(j: usize, pattern: &MeasurementPattern, outcomes: &[Option<bool>]) -> Result<Angle> {
    let parity = |deps: &[usize]| -> Result<bool> {
        deps.iter().try_fold(false, |acc, &d| {
            outcomes
                .get(d)
                .copied()
                .flatten()
                .map(|m| acc ^ m)
                .ok_or(Error::MissingOutcome(d))
        })
    };
    let s_x = parity(&pattern.x_deps[j])?;
    let s_z = parity(&pattern.z_deps[j])?;
    let phi = pattern.phi[j];
    Ok((if s_x { -phi } else { phi }).flip_if(s_z))
}

/// Angle the client sends for vertex `j`: `δ_j = θ_j + φ'_j + r_j π`.
pub fn alice_delta(
    j: usize,
    pattern: &MeasurementPattern,
    outcomes: &[Option<bool>],
    theta: Angle,
    r: bool,
) -> Result<Angle> {
    Ok((theta + adapted_angle(j, pattern, outcomes)?).flip_if(r))
}

/// Herald bookkeeping for a qubit delivered through the noisy channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldMeta {
    /// Photons sent until one heralded (1 means first try).
    pub attempts: u32,
    pub block: Block,
    pub pattern: HeraldPattern,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexRecord {
    pub vertex: usize,
    pub theta: Angle,
    pub r: bool,
    /// Angle sent to the server.
    pub delta: Angle,
    /// Outcome reported by the server.
    pub b: bool,
    /// Outcome decoded by the client.
    pub m: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub herald: Option<HeraldMeta>,
}

/// Record of one delegated run, in measurement order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Transcript {
    records: Vec<VertexRecord>,
    outputs: Vec<bool>,
}

impl Transcript {
    fn push(&mut self, record: VertexRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[VertexRecord] {
        &self.records
    }

    /// Decoded outcomes of the output vertices, in pattern order.
    pub fn outputs(&self) -> &[bool] {
        &self.outputs
    }

    /// Output bits packed little-endian: output `i` is bit `i`.
    pub fn output_index(&self) -> usize {
        pack(&self.outputs)
    }

    pub fn attach_herald(&mut self, vertex: usize, meta: HeraldMeta) {
        if let Some(r) = self.records.iter_mut().find(|r| r.vertex == vertex) {
            r.herald = Some(meta);
        }
    }
}

fn pack(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
}

fn check_lengths(pattern: &MeasurementPattern, thetas: &[Angle], rs: &[bool]) -> Result<()> {
    let n = pattern.vertex_count();
    if thetas.len() != n || rs.len() != n {
        return Err(Error::Pattern(format!(
            "need {n} angles and {n} masking bits, got {} and {}",
            thetas.len(),
            rs.len()
        )));
    }
    Ok(())
}

/// One blinded run on `|+_θ⟩` inputs.
pub fn run_bfk<R: Rng + ?Sized>(
    pattern: &MeasurementPattern,
    thetas: &[Angle],
    rs: &[bool],
    rng: &mut R,
) -> Result<Transcript> {
    let inputs: Vec<Qubit> = thetas.iter().map(|&t| Qubit::plus_theta(t)).collect();
    run_bfk_with_inputs(pattern, &inputs, thetas, rs, rng)
}

/// One blinded run where the server holds `inputs` (e.g. qubits recovered
/// from the channel), which the client believes to be `|+_{θ_j}⟩`.
pub fn run_bfk_with_inputs<R: Rng + ?Sized>(
    pattern: &MeasurementPattern,
    inputs: &[Qubit],
    thetas: &[Angle],
    rs: &[bool],
    rng: &mut R,
) -> Result<Transcript> {
    check_lengths(pattern, thetas, rs)?;
    let mut reg = QubitRegister::graph_state(&pattern.graph, inputs)?;
    let mut decoded: Vec<Option<bool>> = vec![None; pattern.vertex_count()];
    let mut transcript = Transcript::default();
    for &j in &pattern.order {
        let delta = alice_delta(j, pattern, &decoded, thetas[j], rs[j])?;
        let (b, next) = reg.measure_rotated(j, delta, rng)?;
        reg = next;
        let m = b ^ rs[j];
        decoded[j] = Some(m);
        transcript.push(VertexRecord {
            vertex: j,
            theta: thetas[j],
            r: rs[j],
            delta,
            b,
            m,
            herald: None,
        });
    }
    transcript.outputs = pattern
        .outputs
        .iter()
        .map(|&o| decoded[o].expect("every vertex is measured"))
        .collect();
    Ok(transcript)
}

/// Exact distribution of the decoded output bits for fixed secrets, by
/// summing over every measurement branch. Indexed as [`Transcript::output_index`].
pub fn decoded_distribution(
    pattern: &MeasurementPattern,
    thetas: &[Angle],
    rs: &[bool],
) -> Result<Vec<f64>> {
    check_lengths(pattern, thetas, rs)?;
    let reg = QubitRegister::plus_graph(&pattern.graph, thetas)?;
    let mut dist = vec![0.0; 1 << pattern.outputs.len()];
    let mut decoded = vec![None; pattern.vertex_count()];
    branch(pattern, thetas, rs, 0, reg, 1.0, &mut decoded, &mut dist)?;
    Ok(dist)
}

#[allow(clippy::too_many_arguments)]
fn branch(
    pattern: &MeasurementPattern,
    thetas: &[Angle],
    rs: &[bool],
    step: usize,
    reg: QubitRegister,
    weight: f64,
    decoded: &mut Vec<Option<bool>>,
    dist: &mut [f64],
) -> Result<()> {
    let Some(&j) = pattern.order.get(step) else {
        let bits: Vec<bool> = pattern.outputs.iter().map(|&o| decoded[o].unwrap_or(false)).collect();
        dist[pack(&bits)] += weight;
        return Ok(());
    };
    let delta = alice_delta(j, pattern, decoded, thetas[j], rs[j])?;
    for b in [false, true] {
        let (p, next) = reg.project(j, delta, b)?;
        if p == 0.0 {
            continue;
        }
        decoded[j] = Some(b ^ rs[j]);
        branch(pattern, thetas, rs, step + 1, next, weight * p, decoded, dist)?;
    }
    decoded[j] = None;
    Ok(())
}

/// Unblinded reference: every `θ_j = 0`, every `r_j = 0`.
pub fn reference_mbqc(pattern: &MeasurementPattern) -> Result<Vec<f64>> {
    let n = pattern.vertex_count();
    decoded_distribution(pattern, &vec![Angle::ZERO; n], &vec![false; n])
}

/// One unblinded sampled run.
pub fn reference_sample<R: Rng + ?Sized>(pattern: &MeasurementPattern, rng: &mut R) -> Result<Transcript> {
    let n = pattern.vertex_count();
    run_bfk(pattern, &vec![Angle::ZERO; n], &vec![false; n], rng)
}

/// Largest pattern for which [`blinded_average_distribution`] enumerates all secrets.
pub const MAX_ENUMERATED_VERTICES: usize = 5;

/// Decoded output distribution averaged over all `16^n` choices of (θ, r).
pub fn blinded_average_distribution(pattern: &MeasurementPattern) -> Result<Vec<f64>> {
    let n = pattern.vertex_count();
    if n > MAX_ENUMERATED_VERTICES {
        return Err(Error::Pattern(format!(
            "exhaustive secret enumeration is limited to {MAX_ENUMERATED_VERTICES} vertices"
        )));
    }
    let total = 16usize.pow(n as u32);
    let mut avg = vec![0.0; 1 << pattern.outputs.len()];
    for code in 0..total {
        let thetas: Vec<Angle> = (0..n).map(|j| Angle::new(((code >> (4 * j)) & 7) as i64)).collect();
        let rs: Vec<bool> = (0..n).map(|j| (code >> (4 * j + 3)) & 1 == 1).collect();
        for (a, p) in avg.iter_mut().zip(decoded_distribution(pattern, &thetas, &rs)?) {
            *a += p;
        }
    }
    avg.iter_mut().for_each(|a| *a /= total as f64);
    Ok(avg)
}

/// Distribution of `δ = θ + φ' + rπ` for uniform θ ∈ ℤ₈ and r ∈ {0,1}, as counts out of 16.
pub fn blindness_counts(phi_prime: Angle) -> [u32; 8] {
    let mut counts = [0; 8];
    for theta in Angle::all() {
        for r in [false, true] {
            counts[(theta + phi_prime).flip_if(r).k() as usize] += 1;
        }
    }
    counts
}

pub fn blindness_distribution(phi_prime: Angle) -> [f64; 8] {
    blindness_counts(phi_prime).map(|c| c as f64 / 16.0)
}

/// `I(φ'; δ)` in bits, with φ' uniform over ℤ₈.
pub fn blindness_mutual_information() -> f64 {
    let conditionals: Vec<[f64; 8]> = Angle::all().map(blindness_distribution).collect();
    let mut marginal = [0.0; 8];
    for c in &conditionals {
        for (m, p) in marginal.iter_mut().zip(c) {
            *m += p / 8.0;
        }
    }
    let mut info = 0.0;
    for c in &conditionals {
        for (p, m) in c.iter().zip(&marginal) {
            if *p > 0.0 {
                info += p / 8.0 * (p / m).log2();
            }
        }
    }
    info
}
