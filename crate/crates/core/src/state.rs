//! Second-quantized photonic states over a fixed registry of optical modes.
//!
//! A [`PhotonicState`] is a sparse superposition of Fock basis states. Optical
//! elements act on it through [`ModeMap`]s, i.e. linear substitutions of
//! creation operators, expanded term by term with the bosonic `√n!` factors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One signal photon plus four Bell pairs.
pub const MAX_PHOTONS: usize = 9;
pub const DEFAULT_PRUNE: f64 = 1e-14;
const ISOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::H, Pol::V];

    pub fn flipped(self) -> Pol {
        match self {
            Pol::H => Pol::V,
            Pol::V => Pol::H,
        }
    }
}

/// Delay class after up to two passes through a short/long arm pair.
///
/// Only the number of long passes is tracked, so `SL` and `LS` are the same
/// class: the two paths arrive at the same time and interfere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Delay {
    depth: u8,
    long: u8,
}

impl Delay {
    pub const ORIGIN: Delay = Delay { depth: 0, long: 0 };
    pub const S: Delay = Delay { depth: 1, long: 0 };
    pub const L: Delay = Delay { depth: 1, long: 1 };
    pub const SS: Delay = Delay { depth: 2, long: 0 };
    pub const SL: Delay = Delay { depth: 2, long: 1 };
    pub const LL: Delay = Delay { depth: 2, long: 2 };
    pub const ALL: [Delay; 6] = [
        Delay::ORIGIN,
        Delay::S,
        Delay::L,
        Delay::SS,
        Delay::SL,
        Delay::LL,
    ];

    pub fn new(depth: u8, long: u8) -> Result<Self> {
        if depth > 2 || long > depth {
            return Err(Error::InvalidDelay { depth, long });
        }
        Ok(Delay { depth, long })
    }

    pub fn depth(self) -> u8 {
        self.depth
    }

    pub fn long_count(self) -> u8 {
        self.long
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match (self.depth, self.long) {
            (0, _) => "0",
            (1, 0) => "S",
            (1, _) => "L",
            (2, 0) => "SS",
            (2, 1) => "SL",
            _ => "LL",
        };
        f.write_str(s)
    }
}

/// The four branches of the decoded signal, each feeding its own amplification block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    C1,
    D1,
    M1,
    N1,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::C1, Block::D1, Block::M1, Block::N1];

    /// Spatial path carrying this branch's signal into its block.
    pub fn path(self) -> Path {
        match self {
            Block::C1 => Path::C1,
            Block::D1 => Path::D1,
            Block::M1 => Path::M1,
            Block::N1 => Path::N1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::C1 => "c1",
            Block::D1 => "d1",
            Block::M1 => "m1",
            Block::N1 => "n1",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Detector {
    D1,
    D2,
    D3,
    D4,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::D1, Detector::D2, Detector::D3, Detector::D4];

    fn index(self) -> u8 {
        self as u8 + 1
    }
}

/// Spatial path registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Path {
    Src,
    A1,
    B1,
    C1,
    D1,
    M1,
    N1,
    Out(Block),
    K1(Block),
    K2(Block),
    Det(Block, Detector),
    /// Absorbs the non-heralded complement of an amplification block; the
    /// index keeps complements of different input rows orthogonal.
    Discard(Block, u8),
    /// Internal wiring port of a composite network.
    Port(u8),
}

impl Path {
    /// Paths that can carry the signal photon (as opposed to ancilla,
    /// detector and discard paths).
    pub fn is_signal(self) -> bool {
        !matches!(
            self,
            Path::K1(_) | Path::K2(_) | Path::Det(..) | Path::Discard(..)
        )
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Path::Src => f.write_str("src"),
            Path::A1 => f.write_str("a1"),
            Path::B1 => f.write_str("b1"),
            Path::C1 => f.write_str("c1"),
            Path::D1 => f.write_str("d1"),
            Path::M1 => f.write_str("m1"),
            Path::N1 => f.write_str("n1"),
            Path::Out(b) => write!(f, "out[{b}]"),
            Path::K1(b) => write!(f, "k1[{b}]"),
            Path::K2(b) => write!(f, "k2[{b}]"),
            Path::Det(b, d) => write!(f, "D{}[{b}]", d.index()),
            Path::Discard(b, row) => write!(f, "discard[{b}]#{row}"),
            Path::Port(i) => write!(f, "port{i}"),
        }
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownPath(s.to_string());
        let block = |name: &str| -> Result<Block> {
            Block::ALL
                .into_iter()
                .find(|b| b.name() == name)
                .ok_or_else(unknown)
        };
        match s {
            "src" => return Ok(Path::Src),
            "a1" => return Ok(Path::A1),
            "b1" => return Ok(Path::B1),
            "c1" => return Ok(Path::C1),
            "d1" => return Ok(Path::D1),
            "m1" => return Ok(Path::M1),
            "n1" => return Ok(Path::N1),
            _ => {}
        }
        if let Some(i) = s.strip_prefix("port") {
            return i.parse().map(Path::Port).map_err(|_| unknown());
        }
        let (head, rest) = s.split_once('[').ok_or_else(unknown)?;
        let (inner, tail) = rest.split_once(']').ok_or_else(unknown)?;
        let b = block(inner)?;
        match (head, tail) {
            ("out", "") => Ok(Path::Out(b)),
            ("k1", "") => Ok(Path::K1(b)),
            ("k2", "") => Ok(Path::K2(b)),
            ("D1", "") => Ok(Path::Det(b, Detector::D1)),
            ("D2", "") => Ok(Path::Det(b, Detector::D2)),
            ("D3", "") => Ok(Path::Det(b, Detector::D3)),
            ("D4", "") => Ok(Path::Det(b, Detector::D4)),
            ("discard", t) => t
                .strip_prefix('#')
                .and_then(|r| r.parse().ok())
                .map(|r| Path::Discard(b, r))
                .ok_or_else(unknown),
            _ => Err(unknown()),
        }
    }
}

/// A single bosonic mode: spatial path, polarization and delay class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub path: Path,
    pub pol: Pol,
    pub delay: Delay,
}

impl ModeLabel {
    pub const fn new(path: Path, pol: Pol, delay: Delay) -> Self {
        ModeLabel { path, pol, delay }
    }

    /// Mode with no accumulated delay.
    pub const fn at(path: Path, pol: Pol) -> Self {
        ModeLabel::new(path, pol, Delay::ORIGIN)
    }

    pub fn with_path(self, path: Path) -> Self {
        ModeLabel { path, ..self }
    }

    pub fn with_pol(self, pol: Pol) -> Self {
        ModeLabel { pol, ..self }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}_{}", self.pol, self.path)?;
        if self.delay != Delay::ORIGIN {
            write!(f, "<{}>", self.delay)?;
        }
        Ok(())
    }
}

/// Occupation-number basis vector. Sorted by mode, zero counts never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockBasisState(Vec<(ModeLabel, u8)>);

impl FockBasisState {
    pub fn vacuum() -> Self {
        FockBasisState(Vec::new())
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (ModeLabel, u8)>) -> Result<Self> {
        let mut merged: BTreeMap<ModeLabel, usize> = BTreeMap::new();
        for (m, n) in counts {
            *merged.entry(m).or_default() += n as usize;
        }
        let total: usize = merged.values().sum();
        if total > MAX_PHOTONS {
            return Err(Error::TooManyPhotons(total));
        }
        Ok(FockBasisState(
            merged
                .into_iter()
                .filter(|&(_, n)| n > 0)
                .map(|(m, n)| (m, n as u8))
                .collect(),
        ))
    }

    /// Builds the basis state holding one photon per listed mode (repeats allowed).
    pub fn from_modes(modes: &[ModeLabel]) -> Result<Self> {
        Self::from_counts(modes.iter().map(|&m| (m, 1)))
    }

    fn from_unsorted_modes(modes: &mut [ModeLabel]) -> Self {
        modes.sort_unstable();
        let mut occ: Vec<(ModeLabel, u8)> = Vec::with_capacity(modes.len());
        for &m in modes.iter() {
            match occ.last_mut() {
                Some((last, n)) if *last == m => *n += 1,
                _ => occ.push((m, 1)),
            }
        }
        FockBasisState(occ)
    }

    pub fn occupations(&self) -> &[(ModeLabel, u8)] {
        &self.0
    }

    pub fn count(&self, mode: &ModeLabel) -> u8 {
        self.0
            .binary_search_by(|(m, _)| m.cmp(mode))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn total_photons(&self) -> usize {
        self.0.iter().map(|&(_, n)| n as usize).sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    /// Keeps only the modes satisfying `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&ModeLabel) -> bool) -> Self {
        FockBasisState(self.0.iter().filter(|(m, _)| keep(m)).copied().collect())
    }

    /// `∏ √(n!)` over occupied modes.
    fn bosonic_factor(&self) -> f64 {
        self.0.iter().map(|&(_, n)| sqrt_factorial(n)).product()
    }

    /// Adds photons in modes that must not already be occupied.
    pub(crate) fn with_added(&self, extra: &[(ModeLabel, u8)]) -> Result<Self> {
        let mut extra = extra.to_vec();
        extra.sort_unstable();
        self.merged(&FockBasisState(extra))
    }

    fn merged(&self, other: &FockBasisState) -> Result<Self> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                std::cmp::Ordering::Equal => return Err(Error::ModeCollision(a.0)),
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        let total: usize = out.iter().map(|&(_, n)| n as usize).sum();
        if total > MAX_PHOTONS {
            return Err(Error::TooManyPhotons(total));
        }
        Ok(FockBasisState(out))
    }
}

impl fmt::Display for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("|vac⟩");
        }
        f.write_str("|")?;
        for (i, (m, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{m}")?;
            if *n > 1 {
                write!(f, "^{n}")?;
            }
        }
        f.write_str("⟩")
    }
}

fn sqrt_factorial(n: u8) -> f64 {
    const TABLE: [f64; 10] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0];
    TABLE[n as usize].sqrt()
}

/// Map from mode to photon count that a detection event must reproduce.
pub type DetectionPattern = BTreeMap<ModeLabel, u8>;

/// Sparse superposition of Fock basis states. May be subnormalized, in which
/// case the squared norm is the probability of the branch it represents.
#[derive(Debug, Clone)]
pub struct PhotonicState {
    terms: BTreeMap<FockBasisState, Complex64>,
    prune: f64,
}

impl Default for PhotonicState {
    fn default() -> Self {
        Self::zero()
    }
}

impl PhotonicState {
    /// The null vector (no terms, weight 0).
    pub fn zero() -> Self {
        PhotonicState {
            terms: BTreeMap::new(),
            prune: DEFAULT_PRUNE,
        }
    }

    /// `|vac⟩` with amplitude 1.
    pub fn vacuum() -> Self {
        let mut s = Self::zero();
        s.terms.insert(FockBasisState::vacuum(), Complex64::new(1.0, 0.0));
        s
    }

    pub fn single_photon(mode: ModeLabel, amplitude: Complex64) -> Result<Self> {
        let mag = amplitude.norm();
        if mag > 1.0 + 1e-12 {
            return Err(Error::AmplitudeTooLarge(mag));
        }
        let basis = FockBasisState(vec![(mode, 1)]);
        Ok(Self::from_terms([(basis, amplitude)]))
    }

    /// Sums duplicate basis states and drops amplitudes under the prune threshold.
    pub fn from_terms(terms: impl IntoIterator<Item = (FockBasisState, Complex64)>) -> Self {
        Self::from_terms_with_prune(terms, DEFAULT_PRUNE)
    }

    fn from_terms_with_prune(
        terms: impl IntoIterator<Item = (FockBasisState, Complex64)>,
        prune: f64,
    ) -> Self {
        let mut map: BTreeMap<FockBasisState, Complex64> = BTreeMap::new();
        for (b, a) in terms {
            *map.entry(b).or_default() += a;
        }
        map.retain(|_, a| a.norm() >= prune);
        PhotonicState { terms: map, prune }
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune = threshold;
        self.terms.retain(|_, a| a.norm() >= threshold);
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    fn rebuild(&self, terms: impl IntoIterator<Item = (FockBasisState, Complex64)>) -> Self {
        Self::from_terms_with_prune(terms, self.prune)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisState, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, basis: &FockBasisState) -> Complex64 {
        self.terms.get(basis).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Squared norm.
    pub fn weight(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.terms.len() == 1 && self.terms.keys().all(FockBasisState::is_vacuum)
    }

    pub fn modes(&self) -> BTreeSet<ModeLabel> {
        self.terms
            .keys()
            .flat_map(|b| b.0.iter().map(|&(m, _)| m))
            .collect()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.rebuild(self.terms.iter().map(|(b, &a)| (b.clone(), a * c)))
    }

    pub fn plus(&self, other: &PhotonicState) -> Self {
        self.rebuild(
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(b, &a)| (b.clone(), a)),
        )
    }

    /// Rescaled to unit norm; the zero state stays zero.
    pub fn normalized(&self) -> Self {
        let w = self.weight();
        if w == 0.0 {
            return self.clone();
        }
        self.scaled(Complex64::new(1.0 / w.sqrt(), 0.0))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PhotonicState) -> Complex64 {
        self.terms
            .iter()
            .map(|(b, a)| a.conj() * other.amplitude(b))
            .sum()
    }

    /// Largest per-term amplitude difference.
    pub fn max_deviation(&self, other: &PhotonicState) -> f64 {
        let keys: BTreeSet<&FockBasisState> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|b| (self.amplitude(b) - other.amplitude(b)).norm())
            .fold(0.0, f64::max)
    }

    /// Number of photons in each term, or `None` if terms disagree.
    pub fn photon_number(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(FockBasisState::total_photons);
        let first = it.next()?;
        it.all(|n| n == first).then_some(first)
    }

    /// Product state on disjoint mode sets.
    pub fn tensor(&self, other: &PhotonicState) -> Result<Self> {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (b1, a1) in &self.terms {
            for (b2, a2) in &other.terms {
                out.push((b1.merged(b2)?, a1 * a2));
            }
        }
        Ok(self.rebuild(out))
    }

    /// Substitutes every creation operator by its rule in `map` and expands.
    pub fn apply_mode_map(&self, map: &ModeMap) -> Result<Self> {
        let mut out: BTreeMap<FockBasisState, Complex64> = BTreeMap::new();
        let mut photons: Vec<ModeLabel> = Vec::with_capacity(MAX_PHOTONS);
        let mut current: Vec<ModeLabel> = Vec::with_capacity(MAX_PHOTONS);
        for (basis, &amp) in &self.terms {
            photons.clear();
            for &(m, n) in &basis.0 {
                if map.blocked.contains(&m) {
                    return Err(Error::DelayOverflow(m));
                }
                photons.extend(std::iter::repeat_n(m, n as usize));
            }
            let scale = amp / basis.bosonic_factor();
            current.clear();
            expand(&photons, map, scale, &mut current, &mut out);
        }
        Ok(self.rebuild(out))
    }

    /// Post-selects on `pattern` over the paths that appear in it.
    ///
    /// Returns the absolute probability of the pattern and the conditional
    /// state with those paths removed, renormalized. `(0, vacuum)` if nothing matches.
    pub fn project_detection(&self, pattern: &DetectionPattern) -> (f64, PhotonicState) {
        let scope: BTreeSet<Path> = pattern.keys().map(|m| m.path).collect();
        self.project_detection_scoped(pattern, &scope)
    }

    /// Like [`project_detection`](Self::project_detection), but the restricted
    /// occupation is taken over `scope`, so paths in `scope` missing from the
    /// pattern must be empty.
    pub fn project_detection_scoped(
        &self,
        pattern: &DetectionPattern,
        scope: &BTreeSet<Path>,
    ) -> (f64, PhotonicState) {
        let want: Vec<(ModeLabel, u8)> = pattern
            .iter()
            .filter(|&(_, &n)| n > 0)
            .map(|(&m, &n)| (m, n))
            .collect();
        let mut kept = Vec::new();
        for (b, &a) in &self.terms {
            let restricted = b.filtered(|m| scope.contains(&m.path));
            if restricted.0 == want {
                kept.push((b.filtered(|m| !scope.contains(&m.path)), a));
            }
        }
        let cond = self.rebuild(kept);
        let p = cond.weight();
        if p == 0.0 {
            return (0.0, PhotonicState::vacuum());
        }
        (p, cond.normalized())
    }

    /// Probability of every distinct occupation pattern on `scope`; sums to [`weight`](Self::weight).
    pub fn detection_partition(&self, scope: &BTreeSet<Path>) -> BTreeMap<FockBasisState, f64> {
        let mut groups: BTreeMap<FockBasisState, BTreeMap<FockBasisState, Complex64>> =
            BTreeMap::new();
        for (b, &a) in &self.terms {
            let key = b.filtered(|m| scope.contains(&m.path));
            let rest = b.filtered(|m| !scope.contains(&m.path));
            *groups.entry(key).or_default().entry(rest).or_default() += a;
        }
        groups
            .into_iter()
            .map(|(k, g)| (k, g.values().map(|a| a.norm_sqr()).sum()))
            .collect()
    }

    /// Keeps the terms whose signal photons all arrived with `long_count` long
    /// passes. Terms without a signal photon pass every time window.
    pub fn select_time_bin(&self, long_count: u8) -> Result<(f64, PhotonicState)> {
        let mut kept = Vec::new();
        for (b, &a) in &self.terms {
            let mut signal = b.0.iter().filter(|(m, _)| m.path.is_signal()).peekable();
            if signal.peek().is_none() {
                kept.push((b.clone(), a));
                continue;
            }
            let mut matches = true;
            for (m, _) in signal {
                if m.delay.depth() != 2 {
                    return Err(Error::Contract(format!(
                        "time-bin selection needs depth-2 signal modes, found {m}"
                    )));
                }
                matches &= m.delay.long_count() == long_count;
            }
            if matches {
                kept.push((b.clone(), a));
            }
        }
        let sel = self.rebuild(kept);
        let p = sel.weight();
        if p == 0.0 {
            return Ok((0.0, PhotonicState::vacuum()));
        }
        Ok((p, sel.normalized()))
    }

    /// Applies `f` to every basis state, accumulating amplitudes.
    pub(crate) fn map_basis(
        &self,
        mut f: impl FnMut(&FockBasisState, Complex64, &mut Vec<(FockBasisState, Complex64)>) -> Result<()>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (b, &a) in &self.terms {
            f(b, a, &mut out)?;
        }
        Ok(self.rebuild(out))
    }
}

fn expand(
    photons: &[ModeLabel],
    map: &ModeMap,
    coeff: Complex64,
    current: &mut Vec<ModeLabel>,
    out: &mut BTreeMap<FockBasisState, Complex64>,
) {
    let Some((&first, rest)) = photons.split_first() else {
        let mut modes = current.clone();
        let basis = FockBasisState::from_unsorted_modes(&mut modes);
        let amp = coeff * basis.bosonic_factor();
        *out.entry(basis).or_default() += amp;
        return;
    };
    match map.rules.get(&first) {
        Some(rule) => {
            for &(m, c) in rule {
                current.push(m);
                expand(rest, map, coeff * c, current, out);
                current.pop();
            }
        }
        None => {
            current.push(first);
            expand(rest, map, coeff, current, out);
            current.pop();
        }
    }
}

impl fmt::Display for PhotonicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (b, a)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({:.6}{:+.6}i){b}", a.re, a.im)?;
        }
        Ok(())
    }
}

/// Linear substitution `â†_in → Σ c · â†_out` on a declared set of input modes.
/// Undeclared modes pass through; `blocked` modes are rejected at application.
#[derive(Debug, Clone, Default)]
pub struct ModeMap {
    rules: BTreeMap<ModeLabel, Vec<(ModeLabel, Complex64)>>,
    blocked: BTreeSet<ModeLabel>,
}

impl ModeMap {
    /// Validates that the rules form an isometry on their declared inputs.
    pub fn new(
        rules: impl IntoIterator<Item = (ModeLabel, Vec<(ModeLabel, Complex64)>)>,
    ) -> Result<Self> {
        let rules: BTreeMap<_, _> = rules
            .into_iter()
            .map(|(m, outs): (ModeLabel, Vec<(ModeLabel, Complex64)>)| {
                let mut merged: BTreeMap<ModeLabel, Complex64> = BTreeMap::new();
                for (o, c) in outs {
                    *merged.entry(o).or_default() += c;
                }
                (m, merged.into_iter().filter(|(_, c)| *c != Complex64::default()).collect())
            })
            .collect();
        let map = ModeMap {
            rules,
            blocked: BTreeSet::new(),
        };
        let dev = map.isometry_deviation();
        if dev > ISOMETRY_TOL {
            return Err(Error::NotIsometric(dev));
        }
        Ok(map)
    }

    pub fn identity() -> Self {
        ModeMap::default()
    }

    pub fn with_blocked(mut self, modes: impl IntoIterator<Item = ModeLabel>) -> Self {
        self.blocked.extend(modes);
        self
    }

    pub fn declared_inputs(&self) -> impl Iterator<Item = &ModeLabel> {
        self.rules.keys()
    }

    pub fn rule(&self, mode: &ModeLabel) -> Option<&[(ModeLabel, Complex64)]> {
        self.rules.get(mode).map(Vec::as_slice)
    }

    /// Max entry of `|G − I|` for the Gram matrix of the rule columns.
    pub fn isometry_deviation(&self) -> f64 {
        let cols: Vec<BTreeMap<ModeLabel, Complex64>> = self
            .rules
            .values()
            .map(|r| r.iter().copied().collect())
            .collect();
        let mut worst: f64 = 0.0;
        for (i, ci) in cols.iter().enumerate() {
            for (j, cj) in cols.iter().enumerate().skip(i) {
                let g: Complex64 = ci
                    .iter()
                    .filter_map(|(m, a)| cj.get(m).map(|b| a.conj() * b))
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// Ordered sequence of mode maps.
#[derive(Debug, Clone, Default)]
pub struct Network {
    stages: Vec<ModeMap>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn then(mut self, map: ModeMap) -> Self {
        self.stages.push(map);
        self
    }

    pub fn extend(mut self, other: Network) -> Self {
        self.stages.extend(other.stages);
        self
    }

    pub fn apply(&self, state: &PhotonicState) -> Result<PhotonicState> {
        self.stages
            .iter()
            .try_fold(state.clone(), |s, m| s.apply_mode_map(m))
    }

    /// Single-photon response of the whole network on `inputs`, as one map.
    pub fn collapse(&self, inputs: impl IntoIterator<Item = ModeLabel>) -> Result<ModeMap> {
        let mut rules = Vec::new();
        for m in inputs {
            let out = self.apply(&PhotonicState::single_photon(m, Complex64::new(1.0, 0.0))?)?;
            let mut rule = Vec::with_capacity(out.len());
            for (b, &a) in out.terms() {
                match b.occupations() {
                    [(o, 1)] => rule.push((*o, a)),
                    _ => {
                        return Err(Error::Contract(format!(
                            "network does not conserve single photons: {b}"
                        )))
                    }
                }
            }
            rules.push((m, rule));
        }
        ModeMap::new(rules)
    }
}
