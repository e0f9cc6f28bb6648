//! Brute-force reference for the photonic pipeline.
//!
//! States are polynomials in creation operators keyed by plain strings and
//! every stage is a direct substitution, written out by hand without any of
//! the crate's state, optics or processor machinery.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C;

/// `path.pol.longs`, e.g. `c1.H.1`. Depth is implied by the stage.
pub type Op = String;
pub type Poly = BTreeMap<Vec<Op>, C>;

pub const BLOCKS: [&str; 4] = ["c1", "d1", "m1", "n1"];
pub const PATTERNS: [&str; 2] = ["D1D4", "D2D3"];

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn op(path: &str, pol: char, longs: u8) -> Op {
    format!("{path}.{pol}.{longs}")
}

fn split(o: &str) -> (&str, char, u8) {
    let mut it = o.split('.');
    let path = it.next().unwrap();
    let pol = it.next().unwrap().chars().next().unwrap();
    let longs = it.next().unwrap().parse().unwrap();
    (path, pol, longs)
}

fn add(p: &mut Poly, mut mono: Vec<Op>, a: C) {
    if a == C::new(0.0, 0.0) {
        return;
    }
    mono.sort();
    *p.entry(mono).or_default() += a;
}

/// Replaces every operator by a linear combination, expanding products.
fn substitute(p: &Poly, rule: impl Fn(&str) -> Vec<(Op, C)>) -> Poly {
    let mut out = Poly::new();
    for (mono, &a) in p {
        let mut partial: Vec<(Vec<Op>, C)> = vec![(vec![], a)];
        for o in mono {
            let mut next = Vec::new();
            for (m, x) in &partial {
                for (o2, y) in rule(o) {
                    let mut m2 = m.clone();
                    m2.push(o2);
                    next.push((m2, x * y));
                }
            }
            partial = next;
        }
        for (m, x) in partial {
            add(&mut out, m, x);
        }
    }
    out
}

fn product(p: &Poly, q: &Poly) -> Poly {
    let mut out = Poly::new();
    for (m1, a) in p {
        for (m2, b) in q {
            let mut m = m1.clone();
            m.extend(m2.iter().cloned());
            add(&mut out, m, a * b);
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Norm-squared of the Fock amplitude: `|coeff|² ∏ n!`.
fn fock_weight(mono: &[Op], a: C) -> f64 {
    let mut counts: BTreeMap<&Op, usize> = BTreeMap::new();
    for o in mono {
        *counts.entry(o).or_default() += 1;
    }
    a.norm_sqr() * counts.values().map(|&n| factorial(n)).product::<f64>()
}

pub fn weight(p: &Poly) -> f64 {
    p.iter().map(|(m, &a)| fock_weight(m, a)).sum()
}

pub fn vacuum() -> Poly {
    Poly::from([(vec![], c(1.0))])
}

fn phase(k: u8) -> C {
    C::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4)
}

/// Encoded `|+_θ⟩`: `½[a1H_S + b1H_S + e^{iθ}(a1H_L − b1H_L)]`.
pub fn encoded(theta_k: u8) -> Poly {
    let e = phase(theta_k);
    let mut p = Poly::new();
    add(&mut p, vec![op("a1", 'H', 0)], c(0.5));
    add(&mut p, vec![op("b1", 'H', 0)], c(0.5));
    add(&mut p, vec![op("a1", 'H', 1)], e * 0.5);
    add(&mut p, vec![op("b1", 'H', 1)], -e * 0.5);
    p
}

/// `[α, β, τ, δ]`; `H → αH + βV` on a1, `H → τH + δV` on b1, unitary V row.
pub fn channel(p: &Poly, noise: [C; 4]) -> Poly {
    substitute(p, |o| {
        let (path, pol, t) = split(o);
        let (x, y) = match path {
            "a1" => (noise[0], noise[1]),
            "b1" => (noise[2], noise[3]),
            _ => return vec![(o.to_string(), c(1.0))],
        };
        match pol {
            'H' => vec![(op(path, 'H', t), x), (op(path, 'V', t), y)],
            _ => vec![(op(path, 'H', t), -y.conj()), (op(path, 'V', t), x.conj())],
        }
    })
}

/// Unbalanced decoder per transmission path:
/// `H → (out_h H[t] + out_h V[t+1])/√2`, `V → (out_v H[t+1] + out_v V[t])/√2`.
pub fn decode(p: &Poly) -> Poly {
    let s = c(FRAC_1_SQRT_2);
    substitute(p, |o| {
        let (path, pol, t) = split(o);
        let (oh, ov) = match path {
            "a1" => ("c1", "d1"),
            "b1" => ("m1", "n1"),
            _ => return vec![(o.to_string(), c(1.0))],
        };
        match pol {
            'H' => vec![(op(oh, 'H', t), s), (op(oh, 'V', t + 1), s)],
            _ => vec![(op(ov, 'H', t + 1), s), (op(ov, 'V', t), s)],
        }
    })
}

/// Keeps terms whose signal photons all took exactly one long arm, or that
/// carry no signal photon. Not renormalized.
pub fn select_bin(p: &Poly) -> Poly {
    p.iter()
        .filter(|(m, _)| {
            m.iter().all(|o| {
                let (path, _, t) = split(o);
                !BLOCKS.contains(&path) || t == 1
            })
        })
        .map(|(m, a)| (m.clone(), *a))
        .collect()
}

fn bell(block: &str) -> Poly {
    let mut p = Poly::new();
    for pol in ['H', 'V'] {
        add(
            &mut p,
            vec![op(&format!("k1{block}"), pol, 0), op(&format!("k2{block}"), pol, 0)],
            c(FRAC_1_SQRT_2),
        );
    }
    p
}

/// `(coefficient, signs of H1H3, H1V4, V2H3, V2V4)` for (signal, ancilla).
fn row(signal: Option<char>, ancilla: char, g: f64) -> (f64, [f64; 4]) {
    let plus = [1.0, 1.0, 1.0, 1.0];
    let minus = [1.0, -1.0, -1.0, 1.0];
    let g2 = g * g;
    match (signal, ancilla) {
        (None, 'H') => (g / 2.0, plus),
        (None, _) => (g / 2.0, minus),
        (Some('H'), 'H') => ((2.0 * g2 - 1.0) / 2.0, plus),
        (Some('H'), _) => (g2 / 2.0, minus),
        (Some(_), 'H') => (g2 / 2.0, plus),
        (Some(_), _) => ((2.0 * g2 - 1.0) / 2.0, minus),
    }
}

/// Rewrites (signal, k1, k2) of one block according to the amplification
/// table; the non-heralded part of every row goes to a private label.
fn amplify(p: &Poly, block: &str, g: f64) -> Poly {
    let k1 = format!("k1{block}");
    let k2 = format!("k2{block}");
    let det = |d: &str, pol: char| op(&format!("{d}{block}"), pol, 0);
    let coincidences = [
        (det("D1", 'H'), det("D3", 'H')),
        (det("D1", 'H'), det("D4", 'V')),
        (det("D2", 'V'), det("D3", 'H')),
        (det("D2", 'V'), det("D4", 'V')),
    ];
    let mut out = Poly::new();
    for (mono, &a) in p {
        let mut rest = Vec::new();
        let mut signal = None;
        let mut anc = None;
        for o in mono {
            let (path, pol, t) = split(o);
            if path == block {
                assert!(signal.is_none(), "two photons in one branch");
                signal = Some((pol, t));
            } else if path == k1 {
                anc = Some(pol);
            } else if path == k2 {
                assert_eq!(Some(pol), anc, "ancilla polarizations differ");
            } else {
                rest.push(o.clone());
            }
        }
        let anc = anc.expect("block without Bell pair");
        let (coef, signs) = row(signal.map(|s| s.0), anc, g);
        for ((d1, d2), sign) in coincidences.iter().zip(signs) {
            let mut m = rest.clone();
            m.push(d1.clone());
            m.push(d2.clone());
            if let Some((pol, t)) = signal {
                m.push(op(&format!("out{block}"), pol, t));
            }
            add(&mut out, m, a * coef * sign);
        }
        let left = 1.0 - 4.0 * coef * coef;
        if left > 0.0 {
            let mut m = rest;
            m.push(format!("discard{block}.{}{anc}.0", signal.map_or('0', |s| s.0)));
            add(&mut out, m, a * left.sqrt());
        }
    }
    out
}

/// Sum of the four Bell pairs and all four amplification blocks.
pub fn distill_poly(selected: &Poly, g: f64) -> Poly {
    let mut p = selected.clone();
    for b in BLOCKS {
        p = product(&p, &bell(b));
    }
    for b in BLOCKS {
        p = amplify(&p, b, g);
    }
    p
}

fn fires(pattern: &str, block: &str) -> [Op; 2] {
    let det = |d: &str, pol: char| op(&format!("{d}{block}"), pol, 0);
    match pattern {
        "D1D4" => [det("D1", 'H'), det("D4", 'V')],
        _ => [det("D2", 'V'), det("D3", 'H')],
    }
}

#[derive(Debug, Clone)]
pub struct OracleEvent {
    pub block: &'static str,
    pub pattern: &'static str,
    pub probability: f64,
    /// Unnormalized output polarization density matrix in the H/V basis.
    pub rho: [[C; 2]; 2],
}

impl OracleEvent {
    /// `⟨ψ|ρ|ψ⟩ / tr ρ` for a normalized `ψ = [h, v]`.
    pub fn fidelity(&self, psi: [C; 2]) -> f64 {
        let mut f = C::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                f += psi[i].conj() * self.rho[i][j] * psi[j];
            }
        }
        f.re / (self.rho[0][0].re + self.rho[1][1].re)
    }
}

/// Herald probability and output state of every (block, pattern).
pub fn events(distilled: &Poly) -> Vec<OracleEvent> {
    let mut out = Vec::new();
    for block in BLOCKS {
        let block_dets: Vec<String> = ["D1", "D2", "D3", "D4"].iter().map(|d| format!("{d}{block}")).collect();
        let out_path = format!("out{block}");
        for pattern in PATTERNS {
            let want = fires(pattern, block);
            let mut groups: BTreeMap<Vec<Op>, [C; 2]> = BTreeMap::new();
            let mut probability = 0.0;
            for (mono, &a) in distilled {
                let mut seen: Vec<&Op> = mono
                    .iter()
                    .filter(|o| block_dets.iter().any(|d| split(o).0 == d))
                    .collect();
                seen.sort();
                let mut expect: Vec<&Op> = want.iter().collect();
                expect.sort();
                if seen != expect {
                    continue;
                }
                probability += fock_weight(mono, a);
                let rest: Vec<Op> = mono.iter().filter(|o| split(o).0 != out_path).cloned().collect();
                if let Some(o) = mono.iter().find(|o| split(o).0 == out_path) {
                    let idx = usize::from(split(o).1 == 'V');
                    groups.entry(rest).or_default()[idx] += a;
                }
            }
            let mut rho = [[C::new(0.0, 0.0); 2]; 2];
            for v in groups.values() {
                for i in 0..2 {
                    for j in 0..2 {
                        rho[i][j] += v[i] * v[j].conj();
                    }
                }
            }
            out.push(OracleEvent {
                block,
                pattern,
                probability,
                rho,
            });
        }
    }
    out
}

/// Events for one photon carrying `|+_θ⟩` that survived the channel.
pub fn photon_events(theta_k: u8, noise: [C; 4], g: f64) -> Vec<OracleEvent> {
    events(&distill_poly(&select_bin(&decode(&channel(&encoded(theta_k), noise))), g))
}

pub fn vacuum_events(g: f64) -> Vec<OracleEvent> {
    events(&distill_poly(&vacuum(), g))
}

pub fn identity_noise() -> [C; 4] {
    [c(1.0), c(0.0), c(1.0), c(0.0)]
}

/// `F · Σ P(photon herald) + (1 − F) · Σ P(vacuum herald)`.
pub fn success_probability(g: f64, f: f64, noise: [C; 4]) -> f64 {
    let sum = |ev: Vec<OracleEvent>| ev.iter().map(|e| e.probability).sum::<f64>();
    f * sum(photon_events(0, noise, g)) + (1.0 - f) * sum(vacuum_events(g))
}

/// `[H, V]` amplitudes of `|+_θ⟩`.
pub fn plus_theta(theta_k: u8) -> [C; 2] {
    [c(FRAC_1_SQRT_2), phase(theta_k) * FRAC_1_SQRT_2]
}
