//! Generalized Ma-Dasgupta-Hu decimation of a periodic spin-S chain.
//!
//! Active sites form a circular doubly-linked list over the original lattice
//! indices. The bond to the right of an active site lives in that site's
//! slot. Bond strengths are kept as natural logarithms: at large `N` the
//! renormalized couplings span far more than the exponent range of `f64`.
//!
//! The strongest bond is found through a max-heap with lazy deletion: each
//! slot carries a stamp that is bumped whenever its bond is rewritten, and
//! heap entries whose slot is inactive or whose stamp is stale are discarded
//! when popped.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which Hamiltonian is being decimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Random exchange Heisenberg antiferromagnet with spin `two_s / 2`.
    Heisenberg { two_s: u32 },
    /// Spin-1 chain with biquadratic `(S_i . S_j)^2` exchange.
    BiquadraticSpin1,
}

impl ModelKind {
    pub fn heisenberg(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::InvalidParameter("two_s must be positive".into()));
        }
        Ok(ModelKind::Heisenberg { two_s })
    }

    pub fn two_s(&self) -> u32 {
        match *self {
            ModelKind::Heisenberg { two_s } => two_s,
            ModelKind::BiquadraticSpin1 => 2,
        }
    }

    pub fn spin(&self) -> f64 {
        self.two_s() as f64 / 2.0
    }

    /// Local Hilbert space dimension `2S + 1`.
    pub fn dim(&self) -> u32 {
        self.two_s() + 1
    }

    /// Only spin-1/2, 1 and 3/2 Heisenberg chains and the spin-1
    /// biquadratic chain have been checked against published results.
    pub fn is_validated(&self) -> bool {
        match *self {
            ModelKind::Heisenberg { two_s } => (1..=3).contains(&two_s),
            ModelKind::BiquadraticSpin1 => true,
        }
    }

    /// Second-order prefactor `f` in `J' = f J1 J2 / Omega`.
    pub fn prefactor(&self) -> f64 {
        match *self {
            ModelKind::Heisenberg { .. } => {
                let s = self.spin();
                2.0 / 3.0 * s * (s + 1.0)
            }
            ModelKind::BiquadraticSpin1 => 2.0 / 9.0,
        }
    }

    /// `3 / [2 S (S + 1)]` when a trio can ever be selected, `None` otherwise.
    pub fn trio_threshold_ratio(&self) -> Option<f64> {
        match *self {
            ModelKind::Heisenberg { .. } => {
                let s = self.spin();
                let r = 3.0 / (2.0 * s * (s + 1.0));
                (r < 1.0).then_some(r)
            }
            ModelKind::BiquadraticSpin1 => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Heisenberg { .. } => "heisenberg",
            ModelKind::BiquadraticSpin1 => "biquadratic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Heisenberg { two_s } => write!(f, "heisenberg(2S={two_s})"),
            ModelKind::BiquadraticSpin1 => write!(f, "biquadratic(S=1)"),
        }
    }
}

/// Effective coupling between the outer neighbors of a decimated singlet.
pub fn renormalized_coupling(model: ModelKind, j1: f64, j2: f64, omega: f64) -> Result<f64> {
    if !(j1 > 0.0 && j2 > 0.0 && omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "couplings must be positive (j1 = {j1}, j2 = {j2}, omega = {omega})"
        )));
    }
    Ok(model.prefactor() * j1 * j2 / omega)
}

/// True when the stronger neighbor of `omega` exceeds `3 Omega / [2S(S+1)]`,
/// i.e. the trio of spins must be solved instead of the pair.
pub fn trio_condition(model: ModelKind, j_max_neighbor: f64, omega: f64) -> bool {
    match model.trio_threshold_ratio() {
        Some(r) => j_max_neighbor > r * omega,
        None => false,
    }
}

/// Multiplicative factors applied to the outer couplings of a merged trio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrioCoefficients {
    pub kappa_left: f64,
    pub kappa_right: f64,
}

impl Default for TrioCoefficients {
    fn default() -> Self {
        Self {
            kappa_left: 1.0,
            kappa_right: 1.0,
        }
    }
}

impl TrioCoefficients {
    pub fn validate(&self) -> Result<()> {
        if self.kappa_left > 0.0 && self.kappa_right > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "trio coefficients must be positive, got ({}, {})",
                self.kappa_left, self.kappa_right
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecimationEvent {
    Singlet {
        a: u32,
        b: u32,
    },
    TrioMerge {
        left: u32,
        mid: u32,
        right: u32,
        surviving: u32,
    },
}

impl DecimationEvent {
    pub fn is_trio(&self) -> bool {
        matches!(self, DecimationEvent::TrioMerge { .. })
    }
}

impl fmt::Display for DecimationEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DecimationEvent::Singlet { a, b } => write!(f, "S {a} {b}"),
            DecimationEvent::TrioMerge {
                left,
                mid,
                right,
                surviving,
            } => write!(f, "T {left} {mid} {right} {surviving}"),
        }
    }
}

impl FromStr for DecimationEvent {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let mut it = line.split_ascii_whitespace();
        let tag = it.next().ok_or("empty event line")?;
        let nums = it
            .map(|t| t.parse::<u32>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        match (tag, nums.as_slice()) {
            ("S", &[a, b]) => Ok(DecimationEvent::Singlet { a, b }),
            ("T", &[left, mid, right, surviving]) => Ok(DecimationEvent::TrioMerge {
                left,
                mid,
                right,
                surviving,
            }),
            _ => Err(format!("unrecognized event line {line:?}")),
        }
    }
}

/// Writes one ASCII line per event.
pub fn write_event_log<W: Write>(events: &[DecimationEvent], mut out: W) -> io::Result<()> {
    for e in events {
        writeln!(out, "{e}")?;
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<DecimationEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<event log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(
            line.parse()
                .map_err(|msg| Error::Config { line: i + 1, msg })?,
        );
    }
    Ok(events)
}

/// The strongest active bond, identified by its left endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub left_site: u32,
    pub ln_strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    ln_j: f64,
    site: u32,
    stamp: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Max-heap on strength; among equal strengths the smallest position wins.
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln_j
            .total_cmp(&other.ln_j)
            .then_with(|| other.site.cmp(&self.site))
            .then_with(|| other.stamp.cmp(&self.stamp))
    }
}

/// Active sites of a periodic chain under decimation.
#[derive(Debug, Clone)]
pub struct ChainState {
    model: ModelKind,
    kappa: TrioCoefficients,
    left: Vec<u32>,
    right: Vec<u32>,
    ln_j: Vec<f64>,
    stamp: Vec<u32>,
    active: Vec<bool>,
    n_active: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl ChainState {
    /// `couplings[i]` joins sites `i` and `i + 1 (mod N)`.
    pub fn new(model: ModelKind, couplings: &[f64], kappa: TrioCoefficients) -> Result<Self> {
        let n = couplings.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "chain needs at least 2 sites, got {n}"
            )));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidParameter("chain too long".into()));
        }
        kappa.validate()?;
        if let Some((i, j)) = couplings
            .iter()
            .enumerate()
            .find(|(_, j)| !(**j > 0.0 && j.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "coupling {i} must be positive and finite, got {j}"
            )));
        }
        let nn = n as u32;
        let ln_j: Vec<f64> = couplings.iter().map(|j| j.ln()).collect();
        let heap = ln_j
            .iter()
            .enumerate()
            .map(|(i, &l)| HeapEntry {
                ln_j: l,
                site: i as u32,
                stamp: 0,
            })
            .collect::<Vec<_>>()
            .into();
        Ok(Self {
            model,
            kappa,
            left: (0..nn).map(|i| (i + nn - 1) % nn).collect(),
            right: (0..nn).map(|i| (i + 1) % nn).collect(),
            ln_j,
            stamp: vec![0; n],
            active: vec![true; n],
            n_active: n,
            heap,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn n_sites(&self) -> usize {
        self.active.len()
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    pub fn is_active(&self, site: u32) -> bool {
        self.active[site as usize]
    }

    pub fn right_of(&self, site: u32) -> u32 {
        self.right[site as usize]
    }

    pub fn left_of(&self, site: u32) -> u32 {
        self.left[site as usize]
    }

    /// Coupling of the bond from `site` to its right neighbor.
    pub fn coupling_right_of(&self, site: u32) -> f64 {
        self.ln_j[site as usize].exp()
    }

    pub fn ln_coupling_right_of(&self, site: u32) -> f64 {
        self.ln_j[site as usize]
    }

    fn set_bond(&mut self, site: u32, ln_j: f64) {
        let s = site as usize;
        self.ln_j[s] = ln_j;
        self.stamp[s] = self.stamp[s].wrapping_add(1);
        self.heap.push(HeapEntry {
            ln_j,
            site,
            stamp: self.stamp[s],
        });
    }

    fn remove(&mut self, site: u32) {
        self.active[site as usize] = false;
        self.n_active -= 1;
    }

    /// Removes and returns the strongest live bond, discarding stale entries.
    pub fn pop_strongest(&mut self) -> Option<Bond> {
        if self.n_active < 2 {
            return None;
        }
        while let Some(e) = self.heap.pop() {
            let s = e.site as usize;
            if self.active[s] && self.stamp[s] == e.stamp {
                return Some(Bond {
                    left_site: e.site,
                    ln_strength: e.ln_j,
                });
            }
        }
        None
    }

    /// Side of the stronger neighbor bond of `bond`. Exact ties go to the
    /// bond with the smaller position.
    pub fn stronger_neighbor(&self, bond: Bond) -> (Side, f64) {
        let a = bond.left_site;
        let b = self.right[a as usize];
        let l = self.left[a as usize];
        let (jl, jr) = (self.ln_j[l as usize], self.ln_j[b as usize]);
        match jl.total_cmp(&jr) {
            Ordering::Greater => (Side::Left, jl),
            Ordering::Less => (Side::Right, jr),
            Ordering::Equal if l <= b => (Side::Left, jl),
            Ordering::Equal => (Side::Right, jr),
        }
    }

    /// Log-space form of [`trio_condition`] for `bond` in the current chain.
    pub fn wants_trio(&self, bond: Bond) -> Option<Side> {
        if self.n_active < 3 {
            return None;
        }
        let ratio = self.model.trio_threshold_ratio()?;
        let (side, ln_j1) = self.stronger_neighbor(bond);
        (ln_j1 > ratio.ln() + bond.ln_strength).then_some(side)
    }

    /// Forms a singlet on `bond` and links its outer neighbors.
    ///
    /// Returns the event and, when a new bond was created, its log-strength.
    pub fn decimate_pair(&mut self, bond: Bond) -> (DecimationEvent, Option<f64>) {
        assert!(self.n_active >= 2, "decimate_pair needs two active sites");
        let a = bond.left_site;
        let b = self.right[a as usize];
        let event = DecimationEvent::Singlet { a, b };
        if self.n_active <= 3 {
            // The remaining site, if any, is left alone.
            self.remove(a);
            self.remove(b);
            return (event, None);
        }
        let l = self.left[a as usize];
        let r = self.right[b as usize];
        let new_ln = self.model.prefactor().ln() + self.ln_j[l as usize] + self.ln_j[b as usize]
            - bond.ln_strength;
        self.remove(a);
        self.remove(b);
        self.right[l as usize] = r;
        self.left[r as usize] = l;
        self.set_bond(l, new_ln);
        (event, Some(new_ln))
    }

    /// Replaces the three spins joined by `bond` and its stronger neighbor
    /// on `side` by one effective spin sitting at the middle position.
    pub fn decimate_trio(&mut self, bond: Bond, side: Side) -> DecimationEvent {
        assert!(
            self.model.trio_threshold_ratio().is_some(),
            "trio decimation requires a Heisenberg chain with S >= 1"
        );
        assert!(
            self.n_active >= 3,
            "trio decimation needs three active sites"
        );
        let a = bond.left_site;
        let b = self.right[a as usize];
        let (x, y, z) = match side {
            Side::Left => (self.left[a as usize], a, b),
            Side::Right => (a, b, self.right[b as usize]),
        };
        let event = DecimationEvent::TrioMerge {
            left: x,
            mid: y,
            right: z,
            surviving: y,
        };
        if self.n_active == 3 {
            self.remove(x);
            self.remove(z);
            self.left[y as usize] = y;
            self.right[y as usize] = y;
            return event;
        }
        let p = self.left[x as usize];
        let s = self.right[z as usize];
        let ln_left = self.kappa.kappa_left.ln() + self.ln_j[p as usize];
        let ln_right = self.kappa.kappa_right.ln() + self.ln_j[z as usize];
        self.remove(x);
        self.remove(z);
        self.right[p as usize] = y;
        self.left[y as usize] = p;
        self.right[y as usize] = s;
        self.left[s as usize] = y;
        self.set_bond(p, ln_left);
        self.set_bond(y, ln_right);
        event
    }

    /// Performs one decimation step, or returns `None` once exhausted.
    pub fn step(&mut self) -> Option<DecimationEvent> {
        self.step_traced().map(|(e, _)| e)
    }

    fn step_traced(&mut self) -> Option<(DecimationEvent, StepTrace)> {
        let bond = self.pop_strongest()?;
        Some(match self.wants_trio(bond) {
            Some(side) => (self.decimate_trio(bond, side), StepTrace::Trio),
            None => {
                let (e, new_ln) = self.decimate_pair(bond);
                (
                    e,
                    StepTrace::Singlet {
                        ln_omega: bond.ln_strength,
                        new_ln,
                    },
                )
            }
        })
    }

    /// Full traversal of the active cycle.
    pub fn check_links(&self) -> Result<()> {
        let Some(start) = self.active.iter().position(|&a| a) else {
            return if self.n_active == 0 {
                Ok(())
            } else {
                Err(Error::Invariant(format!(
                    "n_active = {} but no site is active",
                    self.n_active
                )))
            };
        };
        let mut cur = start as u32;
        for step in 0..self.n_active {
            let c = cur as usize;
            if !self.active[c] {
                return Err(Error::Invariant(format!(
                    "inactive site {cur} linked at step {step}"
                )));
            }
            if !self.ln_j[c].is_finite() {
                return Err(Error::Invariant(format!("non-finite bond at site {cur}")));
            }
            let r = self.right[c];
            if self.left[r as usize] != cur {
                return Err(Error::Invariant(format!("asymmetric link {cur} -> {r}")));
            }
            cur = r;
            if cur as usize == start && step + 1 < self.n_active {
                return Err(Error::Invariant(format!(
                    "cycle closed after {} of {} sites",
                    step + 1,
                    self.n_active
                )));
            }
        }
        if cur as usize != start {
            return Err(Error::Invariant("links do not close into a cycle".into()));
        }
        Ok(())
    }
}

enum StepTrace {
    Singlet { ln_omega: f64, new_ln: Option<f64> },
    Trio,
}

/// Complete event history of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n_sites: usize,
    pub events: Vec<DecimationEvent>,
    /// Sites left undecimated at termination (0 or 1).
    pub residual: usize,
}

impl RunRecord {
    pub fn trio_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_trio()).count()
    }

    pub fn singlet_count(&self) -> usize {
        self.events.len() - self.trio_count()
    }
}

fn validate_run_input(couplings: &[f64]) -> Result<()> {
    if couplings.len() < 2 || !couplings.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "chain length must be even and positive, got {}",
            couplings.len()
        )));
    }
    Ok(())
}

/// Decimates a configuration until at most one site remains.
pub fn run_configuration(
    model: ModelKind,
    couplings: &[f64],
    kappa: TrioCoefficients,
) -> Result<RunRecord> {
    validate_run_input(couplings)?;
    let mut chain = ChainState::new(model, couplings, kappa)?;
    let mut events = Vec::with_capacity(couplings.len() / 2);
    while let Some(e) = chain.step() {
        events.push(e);
    }
    Ok(RunRecord {
        n_sites: couplings.len(),
        events,
        residual: chain.n_active(),
    })
}

/// Like [`run_configuration`] but verifies the engine invariants after every
/// step: cycle integrity by full traversal, energy-scale monotonicity on the
/// singlet path, no trio for models that forbid it, and site conservation.
pub fn run_configuration_checked(
    model: ModelKind,
    couplings: &[f64],
    kappa: TrioCoefficients,
) -> Result<RunRecord> {
    validate_run_input(couplings)?;
    let n = couplings.len();
    let mut chain = ChainState::new(model, couplings, kappa)?;
    chain.check_links()?;
    let mut events = Vec::with_capacity(n / 2);
    let mut removed = 0usize;
    while let Some((event, trace)) = chain.step_traced() {
        match trace {
            StepTrace::Singlet { ln_omega, new_ln } => {
                removed += 2;
                if let Some(new_ln) = new_ln {
                    if new_ln >= ln_omega {
                        return Err(Error::Invariant(format!(
                            "renormalized coupling e^{new_ln} not below Omega e^{ln_omega} at {event}"
                        )));
                    }
                }
            }
            StepTrace::Trio => {
                removed += 2;
                if model.trio_threshold_ratio().is_none() {
                    return Err(Error::Invariant(format!("trio event {event} for {model}")));
                }
            }
        }
        if removed + chain.n_active() != n {
            return Err(Error::Invariant(format!(
                "site count not conserved: removed {removed}, active {}, N {n}",
                chain.n_active()
            )));
        }
        chain.check_links()?;
        events.push(event);
    }
    if chain.n_active() > 1 {
        return Err(Error::Invariant(format!(
            "run stopped with {} active sites",
            chain.n_active()
        )));
    }
    let mut seen = vec![false; n];
    for e in &events {
        if let DecimationEvent::Singlet { a, b } = *e {
            for p in [a, b] {
                if std::mem::replace(&mut seen[p as usize], true) {
                    return Err(Error::Invariant(format!("site {p} in two singlets")));
                }
            }
        }
    }
    Ok(RunRecord {
        n_sites: n,
        events,
        residual: chain.n_active(),
    })
}
