use std::cmp::Ordering;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::Wavelength;

use super::model::{Path, SwitchModel};

/// Largest search space explored exhaustively by default.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u128 = 1_000_000;

const LOCAL_SEARCH_MAX_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub name: String,
    pub lo_nm: f64,
    pub hi_nm: f64,
    /// Wavelength every channel of the role is placed on.
    pub nominal_nm: f64,
}

impl Band {
    pub fn o_band() -> Self {
        Self {
            name: "O".into(),
            lo_nm: 1260.0,
            hi_nm: 1360.0,
            nominal_nm: 1310.0,
        }
    }

    pub fn c_band() -> Self {
        Self {
            name: "C".into(),
            lo_nm: 1530.0,
            hi_nm: 1565.0,
            nominal_nm: 1550.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Wavelength::from_nm(self.lo_nm)?;
        Wavelength::from_nm(self.hi_nm)?;
        if !(self.lo_nm <= self.nominal_nm && self.nominal_nm <= self.hi_nm) {
            return Err(Error::domain(format!(
                "band {}: nominal {} nm outside [{}, {}] nm",
                self.name, self.nominal_nm, self.lo_nm, self.hi_nm
            )));
        }
        Ok(())
    }

    pub fn contains(&self, nm: f64) -> bool {
        (self.lo_nm..=self.hi_nm).contains(&nm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub classical: Band,
    pub quantum: Band,
}

impl Default for BandPlan {
    fn default() -> Self {
        Self {
            classical: Band::o_band(),
            quantum: Band::c_band(),
        }
    }
}

impl BandPlan {
    pub fn swapped(&self) -> Self {
        Self {
            classical: self.quantum.clone(),
            quantum: self.classical.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Channel {
    pub input: u32,
    pub output: u32,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    Exhaustive,
    LocalSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub classical: Vec<Channel>,
    pub quantum: Vec<Channel>,
    /// Worst aggregated leakage into any quantum channel, dB. `-inf` (JSON
    /// `null`) when there is nothing to leak.
    pub objective_db: f64,
    /// Sum of linear leakage over all classical/quantum pairs.
    pub total_leakage: f64,
    pub method: SearchMethod,
    pub search_space: u128,
}

impl Assignment {
    pub fn classical_paths(&self) -> Vec<Path> {
        self.classical.iter().map(|c| Path::new(c.input, c.output)).collect()
    }

    pub fn quantum_paths(&self) -> Vec<Path> {
        self.quantum.iter().map(|c| Path::new(c.input, c.output)).collect()
    }

    /// Ports are used once, all in range, and channels sit in their bands.
    pub fn validate(&self, model: &SwitchModel, bands: &BandPlan) -> Result<()> {
        let all: Vec<Path> = self.classical_paths().into_iter().chain(self.quantum_paths()).collect();
        super::SwitchConfig::new(model, all)?;
        for c in &self.classical {
            if !bands.classical.contains(c.wavelength_nm) {
                return Err(Error::domain(format!(
                    "classical channel at {} nm outside its band",
                    c.wavelength_nm
                )));
            }
        }
        for c in &self.quantum {
            if !bands.quantum.contains(c.wavelength_nm) {
                return Err(Error::domain(format!(
                    "quantum channel at {} nm outside its band",
                    c.wavelength_nm
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub exhaustive_limit: u128,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
        }
    }
}

fn falling(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i))
}

fn choose(n: u128, k: u128) -> u128 {
    // Exact while the running product fits; saturates beyond.
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of distinct assignments: unordered channel sets within each role,
/// each channel an (input, output) pair.
pub fn search_space_size(n_in: u32, n_out: u32, k_classical: usize, k_quantum: usize) -> u128 {
    let (n_in, n_out, kc, kq) = (n_in as u128, n_out as u128, k_classical as u128, k_quantum as u128);
    if kc + kq > n_in.min(n_out) {
        return 0;
    }
    choose(n_in, kc)
        .saturating_mul(falling(n_out, kc))
        .saturating_mul(choose(n_in - kc, kq))
        .saturating_mul(falling(n_out - kc, kq))
}

/// Linear leakage from every classical path into one quantum path.
fn aggregate(m: &SwitchModel, lambda_c: f64, classical: &[Path], q: Path) -> Result<f64> {
    classical
        .iter()
        .map(|&c| m.xtalk_db(c, q, lambda_c).map(|db| 10f64.powf(db / 10.0)))
        .sum()
}

fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone)]
struct Candidate {
    objective_db: f64,
    total: f64,
    classical: Vec<Path>,
    quantum: Vec<Path>,
}

impl Candidate {
    fn from_aggregates(classical: Vec<Path>, quantum: Vec<Path>, aggs: &[f64]) -> Self {
        let objective_db = aggs.iter().map(|&a| to_db(a)).fold(f64::NEG_INFINITY, f64::max);
        Self {
            objective_db,
            total: aggs.iter().sum(),
            classical,
            quantum,
        }
    }

    /// `classical` and `quantum` must already be sorted.
    fn score(m: &SwitchModel, lambda_c: f64, classical: Vec<Path>, quantum: Vec<Path>) -> Result<Self> {
        let aggs: Vec<f64> = quantum
            .iter()
            .map(|&q| aggregate(m, lambda_c, &classical, q))
            .collect::<Result<_>>()?;
        Ok(Self::from_aggregates(classical, quantum, &aggs))
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.objective_db
            .total_cmp(&other.objective_db)
            .then(self.total.total_cmp(&other.total))
            .then_with(|| self.classical.cmp(&other.classical))
            .then_with(|| self.quantum.cmp(&other.quantum))
    }

    fn into_assignment(self, bands: &BandPlan, method: SearchMethod, search_space: u128) -> Assignment {
        let channel = |p: &Path, nm: f64| Channel {
            input: p.input,
            output: p.output,
            wavelength_nm: nm,
        };
        Assignment {
            classical: self
                .classical
                .iter()
                .map(|p| channel(p, bands.classical.nominal_nm))
                .collect(),
            quantum: self
                .quantum
                .iter()
                .map(|p| channel(p, bands.quantum.nominal_nm))
                .collect(),
            objective_db: self.objective_db,
            total_leakage: self.total,
            method,
            search_space,
        }
    }
}

fn keep_best(best: &mut Option<Candidate>, c: Candidate) {
    if best.as_ref().is_none_or(|b| c.cmp(b) == Ordering::Less) {
        *best = Some(c);
    }
}

fn check_request(m: &SwitchModel, k_classical: usize, k_quantum: usize, bands: &BandPlan) -> Result<()> {
    bands.classical.validate()?;
    bands.quantum.validate()?;
    let ports = m.n_in.min(m.n_out) as usize;
    if k_classical + k_quantum > ports {
        return Err(Error::domain(format!(
            "{k_classical} classical + {k_quantum} quantum channels do not fit a {}x{} switch",
            m.n_in, m.n_out
        )));
    }
    Ok(())
}

/// Depth-first enumeration of canonical states with a bound on the partial
/// worst-case leakage.
struct Dfs<'a> {
    model: &'a SwitchModel,
    lambda_c: f64,
    kc: usize,
    kq: usize,
    used_in: Vec<bool>,
    used_out: Vec<bool>,
    classical: Vec<Path>,
    quantum: Vec<Path>,
    aggs: Vec<f64>,
    worst_db: Vec<f64>,
    best: Option<Candidate>,
}

impl<'a> Dfs<'a> {
    fn new(model: &'a SwitchModel, lambda_c: f64, kc: usize, kq: usize) -> Self {
        Self {
            model,
            lambda_c,
            kc,
            kq,
            used_in: vec![false; model.n_in as usize + 1],
            used_out: vec![false; (model.n_in + model.n_out) as usize + 1],
            classical: Vec::with_capacity(kc),
            quantum: Vec::with_capacity(kq),
            aggs: Vec::with_capacity(kq),
            worst_db: vec![f64::NEG_INFINITY],
            best: None,
        }
    }

    fn take(&mut self, p: Path, on: bool) {
        self.used_in[p.input as usize] = on;
        self.used_out[p.output as usize] = on;
    }

    fn free_paths(&self, from_input: u32) -> Vec<Path> {
        let m = self.model;
        (from_input..=m.n_in)
            .filter(|&i| !self.used_in[i as usize])
            .flat_map(|i| {
                m.outputs()
                    .filter(|&o| !self.used_out[o as usize])
                    .map(move |o| Path::new(i, o))
            })
            .collect()
    }

    fn place(&mut self, p: Path) -> Result<()> {
        if self.classical.len() < self.kc {
            self.take(p, true);
            self.classical.push(p);
            let next = if self.classical.len() < self.kc { p.input + 1 } else { 1 };
            self.descend(next)?;
            self.classical.pop();
            self.take(p, false);
            return Ok(());
        }
        let agg = aggregate(self.model, self.lambda_c, &self.classical, p)?;
        let worst = self
            .worst_db
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
            .max(to_db(agg));
        // Adding quantum channels never lowers the worst case.
        if self.best.as_ref().is_some_and(|b| worst > b.objective_db) {
            return Ok(());
        }
        self.take(p, true);
        self.quantum.push(p);
        self.aggs.push(agg);
        self.worst_db.push(worst);
        self.descend(p.input + 1)?;
        self.worst_db.pop();
        self.aggs.pop();
        self.quantum.pop();
        self.take(p, false);
        Ok(())
    }

    fn descend(&mut self, from_input: u32) -> Result<()> {
        if self.classical.len() == self.kc && self.quantum.len() == self.kq {
            let c = Candidate::from_aggregates(self.classical.clone(), self.quantum.clone(), &self.aggs);
            keep_best(&mut self.best, c);
            return Ok(());
        }
        for p in self.free_paths(from_input) {
            self.place(p)?;
        }
        Ok(())
    }
}

fn exhaustive(m: &SwitchModel, lambda_c: f64, kc: usize, kq: usize) -> Result<Candidate> {
    if kc + kq == 0 {
        return Ok(Candidate::from_aggregates(Vec::new(), Vec::new(), &[]));
    }
    // Split on the first channel placed; each branch is searched on its own
    // and the results are reduced under the same total order.
    let first: Vec<Path> = Dfs::new(m, lambda_c, kc, kq).free_paths(1);
    let branches: Vec<Result<Option<Candidate>>> = first
        .par_iter()
        .map(|&p| {
            let mut dfs = Dfs::new(m, lambda_c, kc, kq);
            dfs.place(p)?;
            Ok(dfs.best)
        })
        .collect();
    let mut best = None;
    for b in branches {
        if let Some(c) = b? {
            keep_best(&mut best, c);
        }
    }
    Ok(best.expect("a feasible request has at least one state"))
}

fn canonical(m: &SwitchModel, lambda_c: f64, mut classical: Vec<Path>, mut quantum: Vec<Path>) -> Result<Candidate> {
    classical.sort();
    quantum.sort();
    Candidate::score(m, lambda_c, classical, quantum)
}

/// Corner start for classical traffic, greedy quantum placement, then
/// best-improvement moves and swaps until none helps.
fn local_search(m: &SwitchModel, lambda_c: f64, kc: usize, kq: usize) -> Result<Candidate> {
    let n_in = m.n_in;
    let classical: Vec<Path> = (1..=kc as u32).map(|i| Path::new(i, n_in + i)).collect();
    let mut quantum: Vec<Path> = Vec::with_capacity(kq);
    for _ in 0..kq {
        let taken = |i: u32, o: u32| classical.iter().chain(&quantum).any(|p| p.input == i || p.output == o);
        let mut best: Option<Candidate> = None;
        for i in m.inputs() {
            for o in m.outputs() {
                if taken(i, o) {
                    continue;
                }
                let mut q = quantum.clone();
                q.push(Path::new(i, o));
                keep_best(&mut best, canonical(m, lambda_c, classical.clone(), q)?);
            }
        }
        quantum = best.expect("free ports remain while channels fit").quantum;
    }

    let mut current = canonical(m, lambda_c, classical, quantum)?;
    for _ in 0..LOCAL_SEARCH_MAX_ROUNDS {
        let mut best: Option<Candidate> = None;
        for (c, q) in neighbors(m, &current.classical, &current.quantum) {
            keep_best(&mut best, canonical(m, lambda_c, c, q)?);
        }
        match best {
            Some(b) if b.cmp(&current) == Ordering::Less => current = b,
            _ => break,
        }
    }
    Ok(current)
}

/// Single-channel moves to a free input or output, and input or output
/// swaps between any two channels.
fn neighbors(m: &SwitchModel, classical: &[Path], quantum: &[Path]) -> Vec<(Vec<Path>, Vec<Path>)> {
    let kc = classical.len();
    let all: Vec<Path> = classical.iter().chain(quantum).copied().collect();
    let split = |v: Vec<Path>| (v[..kc].to_vec(), v[kc..].to_vec());
    let free_in: Vec<u32> = m.inputs().filter(|i| all.iter().all(|p| p.input != *i)).collect();
    let free_out: Vec<u32> = m.outputs().filter(|o| all.iter().all(|p| p.output != *o)).collect();
    let mut out = Vec::new();
    for k in 0..all.len() {
        for &i in &free_in {
            let mut v = all.clone();
            v[k].input = i;
            out.push(split(v));
        }
        for &o in &free_out {
            let mut v = all.clone();
            v[k].output = o;
            out.push(split(v));
        }
        for l in k + 1..all.len() {
            let mut v = all.clone();
            (v[k].input, v[l].input) = (v[l].input, v[k].input);
            out.push(split(v));
            let mut v = all.clone();
            (v[k].output, v[l].output) = (v[l].output, v[k].output);
            out.push(split(v));
        }
    }
    out
}

/// Place `k_classical` and `k_quantum` channels to minimize the worst
/// aggregated leakage into any quantum channel.
///
/// Ties go to lower total leakage, then to the lexicographically smaller
/// (classical, quantum) path lists. Search is exhaustive up to
/// `opts.exhaustive_limit` states and a local search beyond.
pub fn optimize_assignment(
    m: &SwitchModel,
    k_classical: usize,
    k_quantum: usize,
    bands: &BandPlan,
    opts: &PlanOptions,
) -> Result<Assignment> {
    check_request(m, k_classical, k_quantum, bands)?;
    let space = search_space_size(m.n_in, m.n_out, k_classical, k_quantum);
    let lambda_c = bands.classical.nominal_nm;
    let (best, method) = if space <= opts.exhaustive_limit {
        (
            exhaustive(m, lambda_c, k_classical, k_quantum)?,
            SearchMethod::Exhaustive,
        )
    } else {
        (
            local_search(m, lambda_c, k_classical, k_quantum)?,
            SearchMethod::LocalSearch,
        )
    };
    Ok(best.into_assignment(bands, method, space))
}

/// Plain enumeration of every assignment for small instances; the reference
/// answer for [`optimize_assignment`].
pub fn brute_force_assignment(
    m: &SwitchModel,
    k_classical: usize,
    k_quantum: usize,
    bands: &BandPlan,
) -> Result<Assignment> {
    check_request(m, k_classical, k_quantum, bands)?;
    let space = search_space_size(m.n_in, m.n_out, k_classical, k_quantum);
    if space > DEFAULT_EXHAUSTIVE_LIMIT {
        return Err(Error::Resource(format!(
            "brute force refuses {space} states (limit {DEFAULT_EXHAUSTIVE_LIMIT})"
        )));
    }
    let lambda_c = bands.classical.nominal_nm;
    let mut best = None;
    for c_in in m.inputs().combinations(k_classical) {
        for c_out in m.outputs().permutations(k_classical) {
            let classical: Vec<Path> = c_in.iter().zip(&c_out).map(|(&i, &o)| Path::new(i, o)).collect();
            let rest_in: Vec<u32> = m.inputs().filter(|i| !c_in.contains(i)).collect();
            let rest_out: Vec<u32> = m.outputs().filter(|o| !c_out.contains(o)).collect();
            for q_in in rest_in.iter().copied().combinations(k_quantum) {
                for q_out in rest_out.iter().copied().permutations(k_quantum) {
                    let quantum: Vec<Path> = q_in.iter().zip(&q_out).map(|(&i, &o)| Path::new(i, o)).collect();
                    keep_best(&mut best, Candidate::score(m, lambda_c, classical.clone(), quantum)?);
                }
            }
        }
    }
    Ok(best
        .expect("a feasible request has at least one state")
        .into_assignment(bands, SearchMethod::Exhaustive, space))
}
