//! Empirical deviation statistics of the real-time reports.
//!
//! For load `i`, the days partition into classes by the others' report
//! profile `eta`. The joint statistic of a class with `M` days and own-type
//! counts `c` is `max_nu |c_nu - theta_hat(nu) M| / L`; it only changes on
//! days that fall into the class, so each load keeps a lazy max-heap over
//! its classes.
//!
//! With many loads almost every `eta` occurs once. Such singleton classes
//! are not stored: their statistic depends only on the own type reported
//! that day, so a count per type suffices. A class is materialized on its
//! second day. Profiles are identified by Zobrist hashes
//! `H = sum_j Z[j][type_j]` (wrapping), so `eta` for load `i` hashes to
//! `H - Z[i][type_i]`, and a previous day shares load `i`'s `eta` iff its
//! full hash is `H - Z[i][type_i] + Z[i][b]` for its own type `b`.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{JointTypeModel, PenaltySchedule, TypeIdx};

const ZOBRIST_SEED: u64 = 0x7a0b_2157_d15c_a11e;
/// Largest difference table kept for the many-load lookup path.
const DIFF_TABLE_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone)]
struct Class {
    counts: Vec<u32>,
    total: u32,
    version: u32,
    score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    score: f64,
    key: u64,
    version: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.key.cmp(&other.key))
            .then(self.version.cmp(&other.version))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Default)]
struct JointStats {
    classes: HashMap<u64, Class>,
    heap: BinaryHeap<HeapEntry>,
}

impl JointStats {
    fn top(&mut self) -> f64 {
        while let Some(e) = self.heap.peek() {
            match self.classes.get(&e.key) {
                Some(c) if c.version == e.version => return e.score,
                _ => {
                    self.heap.pop();
                }
            }
        }
        0.0
    }

    fn compact(&mut self) {
        if self.heap.len() > 2 * self.classes.len() + 64 {
            self.heap = self
                .classes
                .iter()
                .map(|(&key, c)| HeapEntry {
                    score: c.score,
                    key,
                    version: c.version,
                })
                .collect();
        }
    }
}

/// Counts and statistics behind the penalty event `E_i(l)`.
#[derive(Debug, Clone)]
pub struct DeviationTracker {
    n: usize,
    k: usize,
    days: u64,
    /// `theta_hat[i * k + nu]`.
    reported: Vec<f64>,
    marginal: Vec<u32>,
    /// Singleton classes per own type.
    singles: Vec<u32>,
    /// Joint statistic numerator of a singleton class with own type `nu`.
    single_score: Vec<f64>,
    zobrist: Vec<u64>,
    joint: Vec<JointStats>,
    seen: HashSet<u64>,
    unique: Vec<u64>,
    /// `Z[i][b] - Z[i][a]` to `(i, a, b)`.
    diffs: Option<HashMap<u64, (u32, u16, u16)>>,
    /// Scratch: matched previous own type per load.
    matched: Vec<Option<u16>>,
    top: Vec<f64>,
}

fn class_score(counts: &[u32], total: u32, theta: &[f64]) -> f64 {
    counts
        .iter()
        .zip(theta)
        .map(|(&c, &p)| (c as f64 - p * total as f64).abs())
        .fold(0.0, f64::max)
}

impl DeviationTracker {
    /// A tracker for loads reporting `reported` day-ahead.
    pub fn new(reported: &JointTypeModel) -> Self {
        let n = reported.n_loads();
        let k = reported.per_load().first().map_or(0, |d| d.len());
        let mut theta = Vec::with_capacity(n * k);
        for d in reported.per_load() {
            theta.extend_from_slice(d.probs());
        }
        let mut single_score = Vec::with_capacity(n * k);
        for i in 0..n {
            let row = &theta[i * k..(i + 1) * k];
            for nu in 0..k {
                let mut counts = vec![0u32; k];
                counts[nu] = 1;
                single_score.push(class_score(&counts, 1, row));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ZOBRIST_SEED);
        let zobrist: Vec<u64> = (0..n * k).map(|_| rng.next_u64()).collect();
        let diffs = (n * k * k.saturating_sub(1) <= DIFF_TABLE_LIMIT && n > 1).then(|| {
            let mut m = HashMap::with_capacity(n * k * k);
            for i in 0..n {
                for a in 0..k {
                    for b in 0..k {
                        if a != b {
                            let d = zobrist[i * k + b].wrapping_sub(zobrist[i * k + a]);
                            m.insert(d, (i as u32, a as u16, b as u16));
                        }
                    }
                }
            }
            m
        });
        Self {
            n,
            k,
            days: 0,
            reported: theta,
            marginal: vec![0; n * k],
            singles: vec![0; n * k],
            single_score,
            zobrist,
            joint: vec![JointStats::default(); n],
            seen: HashSet::new(),
            unique: Vec::new(),
            diffs,
            matched: vec![None; n],
            top: vec![0.0; n],
        }
    }

    pub fn n_loads(&self) -> usize {
        self.n
    }

    /// Number of days incorporated, `L`.
    pub fn days(&self) -> u64 {
        self.days
    }

    /// Incorporates one day's reported profile.
    pub fn update(&mut self, profile: &[TypeIdx]) -> Result<()> {
        if profile.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "profile has {} entries for {} loads",
                profile.len(),
                self.n
            )));
        }
        if let Some(t) = profile.iter().find(|t| t.get() >= self.k) {
            return Err(Error::UnknownType(format!("type index {}", t.0)));
        }
        let k = self.k;
        let h = profile
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, t)| acc.wrapping_add(self.zobrist[i * k + t.get()]));

        // previous days sharing each load's eta
        self.matched.iter_mut().for_each(|m| *m = None);
        let scan_unique = self.diffs.is_some() && self.unique.len() < self.n * k;
        if scan_unique {
            let diffs = self.diffs.as_ref().expect("checked");
            if self.seen.contains(&h) {
                for (m, t) in self.matched.iter_mut().zip(profile) {
                    *m = Some(t.0);
                }
            }
            for &prev in &self.unique {
                let d = prev.wrapping_sub(h);
                if let Some(&(i, a, b)) = diffs.get(&d) {
                    if profile[i as usize].0 == a {
                        self.matched[i as usize] = Some(b);
                    }
                }
            }
        } else {
            for (i, t) in profile.iter().enumerate() {
                let eta = h.wrapping_sub(self.zobrist[i * k + t.get()]);
                if self.joint[i].classes.contains_key(&eta) {
                    continue;
                }
                self.matched[i] = (0..k)
                    .find(|&b| self.seen.contains(&eta.wrapping_add(self.zobrist[i * k + b])))
                    .map(|b| b as u16);
            }
        }

        for (i, t) in profile.iter().enumerate() {
            let nu = t.get();
            self.marginal[i * k + nu] += 1;
            let eta = h.wrapping_sub(self.zobrist[i * k + nu]);
            let theta = &self.reported[i * k..(i + 1) * k];
            let stats = &mut self.joint[i];
            let class = match stats.classes.entry(eta) {
                Entry::Occupied(e) => {
                    let c = e.into_mut();
                    c.counts[nu] += 1;
                    c.total += 1;
                    c.version += 1;
                    Some(c)
                }
                Entry::Vacant(e) => match self.matched[i] {
                    Some(b) => {
                        // second day of a singleton class: materialize it
                        self.singles[i * k + b as usize] -= 1;
                        let mut counts = vec![0u32; k];
                        counts[b as usize] += 1;
                        counts[nu] += 1;
                        Some(e.insert(Class {
                            counts,
                            total: 2,
                            version: 0,
                            score: 0.0,
                        }))
                    }
                    None => {
                        self.singles[i * k + nu] += 1;
                        None
                    }
                },
            };
            if let Some(c) = class {
                c.score = class_score(&c.counts, c.total, theta);
                stats.heap.push(HeapEntry {
                    score: c.score,
                    key: eta,
                    version: c.version,
                });
                stats.compact();
            }
        }

        if self.seen.insert(h) {
            self.unique.push(h);
        }
        self.days += 1;
        for i in 0..self.n {
            self.top[i] = self.joint[i].top();
        }
        Ok(())
    }

    pub fn marginal_count(&self, i: usize, nu: TypeIdx) -> u32 {
        self.marginal[i * self.k + nu.get()]
    }

    /// `f_{i,nu}(L)`.
    pub fn f(&self, i: usize, nu: TypeIdx) -> f64 {
        if self.days == 0 {
            return 0.0;
        }
        self.marginal_count(i, nu) as f64 / self.days as f64 - self.reported[i * self.k + nu.get()]
    }

    pub fn sup_f(&self, i: usize) -> f64 {
        (0..self.k)
            .map(|nu| self.f(i, TypeIdx::from(nu)).abs())
            .fold(0.0, f64::max)
    }

    /// `sup over (nu, observed eta) of |h_{i,nu,eta}(L)|`.
    pub fn sup_h(&self, i: usize) -> f64 {
        if self.days == 0 {
            return 0.0;
        }
        let k = self.k;
        let singles = (0..k)
            .filter(|&nu| self.singles[i * k + nu] > 0)
            .map(|nu| self.single_score[i * k + nu])
            .fold(0.0, f64::max);
        singles.max(self.top[i]) / self.days as f64
    }

    fn eta_hash(&self, i: usize, others: &[TypeIdx]) -> u64 {
        let k = self.k;
        others
            .iter()
            .enumerate()
            .map(|(j, t)| if j < i { j } else { j + 1 } * k + t.get())
            .fold(0u64, |acc, idx| acc.wrapping_add(self.zobrist[idx]))
    }

    /// `(N_i(nu, eta) for every nu, M_{-i}(eta))`, where `others` lists the
    /// other loads' types in load order.
    pub fn joint_counts(&self, i: usize, others: &[TypeIdx]) -> (Vec<u32>, u32) {
        let k = self.k;
        let eta = self.eta_hash(i, others);
        if let Some(c) = self.joint[i].classes.get(&eta) {
            return (c.counts.clone(), c.total);
        }
        let mut counts = vec![0u32; k];
        for b in 0..k {
            if self.seen.contains(&eta.wrapping_add(self.zobrist[i * k + b])) {
                counts[b] = 1;
                return (counts, 1);
            }
        }
        (counts, 0)
    }

    /// `h_{i,nu,eta}(L)`.
    pub fn h(&self, i: usize, nu: TypeIdx, others: &[TypeIdx]) -> f64 {
        if self.days == 0 {
            return 0.0;
        }
        let (counts, total) = self.joint_counts(i, others);
        (counts[nu.get()] as f64 - self.reported[i * self.k + nu.get()] * total as f64) / self.days as f64
    }

    /// `E_i(l)` at the current day `l = L`.
    pub fn penalty_event(&self, i: usize, schedule: &PenaltySchedule) -> bool {
        if self.days == 0 {
            return false;
        }
        let r = schedule.threshold(self.days);
        self.sup_f(i) >= r || self.sup_h(i) >= r
    }

    /// Number of materialized (multi-day) classes, for diagnostics.
    pub fn stored_classes(&self) -> usize {
        self.joint.iter().map(|j| j.classes.len()).sum()
    }
}
