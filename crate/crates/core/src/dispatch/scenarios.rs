//! Scenario sets for the day-ahead expectation.
//!
//! Loads with identical reported distributions are exchangeable, so a
//! scenario only needs the number of loads of each type within each group.
//! Exact enumeration walks all such count profiles with multinomial
//! weights; Monte Carlo draws per-load types and keeps their counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::config::ENUMERATION_LIMIT;
use crate::model::{ExpectationMethod, JointTypeModel, NetDemandModel, TypeIdx};

#[derive(Debug, Clone)]
pub(crate) struct Profile {
    pub weight: f64,
    /// Group-major counts: `counts[k * n_types + t]`.
    pub counts: Vec<u32>,
    /// Counts summed over groups.
    pub totals: Vec<u32>,
    /// Net demand of a sampled scenario; unused for enumerated profiles.
    pub z: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum ZSource {
    /// Every profile is combined with every `(z, weight)` node.
    Shared(Vec<(f64, f64)>),
    /// Each profile carries its own sampled `z`.
    PerProfile,
}

#[derive(Debug, Clone)]
pub(crate) struct ScenarioSet {
    pub n_types: usize,
    /// Original load indices of each group's members.
    pub groups: Vec<Vec<usize>>,
    pub profiles: Vec<Profile>,
    pub z: ZSource,
}

impl ScenarioSet {
    pub fn is_sampled(&self) -> bool {
        matches!(self.z, ZSource::PerProfile)
    }

    /// Builds the scenario set for `model`, optionally with load `exclude`
    /// removed. Monte Carlo sets still draw the excluded load's type (and
    /// discard it) so that sets built with the same seed share their
    /// remaining draws.
    pub fn build(
        model: &JointTypeModel,
        exclude: Option<usize>,
        n_types: usize,
        net_demand: &NetDemandModel,
        method: &ExpectationMethod,
    ) -> Result<Self> {
        let full = model.groups();
        let mut groups = Vec::new();
        let mut dists = Vec::new();
        for g in &full {
            let members: Vec<usize> = g.members.iter().copied().filter(|&m| Some(m) != exclude).collect();
            if !members.is_empty() {
                groups.push(members);
                dists.push(g.distribution.clone());
            }
        }
        match method {
            ExpectationMethod::Enumerate => {
                let profiles = enumerate(&groups, &dists, n_types)?;
                Ok(Self {
                    n_types,
                    groups,
                    profiles,
                    z: ZSource::Shared(net_demand.nodes()),
                })
            }
            ExpectationMethod::MonteCarlo { samples, seed } => {
                let mut group_of = vec![usize::MAX; model.n_loads()];
                for (k, members) in groups.iter().enumerate() {
                    for &m in members {
                        group_of[m] = k;
                    }
                }
                let samplers: Vec<_> = full.iter().map(|g| g.distribution.sampler()).collect();
                let mut full_of = vec![0usize; model.n_loads()];
                for (k, g) in full.iter().enumerate() {
                    for &m in &g.members {
                        full_of[m] = k;
                    }
                }
                let demand = net_demand.sampler();
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
                let width = groups.len() * n_types;
                let weight = 1.0 / *samples as f64;
                let mut profiles = Vec::with_capacity(*samples);
                for _ in 0..*samples {
                    let z = demand.sample(&mut rng);
                    let mut counts = vec![0u32; width];
                    let mut totals = vec![0u32; n_types];
                    for (j, &f) in full_of.iter().enumerate() {
                        let t: TypeIdx = samplers[f].sample(&mut rng);
                        let k = group_of[j];
                        if k != usize::MAX {
                            counts[k * n_types + t.get()] += 1;
                            totals[t.get()] += 1;
                        }
                    }
                    profiles.push(Profile {
                        weight,
                        counts,
                        totals,
                        z,
                    });
                }
                Ok(Self {
                    n_types,
                    groups,
                    profiles,
                    z: ZSource::PerProfile,
                })
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn enumerate(groups: &[Vec<usize>], dists: &[crate::model::TypeDistribution], n_types: usize) -> Result<Vec<Profile>> {
    let count: f64 = groups
        .iter()
        .zip(dists)
        .map(|(m, d)| {
            let k = d.support().len().max(1);
            binomial(m.len() + k - 1, k - 1)
        })
        .product();
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "type-profile enumeration",
            count,
            limit: ENUMERATION_LIMIT,
        });
    }

    let max_m = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut ln_fact = vec![0.0f64; max_m + 1];
    for k in 1..=max_m {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }

    let width = groups.len() * n_types;
    let mut profiles = vec![Profile {
        weight: 1.0,
        counts: vec![0; width],
        totals: vec![0; n_types],
        z: 0.0,
    }];
    for (k, (members, dist)) in groups.iter().zip(dists).enumerate() {
        let support = dist.support();
        let m = members.len();
        let mut comps = Vec::new();
        compositions(m, support.len(), &mut vec![0; support.len()], 0, &mut comps);
        let mut next = Vec::with_capacity(profiles.len() * comps.len());
        for comp in &comps {
            let mut lw = ln_fact[m];
            for (&c, &t) in comp.iter().zip(&support) {
                lw += c as f64 * dist.prob(t).ln() - ln_fact[c as usize];
            }
            let w = lw.exp();
            for p in &profiles {
                let mut q = p.clone();
                q.weight *= w;
                for (&c, &t) in comp.iter().zip(&support) {
                    q.counts[k * n_types + t.get()] += c;
                    q.totals[t.get()] += c;
                }
                next.push(q);
            }
        }
        profiles = next;
    }
    Ok(profiles)
}

/// All vectors of `parts` nonnegative integers summing to `total`.
fn compositions(total: usize, parts: usize, cur: &mut Vec<u32>, pos: usize, out: &mut Vec<Vec<u32>>) {
    if parts == 0 {
        return;
    }
    if pos + 1 == parts {
        cur[pos] = total as u32;
        out.push(cur.clone());
        return;
    }
    for c in 0..=total {
        cur[pos] = c as u32;
        compositions(total - c, parts, cur, pos + 1, out);
    }
}
