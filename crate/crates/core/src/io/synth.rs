//! Seeded synthetic datasets with the same schema as real device traces.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Collaboration, Dataset, Device};
use crate::rng::{self, streams};

/// Device count of the reference benchmark.
pub const BENCHMARK_DEVICES: usize = 76;
/// Dataset seed of the reference benchmark.
pub const BENCHMARK_SEED: u64 = 21;

/// Reference benchmark dataset with default knobs.
pub fn benchmark_dataset() -> Result<Dataset> {
    generate_synthetic(BENCHMARK_DEVICES, BENCHMARK_SEED, &SynthKnobs::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthKnobs {
    pub friend_prob: f64,
    pub link_prob: f64,
    pub n_interests: usize,
    pub interests_per_device: usize,
    pub n_collabs: usize,
    pub collab_success_rate: f64,
    pub n_types: usize,
}

impl Default for SynthKnobs {
    fn default() -> Self {
        Self {
            friend_prob: 0.02,
            link_prob: 0.02,
            n_interests: 20,
            interests_per_device: 2,
            n_collabs: 40,
            collab_success_rate: 0.8,
            n_types: 3,
        }
    }
}

impl SynthKnobs {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("friend_prob", self.friend_prob),
            ("link_prob", self.link_prob),
            ("collab_success_rate", self.collab_success_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        if self.interests_per_device > self.n_interests {
            return Err(Error::InvalidArgument(format!(
                "interests_per_device ({}) exceeds n_interests ({})",
                self.interests_per_device, self.n_interests
            )));
        }
        if self.n_types == 0 {
            return Err(Error::InvalidArgument("n_types must be >= 1".into()));
        }
        Ok(())
    }
}

/// Probability that a collaboration grows through a friend of a current member.
const FRIEND_BIAS: f64 = 0.7;

fn erdos_renyi(n: usize, p: f64, rng: &mut rng::StreamRng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng::bernoulli(rng, p) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Generates a dataset of `n` devices.
///
/// Draw order from stream `SYNTH`: positions and types per device, link
/// graph, friendship graph, interests per device, then collaborations.
pub fn generate_synthetic(n: usize, seed: u64, knobs: &SynthKnobs) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "synthetic dataset needs n >= 2, got {n}"
        )));
    }
    knobs.validate()?;
    let mut rng = rng::stream(seed, streams::SYNTH);

    let devices: Vec<Device> = (0..n)
        .map(|id| {
            let x = rng::uniform(&mut rng);
            let y = rng::uniform(&mut rng);
            let t = rng::below(&mut rng, knobs.n_types);
            Device {
                id,
                x,
                y,
                device_type: format!("type{t}"),
            }
        })
        .collect();

    let links = erdos_renyi(n, knobs.link_prob, &mut rng);
    let friendships = erdos_renyi(n, knobs.friend_prob, &mut rng);

    let mut pool: Vec<usize> = (0..knobs.n_interests).collect();
    let interests: Vec<BTreeSet<usize>> = (0..n)
        .map(|_| {
            let (picked, _) = pool.partial_shuffle(&mut rng, knobs.interests_per_device);
            picked.iter().copied().collect()
        })
        .collect();

    let mut friends: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in &friendships {
        friends[a].insert(b);
        friends[b].insert(a);
    }

    let collaborations = (0..knobs.n_collabs)
        .map(|_| {
            let size = (2 + rng::below(&mut rng, 3)).min(n);
            let mut members = vec![rng::below(&mut rng, n)];
            while members.len() < size {
                let via_friend: Vec<usize> = members
                    .iter()
                    .flat_map(|m| friends[*m].iter().copied())
                    .filter(|f| !members.contains(f))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let next = if !via_friend.is_empty() && rng::bernoulli(&mut rng, FRIEND_BIAS) {
                    via_friend[rng::below(&mut rng, via_friend.len())]
                } else {
                    let rest: Vec<usize> = (0..n).filter(|d| !members.contains(d)).collect();
                    rest[rng::below(&mut rng, rest.len())]
                };
                members.push(next);
            }
            members.sort_unstable();
            Collaboration {
                members,
                success: rng::bernoulli(&mut rng, knobs.collab_success_rate),
            }
        })
        .collect();

    let ds = Dataset {
        devices,
        links,
        friendships,
        interests,
        collaborations,
    };
    ds.validate()?;
    Ok(ds)
}
