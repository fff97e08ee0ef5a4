use std::collections::HashMap;

use bitvec::prelude::*;
use rand::RngCore;
use rayon::prelude::*;

use super::{
    placement_rng, subset_users, trial_seed, xor_padded, Bits, Component, DeliveryTranscript,
    Message, SimulatedNetwork, SimulationSummary, TrialOutcome,
};
use crate::decentralized::FractionalAllocation;
use crate::error::{Error, Result};
use crate::request::RequestVector;

#[inline]
fn draw_below(word: u64, r: f64) -> bool {
    ((word >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < r
}

/// Whether `user` caches bit `bit` of `file` under seed `seed`; a random-access
/// view of the same draws [`place_decentralized`] makes sequentially.
pub fn caches_bit(seed: u64, user: usize, file: usize, bit: usize, r: f64) -> bool {
    let mut rng = placement_rng(seed, user, file);
    rng.set_word_pos(2 * bit as u128);
    draw_below(rng.next_u64(), r)
}

/// Per-user cache: for every file a flag per bit and the cached bit values.
#[derive(Debug, Clone)]
pub struct DecentralizedCaches {
    flags: Vec<Vec<Bits>>,
    content: Vec<Vec<Bits>>,
}

impl DecentralizedCaches {
    pub fn cached_bits(&self, user: usize) -> usize {
        self.flags[user].iter().map(|f| f.count_ones()).sum()
    }

    pub fn is_cached(&self, user: usize, file: usize, bit: usize) -> bool {
        self.flags[user][file][bit]
    }

    pub fn cached_value(&self, user: usize, file: usize, bit: usize) -> Option<bool> {
        self.is_cached(user, file, bit)
            .then(|| self.content[user][file][bit])
    }

    /// Bit positions of `file` grouped by the exact set of users caching them.
    fn owner_groups(&self, file: usize) -> HashMap<u64, Vec<usize>> {
        let bits = self.flags[0][file].len();
        let mut owners = vec![0u64; bits];
        for (user, flags) in self.flags.iter().enumerate() {
            for b in flags[file].iter_ones() {
                owners[b] |= 1 << user;
            }
        }
        let mut groups: HashMap<u64, Vec<usize>> = HashMap::new();
        for (b, &mask) in owners.iter().enumerate() {
            groups.entry(mask).or_default().push(b);
        }
        groups
    }
}

fn check_shapes(net: &SimulatedNetwork, alloc: &FractionalAllocation) -> Result<()> {
    if alloc.users() != net.users() {
        return Err(Error::DimensionMismatch {
            expected: net.users(),
            actual: alloc.users(),
        });
    }
    if alloc.n_files() != net.n_files() {
        return Err(Error::DimensionMismatch {
            expected: net.n_files(),
            actual: alloc.n_files(),
        });
    }
    Ok(())
}

/// Each user caches each bit of file `n` independently with probability
/// `r_n`, from a generator keyed only by the seed, the user and the file.
pub fn place_decentralized(net: &SimulatedNetwork, alloc: &FractionalAllocation) -> Result<DecentralizedCaches> {
    check_shapes(net, alloc)?;
    let f = net.file_bits();
    let mut flags = Vec::with_capacity(net.users());
    let mut content = Vec::with_capacity(net.users());
    for user in 0..net.users() {
        let mut user_flags = Vec::with_capacity(net.n_files());
        let mut user_content = Vec::with_capacity(net.n_files());
        for (file, &r) in alloc.levels().iter().enumerate() {
            let mut rng = placement_rng(net.seed(), user, file);
            let mut fl = Bits::with_capacity(f);
            for _ in 0..f {
                fl.push(draw_below(rng.next_u64(), r));
            }
            let mut cached = bitvec![u8, Lsb0; 0; f];
            for b in fl.iter_ones() {
                cached.set(b, net.file(file)[b]);
            }
            user_flags.push(fl);
            user_content.push(cached);
        }
        flags.push(user_flags);
        content.push(user_content);
    }
    Ok(DecentralizedCaches { flags, content })
}

fn gather(source: &BitSlice<u8, Lsb0>, positions: &[usize]) -> Bits {
    positions.iter().map(|&b| source[b]).collect()
}

/// For every subset `S` and `ℓ ∈ S`, collects the bits of `y_ℓ` cached by
/// exactly `S \ {ℓ}`, and sends their XOR zero-padded to the longest.
pub fn deliver_decentralized(
    net: &SimulatedNetwork,
    caches: &DecentralizedCaches,
    alloc: &FractionalAllocation,
    request: &RequestVector,
) -> Result<DeliveryTranscript> {
    check_shapes(net, alloc)?;
    request.check_against(net.n_files(), net.users())?;
    let users = net.users();
    let y = request.files();
    let mut groups: HashMap<usize, HashMap<u64, Vec<usize>>> = HashMap::new();
    for &file in y {
        groups.entry(file).or_insert_with(|| caches.owner_groups(file));
    }
    let empty = Vec::new();
    let mut messages = Vec::new();
    for subset in 1u64..(1 << users) {
        let parts: Vec<(usize, Bits)> = subset_users(subset)
            .map(|l| {
                let positions = groups[&y[l]].get(&(subset & !(1 << l))).unwrap_or(&empty);
                (l, gather(net.file(y[l]), positions))
            })
            .filter(|(_, b)| !b.is_empty())
            .collect();
        if parts.is_empty() {
            continue;
        }
        messages.push(Message {
            subset,
            components: parts
                .iter()
                .map(|(l, b)| Component {
                    user: *l,
                    bits: b.len(),
                })
                .collect(),
            payload: xor_padded(parts.iter().map(|(_, b)| b.as_bitslice())),
        });
    }
    Ok(DeliveryTranscript {
        users,
        file_bits: net.file_bits(),
        messages,
    })
}

/// Reconstructs `user`'s requested file from its own cache, the public
/// placement maps and the transcript.
pub fn decode_decentralized(
    caches: &DecentralizedCaches,
    transcript: &DeliveryTranscript,
    request: &RequestVector,
    user: usize,
) -> Result<Bits> {
    let y = request.files();
    let file = y[user];
    let f = transcript.file_bits;
    let fail = |what: String| Error::InvariantViolation(format!("user {user} cannot decode: {what}"));
    let mut groups: HashMap<usize, HashMap<u64, Vec<usize>>> = HashMap::new();
    let mut out = bitvec![u8, Lsb0; 0; f];
    let mut known = caches.flags[user][file].clone();
    for b in known.iter_ones() {
        out.set(b, caches.content[user][file][b]);
    }

    for msg in transcript.messages.iter().filter(|m| m.subset >> user & 1 == 1) {
        let Some(own) = msg.components.iter().find(|c| c.user == user) else {
            continue;
        };
        let mut acc = msg.payload.clone();
        for c in msg.components.iter().filter(|c| c.user != user) {
            let other = y[c.user];
            let owners = msg.subset & !(1 << c.user);
            let positions = groups
                .entry(other)
                .or_insert_with(|| caches.owner_groups(other))
                .get(&owners)
                .cloned()
                .unwrap_or_default();
            if positions.len() != c.bits {
                return Err(fail(format!("component length mismatch in subset {:#b}", msg.subset)));
            }
            let mut side = Bits::with_capacity(positions.len());
            for b in positions {
                side.push(
                    caches
                        .cached_value(user, other, b)
                        .ok_or_else(|| fail(format!("bit {b} of file {other} not cached")))?,
                );
            }
            let head = &mut acc[..side.len()];
            *head ^= side.as_bitslice();
        }
        let positions = groups
            .entry(file)
            .or_insert_with(|| caches.owner_groups(file))
            .get(&(msg.subset & !(1 << user)))
            .cloned()
            .unwrap_or_default();
        if positions.len() != own.bits || acc.len() < own.bits {
            return Err(fail(format!("own component malformed in subset {:#b}", msg.subset)));
        }
        for (k, b) in positions.into_iter().enumerate() {
            out.set(b, acc[k]);
            known.set(b, true);
        }
    }
    if known.not_all() {
        return Err(fail(format!("{} bits never delivered", known.count_zeros())));
    }
    Ok(out)
}

/// Runs `trials` independent placements (and databases) through delivery and
/// decoding.
pub fn simulate_decentralized(
    alloc: &FractionalAllocation,
    request: &RequestVector,
    file_bits: usize,
    trials: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    request.check_against(alloc.n_files(), alloc.users())?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let net = SimulatedNetwork::new(alloc.n_files(), alloc.users(), file_bits, trial_seed(seed, t))?;
            let caches = place_decentralized(&net, alloc)?;
            let transcript = deliver_decentralized(&net, &caches, alloc, request)?;
            let mut decode_ok = true;
            for user in 0..net.users() {
                let got = decode_decentralized(&caches, &transcript, request, user)?;
                decode_ok &= got.as_bitslice() == net.file(request.files()[user]);
            }
            Ok(TrialOutcome {
                rate: transcript.normalized_rate(),
                total_bits: transcript.total_bits(),
                decode_ok,
                max_cache_bits: (0..net.users()).map(|u| caches.cached_bits(u)).max().unwrap_or(0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationSummary::from_trials(file_bits, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decentralized::static_rate_for_request;

    fn frac(r: &[f64], users: usize) -> FractionalAllocation {
        FractionalAllocation::new(r.to_vec(), users).unwrap()
    }

    #[test]
    fn extreme_allocations() {
        let net = SimulatedNetwork::new(2, 3, 500, 4).unwrap();
        let y = RequestVector::new(vec![0, 1, 1], 2).unwrap();
        let full = frac(&[1.0, 1.0], 3);
        let caches = place_decentralized(&net, &full).unwrap();
        assert!((0..3).all(|u| caches.cached_bits(u) == 1000));
        let t = deliver_decentralized(&net, &caches, &full, &y).unwrap();
        assert_eq!(t.normalized_rate(), 0.0);

        let none = frac(&[0.0, 0.0], 3);
        let caches = place_decentralized(&net, &none).unwrap();
        assert!((0..3).all(|u| caches.cached_bits(u) == 0));
        let t = deliver_decentralized(&net, &caches, &none, &y).unwrap();
        // With empty caches every user receives its whole file uncoded.
        assert_eq!(t.normalized_rate(), 3.0);
        for user in 0..3 {
            let got = decode_decentralized(&caches, &t, &y, user).unwrap();
            assert_eq!(got.as_bitslice(), net.file(y.files()[user]));
        }
    }

    #[test]
    fn placement_is_per_user_and_random_access() {
        let a = frac(&[0.3, 0.6], 2);
        let net = SimulatedNetwork::new(2, 2, 300, 11).unwrap();
        let caches = place_decentralized(&net, &a).unwrap();
        for user in 0..2 {
            for file in 0..2 {
                for bit in [0, 1, 57, 299] {
                    assert_eq!(
                        caches.is_cached(user, file, bit),
                        caches_bit(11, user, file, bit, a.levels()[file])
                    );
                }
            }
        }
        // A third user does not change the first two users' maps.
        let net3 = SimulatedNetwork::new(2, 3, 300, 11).unwrap();
        let caches3 = place_decentralized(&net3, &frac(&[0.3, 0.6], 3)).unwrap();
        for bit in 0..300 {
            assert_eq!(caches.is_cached(1, 1, bit), caches3.is_cached(1, 1, bit));
        }
    }

    #[test]
    fn two_user_rate_converges() {
        let a = frac(&[0.5, 0.5], 2);
        let y = RequestVector::new(vec![0, 1], 2).unwrap();
        let s = simulate_decentralized(&a, &y, 20_000, 8, 7).unwrap();
        assert!(s.decode_ok);
        let expected = static_rate_for_request(&a, &y).unwrap();
        assert!((s.rate - expected).abs() < 0.02, "{} vs {expected}", s.rate);
        // Per-user cache close to F Σ r_n = 20 000 bits.
        assert!((s.max_cache_bits as f64 - 20_000.0).abs() < 4.0 * (40_000f64 * 0.25).sqrt() + 400.0);
    }
}
