//! Bit-level simulation of placement and delivery for static requests, and
//! exact-expectation oracles for the ergodic rates.

mod centralized;
mod decentralized;
mod oracle;

use std::io::Write;
use std::path::Path;

use bitvec::prelude::*;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;

pub use centralized::{padded_file_bits, CentralizedCaches};
pub use decentralized::DecentralizedCaches;
pub use oracle::{ergodic_rate_oracle, ergodic_rate_oracle_in, OracleLevels, OracleOptions, OracleScheme};

pub type Bits = BitVec<u8, Lsb0>;

/// Largest user count the simulator enumerates subsets for.
pub const MAX_SIM_USERS: usize = 20;

/// Default seed of every randomized run.
pub const DEFAULT_SEED: u64 = 20_170_601;

const DOMAIN_DATABASE: u64 = 1;
const DOMAIN_PLACEMENT: u64 = 2;

/// Counter-based generator keyed by `(seed, domain, index)`; streams select
/// a further sub-key (e.g. a file) and can be seeked to any position.
pub(crate) fn keyed_rng(seed: u64, domain: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// A database of `N` random files of `F` bits each, plus the users' count.
#[derive(Debug, Clone)]
pub struct SimulatedNetwork {
    users: usize,
    file_bits: usize,
    seed: u64,
    database: Vec<Bits>,
}

impl SimulatedNetwork {
    pub fn new(n_files: usize, users: usize, file_bits: usize, seed: u64) -> Result<Self> {
        if n_files == 0 || users == 0 || file_bits == 0 {
            return Err(Error::invalid(
                "files, users and file size must all be positive",
            ));
        }
        if users > MAX_SIM_USERS {
            return Err(Error::invalid(format!(
                "the simulator enumerates all user subsets and supports at most {MAX_SIM_USERS} users"
            )));
        }
        let database = (0..n_files)
            .map(|n| {
                let mut bytes = vec![0u8; file_bits.div_ceil(8)];
                keyed_rng(seed, DOMAIN_DATABASE, n as u64, 0).fill_bytes(&mut bytes);
                let mut bits = Bits::from_vec(bytes);
                bits.truncate(file_bits);
                bits
            })
            .collect();
        Ok(Self {
            users,
            file_bits,
            seed,
            database,
        })
    }

    pub fn n_files(&self) -> usize {
        self.database.len()
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn file(&self, n: usize) -> &BitSlice<u8, Lsb0> {
        &self.database[n]
    }
}

/// One XOR-ed component of a coded message: whose request it serves and
/// its length before zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub user: usize,
    pub bits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// Subset of users as a bit mask (bit `ℓ` set for user `ℓ`).
    pub subset: u64,
    pub components: Vec<Component>,
    pub payload: Bits,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryTranscript {
    pub users: usize,
    pub file_bits: usize,
    pub messages: Vec<Message>,
}

impl DeliveryTranscript {
    pub fn total_bits(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len()).sum()
    }

    /// Transmitted bits per file bit.
    pub fn normalized_rate(&self) -> f64 {
        self.total_bits() as f64 / self.file_bits as f64
    }

    /// Binary log: per message, the subset mask (`⌈L/8⌉` little-endian bytes),
    /// the payload length in bits (`u32` little-endian) and the payload bytes
    /// (least significant bit first).
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        let mask_bytes = self.users.div_ceil(8);
        for m in &self.messages {
            out.write_all(&m.subset.to_le_bytes()[..mask_bytes])?;
            let len = u32::try_from(m.payload.len())
                .map_err(|_| Error::Configuration("payload longer than 2^32 bits".into()))?;
            out.write_all(&len.to_le_bytes())?;
            let mut bytes = m.payload.clone();
            bytes.set_uninitialized(false);
            out.write_all(bytes.as_raw_slice())?;
        }
        Ok(())
    }

    /// Reads back the `(subset, payload)` pairs written by [`write_binary`](Self::write_binary).
    pub fn read_binary(users: usize, data: &[u8]) -> Result<Vec<(u64, Bits)>> {
        let mask_bytes = users.div_ceil(8);
        let mut out = Vec::new();
        let mut pos = 0;
        let truncated = || Error::Io("truncated transcript dump".into());
        while pos < data.len() {
            let mut mask = [0u8; 8];
            mask[..mask_bytes].copy_from_slice(data.get(pos..pos + mask_bytes).ok_or_else(truncated)?);
            pos += mask_bytes;
            let len_bytes: [u8; 4] = data
                .get(pos..pos + 4)
                .ok_or_else(truncated)?
                .try_into()
                .expect("four bytes");
            pos += 4;
            let len = u32::from_le_bytes(len_bytes) as usize;
            let nbytes = len.div_ceil(8);
            let mut payload = Bits::from_slice(data.get(pos..pos + nbytes).ok_or_else(truncated)?);
            payload.truncate(len);
            pos += nbytes;
            out.push((u64::from_le_bytes(mask), payload));
        }
        Ok(out)
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf)?;
        crate::cli::write_atomic(path, &buf)
    }
}

/// XOR of the given bit strings, each zero-padded at the tail to the longest.
pub(crate) fn xor_padded<'a>(parts: impl IntoIterator<Item = &'a BitSlice<u8, Lsb0>>) -> Bits {
    let mut acc = Bits::new();
    for part in parts {
        if part.len() > acc.len() {
            acc.resize(part.len(), false);
        }
        let head = &mut acc[..part.len()];
        *head ^= part;
    }
    acc
}

/// Summary of repeated placement/delivery trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub rate: f64,
    pub std_error: f64,
    pub total_bits: u64,
    pub decode_ok: bool,
    pub trials: usize,
    pub file_bits: usize,
    /// Per-trial normalized rates, by trial index.
    pub rates: Vec<f64>,
    /// Largest per-user cache occupancy in bits over all trials.
    pub max_cache_bits: usize,
}

impl SimulationSummary {
    pub(crate) fn from_trials(file_bits: usize, trials: Vec<TrialOutcome>) -> Self {
        let rates: Vec<f64> = trials.iter().map(|t| t.rate).collect();
        let k = rates.len() as f64;
        let mean = neumaier_sum(rates.iter().copied()) / k;
        let std_error = if rates.len() > 1 {
            let var = neumaier_sum(rates.iter().map(|r| (r - mean) * (r - mean))) / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Self {
            rate: mean,
            std_error,
            total_bits: trials.iter().map(|t| t.total_bits as u64).sum(),
            decode_ok: trials.iter().all(|t| t.decode_ok),
            trials: trials.len(),
            file_bits,
            rates,
            max_cache_bits: trials.iter().map(|t| t.max_cache_bits).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TrialOutcome {
    pub rate: f64,
    pub total_bits: usize,
    pub decode_ok: bool,
    pub max_cache_bits: usize,
}

/// Per-trial seed derived from the run seed.
pub(crate) fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub use centralized::{decode_centralized, deliver_centralized, place_centralized, simulate_centralized};
pub use decentralized::{
    caches_bit, decode_decentralized, deliver_decentralized, place_decentralized, simulate_decentralized,
};

pub(crate) fn subset_users(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |l| mask >> l & 1 == 1)
}

pub(crate) fn placement_rng(seed: u64, user: usize, file: usize) -> ChaCha8Rng {
    keyed_rng(seed, DOMAIN_PLACEMENT, user as u64, file as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn database_is_reproducible() {
        let a = SimulatedNetwork::new(3, 2, 1001, 5).unwrap();
        let b = SimulatedNetwork::new(3, 2, 1001, 5).unwrap();
        let c = SimulatedNetwork::new(3, 2, 1001, 6).unwrap();
        assert_eq!(a.file(2), b.file(2));
        assert_ne!(a.file(2), c.file(2));
        assert_ne!(a.file(0), a.file(1));
        assert_eq!(a.file(1).len(), 1001);
        assert!(SimulatedNetwork::new(3, 0, 10, 1).is_err());
        assert!(SimulatedNetwork::new(3, 21, 10, 1).is_err());
    }

    #[test]
    fn padded_xor() {
        let a = bitvec![u8, Lsb0; 1, 0, 1];
        let b = bitvec![u8, Lsb0; 1, 1, 1, 1, 0];
        let x = xor_padded([a.as_bitslice(), b.as_bitslice()]);
        assert_eq!(x, bitvec![u8, Lsb0; 0, 1, 0, 1, 0]);
        assert!(xor_padded(std::iter::empty()).is_empty());
    }

    #[test]
    fn binary_dump_round_trip() {
        let t = DeliveryTranscript {
            users: 10,
            file_bits: 8,
            messages: vec![
                Message {
                    subset: 0b10_0000_0011,
                    components: vec![],
                    payload: bitvec![u8, Lsb0; 1, 0, 1, 1, 0, 0, 0, 0, 1, 1, 1],
                },
                Message {
                    subset: 1,
                    components: vec![],
                    payload: bitvec![u8, Lsb0; 0, 1],
                },
            ],
        };
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), (2 + 4 + 2) + (2 + 4 + 1));
        assert_eq!(&buf[..2], &[0b0000_0011, 0b10]);
        assert_eq!(&buf[2..6], &11u32.to_le_bytes());
        let back = DeliveryTranscript::read_binary(10, &buf).unwrap();
        assert_eq!(back[0], (t.messages[0].subset, t.messages[0].payload.clone()));
        assert_eq!(back[1], (1, t.messages[1].payload.clone()));
        assert!(DeliveryTranscript::read_binary(10, &buf[..5]).is_err());
    }

    #[test]
    fn trial_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(7, t)).collect();
        assert_eq!(s.len(), 1000);
    }
}
