//! Per-stream seeds derived from the master seed.
//!
//! Each stream is named by its inputs, so adding a planner or goal never shifts
//! another stream.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one bench trial (and of `plan`, which runs trial 0).
pub fn trial_seed(master: u64, planner: &str, goal: &str, trial: usize) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, planner.as_bytes());
    h = fnv1a(h, &[0]);
    h = fnv1a(h, goal.as_bytes());
    h = fnv1a(h, &[0]);
    h = fnv1a(h, &(trial as u64).to_le_bytes());
    splitmix64(h)
}

/// Seed of a named auxiliary stream such as the sensor noise.
pub fn stream_seed(master: u64, tag: &str) -> u64 {
    let h = fnv1a(fnv1a(FNV_OFFSET, &master.to_le_bytes()), tag.as_bytes());
    splitmix64(fnv1a(h, &[0xff]))
}
