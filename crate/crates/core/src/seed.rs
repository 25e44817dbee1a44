//! Derivation of per-stage seeds from one master seed.
//!
//! `derive(master, label, index)` hashes the label with FNV-1a, folds in the
//! index, and runs the result through a SplitMix64 finalizer. Stage labels in
//! use: `"kmeans"`, `"split"`, `"svm"`, `"gen"`.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, label: &str, index: u64) -> u64 {
    splitmix(splitmix(master ^ fnv1a(label.as_bytes())).wrapping_add(index))
}
