use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Labels of the per-run random streams.
pub const MOBILITY: &str = "mobility";
pub const TRAFFIC: &str = "traffic";
pub const RADIO: &str = "radio";
pub const POLICY: &str = "policy";

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent generator for `label` under the run's master `seed`.
///
/// Every label selects its own ChaCha stream, so adding a label never
/// shifts the draws of existing ones.
pub fn stream(seed: u64, label: &str) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}
