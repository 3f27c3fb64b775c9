use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains, so that different kinds of draws never share a stream.
pub const DOMAIN_TRAIN: u64 = 1;
pub const DOMAIN_VAL: u64 = 2;
pub const DOMAIN_TEST: u64 = 3;
pub const DOMAIN_SYNTH: u64 = 4;

/// Counter-based generator: the stream for `(seed, domain, index)` does not
/// depend on how many other streams were drawn before it.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
