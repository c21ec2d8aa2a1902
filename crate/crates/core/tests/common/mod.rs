#![allow(dead_code)]

pub mod oracle;

use fuzzy_success::construct::{LikertResponse, ScaleProfile, ITEM_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_response(rng: &mut impl Rng, scale: ScaleProfile, id: &str) -> LikertResponse {
    let mut items = [0u8; ITEM_COUNT];
    for v in items.iter_mut() {
        *v = rng.gen_range(scale.lo()..=scale.hi());
    }
    LikertResponse::complete(id, items)
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// Pinned by the fine-grid oracle for management = 2, impact = 4,
/// satisfaction = 3 on every item of the default five-point construct.
pub const MIXED_PROFILE_OVERALL: f64 = 3.476214079746959;
pub const MIXED_PROFILE_DIMENSIONS: [f64; 3] = [2.254545454667638, 3.745454545332348, 3.0];

pub fn mixed_profile() -> LikertResponse {
    LikertResponse::complete("mixed", [2, 2, 2, 2, 2, 4, 4, 4, 4, 4, 3, 3, 3, 3])
}
