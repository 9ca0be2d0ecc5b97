use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{self, Allocation, FeasibilityVerdict, LinkPair};

/// A uniformly drawn grid allocation. Feasibility is reported, not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDraw {
    pub allocation: Allocation,
    pub verdict: FeasibilityVerdict,
}

pub fn random_alloc(pair: &LinkPair, seed: u64) -> RandomDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_alloc_with(pair, &mut rng)
}

/// Independent uniform draws of θ and the three powers from their grids.
pub fn random_alloc_with<R: Rng + ?Sized>(pair: &LinkPair, rng: &mut R) -> RandomDraw {
    let thetas = pair.grid.thetas();
    let powers = pair.grid.powers();
    let theta = thetas[rng.gen_range(0..thetas.len())];
    let p_p = powers[rng.gen_range(0..powers.len())];
    let p_r = powers[rng.gen_range(0..powers.len())];
    let p_s = powers[rng.gen_range(0..powers.len())];
    let allocation = Allocation::new(theta, p_p, p_r, p_s);
    RandomDraw {
        verdict: model::check_feasible(pair, &allocation),
        allocation,
    }
}
