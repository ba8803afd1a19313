use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent named random streams derived from one run seed. Switching one
/// randomness source off or on leaves the draws of the others unchanged.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub noise_rf: ChaCha8Rng,
    pub noise_chip: ChaCha8Rng,
    pub loss: ChaCha8Rng,
    pub jitter: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            noise_rf: stream(seed, 1),
            noise_chip: stream(seed, 2),
            loss: stream(seed, 3),
            jitter: stream(seed, 4),
        }
    }
}
