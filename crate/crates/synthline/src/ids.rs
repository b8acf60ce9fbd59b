//! Run-scoped sortable identifiers and timestamps.
//!
//! With a seed, ids and timestamps are a pure function of that seed: the clock
//! starts at a fixed epoch and ticks one millisecond per issued id. Without one,
//! the wall clock and OS entropy are used.

use chrono::{DateTime, TimeZone, Utc};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ulid::Ulid;

/// 2025-01-01T00:00:00Z, the start of every seeded clock.
pub const SEEDED_EPOCH_MS: i64 = 1_735_689_600_000;

#[derive(Debug, Clone)]
pub struct IdSource {
    rng: ChaCha8Rng,
    clock: Clock,
}

#[derive(Debug, Clone)]
enum Clock {
    Seeded { next_ms: i64 },
    System,
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: Clock::Seeded { next_ms: SEEDED_EPOCH_MS },
        }
    }

    pub fn system() -> Self {
        IdSource {
            rng: ChaCha8Rng::from_os_rng(),
            clock: Clock::System,
        }
    }

    pub fn from_seed(seed: Option<u64>) -> Self {
        seed.map_or_else(Self::system, Self::seeded)
    }

    pub fn now(&mut self) -> DateTime<Utc> {
        let ms = match &mut self.clock {
            Clock::Seeded { next_ms } => {
                let t = *next_ms;
                *next_ms += 1;
                t
            }
            Clock::System => Utc::now().timestamp_millis(),
        };
        Utc.timestamp_millis_opt(ms).single().expect("timestamp in range")
    }

    /// A fresh ULID and the instant it encodes.
    pub fn next(&mut self) -> (String, DateTime<Utc>) {
        let at = self.now();
        let random = (u128::from(self.rng.next_u64()) << 16) | u128::from(self.rng.next_u32() & 0xffff);
        (Ulid::from_parts(at.timestamp_millis() as u64, random).to_string(), at)
    }

    /// A draw for jitter and similar non-identity uses.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
