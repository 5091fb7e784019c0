use std::collections::HashSet;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{ProductCatalog, Variation};

/// Keyed hash of (seed, canonical id) mapped uniformly onto [0, 1).
pub fn availability_score(seed: u64, canonical_id: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(canonical_id.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BookingOutcome {
    Confirmed { epoch: u64 },
    AlreadyBooked { epoch: u64 },
}

/// Simulated inventory: seeded initial availability plus the set of
/// variations booked since the last reset.
///
/// Cloning is cheap and yields an immutable snapshot; mutation copies the
/// booked set only while a snapshot still shares it.
#[derive(Clone, Debug)]
pub struct Inventory {
    seed: u64,
    booked: Arc<HashSet<Variation>>,
    epoch: u64,
}

impl Inventory {
    pub fn new(catalog: &ProductCatalog) -> Self {
        Self::with_seed(catalog.inventory_seed())
    }

    pub fn with_seed(seed: u64) -> Self {
        Inventory {
            seed,
            booked: Arc::default(),
            epoch: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn booked_count(&self) -> usize {
        self.booked.len()
    }

    pub fn is_available(&self, catalog: &ProductCatalog, v: &Variation) -> bool {
        !self.booked.contains(v) && catalog.initially_available_with(self.seed, v)
    }

    /// Marks an available variation as booked. Each confirmed booking advances
    /// the epoch by exactly one; a failed one leaves the state untouched.
    pub fn book(&mut self, catalog: &ProductCatalog, v: &Variation) -> BookingOutcome {
        if !self.is_available(catalog, v) {
            return BookingOutcome::AlreadyBooked { epoch: self.epoch };
        }
        Arc::make_mut(&mut self.booked).insert(v.clone());
        self.epoch += 1;
        BookingOutcome::Confirmed { epoch: self.epoch }
    }

    /// Regenerates the inventory from a seed and returns to epoch 0.
    pub fn reset(&mut self, seed: u64) {
        *self = Inventory::with_seed(seed);
    }
}
