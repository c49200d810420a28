use ggd_core::Backend;

use crate::error::{GgdError, Result};

/// Parameter grid for one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevel {
    /// Relative noise in percent.
    pub zeta: f64,
    pub deltas: Vec<usize>,
    pub rhos: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl GridLevel {
    /// The default grid for 20, 30 or 40 percent noise.
    pub fn standard(zeta: f64) -> Option<Self> {
        let (deltas, rhos) = match zeta {
            z if z == 20.0 => (vec![8, 10, 12], vec![3, 5, 7]),
            z if z == 30.0 => (vec![10, 12, 14], vec![5, 7, 9]),
            z if z == 40.0 => (vec![12, 14, 16], vec![7, 9, 11]),
            _ => return None,
        };
        Some(Self {
            zeta,
            deltas,
            rhos,
            ranks: vec![15, 20, 25],
        })
    }

    pub fn cells(&self) -> usize {
        self.deltas.len() * self.rhos.len() * self.ranks.len()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub levels: Vec<GridLevel>,
    pub backends: Vec<Backend>,
    /// Timed runs per cell; `wall_ms` is their median.
    pub repetitions: usize,
    pub base_seed: u64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            levels: [20.0, 30.0, 40.0]
                .into_iter()
                .map(|z| GridLevel::standard(z).expect("standard level"))
                .collect(),
            backends: Backend::ALL.to_vec(),
            repetitions: 1,
            base_seed: 0,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(GgdError::Invalid(m.into()));
        if self.levels.is_empty() || self.backends.is_empty() {
            return fail("sweep needs at least one noise level and one backend");
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1");
        }
        for level in &self.levels {
            if !(level.zeta > 0.0 && level.zeta < 100.0) {
                return fail("noise levels must lie strictly between 0 and 100 percent");
            }
            if level.cells() == 0 {
                return fail("every noise level needs non-empty delta, rho and rank lists");
            }
        }
        Ok(())
    }

    /// Runs per image.
    pub fn runs_per_image(&self) -> usize {
        self.backends.len() * self.levels.iter().map(GridLevel::cells).sum::<usize>()
    }
}

/// Coordinates of a single run; its seed depends on nothing else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey<'a> {
    pub image_name: &'a str,
    pub zeta: f64,
    pub backend: Backend,
    pub delta: usize,
    pub rho: usize,
    pub rank: usize,
}

impl RunKey<'_> {
    /// `base + hash(coordinates)`, independent of execution order.
    pub fn seed(&self, base: u64) -> u64 {
        let mut h = Fnv::new();
        h.write(self.image_name.as_bytes());
        h.write(&self.zeta.to_bits().to_le_bytes());
        h.write(self.backend.name().as_bytes());
        for v in [self.delta, self.rho, self.rank] {
            h.write(&(v as u64).to_le_bytes());
        }
        base.wrapping_add(h.finish())
    }
}

/// Seed of the single noisy realization shared by every run on
/// `(image_name, zeta)`.
pub fn noise_seed(base: u64, image_name: &str, zeta: f64) -> u64 {
    let mut h = Fnv::new();
    h.write(b"noise");
    h.write(image_name.as_bytes());
    h.write(&zeta.to_bits().to_le_bytes());
    base.wrapping_add(h.finish())
}

/// 64-bit FNV-1a; unlike `std`'s hasher its output is fixed across releases.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
        // Field separator, so ("ab", "c") and ("a", "bc") differ.
        self.0 = (self.0 ^ 0xff).wrapping_mul(0x0000_0100_0000_01b3);
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
