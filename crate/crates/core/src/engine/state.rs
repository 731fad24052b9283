use crate::error::{Error, Result};
use crate::torus::TorusGeometry;

const VACANT: usize = usize::MAX;

/// Microscopic configuration `eta` with an index of particle positions.
///
/// `particles[slot]` is the site of a particle and `slot_of[site]` inverts it,
/// so a uniformly random particle is a uniformly random slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    words: Vec<u64>,
    particles: Vec<usize>,
    slot_of: Vec<usize>,
    time: f64,
}

impl Configuration {
    pub fn empty(geom: &TorusGeometry) -> Self {
        let sites = geom.site_count();
        Self {
            words: vec![0; sites.div_ceil(64)],
            particles: Vec::new(),
            slot_of: vec![VACANT; sites],
            time: 0.0,
        }
    }

    /// Places particles on the listed sites (duplicates rejected).
    pub fn from_sites(geom: &TorusGeometry, sites: &[usize]) -> Result<Self> {
        let mut c = Self::empty(geom);
        for &s in sites {
            if s >= geom.site_count() {
                return Err(Error::usage(format!("site {s} outside the torus")));
            }
            if c.is_occupied(s) {
                return Err(Error::usage(format!("site {s} listed twice")));
            }
            c.insert(s);
        }
        Ok(c)
    }

    pub(crate) fn insert(&mut self, site: usize) {
        debug_assert!(!self.is_occupied(site));
        self.words[site / 64] |= 1 << (site % 64);
        self.slot_of[site] = self.particles.len();
        self.particles.push(site);
    }

    #[inline]
    pub fn is_occupied(&self, site: usize) -> bool {
        self.words[site / 64] >> (site % 64) & 1 == 1
    }

    #[inline]
    pub fn occupancy(&self, site: usize) -> u8 {
        self.is_occupied(site) as u8
    }

    #[inline]
    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    /// Occupied sites in slot order.
    pub fn particles(&self) -> &[usize] {
        &self.particles
    }

    pub fn site_count(&self) -> usize {
        self.slot_of.len()
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Moves the particle in `slot` to the empty site `to`.
    #[inline]
    pub(crate) fn move_particle(&mut self, slot: usize, to: usize) {
        let from = self.particles[slot];
        debug_assert!(!self.is_occupied(to));
        self.words[from / 64] &= !(1 << (from % 64));
        self.words[to / 64] |= 1 << (to % 64);
        self.slot_of[from] = VACANT;
        self.slot_of[to] = slot;
        self.particles[slot] = to;
    }

    pub fn slot_of(&self, site: usize) -> Option<usize> {
        match self.slot_of[site] {
            VACANT => None,
            s => Some(s),
        }
    }

    /// Checks that the bit-field, particle array and site map agree.
    pub fn check_consistency(&self) -> Result<()> {
        let occupied: usize = self.words.iter().map(|w| w.count_ones() as usize).sum();
        if occupied != self.particles.len() {
            return Err(Error::PathwiseViolation(format!(
                "bit-field holds {occupied} particles, index holds {}",
                self.particles.len()
            )));
        }
        for (slot, &site) in self.particles.iter().enumerate() {
            if self.slot_of[site] != slot || !self.is_occupied(site) {
                return Err(Error::PathwiseViolation(format!(
                    "particle slot {slot} and site {site} disagree"
                )));
            }
        }
        Ok(())
    }

    pub fn occupancy_vec(&self) -> Vec<u8> {
        (0..self.site_count()).map(|s| self.occupancy(s)).collect()
    }
}

/// Cumulative per-directed-edge counters: attempts, jumps `W~`, collisions `C~`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterField {
    pub attempts: Vec<u64>,
    pub jumps: Vec<u64>,
    pub collisions: Vec<u64>,
}

impl CounterField {
    pub fn zeros(geom: &TorusGeometry) -> Self {
        let m = geom.edge_count();
        Self {
            attempts: vec![0; m],
            jumps: vec![0; m],
            collisions: vec![0; m],
        }
    }

    pub fn edge_count(&self) -> usize {
        self.attempts.len()
    }

    /// `attempts = W~ + C~` on every directed edge.
    pub fn check_decomposition(&self) -> Result<()> {
        for e in 0..self.attempts.len() {
            if self.attempts[e] != self.jumps[e] + self.collisions[e] {
                return Err(Error::PathwiseViolation(format!(
                    "edge {e}: attempts {} != jumps {} + collisions {}",
                    self.attempts[e], self.jumps[e], self.collisions[e]
                )));
            }
        }
        Ok(())
    }

    pub fn total_attempts(&self) -> u64 {
        self.attempts.iter().sum()
    }
}
