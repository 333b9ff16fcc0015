use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BinarySelection, QuboError, QuboModel};
use crate::rng;

/// Simulated-annealing parameters. Unset inverse temperatures are derived
/// from the model: `beta_initial = 1 / max|dE|` and
/// `beta_final = 100 / max(min nonzero |dE|, 1e-9 * max|dE|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub restarts: usize,
    pub beta_initial: Option<f64>,
    pub beta_final: Option<f64>,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 2_000,
            restarts: 10,
            beta_initial: None,
            beta_final: None,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), QuboError> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err(QuboError::Schedule("sweeps and restarts must be positive".into()));
        }
        for b in [self.beta_initial, self.beta_final].into_iter().flatten() {
            if !(b.is_finite() && b > 0.0) {
                return Err(QuboError::Schedule("inverse temperatures must be positive".into()));
            }
        }
        if let (Some(a), Some(b)) = (self.beta_initial, self.beta_final) {
            if b <= a {
                return Err(QuboError::Schedule("beta_final must exceed beta_initial".into()));
            }
        }
        Ok(())
    }

    /// Resolved `(beta_initial, beta_final)` for `model`.
    pub fn betas(&self, model: &QuboModel) -> (f64, f64) {
        let n = model.size();
        let mut max_delta = 0.0f64;
        let mut min_nonzero = f64::INFINITY;
        for i in 0..n {
            let reach: f64 = (0..n).map(|j| model.coefficient(i, j).abs()).sum();
            max_delta = max_delta.max(reach);
            for j in i..n {
                let c = model.coefficient(i, j).abs();
                if c > 0.0 {
                    min_nonzero = min_nonzero.min(c);
                }
            }
        }
        if max_delta == 0.0 {
            max_delta = 1.0;
            min_nonzero = 1.0;
        }
        let min_delta = min_nonzero.max(1e-9 * max_delta);
        let initial = self.beta_initial.unwrap_or(1.0 / max_delta);
        let mut last = self.beta_final.unwrap_or(100.0 / min_delta);
        if last <= initial {
            last = initial * 100.0;
        }
        (initial, last)
    }
}

struct Walker<'a> {
    model: &'a QuboModel,
    bits: Vec<bool>,
    /// `field[i] = Q_ii + sum_{j != i} Q_ij x_j`, the energy change of setting `x_i = 1`.
    field: Vec<f64>,
    energy: f64,
}

impl<'a> Walker<'a> {
    fn new(model: &'a QuboModel, bits: Vec<bool>) -> Self {
        let n = model.size();
        let field = (0..n)
            .map(|i| {
                model.coefficient(i, i)
                    + (0..n)
                        .filter(|&j| j != i && bits[j])
                        .map(|j| model.coefficient(i, j))
                        .sum::<f64>()
            })
            .collect();
        let energy = model.energy_of(&bits);
        Self {
            model,
            bits,
            field,
            energy,
        }
    }

    fn delta(&self, i: usize) -> f64 {
        if self.bits[i] {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    fn flip(&mut self, i: usize) {
        let d = self.delta(i);
        self.bits[i] = !self.bits[i];
        self.energy += d;
        let sign = if self.bits[i] { 1.0 } else { -1.0 };
        for j in 0..self.bits.len() {
            if j != i {
                self.field[j] += sign * self.model.coefficient(i, j);
            }
        }
    }
}

fn run_restart(model: &QuboModel, schedule: &AnnealSchedule, betas: (f64, f64), restart: usize) -> (f64, Vec<bool>) {
    let n = model.size();
    let mut g = rng::stream(schedule.seed, &[0x414e_4e45, restart as u64]);
    let init: Vec<bool> = (0..n).map(|_| g.random::<bool>()).collect();
    let mut walker = Walker::new(model, init);
    let mut best = (walker.energy, walker.bits.clone());
    let mut order: Vec<usize> = (0..n).collect();
    let ratio = betas.1 / betas.0;
    for sweep in 0..schedule.sweeps {
        let frac = if schedule.sweeps > 1 {
            sweep as f64 / (schedule.sweeps - 1) as f64
        } else {
            1.0
        };
        let beta = betas.0 * ratio.powf(frac);
        rng::shuffle(&mut g, &mut order);
        for &i in &order {
            let d = walker.delta(i);
            let accept = d <= 0.0 || g.random::<f64>() < (-beta * d).exp();
            if accept {
                walker.flip(i);
                if walker.energy < best.0 {
                    best = (walker.energy, walker.bits.clone());
                }
            }
        }
    }
    polish(model, best.1)
}

/// Descends to a single-flip local minimum under exact energies, then
/// clears any selected bit whose removal does not raise the energy. Equal
/// energy plateaus thereby resolve toward fewer selected assets.
fn polish(model: &QuboModel, mut bits: Vec<bool>) -> (f64, Vec<bool>) {
    let mut energy = model.energy_of(&bits);
    loop {
        let mut changed = false;
        for i in 0..bits.len() {
            bits[i] = !bits[i];
            let e = model.energy_of(&bits);
            if e < energy || (!bits[i] && e <= energy) {
                energy = e;
                changed = true;
            } else {
                bits[i] = !bits[i];
            }
        }
        if !changed {
            return (energy, bits);
        }
    }
}

/// Single-flip Metropolis annealing with geometric inverse-temperature
/// ramp. Restarts draw independent streams from `(seed, restart)` and run in
/// parallel. Each restart's best state is polished to a local minimum; the
/// lowest exact energy over all restarts wins, ties going to the smallest
/// big-endian bit vector. The all-zero state (energy 0) seeds the comparison.
pub fn anneal(model: &QuboModel, schedule: &AnnealSchedule) -> Result<BinarySelection, QuboError> {
    schedule.validate()?;
    let n = model.size();
    if n == 0 {
        return Ok(BinarySelection::zeros(0));
    }
    let betas = schedule.betas(model);
    let results: Vec<(f64, Vec<bool>)> = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| run_restart(model, schedule, betas, r))
        .collect();
    let mut best = (0.0, vec![false; n]);
    for candidate in results {
        // bool vectors order lexicographically, i.e. as big-endian integers
        let tie = candidate.0 == best.0 && candidate.1 < best.1;
        if candidate.0 < best.0 || tie {
            best = candidate;
        }
    }
    Ok(BinarySelection::new(best.1))
}

#[cfg(test)]
pub(super) fn walker_energy_after_flips(model: &QuboModel, start: Vec<bool>, flips: &[usize]) -> (f64, Vec<bool>) {
    let mut w = Walker::new(model, start);
    for &i in flips {
        w.flip(i);
    }
    (w.energy, w.bits)
}
