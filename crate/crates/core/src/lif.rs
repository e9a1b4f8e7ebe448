//! Leaky integrate-and-fire neuron driven by box-shaped flash currents.
//!
//! The membrane obeys `C dV/dt + V/R = I(t)`, integrated with forward Euler
//! at `bin_ms / substeps_per_bin` ms. `I(t)` equals `stimulus_height` during
//! every flash bin and zero otherwise. When `V >= v_th` at the end of a
//! substep a spike is recorded in the current bin and `V` is set to
//! `v_reset`.

use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;

use crate::error::{ProError, Result};
use crate::pointproc::{Dataset, Sweep};
use crate::rng::rng_from_seed;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams<T> {
    pub c: T,
    pub r: T,
    pub v_th: T,
    pub v_reset: T,
    pub substeps_per_bin: usize,
    pub bin_ms: T,
    pub stimulus_height: T,
}

impl<T: Real> Default for LifParams<T> {
    fn default() -> Self {
        Self {
            c: T::lit(7.0),
            r: T::lit(3.0),
            v_th: T::one(),
            v_reset: T::zero(),
            substeps_per_bin: 100,
            bin_ms: T::lit(crate::pointproc::BIN_MS),
            stimulus_height: T::one(),
        }
    }
}

impl<T: Real> LifParams<T> {
    pub fn with_c(self, c: T) -> Self {
        Self { c, ..self }
    }

    pub fn with_r(self, r: T) -> Self {
        Self { r, ..self }
    }

    pub fn with_substeps(self, substeps_per_bin: usize) -> Self {
        Self { substeps_per_bin, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ProError::Domain(m));
        if !(self.c > T::zero() && self.c.is_finite()) {
            return bad(format!("capacitance must be positive, got {}", self.c));
        }
        if !(self.r > T::zero() && self.r.is_finite()) {
            return bad(format!("resistance must be positive, got {}", self.r));
        }
        if !(self.v_reset < self.v_th) {
            return bad(format!("v_reset {} must be below v_th {}", self.v_reset, self.v_th));
        }
        if self.substeps_per_bin == 0 {
            return bad("substeps_per_bin must be at least 1".into());
        }
        if !(self.bin_ms > T::zero()) {
            return bad(format!("bin width must be positive, got {}", self.bin_ms));
        }
        Ok(())
    }

    /// Membrane time constant `R * C` in ms.
    pub fn tau_ms(&self) -> T {
        self.r * self.c
    }

    pub fn dt_ms(&self) -> T {
        self.bin_ms / T::from_count(self.substeps_per_bin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifTrace<T> {
    pub flashes: Vec<bool>,
    pub spikes: Vec<bool>,
    pub final_potential: T,
    pub spike_count: usize,
    /// End time (ms) of each substep at which the threshold was reached.
    pub spike_times_ms: Vec<T>,
    pub peak_potential: T,
    /// Threshold crossings, including any beyond the first in a bin.
    pub crossings: usize,
}

pub fn gen_stimulus<R: Rng + ?Sized>(n_bins: usize, p: f64, rng: &mut R) -> Result<Vec<bool>> {
    if n_bins == 0 {
        return Err(ProError::Domain("n_bins must be at least 1".into()));
    }
    let dist = Bernoulli::new(p).map_err(|_| ProError::Domain(format!("flash probability {p} not in [0, 1]")))?;
    Ok((0..n_bins).map(|_| dist.sample(rng)).collect())
}

pub fn simulate_lif<T: Real>(params: &LifParams<T>, flashes: &[bool]) -> Result<LifTrace<T>> {
    run(params, flashes, None)
}

/// Like [`simulate_lif`] but also returns the potential after every substep
/// (after any reset).
pub fn simulate_lif_recording<T: Real>(params: &LifParams<T>, flashes: &[bool]) -> Result<(LifTrace<T>, Vec<T>)> {
    let mut path = Vec::with_capacity(flashes.len() * params.substeps_per_bin);
    let trace = run(params, flashes, Some(&mut path))?;
    Ok((trace, path))
}

fn run<T: Real>(params: &LifParams<T>, flashes: &[bool], mut path: Option<&mut Vec<T>>) -> Result<LifTrace<T>> {
    params.validate()?;
    if flashes.is_empty() {
        return Err(ProError::Domain("flash sequence is empty".into()));
    }
    let dt = params.dt_ms();
    let decay = dt / (params.c * params.r);
    let drive = dt * params.stimulus_height / params.c;
    let mut v = params.v_reset;
    let mut peak = v;
    let mut spikes = vec![false; flashes.len()];
    let mut spike_times_ms = Vec::new();
    let mut step: usize = 0;
    let mut crossings = 0;
    for (bin, &flash) in flashes.iter().enumerate() {
        let input = if flash { drive } else { T::zero() };
        for _ in 0..params.substeps_per_bin {
            v = v - decay * v + input;
            step += 1;
            peak = peak.max(v);
            if v >= params.v_th {
                crossings += 1;
                if !spikes[bin] {
                    spikes[bin] = true;
                    spike_times_ms.push(T::from_count(step) * dt);
                }
                v = params.v_reset;
            }
            if let Some(p) = path.as_deref_mut() {
                p.push(v);
            }
        }
    }
    let spike_count = spikes.iter().filter(|&&s| s).count();
    Ok(LifTrace {
        flashes: flashes.to_vec(),
        spikes,
        final_potential: v,
        spike_count,
        spike_times_ms,
        peak_potential: peak,
        crossings,
    })
}

/// One simulated sweep: Bernoulli(`flash_prob`) flashes through the LIF neuron.
pub fn simulate_dataset<T: Real>(params: &LifParams<T>, n_bins: usize, flash_prob: f64, seed: u64) -> Result<Dataset> {
    Ok(Dataset::single(simulate_sweep(params, n_bins, flash_prob, seed, 0)?))
}

pub fn simulate_sweep<T: Real>(
    params: &LifParams<T>,
    n_bins: usize,
    flash_prob: f64,
    seed: u64,
    sweep_id: u64,
) -> Result<Sweep> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let flashes = gen_stimulus(n_bins, flash_prob, &mut rng)?;
    let trace = simulate_lif(params, &flashes)?;
    Sweep::with_bin_ms(sweep_id, trace.flashes, trace.spikes, params.bin_ms.as_f64())
}
