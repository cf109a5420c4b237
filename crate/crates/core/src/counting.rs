//! Photon-counting noise: Poisson sampling with accidental coincidences.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biphoton::CoincidenceProfile;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingConfig {
    pub acquisition_time_s: f64,
    pub singles_signal_per_s: f64,
    pub singles_idler_per_s: f64,
    pub coincidence_window_s: f64,
    pub seed: u64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            acquisition_time_s: 10.0,
            singles_signal_per_s: 5e4,
            singles_idler_per_s: 5e4,
            coincidence_window_s: 5e-9,
            seed: 1,
        }
    }
}

impl CountingConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("acquisition_time_s", self.acquisition_time_s),
            ("singles_signal_per_s", self.singles_signal_per_s),
            ("singles_idler_per_s", self.singles_idler_per_s),
            ("coincidence_window_s", self.coincidence_window_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    format!("counting.{key}"),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        let max_singles = self.singles_signal_per_s.max(self.singles_idler_per_s);
        if self.coincidence_window_s * max_singles >= 1.0 {
            return Err(Error::validation(
                "counting.coincidence_window_s",
                "window must be shorter than the mean gap between singles",
            ));
        }
        Ok(())
    }

    /// `S_s * S_i * tau`.
    pub fn accidental_rate(&self) -> f64 {
        self.singles_signal_per_s * self.singles_idler_per_s * self.coincidence_window_s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountedProfile {
    pub coordinates: Vec<f64>,
    pub expected_rates: Vec<f64>,
    pub counts: Vec<u64>,
    pub accidental_rates: Vec<f64>,
    pub acquisition_time_s: f64,
}

pub const COUNTS_HEADER: &str =
    "scan_coordinate_m,expected_rate_pairs_per_s,accidental_rate_pairs_per_s,counts";

impl CountedProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{COUNTS_HEADER}")?;
        for i in 0..self.counts.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.coordinates[i],
                self.expected_rates[i],
                self.accidental_rates[i],
                self.counts[i]
            )?;
        }
        Ok(())
    }
}

/// One Poisson draw per point. Point `i` uses its own stream of a
/// generator seeded from `cfg.seed`, so evaluation order is irrelevant.
pub fn sample_counts(profile: &CoincidenceProfile, cfg: &CountingConfig) -> Result<CountedProfile> {
    cfg.validate()?;
    let acc = cfg.accidental_rate();
    let t = cfg.acquisition_time_s;
    let counts = profile
        .rates
        .par_iter()
        .enumerate()
        .map(|(i, &rate)| {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::invalid(format!(
                    "rate {rate} at point {i} is not a valid rate"
                )));
            }
            let mean = (rate + acc) * t;
            if mean == 0.0 {
                return Ok(0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let dist = Poisson::new(mean)
                .map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
            Ok(dist.sample(&mut rng) as u64)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(CountedProfile {
        coordinates: profile.coordinates.clone(),
        expected_rates: profile.rates.clone(),
        counts,
        accidental_rates: vec![acc; profile.rates.len()],
        acquisition_time_s: t,
    })
}

/// `(peak - background) / sqrt(peak + background)` in counts, where the
/// background is the expected accidentals plus the profile floor above them.
pub fn snr(counted: &CountedProfile) -> Result<f64> {
    if counted.counts.iter().all(|&c| c == 0) {
        return Err(Error::Undefined("SNR of an all-zero count profile".into()));
    }
    let peak = counted.counts.iter().copied().max().unwrap_or(0) as f64;
    let acc =
        counted.accidental_rates.iter().copied().fold(0.0, f64::max) * counted.acquisition_time_s;
    let floor = counted
        .counts
        .iter()
        .map(|&c| (c as f64 - acc).max(0.0))
        .fold(f64::INFINITY, f64::min);
    let bg = acc + floor;
    Ok((peak - bg) / (peak + bg).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub z_m: f64,
    pub collimated: bool,
    pub peak_rate: Option<f64>,
    pub snr: Option<f64>,
    /// Why the row has no values, e.g. an infeasible telescope.
    pub status: String,
}

pub const SWEEP_HEADER: &str = "z_m,peak_rate_pairs_per_s,snr,collimated,status";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "nan".into());
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.z_m,
            opt(r.peak_rate),
            opt(r.snr),
            r.collimated,
            r.status.replace(',', ";")
        )?;
    }
    Ok(())
}
