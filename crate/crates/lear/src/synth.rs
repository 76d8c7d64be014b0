//! Deterministic synthetic market datasets for tests, examples and
//! benchmarks.
//!
//! Each series draws from its own ChaCha stream, so a dataset is a
//! prefix of any longer dataset generated with the same seed.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::market_data::{MarketDataset, SeriesId, HOURS_PER_DAY};

fn stream(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx);
    rng
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct SeriesShape {
    base: f64,
    daily_amp: f64,
    phase: f64,
    noise_sd: f64,
}

fn exog_shape(series: SeriesId) -> SeriesShape {
    match series {
        SeriesId::GenForecastFR => SeriesShape {
            base: 420.0,
            daily_amp: 30.0,
            phase: 3.0,
            noise_sd: 8.0,
        },
        SeriesId::LoadForecastFR => SeriesShape {
            base: 500.0,
            daily_amp: 40.0,
            phase: 6.0,
            noise_sd: 10.0,
        },
        SeriesId::WindForecastBE => SeriesShape {
            base: 50.0,
            daily_amp: 0.0,
            phase: 0.0,
            noise_sd: 10.0,
        },
        SeriesId::SolarForecastBE => SeriesShape {
            base: 20.0,
            daily_amp: 15.0,
            phase: 12.0,
            noise_sd: 4.0,
        },
        SeriesId::LoadForecastBE => SeriesShape {
            base: 300.0,
            daily_amp: 20.0,
            phase: 6.0,
            noise_sd: 5.0,
        },
        SeriesId::PriceBE => unreachable!("price is derived, not shaped"),
    }
}

fn exog_values(series: SeriesId, seed: u64, n_days: usize) -> Vec<f64> {
    let shape = exog_shape(series);
    let mut rng = stream(seed, series.index() as u64);
    (0..n_days * HOURS_PER_DAY)
        .map(|i| {
            let hour = (i % HOURS_PER_DAY) as f64;
            let wave = shape.daily_amp
                * (2.0 * std::f64::consts::PI * (hour + shape.phase) / 24.0).sin();
            shape.base + wave + shape.noise_sd * randn(&mut rng)
        })
        .collect()
}

fn assemble(first_day: NaiveDate, price: Vec<f64>, exog: Vec<Vec<f64>>) -> MarketDataset {
    let mut values = vec![price];
    values.extend(exog);
    MarketDataset::from_values(first_day, values).expect("synthetic data is finite")
}

/// Well-behaved wavy dataset with mild price/exogenous coupling; good
/// enough for plumbing tests that just need realistic, varied numbers.
pub fn smooth_dataset(seed: u64, first_day: NaiveDate, n_days: usize) -> MarketDataset {
    let exog: Vec<Vec<f64>> = SeriesId::EXOGENOUS
        .iter()
        .map(|&s| exog_values(s, seed, n_days))
        .collect();
    let mut noise = stream(seed, 10);
    let price = (0..n_days * HOURS_PER_DAY)
        .map(|i| {
            let wind = exog[2][i];
            let load_be = exog[4][i];
            40.0 + 0.12 * (load_be - 300.0) - 0.25 * (wind - 50.0) + 3.0 * randn(&mut noise)
        })
        .collect();
    assemble(first_day, price, exog)
}

/// Linear data-generating process with two known drivers:
/// `price(d,h) = intercept + wind_coef·wind(d,h) + load_fr_coef·load_fr(d,h) + N(0, noise_sd)`.
#[derive(Debug, Clone)]
pub struct LinearDgp {
    pub first_day: NaiveDate,
    pub n_days: usize,
    pub seed: u64,
    pub wind_coef: f64,
    pub load_fr_coef: f64,
    pub intercept: f64,
    pub noise_sd: f64,
}

impl LinearDgp {
    pub fn new(first_day: NaiveDate, n_days: usize, seed: u64) -> LinearDgp {
        LinearDgp {
            first_day,
            n_days,
            seed,
            wind_coef: 1.5,
            load_fr_coef: -0.8,
            intercept: 20.0,
            noise_sd: 2.0,
        }
    }

    pub fn generate(&self) -> MarketDataset {
        let exog: Vec<Vec<f64>> = SeriesId::EXOGENOUS
            .iter()
            .map(|&s| exog_values(s, self.seed, self.n_days))
            .collect();
        let mut noise = stream(self.seed, 10);
        let price = (0..self.n_days * HOURS_PER_DAY)
            .map(|i| {
                let wind = exog[2][i];
                let load_fr = exog[1][i];
                self.intercept
                    + self.wind_coef * wind
                    + self.load_fr_coef * load_fr
                    + self.noise_sd * randn(&mut noise)
            })
            .collect();
        assemble(self.first_day, price, exog)
    }
}

/// Regime-switching process: a smooth, learnable base price plus rare
/// spikes driven by a hidden state that no input series observes.
#[derive(Debug, Clone)]
pub struct SpikyDgp {
    pub first_day: NaiveDate,
    pub n_days: usize,
    pub seed: u64,
    pub spike_prob: f64,
    pub spike_magnitude: f64,
}

impl SpikyDgp {
    pub fn new(first_day: NaiveDate, n_days: usize, seed: u64) -> SpikyDgp {
        SpikyDgp {
            first_day,
            n_days,
            seed,
            spike_prob: 0.03,
            spike_magnitude: 120.0,
        }
    }

    /// Returns the dataset and the (date, hour) positions of injected
    /// spikes.
    pub fn generate(&self) -> (MarketDataset, Vec<(NaiveDate, u8)>) {
        let exog: Vec<Vec<f64>> = SeriesId::EXOGENOUS
            .iter()
            .map(|&s| exog_values(s, self.seed, self.n_days))
            .collect();
        let mut noise = stream(self.seed, 10);
        let mut regime = stream(self.seed, 11);
        let mut spikes = Vec::new();
        let price = (0..self.n_days * HOURS_PER_DAY)
            .map(|i| {
                let load_be = exog[4][i];
                let mut p = 30.0 + 0.4 * (load_be - 300.0) + 2.0 * randn(&mut noise);
                if regime.gen_bool(self.spike_prob) {
                    p += self.spike_magnitude;
                    spikes.push((
                        self.first_day + chrono::Days::new((i / HOURS_PER_DAY) as u64),
                        (i % HOURS_PER_DAY) as u8,
                    ));
                }
                p
            })
            .collect();
        (assemble(self.first_day, price, exog), spikes)
    }
}
