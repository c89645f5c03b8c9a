//! State-space bootstrap of the log-squared residuals.
//!
//! The filter run under the fitted parameters leaves per-component
//! innovations `eps_{j,i}` with variances `Sigma_{j,i}`. Their standardised
//! versions are resampled jointly over the time index and pushed through the
//! innovations form of the fitted model, with `k` drawn uniformly for each `i`:
//!
//! `y*_i = h*_i + offset_i + sum_j pi_{j,k} (mu_j + Sigma_{j,i}^{1/2} eps~_{j,k})`
//!
//! `h*_{i+1} = phi0 + phi1 h*_i + sum_j pi_{j,k} K_{j,i} Sigma_{j,i}^{1/2} eps~_{j,k}`
//!
//! started at `h*_0 = h_{0|-1}`, with the level held fixed and `e*^2 = exp(y*)`.
//! The mixture weight `pi` travels with the drawn innovation because it was
//! computed from it; gains and variances stay at the target step.
//! The state recursion feeds the observations, so each resample carries its own
//! persistent log-variance path rather than the one filtered from the data.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{DiscreteParams, MixtureSpec};
use crate::statespace::FilterOutput;

/// Per-step filter quantities needed to rebuild a series, row-major `n x J`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationRecord {
    pub h_pred: Vec<f64>,
    pub components: usize,
    pub weights: Vec<f64>,
    pub gains: Vec<f64>,
    pub innovations: Vec<f64>,
    pub variances: Vec<f64>,
}

impl InnovationRecord {
    pub fn from_filter(filter: &FilterOutput) -> Self {
        let flat =
            |f: &dyn Fn(usize) -> Vec<f64>| (0..filter.len()).flat_map(f).collect::<Vec<f64>>();
        Self {
            h_pred: filter.h_pred.clone(),
            components: filter.components,
            weights: flat(&|i| filter.weights(i).to_vec()),
            gains: flat(&|i| filter.gains(i).to_vec()),
            innovations: flat(&|i| filter.innovations(i).to_vec()),
            variances: flat(&|i| filter.innovation_variances(i).to_vec()),
        }
    }

    pub fn len(&self) -> usize {
        self.h_pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_pred.is_empty()
    }

    /// `Sigma^{-1/2} eps`; zero where the innovation variance vanishes.
    pub fn standardized(&self) -> Vec<f64> {
        self.innovations
            .iter()
            .zip(&self.variances)
            .map(|(e, v)| if *v > 0.0 { e / v.sqrt() } else { 0.0 })
            .collect()
    }

    fn check(&self, mixture: &MixtureSpec, offsets: &[f64]) -> Result<()> {
        let cells = self.len() * self.components;
        if self.components != mixture.len() {
            return Err(Error::Length(format!(
                "record has {} components, mixture has {}",
                self.components,
                mixture.len()
            )));
        }
        if [
            &self.weights,
            &self.gains,
            &self.innovations,
            &self.variances,
        ]
        .iter()
        .any(|v| v.len() != cells)
        {
            return Err(Error::Length(
                "per-component arrays do not match n x J".into(),
            ));
        }
        if offsets.len() != self.len() {
            return Err(Error::Length(format!(
                "{} level offsets for {} steps",
                offsets.len(),
                self.len()
            )));
        }
        if self.is_empty() {
            return Err(Error::Length("empty innovation record".into()));
        }
        Ok(())
    }
}

/// One resampled series.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSample {
    pub y: Vec<f64>,
    pub h: Vec<f64>,
    /// `exp(y*)`.
    pub e2: Vec<f64>,
    /// Time index drawn for each step.
    pub draws: Vec<usize>,
}

/// Draws a bootstrap series from the filter record under `params`.
pub fn bootstrap_resample<R: Rng + ?Sized>(
    record: &InnovationRecord,
    params: &DiscreteParams,
    mixture: &MixtureSpec,
    level_offset: &[f64],
    rng: &mut R,
) -> Result<BootstrapSample> {
    record.check(mixture, level_offset)?;
    let n = record.len();
    let j = record.components;
    let standardized = record.standardized();
    let means = mixture.means();
    let (phi0, phi1) = (params.phi0, params.phi1());

    let draws: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut y = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut state = record.h_pred[0];
    for (i, &k) in draws.iter().enumerate() {
        let (mut obs_shift, mut state_shift) = (0.0, 0.0);
        for c in 0..j {
            let cell = i * j + c;
            let weight = record.weights[k * j + c];
            let noise = record.variances[cell].max(0.0).sqrt() * standardized[k * j + c];
            obs_shift += weight * (means[c] + noise);
            state_shift += weight * record.gains[cell] * noise;
        }
        h.push(state);
        y.push(state + level_offset[i] + obs_shift);
        state = phi0 + phi1 * state + state_shift;
    }
    if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Degenerate {
            step: bad,
            detail: "non-finite bootstrap observation".into(),
        });
    }
    let e2 = y.iter().map(|v| v.exp()).collect();
    Ok(BootstrapSample { y, h, e2, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SEVEN_COMPONENTS;
    use crate::rng::rng_from_seed;
    use crate::statespace::{kf_filter, log_square_transform, StatePrior};
    use rand_distr::StandardNormal;

    fn simulated_record(
        n: usize,
        seed: u64,
    ) -> (InnovationRecord, DiscreteParams, MixtureSpec, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let params = DiscreteParams::new(-0.05, 0.95, 0.05);
        let mut h = -1.0;
        let e: Vec<f64> = (0..n)
            .map(|_| {
                h = params.phi0
                    + params.phi1() * h
                    + params.sigma_w2.sqrt() * rng.sample::<f64, _>(StandardNormal);
                (0.5 * h).exp() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let series = log_square_transform(&e, 1e-12).unwrap();
        let mix = MixtureSpec::seven_component();
        let filter = kf_filter(
            &series,
            &params,
            &mix,
            StatePrior::from_series(&series, &mix),
        )
        .unwrap();
        (
            InnovationRecord::from_filter(&filter),
            params,
            mix,
            series.y,
        )
    }

    #[test]
    fn draws_come_from_the_original_innovations() {
        let (record, params, mix, _) = simulated_record(200, 1);
        let offsets = vec![0.0; record.len()];
        let sample =
            bootstrap_resample(&record, &params, &mix, &offsets, &mut rng_from_seed(2)).unwrap();
        let original = record.standardized();
        let j = record.components;
        for (i, k) in sample.draws.iter().enumerate() {
            assert!(*k < record.len());
            let row = &original[k * j..(k + 1) * j];
            let shift: f64 = (0..j)
                .map(|c| {
                    record.weights[k * j + c]
                        * (SEVEN_COMPONENTS[c].1 + record.variances[i * j + c].sqrt() * row[c])
                })
                .sum();
            assert!((sample.y[i] - sample.h[i] - shift).abs() < 1e-12);
        }
        assert!(sample.e2.iter().zip(&sample.y).all(|(e, y)| *e == y.exp()));
    }

    #[test]
    fn zero_variances_make_the_series_deterministic() {
        let (mut record, params, mix, _) = simulated_record(50, 3);
        record.variances.iter_mut().for_each(|v| *v = 0.0);
        let j = record.components;
        let first_row = record.weights[..j].to_vec();
        record
            .weights
            .chunks_mut(j)
            .for_each(|row| row.copy_from_slice(&first_row));
        let offsets = vec![0.5; record.len()];
        let a =
            bootstrap_resample(&record, &params, &mix, &offsets, &mut rng_from_seed(4)).unwrap();
        let b =
            bootstrap_resample(&record, &params, &mix, &offsets, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a.y, b.y);
        assert_ne!(a.draws, b.draws);
    }

    #[test]
    fn dispersion_matches_the_data() {
        let (record, params, mix, y) = simulated_record(1000, 6);
        let offsets = vec![0.0; record.len()];
        let variance = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let mut rng = rng_from_seed(7);
        let reps = 500;
        let mean_var = (0..reps)
            .map(|_| {
                variance(
                    &bootstrap_resample(&record, &params, &mix, &offsets, &mut rng)
                        .unwrap()
                        .y,
                )
            })
            .sum::<f64>()
            / reps as f64;
        let ratio = mean_var / variance(&y);
        assert!((0.8..=1.2).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn shape_errors() {
        let (record, params, mix, _) = simulated_record(30, 8);
        assert!(
            bootstrap_resample(&record, &params, &mix, &[0.0; 3], &mut rng_from_seed(1)).is_err()
        );
        let two = MixtureSpec::two_component(-2.5, 1.0, 5.5).unwrap();
        assert!(bootstrap_resample(
            &record,
            &params,
            &two,
            &vec![0.0; 30],
            &mut rng_from_seed(1)
        )
        .is_err());
    }
}
