use crate::error::Result;
use crate::garbler::{garbled_index_with, GarbleScratch, GarblingConfig};
use crate::model::{logistic, CovariateSampler, CovariateSpec, Dataset, Link, RegressionModel};
use crate::rng;

use super::exec::{map_indexed, Execution, CHUNK_ROWS};

/// One batch of simulated queries: covariates plus the clean and garbled
/// linear indices of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedQueries {
    pub k: usize,
    pub link: Link,
    pub inputs: Vec<f64>,
    pub clean_index: Vec<f64>,
    pub garbled_index: Vec<f64>,
}

impl SimulatedQueries {
    pub fn len(&self) -> usize {
        self.clean_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean_index.is_empty()
    }

    /// What the service returns: the link applied to the garbled index.
    pub fn garbled_outputs(&self) -> Vec<f64> {
        self.garbled_index.iter().map(|&z| self.link.apply(z)).collect()
    }

    /// Attacker's view: queries and the returned outputs.
    pub fn attacker_dataset(&self) -> Result<Dataset> {
        Dataset::from_flat(self.k, self.inputs.clone(), Some(self.garbled_outputs()))
    }

    /// Mean squared gap between clean and garbled linear indices. For the
    /// identity link this is the output-scale σ²; for the logistic link it is
    /// the log-odds σ².
    pub fn index_sigma2(&self) -> f64 {
        mean_sq_gap(&self.clean_index, &self.garbled_index, |z| z)
    }

    /// Mean squared gap between clean and garbled probabilities.
    pub fn probability_sigma2(&self) -> f64 {
        mean_sq_gap(&self.clean_index, &self.garbled_index, logistic)
    }
}

fn mean_sq_gap(a: &[f64], b: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(&x, &y)| (f(x) - f(y)).powi(2)).sum::<f64>() / a.len() as f64
}

/// Draws `n` covariate rows and garbles each one, chunk by chunk.
///
/// Chunk `c` uses the stream `(seed, lane, c)`: covariates first, then the
/// garbling draws, row by row. The number of draws per row does not depend
/// on γ, so two configs that differ only in γ see the same covariates and
/// noise.
pub fn simulate_queries(
    model: &RegressionModel,
    garbling: &GarblingConfig,
    covariates: &CovariateSpec,
    n: usize,
    seed: u64,
    lane: u64,
    exec: Execution,
) -> Result<SimulatedQueries> {
    garbling.validate_for(model)?;
    let sampler = CovariateSampler::new(covariates)?;
    model.check_dim(sampler.k())?;
    let k = model.k();
    let chunks = n.div_ceil(CHUNK_ROWS);

    let parts = map_indexed(exec, chunks, |c| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
        let mut r = rng::stream(seed, lane, c as u64);
        let mut inputs = vec![0.0; rows * k];
        let mut clean = Vec::with_capacity(rows);
        let mut garbled = Vec::with_capacity(rows);
        let mut z = vec![0.0; k];
        let mut scratch = GarbleScratch::new(k);
        for x in inputs.chunks_exact_mut(k) {
            sampler.sample_into(&mut r, &mut z, x);
            let idx = garbled_index_with(model, x, garbling, &mut r, &mut scratch)?;
            clean.push(idx.clean);
            garbled.push(idx.garbled);
        }
        Ok((inputs, clean, garbled))
    });

    let mut out = SimulatedQueries {
        k,
        link: model.link,
        inputs: Vec::with_capacity(n * k),
        clean_index: Vec::with_capacity(n),
        garbled_index: Vec::with_capacity(n),
    };
    for part in parts {
        let (inputs, clean, garbled) = part?;
        out.inputs.extend(inputs);
        out.clean_index.extend(clean);
        out.garbled_index.extend(garbled);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let m = RegressionModel::linear(1.0, vec![2.0, -1.0]).unwrap();
        let g = GarblingConfig::new(vec![0.3, 0.2], 1.5)
            .unwrap()
            .with_output_lambda(0.2);
        let spec = CovariateSpec::bivariate(1.0, 2.0, 0.4, 1).unwrap();
        let n = 3 * CHUNK_ROWS + 17;
        let a = simulate_queries(&m, &g, &spec, n, 5, 1, Execution::Sequential).unwrap();
        let b = simulate_queries(&m, &g, &spec, n, 5, 1, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), n);
    }

    #[test]
    fn common_random_numbers_across_gamma() {
        let m = RegressionModel::linear(0.0, vec![2.0]).unwrap();
        let spec = CovariateSpec::univariate(1.0, 1).unwrap();
        let a = simulate_queries(
            &m,
            &GarblingConfig::new(vec![0.1], 1.0).unwrap(),
            &spec,
            100,
            3,
            7,
            Execution::Sequential,
        )
        .unwrap();
        let b = simulate_queries(
            &m,
            &GarblingConfig::new(vec![0.9], 1.0).unwrap(),
            &spec,
            100,
            3,
            7,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.clean_index, b.clean_index);
        assert_ne!(a.garbled_index, b.garbled_index);
    }
}
