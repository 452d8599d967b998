//! Statistical correctness of the resampling schemes.

use fixlag::engine::{multinomial_resample, systematic_resample};
use fixlag::rng::{derive_seed, RngContract};
use fixlag::ParticleCloud;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

fn cloud_from(positions: &[f64], log_weights: &[f64]) -> ParticleCloud<f64> {
    ParticleCloud::new(0, positions.to_vec(), log_weights.to_vec()).unwrap()
}

#[test]
fn multinomial_offspring_pass_chi_square_gof() {
    // Uniform weights, N = 1000, 1000 repetitions: pooled offspring counts
    // against the uniform multinomial at level 0.01.
    let n = 1000usize;
    let reps = 1000usize;
    let positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let cloud = cloud_from(&positions, &vec![0.0; n]);
    let mut counts = vec![0u64; n];
    for rep in 0..reps {
        let rng = RngContract::new(derive_seed(1234, rep as u64));
        let (_, anc) = multinomial_resample(&cloud, &rng).unwrap();
        for a in anc {
            counts[a] += 1;
        }
    }
    let expected = reps as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let critical = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(
        statistic < critical,
        "chi-square statistic {statistic:.2} exceeds critical value {critical:.2}"
    );
}

#[test]
fn multinomial_resampling_is_conditionally_unbiased() {
    // Conditional on the cloud, the mean of the resampled f-average over
    // independent resamplings matches the weighted f-average (f = identity).
    let positions = [0.3, -1.7, 2.4, 0.9, -0.2, 3.1, -2.8, 1.2];
    let log_weights = [0.0, -1.0, 0.5, -2.0, 1.0, -0.3, 0.2, -1.5];
    let cloud = cloud_from(&positions, &log_weights);
    let w = cloud.normalized_weights().unwrap();
    let target: f64 = w.iter().zip(&positions).map(|(wi, xi)| wi * xi).sum();

    let reps = 10_000usize;
    let mut means = Vec::with_capacity(reps);
    for rep in 0..reps {
        let rng = RngContract::new(derive_seed(777, rep as u64));
        let (resampled, _) = multinomial_resample(&cloud, &rng).unwrap();
        means.push(resampled.positions().iter().sum::<f64>() / positions.len() as f64);
    }
    let mean = means.iter().sum::<f64>() / reps as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!(
        (mean - target).abs() < 4.0 * se,
        "resampled mean {mean} vs weighted mean {target} (se {se})"
    );
}

#[test]
fn both_schemes_have_correct_marginal_offspring_counts() {
    let positions = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let log_weights = [1.2, -0.4, 0.0, -2.0, 0.8, -1.0];
    let cloud = cloud_from(&positions, &log_weights);
    let w = cloud.normalized_weights().unwrap();
    let n = positions.len();
    let reps = 20_000usize;
    type ResampleFn =
        fn(&ParticleCloud<f64>, &RngContract) -> fixlag::Result<(ParticleCloud<f64>, Vec<usize>)>;
    for (name, f) in [
        ("multinomial", multinomial_resample as ResampleFn),
        ("systematic", systematic_resample as ResampleFn),
    ] {
        let mut totals = vec![0u64; n];
        for rep in 0..reps {
            let rng = RngContract::new(derive_seed(42, rep as u64));
            let (_, anc) = f(&cloud, &rng).unwrap();
            for a in anc {
                totals[a] += 1;
            }
        }
        for j in 0..n {
            let mean_count = totals[j] as f64 / reps as f64;
            let expect = n as f64 * w[j];
            // Offspring counts are bounded by N, so a generous CLT band of
            // N / sqrt(reps) covers both schemes.
            let band = 4.0 * n as f64 / (reps as f64).sqrt();
            assert!(
                (mean_count - expect).abs() < band,
                "{name}: particle {j} mean count {mean_count} vs {expect}"
            );
        }
    }
}

#[test]
fn systematic_dominates_multinomial_variance() {
    // For a fixed skewed cloud and f = identity, the resampled-average
    // variance under systematic resampling is no larger than under
    // multinomial resampling (F-test at level 0.01, 500 replicates each).
    let n = 64usize;
    let positions: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
    let log_weights: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).cos() * 1.5).collect();
    let cloud = cloud_from(&positions, &log_weights);

    let reps = 500usize;
    let sample_vars = |scheme: fn(&ParticleCloud<f64>, &RngContract) -> fixlag::Result<(ParticleCloud<f64>, Vec<usize>)>,
                       salt: u64|
     -> f64 {
        let mut means = Vec::with_capacity(reps);
        for rep in 0..reps {
            let rng = RngContract::new(derive_seed(salt, rep as u64));
            let (resampled, _) = scheme(&cloud, &rng).unwrap();
            means.push(resampled.positions().iter().sum::<f64>() / n as f64);
        }
        let m = means.iter().sum::<f64>() / reps as f64;
        means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (reps - 1) as f64
    };
    let var_mult = sample_vars(multinomial_resample, 101);
    let var_syst = sample_vars(systematic_resample, 202);
    assert!(var_syst <= var_mult, "systematic variance {var_syst} > multinomial {var_mult}");
    if var_syst > 0.0 {
        let f_stat = var_mult / var_syst;
        let crit = FisherSnedecor::new((reps - 1) as f64, (reps - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(
            f_stat > crit,
            "variance reduction not significant: F = {f_stat:.3}, critical {crit:.3}"
        );
    }
}
