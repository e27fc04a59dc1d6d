use mec_offload::evt::{
    empirical_ccdf, fit_gpd_mom, gpd_ccdf, gpd_moments, ks_distance, last_quartile_stats,
    parameter_trace, ExceedanceLog, GpdFit,
};
use mec_offload::output::exceedances_csv;
use mec_offload::{build_topology, run, RunOptions, Scenario};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inverse-transform GPD sampler.
fn gpd_samples(n: usize, scale: f64, shape: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if shape == 0.0 {
                -scale * (1.0 - u).ln()
            } else {
                scale * ((1.0 - u).powf(-shape) - 1.0) / shape
            }
        })
        .collect()
}

#[test]
fn fit_recovers_synthetic_gpd() {
    for seed in 0..5 {
        let log = ExceedanceLog::from_samples(gpd_samples(10_000, 1.0, 0.3, seed));
        let fit = fit_gpd_mom(&log).unwrap();
        assert!((0.9..=1.1).contains(&fit.scale), "seed {seed}: {fit:?}");
        assert!((0.2..=0.4).contains(&fit.shape), "seed {seed}: {fit:?}");
        assert_eq!(fit.samples, 10_000);
    }
}

#[test]
fn ks_against_generating_law() {
    let truth = GpdFit { scale: 1.0, shape: 0.3, samples: 10_000, clamped: false };
    for seed in 0..5 {
        let xs = gpd_samples(10_000, 1.0, 0.3, 100 + seed);
        let d = ks_distance(&xs, &truth);
        assert!(d <= 0.05, "seed {seed}: {d}");
    }
    // a GPD compared against its own CCDF on a dense grid
    let xs: Vec<f64> = (0..1000).map(|k| k as f64 * 0.01).collect();
    for x in xs {
        assert_eq!(gpd_ccdf(x, 1.0, 0.3), truth.ccdf(x));
    }
}

#[test]
fn stationary_trace_converges() {
    let xs = gpd_samples(20_000, 1.0, 0.3, 7);
    let mut log = ExceedanceLog::new();
    for (t, x) in xs.into_iter().enumerate() {
        log.push(t as u64, x);
    }
    let trace = parameter_trace(&log, 100);
    assert_eq!(trace.len(), 200);
    let scales: Vec<f64> = trace.iter().map(|p| p.scale).collect();
    let (mean, std) = last_quartile_stats(&scales).unwrap();
    assert!(std <= 0.05 * mean, "{std} vs {mean}");
}

#[test]
fn empirical_ccdf_steps() {
    let c = empirical_ccdf(&[3.0, 1.0, 2.0]);
    assert_eq!(c.eval(0.5), 1.0);
    assert!((c.eval(1.5) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(c.eval(3.0), 0.0);
    assert_eq!(c.eval(10.0), 0.0);
}

/// Verdicts in the summary follow from the exported exceedance samples alone.
#[test]
fn verdicts_recomputable_from_exports() {
    let s = Scenario::baseline();
    let mut s = s;
    s.config.num_slots = 20_000;
    let out = run(&s, &build_topology(&s).unwrap(), RunOptions::default()).unwrap();
    let csv = exceedances_csv(&out, &s.config_hash(), s.config.rng_seed);
    let mut checked = 0;
    for p in &out.summary.pairs {
        let samples: Vec<f64> = csv
            .lines()
            .skip(2)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|c| c[0] == "server" && c[1] == p.ue.to_string() && c[2] == p.server.to_string())
            .map(|c| c[4].parse().unwrap())
            .collect();
        assert_eq!(samples.len(), p.exceedances);
        let refit = fit_gpd_mom(&ExceedanceLog::from_samples(samples)).ok();
        assert_eq!(refit.map(|f| (f.scale, f.shape)), p.fit.map(|f| (f.scale, f.shape)));
        if let Some(f) = refit {
            let server = &s.servers[p.server];
            assert_eq!(p.verdicts.scale, Some(f.scale <= p.scale_threshold));
            assert_eq!(p.verdicts.shape, Some(f.shape <= server.gpd_shape_threshold));
            checked += 1;
        }
    }
    assert!(checked > 0, "no fitted server queue in the run");
}

proptest! {
    #[test]
    fn moment_round_trip(scale in 1e-3f64..1e6, shape in -2.0f64..0.499) {
        let (m, v) = gpd_moments(scale, shape);
        let fit = GpdFit::from_moments(m, v, 100).unwrap();
        prop_assert!((fit.scale - scale).abs() <= 1e-10 * scale);
        prop_assert!((fit.shape - shape).abs() <= 1e-10);
    }

    #[test]
    fn ccdf_is_a_tail(scale in 1e-3f64..1e3, shape in -2.0f64..0.499,
                      mut xs in prop::collection::vec(0.0f64..1e4, 2..40)) {
        prop_assert_eq!(gpd_ccdf(0.0, scale, shape), 1.0);
        xs.sort_by(f64::total_cmp);
        let mut prev = 1.0;
        for x in xs {
            let c = gpd_ccdf(x, scale, shape);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn running_moments_agree_with_batch(xs in prop::collection::vec(1e-3f64..1e6, 2..200)) {
        let log = ExceedanceLog::from_samples(xs.iter().copied());
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let second = xs.iter().map(|x| x * x).sum::<f64>() / n;
        prop_assert!((log.mean() - mean).abs() <= 1e-9 * mean);
        prop_assert!((log.variance() - var).abs() <= 1e-9 * var.max(mean * mean * 1e-12));
        prop_assert!((log.second_moment() - second).abs() <= 1e-9 * second);
    }
}
