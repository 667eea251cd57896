use cfprobe_core::simulator::ExperimentConfig;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

/// Synthetic experiment on a [1, 5] scale with `Priors` driving the latent
/// score. Cohorts are `(count, profile json)`.
pub fn experiment(seed: u64, n: usize, margin: Option<i64>, cohorts: &[(usize, serde_json::Value)]) -> ExperimentConfig {
    let population: Vec<serde_json::Value> = cohorts
        .iter()
        .map(|(count, profile)| {
            let mut p = profile.clone();
            p["count"] = json!(count);
            p
        })
        .collect();
    serde_json::from_value(json!({
        "seed": seed,
        "scale": {"min": 1, "max": 5},
        "sensitive": {"attribute": "Race", "groups": ["A", "B"]},
        "disfavored": ["B"],
        "pool": {
            "size": 400,
            "numeric": {
                "Priors": {"min": 0, "max": 4, "precision": 0},
                "Age": {"min": 18, "max": 70}
            }
        },
        "latent": {"intercept": 1.0, "weights": {"Priors": 1.0}},
        "disguise": {
            "noise_fields": {"Age": 0.1},
            "identity_pools": {"FirstName": {"A": ["Alden", "Brett"], "B": ["Jamal", "Malik"]}}
        },
        "plan": {"total_items": 4 * n, "probe_pairs": n},
        "probe_margin": margin,
        "population": population,
        "survey": {"items": [
            {"item_id": "s1", "min": 1, "max": 5},
            {"item_id": "s2", "min": 1, "max": 5, "reverse_coded": true}
        ], "shift_ceiling": 2.0},
        "policy": {"mode": "filter", "threshold": 0.2, "combiner": "median"}
    }))
    .unwrap()
}

/// Distribution of `clip_round(mu + N(0, sd))` over `lo..=hi`, from the
/// normal CDF.
pub fn clip_round_pmf(mu: f64, sd: f64, lo: i64, hi: i64) -> Vec<f64> {
    if sd == 0.0 {
        let k = mu.round().clamp(lo as f64, hi as f64) as i64;
        return (lo..=hi).map(|l| if l == k { 1.0 } else { 0.0 }).collect();
    }
    let z = Normal::new(mu, sd).unwrap();
    (lo..=hi)
        .map(|k| {
            let upper = if k == hi { 1.0 } else { z.cdf(k as f64 + 0.5) };
            let lower = if k == lo { 0.0 } else { z.cdf(k as f64 - 0.5) };
            upper - lower
        })
        .collect()
}

/// `E|X - Y|` for independent clip-rounded normals around `mu_x`, `mu_y`.
pub fn expected_abs_diff(mu_x: f64, mu_y: f64, sd: f64, lo: i64, hi: i64) -> f64 {
    let px = clip_round_pmf(mu_x, sd, lo, hi);
    let py = clip_round_pmf(mu_y, sd, lo, hi);
    let mut e = 0.0;
    for (i, a) in px.iter().enumerate() {
        for (j, b) in py.iter().enumerate() {
            e += a * b * (i as f64 - j as f64).abs();
        }
    }
    e
}
