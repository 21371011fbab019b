//! Small statistics helpers for Monte-Carlo reporting.

/// Wilson score interval at 95% confidence.
pub fn ci95(successes: u64, trials: u64) -> [f64; 2] {
    if trials == 0 {
        return [0.0, 1.0];
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / denom;
    [
        (centre - half).max(0.0).min(p),
        (centre + half).min(1.0).max(p),
    ]
}

/// Standard error of a proportion `p` estimated from `n` samples.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / n as f64).sqrt()
}

/// Standard error of a proportion with a floor for degenerate `p`, so that a
/// three-sigma band never collapses to zero width.
pub fn binomial_sigma_floored(p: f64, n: u64) -> f64 {
    binomial_sigma(p, n).max(1.0 / n.max(1) as f64)
}
