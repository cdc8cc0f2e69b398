//! Composite quadrature on uniformly spaced samples.

/// Composite trapezoid rule. Returns 0 for fewer than two samples.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => h * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Composite Simpson rule.
///
/// With an odd number of intervals the last three are integrated with
/// Simpson's 3/8 rule. Two samples fall back to the trapezoid rule.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let intervals = samples.len().saturating_sub(1);
    if intervals < 2 {
        return trapezoid(samples, h);
    }
    if intervals % 2 == 1 {
        if intervals == 3 {
            return simpson_38(samples, h);
        }
        let split = intervals - 3;
        return simpson_even(&samples[..=split], h) + simpson_38(&samples[split..], h);
    }
    simpson_even(samples, h)
}

fn simpson_even(samples: &[f64], h: f64) -> f64 {
    let n = samples.len() - 1;
    let mut acc = samples[0] + samples[n];
    for (i, s) in samples.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * s } else { 2.0 * s };
    }
    acc * h / 3.0
}

fn simpson_38(s: &[f64], h: f64) -> f64 {
    3.0 * h / 8.0 * (s[0] + 3.0 * s[1] + 3.0 * s[2] + s[3])
}
