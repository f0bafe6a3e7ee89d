/// Number of warmup steps: `ceil(fraction * total)`.
pub fn warmup_steps(total_steps: usize, warmup_fraction: f64) -> usize {
    // the epsilon keeps 0.1 * 30 from rounding up to 4
    ((warmup_fraction * total_steps as f64) - 1e-9)
        .ceil()
        .max(0.0) as usize
}

/// Linear warmup from 0 to `peak`, then linear decay to 0 at `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, peak: f64, warmup_fraction: f64) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    let step = step.min(total_steps);
    let warm = warmup_steps(total_steps, warmup_fraction).max(1);
    if step <= warm {
        peak * step as f64 / warm as f64
    } else {
        peak * (total_steps - step) as f64 / (total_steps - warm) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_peak() {
        let peak = 2e-5;
        assert_eq!(lr_at(0, 100, peak, 0.1), 0.0);
        assert_eq!(lr_at(10, 100, peak, 0.1), peak);
        assert_eq!(lr_at(100, 100, peak, 0.1), 0.0);
        assert_eq!(warmup_steps(30, 0.1), 3);
        assert_eq!(warmup_steps(31, 0.1), 4);
        assert_eq!(lr_at(4, 31, peak, 0.1), peak);
    }

    #[test]
    fn piecewise_linear_with_exact_max() {
        for total in [1usize, 2, 7, 10, 33, 250] {
            let lrs: Vec<f64> = (0..=total).map(|s| lr_at(s, total, 1.0, 0.1)).collect();
            let max = lrs.iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(max, 1.0, "total {total}");
            let warm = warmup_steps(total, 0.1).max(1);
            // second differences vanish away from the corner
            for s in 1..total {
                if s == warm {
                    continue;
                }
                let d2 = lrs[s + 1] - 2.0 * lrs[s] + lrs[s - 1];
                assert!(d2.abs() < 1e-12, "total {total} step {s}");
            }
            // continuity: neighbouring steps never jump by more than one slope
            let slope = 1.0 / warm as f64;
            for w in lrs.windows(2) {
                assert!(
                    (w[1] - w[0]).abs() <= slope.max(1.0 / (total - warm).max(1) as f64) + 1e-12
                );
            }
        }
    }
}
