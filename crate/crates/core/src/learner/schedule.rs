use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    /// `base · (1 − t/max)^power`.
    Poly { power: f64 },
    Constant,
    /// Constant up to `max/2`, then linear to zero at `max`.
    LinearDecay,
}

/// Learning rate at step (or epoch) `t` of `max`. Values of `t` past `max`
/// are clamped.
pub fn lr_at(base: f64, schedule: Schedule, t: u64, max: u64) -> f64 {
    if max == 0 {
        return base;
    }
    let t = t.min(max) as f64;
    let max = max as f64;
    match schedule {
        Schedule::Poly { power } => base * (1.0 - t / max).powf(power),
        Schedule::Constant => base,
        Schedule::LinearDecay => {
            let hold = max / 2.0;
            if t <= hold {
                base
            } else {
                base * (max - t) / (max - hold)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_starts_at_base_and_halfway_value() {
        let p = Schedule::Poly { power: 0.9 };
        assert_eq!(lr_at(5e-5, p, 0, 90_000), 5e-5);
        let mid = lr_at(5e-5, p, 45_000, 90_000);
        assert!((mid - 5e-5 * 0.5f64.powf(0.9)).abs() < 1e-18);
        assert!((mid - 2.679e-5).abs() < 1e-8);
        assert_eq!(lr_at(5e-5, p, 90_000, 90_000), 0.0);
    }

    #[test]
    fn linear_decay_holds_then_reaches_zero() {
        let s = Schedule::LinearDecay;
        assert_eq!(lr_at(2e-4, s, 0, 200), 2e-4);
        assert_eq!(lr_at(2e-4, s, 100, 200), 2e-4);
        assert!((lr_at(2e-4, s, 150, 200) - 1e-4).abs() < 1e-18);
        assert_eq!(lr_at(2e-4, s, 200, 200), 0.0);
    }
}
