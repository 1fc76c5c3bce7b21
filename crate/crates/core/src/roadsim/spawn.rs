//! Poisson vehicle arrivals at entrances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

/// Arrival stream of one entrance. Inter-arrival gaps are drawn one at a
/// time, so changing the rate rescales every arrival time without
/// reshuffling the underlying random sequence.
#[derive(Debug, Clone)]
pub struct PoissonArrivals {
    rate_per_s: f64,
    next: f64,
    rng: ChaCha8Rng,
}

impl PoissonArrivals {
    /// `input_rate` in pcu/h; zero or negative disables the stream.
    pub fn new(input_rate: f64, mut rng: ChaCha8Rng) -> Self {
        let rate_per_s = input_rate.max(0.0) / 3600.0;
        let next = draw_gap(rate_per_s, &mut rng);
        PoissonArrivals { rate_per_s, next, rng }
    }

    pub fn rate_per_s(&self) -> f64 {
        self.rate_per_s
    }

    /// Arrival times falling in `[t, t + dt)`.
    pub fn arrivals(&mut self, t: f64, dt: f64) -> Vec<f64> {
        let mut out = Vec::new();
        while self.next < t + dt {
            out.push(self.next);
            self.next += draw_gap(self.rate_per_s, &mut self.rng);
        }
        out
    }
}

fn draw_gap(rate_per_s: f64, rng: &mut ChaCha8Rng) -> f64 {
    if rate_per_s > 0.0 {
        let e: f64 = rng.sample(Exp1);
        e / rate_per_s
    } else {
        f64::INFINITY
    }
}

/// Number of vehicles generated per step over `horizon` seconds.
pub fn spawn_counts(input_rate: f64, dt: f64, horizon: f64, rng: ChaCha8Rng) -> Vec<usize> {
    let mut arrivals = PoissonArrivals::new(input_rate, rng);
    let steps = (horizon / dt).round() as usize;
    (0..steps)
        .map(|k| arrivals.arrivals(k as f64 * dt, dt).len())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn zero_rate_never_spawns() {
        let counts = spawn_counts(0.0, 0.1, 600.0, rng_for(1, &[]));
        assert!(counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn arrivals_are_ordered_and_in_window() {
        let mut a = PoissonArrivals::new(7200.0, rng_for(3, &[]));
        let mut last = 0.0;
        for k in 0..1000 {
            let t = k as f64 * 0.1;
            for x in a.arrivals(t, 0.1) {
                assert!(x >= t && x < t + 0.1 && x >= last);
                last = x;
            }
        }
    }
}
