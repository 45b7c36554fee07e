//! Sample-level execution: every Monte Carlo routine maps a pure function
//! over sample indices and reduces with an order-independent sum, so the
//! sequential and rayon paths produce identical results.

/// How independent samples (or corpus instances) are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing. Without the `parallel` feature this runs
    /// sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Evaluates `f` on `0..count`, returning results in index order.
    pub fn map<T, F>(self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(f).collect()
            }
            _ => (0..count).map(f).collect(),
        }
    }

    /// Evaluates `f` on every item of a slice, preserving order.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Number of indices in `0..count` for which `f` holds.
    pub fn count<F>(self, count: u64, f: F) -> u64
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().filter(|&i| f(i)).count() as u64
            }
            _ => (0..count).filter(|&i| f(i)).count() as u64,
        }
    }

    /// Sum and sum of squares of `f` over `0..count`.
    ///
    /// Values are collected first and summed in index order so the floating
    /// point result does not depend on the schedule.
    pub fn moments<F>(self, count: u64, f: F) -> Moments
    where
        F: Fn(u64) -> f64 + Sync + Send,
    {
        Moments::from_values(&self.map(count, f))
    }
}

/// Running first and second moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn from_values(values: &[f64]) -> Self {
        let mut m = Moments::default();
        for &x in values {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: u64| ((i * 2654435761) % 1000) as f64 / 7.0;
        let a = Execution::Sequential.moments(10_000, f);
        let b = Execution::Parallel.moments(10_000, f);
        assert_eq!(a, b);
        assert_eq!(
            Execution::Sequential.count(5000, |i| i % 3 == 0),
            Execution::Parallel.count(5000, |i| i % 3 == 0)
        );
        assert_eq!(Execution::Parallel.map(5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }

    #[test]
    fn moments_of_known_sample() {
        let m = Moments::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
        assert!((m.std_error() - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
