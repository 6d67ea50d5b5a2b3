//! Composite Simpson grids.

/// Uniform grid on `[lo, hi]` with an odd number of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpsonGrid {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl SimpsonGrid {
    /// `n` is rounded up to the next odd number (minimum 3).
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        let n = n.max(3) | 1;
        let h = (hi - lo) / (n - 1) as f64;
        Self { lo, h, n }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    pub fn hi(&self) -> f64 {
        self.node(self.n - 1)
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let third = self.h / 3.0;
        if i == 0 || i == self.n - 1 {
            third
        } else if i % 2 == 1 {
            4.0 * third
        } else {
            2.0 * third
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Simpson-weighted masses `w_i f(x_i)`.
    pub fn weighted(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .sum()
    }
}
