/// Moving-average filter over the last `span` inputs, O(1) per sample.
///
/// Keeps a running sum over a ring buffer; the sum is recomputed from the
/// buffer each time the write position wraps so rounding error cannot build
/// up over a night.
#[derive(Clone, Debug)]
pub struct MovingAverage {
    buf: Vec<f64>,
    pos: usize,
    sum: f64,
    inv_span: f64,
}

impl MovingAverage {
    pub fn new(span: usize) -> Self {
        assert!(span >= 1, "moving-average span must be at least 1");
        Self {
            buf: vec![0.0; span],
            pos: 0,
            sum: 0.0,
            inv_span: 1.0 / span as f64,
        }
    }

    pub fn span(&self) -> usize {
        self.buf.len()
    }

    /// Pushes `x` and returns the mean of the last `span` samples
    /// (zeros before the buffer has filled).
    #[inline]
    pub fn push(&mut self, x: f64) -> f64 {
        let old = std::mem::replace(&mut self.buf[self.pos], x);
        self.sum += x - old;
        self.pos += 1;
        if self.pos == self.buf.len() {
            self.pos = 0;
            self.sum = self.buf.iter().sum();
        }
        self.sum * self.inv_span
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.pos = 0;
        self.sum = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_naive_window_mean(xs in prop::collection::vec(-100.0f64..100.0, 1..400), span in 1usize..40) {
            let mut maf = MovingAverage::new(span);
            for (n, &x) in xs.iter().enumerate() {
                let got = maf.push(x);
                let lo = (n + 1).saturating_sub(span);
                let want = xs[lo..=n].iter().sum::<f64>() / span as f64;
                prop_assert!((got - want).abs() < 1e-9);
            }
        }
    }
}
