//! Sufficient statistics of one group pair at one hierarchy level.

use crate::exact::ExactSum;
use smallvec::SmallVec;

/// Relative threshold below which a scaled variance is treated as zero.
pub const Z_CLAMP: f64 = 1e-12;

/// Which statistics of a channel a pair maintains. Squares are only read by
/// the normal family, and conjugate channels are only scored at the bottom
/// level, so the rest is skipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tracked {
    Nothing,
    Sum,
    SumAndSquares,
}

#[derive(Clone, Debug, Default)]
pub struct ChannelSums {
    /// Sum of the values (`μ̄`).
    pub sum: ExactSum,
    /// Sum of squared values (`ν̄`).
    pub sumsq: ExactSum,
}

#[derive(Clone, Debug, Default)]
pub struct PairStats {
    /// Edge count between the two groups.
    pub m: u64,
    /// Number of values pooled in this pair: parallel edges at the bottom
    /// level, non-empty lower-level pairs above it.
    pub n: u64,
    pub channels: SmallVec<[ChannelSums; 2]>,
    pub(crate) stamp: u64,
    /// Cached log-likelihood contribution, kept current by the block state.
    pub(crate) term: f64,
}

impl PairStats {
    pub fn with_channels(channels: usize) -> Self {
        Self {
            channels: (0..channels).map(|_| ChannelSums::default()).collect(),
            ..Default::default()
        }
    }

    /// Statistics of a single edge with parallel copies `values[c]`.
    pub fn from_edge(values: &[&[f64]], multiplicity: u64, tracking: &[Tracked]) -> Self {
        let mut s = Self::with_channels(values.len());
        s.m = multiplicity;
        s.n = multiplicity;
        for (c, vals) in values.iter().enumerate() {
            for &x in *vals {
                if tracking[c] != Tracked::Nothing {
                    s.channels[c].sum.add_f64(x);
                }
                if tracking[c] == Tracked::SumAndSquares {
                    s.channels[c].sumsq.add_f64(x * x);
                }
            }
        }
        s
    }

    fn ensure_channels(&mut self, k: usize) {
        while self.channels.len() < k {
            self.channels.push(ChannelSums::default());
        }
    }

    pub fn add(&mut self, other: &PairStats) {
        self.ensure_channels(other.channels.len());
        self.m += other.m;
        self.n += other.n;
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.sum.add(&b.sum);
            a.sumsq.add(&b.sumsq);
        }
    }

    pub fn sub(&mut self, other: &PairStats) {
        self.ensure_channels(other.channels.len());
        self.m -= other.m;
        self.n -= other.n;
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.sum.sub(&b.sum);
            a.sumsq.sub(&b.sumsq);
        }
    }

    /// This pair's contribution to its parent pair one level up: its edge
    /// count, one pooled value per channel (its sum) and that value squared.
    pub fn lifted(&self, tracking: &[Tracked]) -> PairStats {
        let mut out = PairStats {
            m: self.m,
            n: (self.m > 0) as u64,
            channels: SmallVec::new(),
            stamp: 0,
            term: 0.0,
        };
        for (ch, &t) in self.channels.iter().zip(tracking) {
            let mut lifted = ChannelSums::default();
            if t != Tracked::Nothing {
                lifted.sum = ch.sum.clone();
            }
            if t == Tracked::SumAndSquares {
                let v = ch.sum.value();
                lifted.sumsq = ExactSum::from_f64(v * v);
            }
            out.channels.push(lifted);
        }
        out
    }

    /// Swaps the lifted contribution of `old` for that of `cur`, as
    /// subtracting `old.lifted(&ALL)` and adding `cur.lifted(&ALL)` would.
    pub fn replace_lift(&mut self, old: &PairStats, cur: &PairStats, tracking: &[Tracked]) {
        self.ensure_channels(tracking.len());
        self.m = self.m + cur.m - old.m;
        self.n = self.n + (cur.m > 0) as u64 - (old.m > 0) as u64;
        for (c, (ch, &t)) in self.channels.iter_mut().zip(tracking).enumerate() {
            if t == Tracked::Nothing {
                continue;
            }
            if let Some(o) = old.channels.get(c) {
                if t == Tracked::SumAndSquares {
                    let v = o.sum.value();
                    ch.sumsq.sub_f64(v * v);
                }
                ch.sum.sub(&o.sum);
            }
            if let Some(n) = cur.channels.get(c) {
                if t == Tracked::SumAndSquares {
                    let v = n.sum.value();
                    ch.sumsq.add_f64(v * v);
                }
                ch.sum.add(&n.sum);
            }
        }
    }

    /// Whether both pairs lift to the same parent contribution.
    pub fn same_lift(&self, other: &PairStats) -> bool {
        if self.m != other.m {
            return false;
        }
        let k = self.channels.len().max(other.channels.len());
        let zero = ChannelSums::default();
        (0..k).all(|c| {
            let a = self.channels.get(c).unwrap_or(&zero);
            let b = other.channels.get(c).unwrap_or(&zero);
            a.sum.exact_eq(&b.sum)
        })
    }

    /// Exact equality of all statistics.
    pub fn same_stats(&self, other: &PairStats) -> bool {
        if self.m != other.m || self.n != other.n {
            return false;
        }
        let k = self.channels.len().max(other.channels.len());
        let zero = ChannelSums::default();
        (0..k).all(|c| {
            let a = self.channels.get(c).unwrap_or(&zero);
            let b = other.channels.get(c).unwrap_or(&zero);
            a.sum.exact_eq(&b.sum) && a.sumsq.exact_eq(&b.sumsq)
        })
    }

    pub fn sum(&self, c: usize) -> f64 {
        self.channels.get(c).map_or(0.0, |s| s.sum.value())
    }

    pub fn sumsq(&self, c: usize) -> f64 {
        self.channels.get(c).map_or(0.0, |s| s.sumsq.value())
    }

    /// `z̄ = ν̄ − μ̄² / n`, clamped to zero when it is within rounding noise.
    pub fn scaled_variance(&self, c: usize) -> f64 {
        scaled_variance(self.n, self.sum(c), self.sumsq(c))
    }
}

pub fn scaled_variance(n: u64, sum: f64, sumsq: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z = sumsq - sum * sum / n as f64;
    if z <= Z_CLAMP * sumsq.abs() {
        0.0
    } else {
        z
    }
}
