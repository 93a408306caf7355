//! Truncated path signatures over the tensor algebra.
//!
//! Level `k` of a signature over `c` channels is a flattened `c^k` tensor in
//! row-major multi-index order. Level 0 is the implicit scalar 1.

use crate::error::{invalid, Result};

pub const MAX_DEPTH: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct PathSignature {
    channels: usize,
    levels: Vec<Vec<f64>>,
}

impl PathSignature {
    /// Signature of a constant path (all levels zero).
    pub fn identity(channels: usize, depth: usize) -> Self {
        Self {
            channels,
            levels: (1..=depth).map(|k| vec![0.0; channels.pow(k as u32)]).collect(),
        }
    }

    /// Signature of a single straight segment with the given increment:
    /// level `k` is `v^⊗k / k!`.
    pub fn segment(increment: &[f64], depth: usize) -> Self {
        let c = increment.len();
        let mut levels: Vec<Vec<f64>> = Vec::with_capacity(depth);
        for k in 1..=depth {
            let level = match levels.last() {
                None => increment.to_vec(),
                Some(prev) => {
                    let mut next = Vec::with_capacity(prev.len() * c);
                    for &p in prev {
                        for &v in increment {
                            next.push(p * v / k as f64);
                        }
                    }
                    next
                }
            };
            levels.push(level);
        }
        Self { channels: c, levels }
    }

    /// Signature of the piecewise-linear path through `points` (one point per row).
    pub fn of_path<P: AsRef<[f64]>>(points: &[P], depth: usize) -> Result<Self> {
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(invalid(format!("signature depth must be in 1..={MAX_DEPTH}, got {depth}")));
        }
        if points.len() < 2 {
            return Err(invalid("signature needs a path with at least two points"));
        }
        let c = points[0].as_ref().len();
        if points.iter().any(|p| p.as_ref().len() != c) {
            return Err(invalid("path points have inconsistent dimension"));
        }
        let mut sig = Self::identity(c, depth);
        let mut inc = vec![0.0; c];
        for w in points.windows(2) {
            for ((d, a), b) in inc.iter_mut().zip(w[0].as_ref()).zip(w[1].as_ref()) {
                *d = b - a;
            }
            sig = sig.concat(&Self::segment(&inc, depth));
        }
        Ok(sig)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    /// Chen product: the signature of this path followed by `other`.
    ///
    /// `(a ∗ b)_k = Σ_{i+j=k} a_i ⊗ b_j`, truncated at the common depth.
    pub fn concat(&self, other: &PathSignature) -> PathSignature {
        assert_eq!(self.channels, other.channels, "channel mismatch");
        let depth = self.depth().min(other.depth());
        let mut levels = Vec::with_capacity(depth);
        for k in 1..=depth {
            let mut out: Vec<f64> = self.levels[k - 1]
                .iter()
                .zip(&other.levels[k - 1])
                .map(|(a, b)| a + b)
                .collect();
            for i in 1..k {
                let a = &self.levels[i - 1];
                let b = &other.levels[k - i - 1];
                for (ia, &av) in a.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let base = ia * b.len();
                    for (ib, &bv) in b.iter().enumerate() {
                        out[base + ib] += av * bv;
                    }
                }
            }
            levels.push(out);
        }
        PathSignature {
            channels: self.channels,
            levels,
        }
    }

    /// All levels concatenated, level 1 first.
    pub fn flatten(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }

    /// `Σ_{k=1..depth} c^k`.
    pub fn flat_len(channels: usize, depth: usize) -> usize {
        (1..=depth).map(|k| channels.pow(k as u32)).sum()
    }
}
