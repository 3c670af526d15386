//! Equal-mass and uniform-width binning of voxel predictions.
//!
//! Both schemes produce a [`BinStats`]: per-bin weight `w_b = |B_b| / |V|`,
//! mean confidence, the positive rate of every rater, and the per-bin mean
//! human response (the row mean of the rater rates).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    /// Fraction of all voxels falling in each bin.
    pub weights: Vec<f64>,
    /// Mean prediction per bin. Empty uniform bins report their midpoint.
    pub mean_confidence: Vec<f64>,
    /// `per_rater_rate[b][i]`: fraction of bin `b` that rater `i` marked positive.
    pub per_rater_rate: Vec<Vec<f64>>,
    /// Mean of `per_rater_rate[b]` over raters.
    pub mhr_rate: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BinStats {
    pub fn bin_count(&self) -> usize {
        self.weights.len()
    }

    pub fn rater_count(&self) -> usize {
        self.per_rater_rate.first().map_or(0, Vec::len)
    }

    pub fn total_voxels(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Rates of rater `i` across bins.
    pub fn rater_column(&self, i: usize) -> Vec<f64> {
        self.per_rater_rate.iter().map(|row| row[i]).collect()
    }

    /// Indices of bins holding at least one voxel.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, _)| b)
    }
}

fn check_inputs<P, L>(predictions: &[P], targets: &[L]) -> Result<()>
where
    P: Copy + Into<f64>,
    L: AsRef<[u8]>,
{
    if targets.is_empty() {
        return Err(Error::ShapeMismatch("at least one rater column is required"));
    }
    if targets.iter().any(|t| t.as_ref().len() != predictions.len()) {
        return Err(Error::ShapeMismatch(
            "every rater column must match the prediction count",
        ));
    }
    if let Some(i) = predictions.iter().position(|&p| !p.into().is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Running per-bin sums; counts and label totals are exact integers.
#[derive(Debug, Clone)]
struct BinSums {
    counts: Vec<usize>,
    conf: Vec<f64>,
    positives: Vec<Vec<u64>>,
}

impl BinSums {
    fn new(bins: usize, raters: usize) -> Self {
        Self {
            counts: vec![0; bins],
            conf: vec![0.0; bins],
            positives: vec![vec![0; raters]; bins],
        }
    }

    fn finish(self, empty_confidence: impl Fn(usize) -> f64) -> BinStats {
        let total: usize = self.counts.iter().sum();
        let bins = self.counts.len();
        let mut weights = Vec::with_capacity(bins);
        let mut mean_confidence = Vec::with_capacity(bins);
        let mut per_rater_rate = Vec::with_capacity(bins);
        let mut mhr_rate = Vec::with_capacity(bins);
        for b in 0..bins {
            let n = self.counts[b];
            if n == 0 {
                weights.push(0.0);
                mean_confidence.push(empty_confidence(b));
                per_rater_rate.push(vec![0.0; self.positives[b].len()]);
                mhr_rate.push(0.0);
                continue;
            }
            let nf = n as f64;
            weights.push(nf / total as f64);
            mean_confidence.push(self.conf[b] / nf);
            let rates: Vec<f64> = self.positives[b].iter().map(|&k| k as f64 / nf).collect();
            mhr_rate.push(rates.iter().sum::<f64>() / rates.len() as f64);
            per_rater_rate.push(rates);
        }
        BinStats {
            weights,
            mean_confidence,
            per_rater_rate,
            mhr_rate,
            counts: self.counts,
        }
    }
}

/// Sort voxels by prediction and cut them into `bins` contiguous groups of
/// near-equal size.
///
/// Ties are ordered by original index. With `|V| = q·M + r`, the first `r`
/// bins get `q + 1` voxels and the rest get `q`.
pub fn equal_mass_bins<P, L>(predictions: &[P], targets: &[L], bins: usize) -> Result<BinStats>
where
    P: Copy + Into<f64>,
    L: AsRef<[u8]>,
{
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    check_inputs(predictions, targets)?;
    let n = predictions.len();
    if n < bins {
        return Err(Error::TooFewVoxels { voxels: n, bins });
    }
    let values: Vec<f64> = predictions.iter().map(|&p| p.into()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // (value, index) is a total order, so an unstable sort yields the stable result.
    order.sort_unstable_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("finite values")
            .then(a.cmp(&b))
    });

    let columns: Vec<&[u8]> = targets.iter().map(AsRef::as_ref).collect();
    let mut sums = BinSums::new(bins, columns.len());
    let base = n / bins;
    let extra = n % bins;
    let mut start = 0;
    for b in 0..bins {
        let size = base + usize::from(b < extra);
        let members = &order[start..start + size];
        sums.counts[b] = size;
        for &v in members {
            sums.conf[b] += values[v];
        }
        for (i, col) in columns.iter().enumerate() {
            sums.positives[b][i] = members.iter().map(|&v| u64::from(col[v])).sum();
        }
        start += size;
    }
    Ok(sums.finish(|_| unreachable!("equal-mass bins are never empty")))
}

/// Bin index of `p` among `bins` uniform bins on [0, 1]; 1.0 lands in the last bin.
#[inline]
pub fn uniform_bin_index(p: f64, bins: usize) -> usize {
    // `as` saturates, so negative inputs map to bin 0.
    (libm::floor(p * bins as f64) as usize).min(bins - 1)
}

/// Accumulates uniform-bin statistics over several arrays (e.g. the cases of
/// a test split) in the order they are added.
#[derive(Debug, Clone)]
pub struct UniformBinAccumulator {
    sums: BinSums,
    raters: usize,
}

impl UniformBinAccumulator {
    pub fn new(bins: usize, raters: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::ZeroBins);
        }
        if raters == 0 {
            return Err(Error::ShapeMismatch("at least one rater column is required"));
        }
        Ok(Self {
            sums: BinSums::new(bins, raters),
            raters,
        })
    }

    pub fn add<P, L>(&mut self, predictions: &[P], targets: &[L]) -> Result<()>
    where
        P: Copy + Into<f64>,
        L: AsRef<[u8]>,
    {
        check_inputs(predictions, targets)?;
        if targets.len() != self.raters {
            return Err(Error::ShapeMismatch("rater count differs from accumulator"));
        }
        let bins = self.sums.counts.len();
        let columns: Vec<&[u8]> = targets.iter().map(AsRef::as_ref).collect();
        for (v, &p) in predictions.iter().enumerate() {
            let p = p.into();
            let b = uniform_bin_index(p, bins);
            self.sums.counts[b] += 1;
            self.sums.conf[b] += p;
            for (i, col) in columns.iter().enumerate() {
                self.sums.positives[b][i] += u64::from(col[v]);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> BinStats {
        let bins = self.sums.counts.len() as f64;
        self.sums.finish(|b| (b as f64 + 0.5) / bins)
    }
}

/// Assign each voxel to bin `min(floor(p·M), M−1)` of `bins` uniform bins.
/// Empty bins get zero weight and report their midpoint as confidence.
pub fn uniform_bins<P, L>(predictions: &[P], targets: &[L], bins: usize) -> Result<BinStats>
where
    P: Copy + Into<f64>,
    L: AsRef<[u8]>,
{
    let mut acc = UniformBinAccumulator::new(bins, targets.len())?;
    acc.add(predictions, targets)?;
    Ok(acc.finish())
}
