use nalgebra::DMatrix;

use super::Field;
use crate::error::{Error, Result};

/// Largest number of indices handled by exhaustive pairing enumeration.
pub const MAX_WICK_ORDER: usize = 8;

/// A position in a gridded field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateIndex {
    pub component: usize,
    pub site: usize,
}

impl StateIndex {
    pub fn new(component: usize, site: usize) -> Self {
        Self { component, site }
    }

    fn flat(self, n: usize) -> usize {
        self.component * n + self.site
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `⟨Π (u_i − ⟨u_i⟩)⟩`
    Central,
    /// `⟨Π u_i⟩`
    Raw,
}

/// Gaussian moment of a product of field values.
///
/// Central moments vanish for an odd number of factors and are otherwise the
/// sum over all perfect pairings of products of covariances. Raw moments
/// expand each factor about its mean.
pub fn wick_moment(
    cov: &DMatrix<f64>,
    mean: &Field,
    indices: &[StateIndex],
    kind: MomentKind,
) -> Result<f64> {
    if indices.len() > MAX_WICK_ORDER {
        return Err(Error::UnsupportedOrder(indices.len()));
    }
    let n = mean.n();
    let dim = mean.d() * n;
    if cov.nrows() != dim || cov.ncols() != dim {
        return Err(Error::DimensionMismatch {
            what: "covariance size",
            expected: dim,
            found: cov.nrows(),
        });
    }
    for ix in indices {
        if ix.component >= mean.d() || ix.site >= n {
            return Err(Error::InvalidInput(format!("index {ix:?} outside the field")));
        }
    }
    let flat: Vec<usize> = indices.iter().map(|ix| ix.flat(n)).collect();
    match kind {
        MomentKind::Central => Ok(central(cov, &flat)),
        MomentKind::Raw => {
            let means: Vec<f64> = indices.iter().map(|ix| mean.component(ix.component)[ix.site]).collect();
            let l = flat.len();
            let mut total = 0.0;
            // Subset `mask` holds the fluctuating factors; the rest contribute
            // their means.
            for mask in 0u32..(1 << l) {
                if mask.count_ones() % 2 == 1 {
                    continue;
                }
                let mut fixed = 1.0;
                let mut sub = Vec::with_capacity(l);
                for (k, &f) in flat.iter().enumerate() {
                    if mask & (1 << k) != 0 {
                        sub.push(f);
                    } else {
                        fixed *= means[k];
                    }
                }
                if fixed != 0.0 {
                    total += fixed * central(cov, &sub);
                }
            }
            Ok(total)
        }
    }
}

/// Sum over pairings: pair the first index with each remaining one and recurse.
fn central(cov: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    let rest = &idx[1..];
    let mut sum = 0.0;
    let mut remaining = Vec::with_capacity(rest.len() - 1);
    for (p, &partner) in rest.iter().enumerate() {
        remaining.clear();
        remaining.extend(rest.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v));
        sum += cov[(first, partner)] * central(cov, &remaining);
    }
    sum
}

/// Number of perfect pairings of `l` items, `(l − 1)!!` for even `l`.
pub fn pairing_count(l: usize) -> u64 {
    if l % 2 == 1 {
        return 0;
    }
    (1..l as u64).step_by(2).product()
}
