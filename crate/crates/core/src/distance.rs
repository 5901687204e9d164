use crate::error::{Error, Result};
use crate::types::DiscretePdf;

fn same_domain(p: &DiscretePdf, q: &DiscretePdf) -> Result<()> {
    if p.domain_max() != q.domain_max() {
        return Err(Error::DomainMismatch {
            left: p.domain_max(),
            right: q.domain_max(),
        });
    }
    Ok(())
}

/// Largest gap between the two cumulative distribution functions.
pub fn kolmogorov_distance(p: &DiscretePdf, q: &DiscretePdf) -> Result<f64> {
    same_domain(p, q)?;
    let mut acc = 0.0f64;
    let mut best = 0.0f64;
    for (a, b) in p.mass().iter().zip(q.mass()) {
        acc += a - b;
        best = best.max(acc.abs());
    }
    Ok(best.min(1.0))
}

/// Total variation (statistical) distance.
pub fn tv_distance(p: &DiscretePdf, q: &DiscretePdf) -> Result<f64> {
    same_domain(p, q)?;
    let l1: f64 = p
        .mass()
        .iter()
        .zip(q.mass())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * l1).min(1.0))
}
