use gibbsbd_core::stats::ChiSquare;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail probability of a chi-square statistic.
pub fn chi_square_p_value(chi: &ChiSquare) -> f64 {
    if chi.dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(chi.dof as f64).expect("positive degrees of freedom");
    dist.sf(chi.statistic)
}
