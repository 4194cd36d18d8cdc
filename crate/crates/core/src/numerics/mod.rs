//! Quadrature rules, root finding and distribution functions.

pub mod dist;
pub mod quad;

pub use dist::{
    bvn_cdf, bvn_cdf_fast, bvt_cdf, bvt_cdf_int, norm_cdf, norm_pdf, norm_quantile, t_cdf, t_pdf,
    t_quantile,
};
pub use quad::{bisect, gauss_legendre, integrate_2d, GaussLegendre};
