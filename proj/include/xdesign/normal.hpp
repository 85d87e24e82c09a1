#pragma once

namespace xdesign {

/// Standard normal density.
double normal_pdf(double x);

/// Standard normal CDF, Phi(x).
double normal_cdf(double x);

/// Upper tail 1 - Phi(x), computed without cancellation for large x.
double normal_sf(double x);

/// Inverse of the standard normal CDF.
///
/// Wichura's AS241 rational approximation followed by one Newton step on
/// the CDF; |Phi(z) - q| stays below 1e-12 over the whole open interval.
/// Throws std::domain_error for q outside (0, 1).
double normal_quantile(double q);

}  // namespace xdesign
