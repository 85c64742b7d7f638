#pragma once

namespace crowdcensus::normal {

double cdf(double x);
/// Upper tail 1 - cdf(x), accurate far into the tail.
double sf(double x);
/// Inverse of cdf on (0,1). Rational approximation polished by one Halley
/// step; absolute error well below 1e-9.
double quantile(double p);
/// Two-sided critical value Φ⁻¹(1 − alpha/2).
double critical_value(double alpha);

}  // namespace crowdcensus::normal
