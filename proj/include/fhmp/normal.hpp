#pragma once

namespace fhmp {

double normal_pdf(double x);
double normal_cdf(double x);

/// Upper alpha/2 point of N(0,1): Phi(z) = 1 - alpha/2. alpha in (0, 1];
/// alpha == 1 gives z == 0.
double normal_critical_value(double alpha);

/// Phi(b) - Phi(a) for a <= b, computed without cancellation in the tails.
double normal_interval_prob(double a, double b);

}  // namespace fhmp
