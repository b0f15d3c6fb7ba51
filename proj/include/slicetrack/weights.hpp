#pragma once

#include <vector>

namespace slicetrack {

// Density of z = f(X) where X is a d-dimensional standard normal and f its
// own density: g_Z(z) = S_{d-1} (-2 log((2pi)^{d/2} z))^{(d-2)/2} on
// (0, (2pi)^{-d/2}]. For d = 6 this is pi^3 (-2 log((2pi)^3 z))^2.
// Throws DomainError outside the support.
double gz_density(double z, int d);

// Upper end of the support, (2pi)^{-d/2}.
double gz_support_max(int d);

// CDF G_Z(z) = P{f(X) <= z}, evaluated from a precomputed quadrature table.
double gz_cdf(double z, int d);

// Inverse CDF. q <= 0 -> 0 (limit), q >= 1 -> (2pi)^{-d/2}. Monotone table
// (> 10^4 nodes, numeric quadrature of gz_density) plus bisection refinement
// to 1e-8 relative.
double gz_cdf_inverse(double q, int d);

// Histogram-equalized particle weights from similarity scores: particles
// ranked ascending; rank k (1-based) maps to the raw weight
// G^-1((k - 0.5)/P) for d = 6; exact ties share the mean of their ranks' raw
// weights; -inf scores get raw weight 0. Normalized to sum 1.
// Throws AllInvalid when every score is -inf.
std::vector<double> equalize_weights(const std::vector<double>& scores);

}  // namespace slicetrack
