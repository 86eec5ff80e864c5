#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spde {

/// Discrete energy functional of a path sampled on the uniform grid t_j = j dt:
///   sup_{t_j <= t} sup_sq[j]  +  int_0^t int_sq(r) dr,
/// the integral taken with left-Riemann quadrature (int_sq held constant on
/// [t_j, t_{j+1})). With sup_sq = ||.||_U^2 and int_sq = ||.||_H^2 this is the
/// UH functional; with (H, V) it is the HV functional.
/// Throws UsageError for t < 0 or t past the last grid point.
double running_functional(std::span<const double> sup_sq, std::span<const double> int_sq,
                          double dt, double t);

/// Same functional evaluated exactly at grid index j.
double running_functional_at(std::span<const double> sup_sq, std::span<const double> int_sq,
                             double dt, std::size_t j);

/// running_functional_at for every grid index, in one pass.
std::vector<double> running_functional_series(std::span<const double> sup_sq,
                                              std::span<const double> int_sq, double dt);

}  // namespace spde
