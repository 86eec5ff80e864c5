#include "spde/path_functional.hpp"

#include "spde/errors.hpp"

#include <algorithm>
#include <cmath>

namespace spde {

double running_functional(std::span<const double> sup_sq, std::span<const double> int_sq,
                          double dt, double t) {
    if (sup_sq.empty() || sup_sq.size() != int_sq.size()) {
        throw UsageError("running_functional: series must be nonempty and equally long");
    }
    const double t_end = static_cast<double>(sup_sq.size() - 1) * dt;
    const double tol = 1e-9 * std::max(1.0, t_end);
    if (t < -tol || t > t_end + tol) {
        throw UsageError("running_functional: time outside the path grid");
    }
    double sup = 0.0;
    double integral = 0.0;
    for (std::size_t j = 0; j < sup_sq.size(); ++j) {
        const double tj = static_cast<double>(j) * dt;
        if (tj > t + tol) {
            break;
        }
        sup = std::max(sup, sup_sq[j]);
        const double span = std::min(tj + dt, t) - tj;
        if (span > tol) {
            integral += int_sq[j] * span;
        }
    }
    return sup + integral;
}

double running_functional_at(std::span<const double> sup_sq, std::span<const double> int_sq,
                             double dt, std::size_t j) {
    if (j >= sup_sq.size() || sup_sq.size() != int_sq.size()) {
        throw UsageError("running_functional_at: index outside the path grid");
    }
    double sup = 0.0;
    double integral = 0.0;
    for (std::size_t i = 0; i <= j; ++i) {
        sup = std::max(sup, sup_sq[i]);
        if (i < j) {
            integral += int_sq[i] * dt;
        }
    }
    return sup + integral;
}

std::vector<double> running_functional_series(std::span<const double> sup_sq,
                                              std::span<const double> int_sq, double dt) {
    if (sup_sq.size() != int_sq.size()) {
        throw UsageError("running_functional_series: series must be equally long");
    }
    std::vector<double> out(sup_sq.size());
    double sup = 0.0;
    double integral = 0.0;
    for (std::size_t i = 0; i < sup_sq.size(); ++i) {
        sup = std::max(sup, sup_sq[i]);
        if (i > 0) {
            integral += int_sq[i - 1] * dt;
        }
        out[i] = sup + integral;
    }
    return out;
}

}  // namespace spde
