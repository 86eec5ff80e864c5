#include "spde/transform.hpp"

#include "spde/errors.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace spde {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

int wrap(int k, int n) {
    return k >= 0 ? k : k + n;
}

}  // namespace

PhysicalGrid::PhysicalGrid(int size) : size_(size), half_(size / 2 + 1) {
    if (size < 2) {
        throw UsageError("physical grid needs at least 2 points per axis");
    }
    std::lock_guard lock(planner_mutex());
    real_ = fftw_alloc_real(point_count());
    auto* spec = fftw_alloc_complex(static_cast<std::size_t>(size_) * half_);
    spec_ = spec;
    // FFTW_ESTIMATE keeps plan selection, and so every rounding, identical run to run.
    forward_ = fftw_plan_dft_r2c_2d(size_, size_, real_, spec, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(size_, size_, spec, real_, FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
}

PhysicalGrid::~PhysicalGrid() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_));
    fftw_destroy_plan(static_cast<fftw_plan>(backward_));
    fftw_free(real_);
    fftw_free(spec_);
}

void PhysicalGrid::fill_half_spectrum(std::span<const cplx> coeffs, int band, int derivative_axis) {
    if (2 * band >= size_) {
        throw UsageError("band " + std::to_string(band) + " not resolvable on grid " +
                         std::to_string(size_));
    }
    auto* spec = static_cast<fftw_complex*>(spec_);
    const std::size_t total = static_cast<std::size_t>(size_) * half_;
    for (std::size_t i = 0; i < total; ++i) {
        spec[i][0] = 0.0;
        spec[i][1] = 0.0;
    }
    const int side = 2 * band + 1;
    for (int kx = -band; kx <= band; ++kx) {
        for (int ky = 0; ky <= band; ++ky) {
            cplx c = coeffs[static_cast<std::size_t>((kx + band) * side + (ky + band))];
            if (derivative_axis == 0) {
                c *= cplx(0.0, kx);
            } else if (derivative_axis == 1) {
                c *= cplx(0.0, ky);
            }
            auto& dst = spec[static_cast<std::size_t>(wrap(kx, size_)) * half_ + ky];
            dst[0] = c.real();
            dst[1] = c.imag();
        }
    }
}

void PhysicalGrid::synthesize(std::span<const cplx> coeffs, int band, std::span<double> values) {
    fill_half_spectrum(coeffs, band, -1);
    fftw_execute(static_cast<fftw_plan>(backward_));
    std::copy(real_, real_ + point_count(), values.begin());
}

void PhysicalGrid::synthesize_derivative(std::span<const cplx> coeffs, int band, int axis,
                                         std::span<double> values) {
    fill_half_spectrum(coeffs, band, axis);
    fftw_execute(static_cast<fftw_plan>(backward_));
    std::copy(real_, real_ + point_count(), values.begin());
}

void PhysicalGrid::analyze(std::span<const double> values, int band, std::span<cplx> coeffs) {
    if (2 * band >= size_) {
        throw UsageError("band " + std::to_string(band) + " not resolvable on grid " +
                         std::to_string(size_));
    }
    std::copy(values.begin(), values.end(), real_);
    fftw_execute(static_cast<fftw_plan>(forward_));
    const auto* spec = static_cast<const fftw_complex*>(spec_);
    const double scale = 1.0 / static_cast<double>(point_count());
    const int side = 2 * band + 1;
    for (int kx = -band; kx <= band; ++kx) {
        for (int ky = -band; ky <= band; ++ky) {
            cplx c;
            if (ky >= 0) {
                const auto& s = spec[static_cast<std::size_t>(wrap(kx, size_)) * half_ + ky];
                c = cplx(s[0], s[1]);
            } else {
                const auto& s = spec[static_cast<std::size_t>(wrap(-kx, size_)) * half_ + (-ky)];
                c = cplx(s[0], -s[1]);
            }
            coeffs[static_cast<std::size_t>((kx + band) * side + (ky + band))] = c * scale;
        }
    }
}

int fast_grid_size(int n) {
    for (int m = std::max(n, 2);; ++m) {
        int r = m;
        for (int p : {2, 3, 5}) {
            while (r % p == 0) {
                r /= p;
            }
        }
        if (r == 1) {
            return m;
        }
    }
}

int dealiased_grid_size(int band_a, int band_b, int band_out) {
    // Aliases of the product land at |k| >= size - (a + b); keep them off |k| <= c.
    // The output band must also be resolvable: size > 2c.
    const int need = std::max(band_a + band_b + band_out + 1, 2 * std::max({band_a, band_b, band_out}) + 1);
    return fast_grid_size(need);
}

PhysicalGrid& grid_for_size(int size) {
    thread_local std::map<int, std::unique_ptr<PhysicalGrid>> cache;
    auto it = cache.find(size);
    if (it == cache.end()) {
        it = cache.emplace(size, std::make_unique<PhysicalGrid>(size)).first;
    }
    return *it->second;
}

}  // namespace spde
