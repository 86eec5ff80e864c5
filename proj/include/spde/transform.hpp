#pragma once

#include "spde/spectral_field.hpp"

#include <span>
#include <vector>

namespace spde {

/// Uniform size x size collocation grid on [0, 2pi)^2 with real FFTs.
/// Values are stored row-major, value[ix * size + iy] at (2pi ix/size, 2pi iy/size).
///
/// Instances own their FFTW plans and buffers and are not shareable across
/// threads; use grid_for_size() for a per-thread cache.
class PhysicalGrid {
public:
    explicit PhysicalGrid(int size);
    ~PhysicalGrid();
    PhysicalGrid(const PhysicalGrid&) = delete;
    PhysicalGrid& operator=(const PhysicalGrid&) = delete;

    int size() const noexcept { return size_; }
    std::size_t point_count() const noexcept {
        return static_cast<std::size_t>(size_) * static_cast<std::size_t>(size_);
    }

    /// Evaluates sum_k coeff(k) exp(i k.x) for one real component given on `band`
    /// (coeffs laid out as in SpectralField). Requires 2*band < size.
    void synthesize(std::span<const cplx> coeffs, int band, std::span<double> values);
    /// Same as synthesize for the multiplier (i k_axis) coeff(k): a spatial derivative.
    void synthesize_derivative(std::span<const cplx> coeffs, int band, int axis,
                               std::span<double> values);
    /// Recovers the coefficients on |k|_inf <= band of a grid function.
    void analyze(std::span<const double> values, int band, std::span<cplx> coeffs);

private:
    void fill_half_spectrum(std::span<const cplx> coeffs, int band, int derivative_axis);

    int size_;
    int half_;
    double* real_ = nullptr;
    void* spec_ = nullptr;
    void* forward_ = nullptr;
    void* backward_ = nullptr;
};

/// Smallest 2^a 3^b 5^c >= n.
int fast_grid_size(int n);

/// Grid size that makes the product of a band-a and a band-b field exact on
/// the output band c: size > a + b + c (the 2/3 rule when a = b = c).
int dealiased_grid_size(int band_a, int band_b, int band_out);

/// Per-thread cached grid of the given size.
PhysicalGrid& grid_for_size(int size);

}  // namespace spde
