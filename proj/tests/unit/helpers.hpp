#pragma once

#include "bq/spectral.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace testing_helpers {

inline constexpr double kPi = std::numbers::pi;

/// Random valid field with N(0,1) coefficients on every non-Nyquist mode up to |k_i| <= kmax.
inline bq::SpectralField random_field(const bq::TorusGrid& grid, std::mt19937_64& rng, int kmax = 1000) {
    std::normal_distribution<double> normal;
    bq::SpectralField f(grid);
    const int top = std::min(kmax, grid.n() / 2 - 1);
    for (int kx = -top; kx <= top; ++kx) {
        for (int ky = 0; ky <= top; ++ky) {
            if (ky == 0 && kx <= 0) continue;
            f.set_mode(kx, ky, bq::Complex(normal(rng), normal(rng)));
        }
    }
    return f;
}

/// Field from a pointwise function of (x, y), through the library's forward transform.
template <class F>
bq::SpectralField from_function(const bq::TorusGrid& grid, F&& fn) {
    bq::PhysicalField p(grid);
    for (int ix = 0; ix < grid.n(); ++ix) {
        for (int iy = 0; iy < grid.n(); ++iy) p(ix, iy) = fn(p.x(ix), p.y(iy));
    }
    return bq::to_spectral(p);
}

inline double max_coeff_diff(const bq::SpectralField& a, const bq::SpectralField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double max_coeff(const bq::SpectralField& a) {
    double m = 0.0;
    for (const auto& c : a.data()) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace testing_helpers
