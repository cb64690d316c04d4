#include "bq/spectral.hpp"

#include "bq/errors.hpp"
#include "fft.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kArea = kTwoPi * kTwoPi;

// Weight of a half-layout column in full-spectrum sums.
double column_weight(const TorusGrid& g, int col) {
    return (col == 0 || col == g.n() / 2) ? 1.0 : 2.0;
}

template <class Fn>
SpectralField multiply_modes(const SpectralField& f, Fn&& factor) {
    SpectralField out(f.grid());
    const TorusGrid& g = f.grid();
    for (int row = 0; row < g.n(); ++row) {
        const int kx = g.kx(row);
        for (int col = 0; col < g.half(); ++col) {
            if (g.is_nyquist(row, col)) continue;
            out.at(row, col) = factor(kx, g.ky(col)) * f.at(row, col);
        }
    }
    return out;
}

}  // namespace

TorusGrid::TorusGrid(int n) : n_(n) {
    if (n < 4 || n % 2 != 0) {
        throw DimensionError("torus grid needs an even size >= 4, got " + std::to_string(n));
    }
}

PhysicalField::PhysicalField(TorusGrid grid) : grid_(grid), values_(grid.physical_size(), 0.0) {}

PhysicalField::PhysicalField(TorusGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.physical_size()) {
        throw DimensionError("physical field expects " + std::to_string(grid_.physical_size()) +
                             " samples, got " + std::to_string(values_.size()));
    }
}

double PhysicalField::x(int ix) const { return kTwoPi * ix / grid_.n(); }
double PhysicalField::y(int iy) const { return kTwoPi * iy / grid_.n(); }

SpectralField::SpectralField(TorusGrid grid) : grid_(grid), coeffs_(grid.spectral_size()) {}

Complex SpectralField::coeff(int kx, int ky) const {
    const int h = grid_.n() / 2;
    if (std::abs(kx) > h || std::abs(ky) > h) {
        throw DimensionError("wavevector outside the grid");
    }
    if (ky < 0) return std::conj(coeff(kx == -h ? h : -kx, -ky));
    return at(grid_.row_of(kx == -h ? h : kx), ky);
}

void SpectralField::set_mode(int kx, int ky, Complex value) {
    const int h = grid_.n() / 2;
    if (std::abs(kx) >= h || std::abs(ky) >= h) {
        throw DimensionError("Nyquist or out-of-range wavevector");
    }
    if (kx == 0 && ky == 0) throw DomainError("the mean mode of a field in H is fixed at zero");
    if (ky < 0) {
        kx = -kx;
        ky = -ky;
        value = std::conj(value);
    }
    at(grid_.row_of(kx), ky) = value;
    if (ky == 0) at(grid_.row_of(-kx), 0) = std::conj(value);
}

void SpectralField::project() {
    const int n = grid_.n();
    const int h = n / 2;
    for (int row = 0; row < n; ++row) at(row, h) = 0.0;
    for (int col = 0; col < grid_.half(); ++col) at(h, col) = 0.0;
    at(0, 0) = 0.0;
    for (int row = 1; row < h; ++row) {
        const Complex sym = 0.5 * (at(row, 0) + std::conj(at(n - row, 0)));
        at(row, 0) = sym;
        at(n - row, 0) = std::conj(sym);
    }
}

void SpectralField::require_same_grid(const SpectralField& other) const {
    if (!(grid_ == other.grid_)) throw DimensionError("fields live on different grids");
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
    require_same_grid(other);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
    require_same_grid(other);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
}

void SpectralField::axpy(double s, const SpectralField& b) {
    require_same_grid(b);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * b.coeffs_[i];
}

bool SpectralField::all_finite() const noexcept {
    for (const auto& c : coeffs_) {
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    }
    return true;
}

PhysicalField to_physical(const SpectralField& f) {
    const TorusGrid& g = f.grid();
    std::vector<Complex> scratch(f.data().begin(), f.data().end());
    PhysicalField out(g);
    detail::FftPlan::for_size(g.n()).inverse(scratch, out.values());
    return out;
}

SpectralField to_spectral(const TorusGrid& grid, std::span<const double> samples) {
    if (samples.size() != grid.physical_size()) {
        throw DimensionError("expected " + std::to_string(grid.physical_size()) + " samples, got " +
                             std::to_string(samples.size()));
    }
    SpectralField out(grid);
    detail::FftPlan::for_size(grid.n()).forward(samples, out.data());
    const double norm = 1.0 / double(grid.physical_size());
    for (auto& c : out.data()) c *= norm;
    out.project();
    return out;
}

SpectralField to_spectral(const PhysicalField& samples) {
    return to_spectral(samples.grid(), samples.values());
}

SpectralField laplacian(const SpectralField& f) {
    return multiply_modes(f, [](int kx, int ky) { return Complex(-double(kx * kx + ky * ky), 0.0); });
}

SpectralField partial_x(const SpectralField& f) {
    return multiply_modes(f, [](int kx, int) { return Complex(0.0, double(kx)); });
}

SpectralField partial_y(const SpectralField& f) {
    return multiply_modes(f, [](int, int ky) { return Complex(0.0, double(ky)); });
}

std::pair<SpectralField, SpectralField> gradient(const SpectralField& f) {
    return {partial_x(f), partial_y(f)};
}

void apply_heat_factor(SpectralField& f, double tau) {
    const TorusGrid& g = f.grid();
    for (int row = 0; row < g.n(); ++row) {
        const int kx = g.kx(row);
        for (int col = 0; col < g.half(); ++col) {
            const int ky = g.ky(col);
            f.at(row, col) *= std::exp(-double(kx * kx + ky * ky) * tau);
        }
    }
}

SpectralField dealias(const SpectralField& f) {
    const int cut = f.grid().dealias_cut();
    return multiply_modes(f, [cut](int kx, int ky) {
        return (std::abs(kx) > cut || std::abs(ky) > cut) ? Complex(0.0) : Complex(1.0);
    });
}

VelocityField biot_savart(const SpectralField& j) {
    // psi_hat = -j_hat/|k|^2, u1 = -d_y psi, u2 = d_x psi
    auto inv = [](int kx, int ky) {
        const int k2 = kx * kx + ky * ky;
        return k2 == 0 ? 0.0 : 1.0 / double(k2);
    };
    VelocityField u{
        multiply_modes(j, [&](int kx, int ky) { return Complex(0.0, double(ky) * inv(kx, ky)); }),
        multiply_modes(j, [&](int kx, int ky) { return Complex(0.0, -double(kx) * inv(kx, ky)); }),
    };
    return u;
}

SpectralField curl(const VelocityField& u) {
    return partial_x(u.u2) - partial_y(u.u1);
}

SpectralField divergence(const VelocityField& u) {
    return partial_x(u.u1) + partial_y(u.u2);
}

PhysicalVelocity dealiased_physical(const VelocityField& u) {
    return {to_physical(dealias(u.u1)), to_physical(dealias(u.u2))};
}

SpectralField advect(const PhysicalVelocity& u, const SpectralField& f) {
    const SpectralField fd = dealias(f);
    const PhysicalField fx = to_physical(partial_x(fd));
    const PhysicalField fy = to_physical(partial_y(fd));
    PhysicalField prod(f.grid());
    auto out = prod.values();
    auto a = u.u1.values();
    auto b = u.u2.values();
    auto gx = fx.values();
    auto gy = fy.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * gx[i] + b[i] * gy[i];
    return dealias(to_spectral(prod));
}

SpectralField advect(const VelocityField& u, const SpectralField& f) {
    return advect(dealiased_physical(u), f);
}

double inner(const SpectralField& a, const SpectralField& b) {
    if (!(a.grid() == b.grid())) throw DimensionError("inner product of fields on different grids");
    const TorusGrid& g = a.grid();
    double sum = 0.0;
    for (int row = 0; row < g.n(); ++row) {
        for (int col = 0; col < g.half(); ++col) {
            const Complex& x = a.at(row, col);
            const Complex& y = b.at(row, col);
            sum += column_weight(g, col) * (x.real() * y.real() + x.imag() * y.imag());
        }
    }
    return kArea * sum;
}

double norm_h(const SpectralField& a) { return std::sqrt(inner(a, a)); }

double gradient_norm_sq(const SpectralField& f) {
    const TorusGrid& g = f.grid();
    double sum = 0.0;
    for (int row = 0; row < g.n(); ++row) {
        const int kx = g.kx(row);
        for (int col = 0; col < g.half(); ++col) {
            const int ky = g.ky(col);
            sum += column_weight(g, col) * double(kx * kx + ky * ky) * std::norm(f.at(row, col));
        }
    }
    return kArea * sum;
}

double quadrature(const PhysicalField& f) {
    double sum = 0.0;
    for (double v : f.values()) sum += v;
    const double h = kTwoPi / f.grid().n();
    return sum * h * h;
}

}  // namespace bq
