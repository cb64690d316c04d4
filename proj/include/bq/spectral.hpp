#pragma once

// Mean-zero scalar fields on the 2*pi-periodic torus.
//
// Storage is the real-to-complex half layout of a 2D DFT: rows are indexed by
// the x wavenumber (ix -> kx = ix or ix - n), columns by ky = 0..n/2. The
// coefficients are normalized so that f(x, y) = sum_k c(k) exp(i k.x).
// Valid fields carry c(0,0) = 0 and zero Nyquist modes (|k_i| = n/2).

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace bq {

using Complex = std::complex<double>;

class TorusGrid {
public:
    /// Throws DimensionError unless n is even and n >= 4.
    explicit TorusGrid(int n);

    int n() const noexcept { return n_; }
    int half() const noexcept { return n_ / 2 + 1; }
    std::size_t spectral_size() const noexcept { return std::size_t(n_) * std::size_t(half()); }
    std::size_t physical_size() const noexcept { return std::size_t(n_) * std::size_t(n_); }

    /// Largest retained wavenumber per axis under the 2/3 rule.
    int dealias_cut() const noexcept { return n_ / 3; }

    int kx(int row) const noexcept { return row <= n_ / 2 ? row : row - n_; }
    int ky(int col) const noexcept { return col; }
    /// Row index of wavenumber kx in (-n/2, n/2].
    int row_of(int kx) const noexcept { return kx >= 0 ? kx : kx + n_; }

    bool is_nyquist(int row, int col) const noexcept { return row == n_ / 2 || col == n_ / 2; }

    friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

private:
    int n_;
};

/// Real samples on the uniform n x n grid, x-major: value(ix, iy) at (2 pi ix/n, 2 pi iy/n).
class PhysicalField {
public:
    explicit PhysicalField(TorusGrid grid);
    PhysicalField(TorusGrid grid, std::vector<double> values);

    const TorusGrid& grid() const noexcept { return grid_; }
    double& operator()(int ix, int iy) { return values_[std::size_t(ix) * std::size_t(grid_.n()) + std::size_t(iy)]; }
    double operator()(int ix, int iy) const { return values_[std::size_t(ix) * std::size_t(grid_.n()) + std::size_t(iy)]; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    double x(int ix) const;
    double y(int iy) const;

private:
    TorusGrid grid_;
    std::vector<double> values_;
};

class SpectralField {
public:
    explicit SpectralField(TorusGrid grid);

    static SpectralField zero(TorusGrid grid) { return SpectralField(grid); }

    const TorusGrid& grid() const noexcept { return grid_; }

    /// Coefficient at wavevector (kx, ky); negative ky is served through Hermitian symmetry.
    Complex coeff(int kx, int ky) const;
    /// Sets c(k) and, implicitly, c(-k) = conj(c(k)). Mean and Nyquist modes are rejected.
    void set_mode(int kx, int ky, Complex value);

    Complex& at(int row, int col) { return coeffs_[index(row, col)]; }
    const Complex& at(int row, int col) const { return coeffs_[index(row, col)]; }

    std::span<Complex> data() noexcept { return coeffs_; }
    std::span<const Complex> data() const noexcept { return coeffs_; }

    /// Zeroes the mean and Nyquist modes and restores real ky=0 / kx-conjugate pairs.
    void project();

    SpectralField& operator+=(const SpectralField& other);
    SpectralField& operator-=(const SpectralField& other);
    SpectralField& operator*=(double s);

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

    /// a += s * b
    void axpy(double s, const SpectralField& b);

    bool all_finite() const noexcept;

private:
    std::size_t index(int row, int col) const noexcept {
        return std::size_t(row) * std::size_t(grid_.half()) + std::size_t(col);
    }
    void require_same_grid(const SpectralField& other) const;

    TorusGrid grid_;
    std::vector<Complex> coeffs_;
};

struct VelocityField {
    SpectralField u1;
    SpectralField u2;
};

/// Samples the field on the physical grid.
PhysicalField to_physical(const SpectralField& f);
/// Forward transform; the mean and Nyquist modes are dropped.
SpectralField to_spectral(const PhysicalField& samples);
/// Forward transform of raw samples laid out x-major; throws DimensionError on size mismatch.
SpectralField to_spectral(const TorusGrid& grid, std::span<const double> samples);

SpectralField laplacian(const SpectralField& f);
SpectralField partial_x(const SpectralField& f);
SpectralField partial_y(const SpectralField& f);
std::pair<SpectralField, SpectralField> gradient(const SpectralField& f);

/// Multiplies every coefficient by exp(-|k|^2 * tau).
void apply_heat_factor(SpectralField& f, double tau);

/// Zeroes modes with max(|kx|, |ky|) > dealias_cut.
SpectralField dealias(const SpectralField& f);

/// u = (-d_y psi, d_x psi) with laplacian(psi) = j.
VelocityField biot_savart(const SpectralField& j);
/// d_x u2 - d_y u1.
SpectralField curl(const VelocityField& u);
/// d_x u1 + d_y u2.
SpectralField divergence(const VelocityField& u);

/// Velocity sampled on the physical grid after 2/3 truncation; reused by repeated advections.
struct PhysicalVelocity {
    PhysicalField u1;
    PhysicalField u2;
};
PhysicalVelocity dealiased_physical(const VelocityField& u);

/// (u . grad) f with dealiased factors, truncated to the 2/3 band and mean-free.
SpectralField advect(const VelocityField& u, const SpectralField& f);
SpectralField advect(const PhysicalVelocity& u, const SpectralField& f);

/// L2 inner product on [0, 2 pi]^2 computed from coefficients.
double inner(const SpectralField& a, const SpectralField& b);
double norm_h(const SpectralField& a);
/// |grad f|_H^2
double gradient_norm_sq(const SpectralField& f);

/// Rectangle-rule integral of the samples over [0, 2 pi]^2 (exact for trigonometric polynomials).
double quadrature(const PhysicalField& f);

/// Applies a pointwise map in physical space and projects the result back onto mean-zero fields.
template <class F>
SpectralField map_pointwise(const SpectralField& f, F&& fn) {
    PhysicalField phys = to_physical(f);
    for (double& v : phys.values()) v = fn(v);
    return to_spectral(phys);
}

}  // namespace bq
