#pragma once

#include <complex>
#include <span>

namespace bq::detail {

// Thin wrapper over FFTW r2c/c2r plans for an n x n grid. Plans are created once
// per size under a lock; execution uses the new-array interface and is safe to
// call from several threads at once.
class FftPlan {
public:
    static const FftPlan& for_size(int n);

    /// Unnormalized forward transform: out[kx][ky] = sum in[x][y] exp(-i k.x).
    void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
    /// Unnormalized inverse; `in` is consumed as scratch.
    void inverse(std::span<std::complex<double>> in, std::span<double> out) const;

    ~FftPlan();
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

private:
    explicit FftPlan(int n);

    int n_;
    void* forward_;
    void* inverse_;
};

}  // namespace bq::detail
