#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace bq::detail {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

FftPlan::FftPlan(int n) : n_(n) {
    const std::size_t real_size = std::size_t(n) * std::size_t(n);
    const std::size_t spec_size = std::size_t(n) * std::size_t(n / 2 + 1);
    std::vector<double> r(real_size);
    std::vector<std::complex<double>> c(spec_size);
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_2d(n, n, r.data(), cp, flags);
    inverse_ = fftw_plan_dft_c2r_2d(n, n, cp, r.data(), flags | FFTW_DESTROY_INPUT);
}

FftPlan::~FftPlan() {
    fftw_destroy_plan(static_cast<fftw_plan>(forward_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_));
}

const FftPlan& FftPlan::for_size(int n) {
    // Plans live for the whole process; never destroyed.
    static auto* cache = new std::map<int, std::unique_ptr<FftPlan>>();
    std::lock_guard lock(planner_mutex());
    auto it = cache->find(n);
    if (it == cache->end()) {
        it = cache->emplace(n, std::unique_ptr<FftPlan>(new FftPlan(n))).first;
    }
    return *it->second;
}

void FftPlan::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    // FFTW's r2c signature is non-const but never writes the input.
    fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_), const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void FftPlan::inverse(std::span<std::complex<double>> in, std::span<double> out) const {
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_), reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
}

}  // namespace bq::detail
