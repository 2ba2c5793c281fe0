#pragma once

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "osc/grid.hpp"

namespace osc {

// FFTW planning is not thread safe; execution of an existing plan on new
// arrays is. Plans are cached per (d, n) and created under a lock.
class FftPlans {
public:
    struct Pair {
        fftw_plan fwd;
        fftw_plan bwd;
    };

    // rank-d transform with n points per axis, d <= 4
    static const Pair& get(int d, std::size_t n) {
        static FftPlans inst;
        std::lock_guard<std::mutex> lk(inst.mu_);
        auto key = std::make_tuple(d, n);
        auto it = inst.plans_.find(key);
        if (it != inst.plans_.end()) return it->second;
        int dims[4] = {static_cast<int>(n), static_cast<int>(n), static_cast<int>(n), static_cast<int>(n)};
        std::size_t total = 1;
        for (int a = 0; a < d; ++a) total *= n;
        fftw_complex* buf = fftw_alloc_complex(total);
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        Pair p{fftw_plan_dft(d, dims, buf, buf, FFTW_FORWARD, flags),
               fftw_plan_dft(d, dims, buf, buf, FFTW_BACKWARD, flags)};
        fftw_free(buf);
        return inst.plans_.emplace(key, p).first->second;
    }

private:
    FftPlans() = default;
    ~FftPlans() {
        for (auto& [k, p] : plans_) {
            fftw_destroy_plan(p.fwd);
            fftw_destroy_plan(p.bwd);
        }
    }
    std::mutex mu_;
    std::map<std::tuple<int, std::size_t>, Pair> plans_;
};

inline fftw_complex* as_fftw(CVec& v) { return reinterpret_cast<fftw_complex*>(v.data()); }

// unnormalized, in place: v_k <- sum_j v_j e^{-2 pi i jk/n}
inline void fft_forward(CVec& v, const SpectralGrid& g) {
    if (v.size() != g.size()) throw GridMismatch("array size does not match grid");
    fftw_execute_dft(FftPlans::get(g.d, g.n).fwd, as_fftw(v), as_fftw(v));
}

// unnormalized, in place: v_j <- sum_k v_k e^{+2 pi i jk/n}
inline void fft_backward(CVec& v, const SpectralGrid& g) {
    if (v.size() != g.size()) throw GridMismatch("array size does not match grid");
    fftw_execute_dft(FftPlans::get(g.d, g.n).bwd, as_fftw(v), as_fftw(v));
}

// rank-r tensor transforms over n^r entries, unnormalized
inline void fft_forward_tensor(CVec& v, int rank, std::size_t n) {
    if (rank == 0) return;
    fftw_execute_dft(FftPlans::get(rank, n).fwd, as_fftw(v), as_fftw(v));
}
inline void fft_backward_tensor(CVec& v, int rank, std::size_t n) {
    if (rank == 0) return;
    fftw_execute_dft(FftPlans::get(rank, n).bwd, as_fftw(v), as_fftw(v));
}

// samples u(x_j) -> u^(k_j) ~ int u e^{-ikx} dx
inline void to_spectral(CVec& v, const SpectralGrid& g) {
    fft_forward(v, g);
    double c = g.cell_x();
    for (auto& z : v) z *= c;
}

// u^(k_j) -> samples u(x_j) = (2pi)^{-d} int u^ e^{ikx} dk ~ L^{-d} sum_k
inline void to_physical(CVec& v, const SpectralGrid& g) {
    fft_backward(v, g);
    double c = 1.0 / std::pow(g.box_length, g.d);
    for (auto& z : v) z *= c;
}

}  // namespace osc
