#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "osc/config.hpp"

namespace osc {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using Vec3 = std::array<double, 3>;  // unused trailing components are 0

inline double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Periodic box [0, L)^d with n points per axis. x_j = j dx, wavenumbers
// 2 pi k / L stored in FFT order (0, 1, .., n/2 - 1, -n/2, .., -1).
struct SpectralGrid {
    int d = 1;
    std::size_t n = 512;
    double box_length = 20.0;

    SpectralGrid() = default;
    SpectralGrid(int d_, std::size_t n_, double L) : d(d_), n(n_), box_length(L) { validate(); }

    void validate() const {
        if (d < 1 || d > 3) throw ConfigError("physics.d", "must be 1, 2 or 3");
        if (n < 2 || (n & (n - 1)) != 0) throw ConfigError("grid.n", "must be a power of two >= 2");
        if (!(box_length > 0.0)) throw ConfigError("grid.box_length", "must be positive");
    }

    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < d; ++a) s *= n;
        return s;
    }
    double dx() const { return box_length / static_cast<double>(n); }
    double dk() const { return 2.0 * pi / box_length; }
    double cell_x() const { return std::pow(dx(), d); }
    double cell_k() const { return std::pow(dk(), d); }

    // signed integer wavenumber of axis index i
    long signed_index(std::size_t i) const {
        return i < n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
    }
    std::size_t wrap(long k) const {
        long nn = static_cast<long>(n);
        long r = k % nn;
        return static_cast<std::size_t>(r < 0 ? r + nn : r);
    }
    double axis_k(std::size_t i) const { return dk() * static_cast<double>(signed_index(i)); }
    double axis_x(std::size_t i) const { return dx() * static_cast<double>(i); }

    std::array<std::size_t, 3> unflatten(std::size_t flat) const {
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int a = d - 1; a >= 0; --a) {
            idx[a] = flat % n;
            flat /= n;
        }
        return idx;
    }
    std::size_t flatten(const std::array<std::size_t, 3>& idx) const {
        std::size_t f = 0;
        for (int a = 0; a < d; ++a) f = f * n + idx[a];
        return f;
    }

    Vec3 wavenumber(std::size_t flat) const {
        auto idx = unflatten(flat);
        Vec3 k{0, 0, 0};
        for (int a = 0; a < d; ++a) k[a] = axis_k(idx[a]);
        return k;
    }
    Vec3 position(std::size_t flat) const {
        auto idx = unflatten(flat);
        Vec3 x{0, 0, 0};
        for (int a = 0; a < d; ++a) x[a] = axis_x(idx[a]);
        return x;
    }

    // flat index of -k (periodic)
    std::size_t negate(std::size_t flat) const {
        auto idx = unflatten(flat);
        for (int a = 0; a < d; ++a) idx[a] = wrap(-static_cast<long>(idx[a]));
        return flatten(idx);
    }
    // flat index of k1 + sign * k2 (periodic)
    std::size_t add(std::size_t f1, std::size_t f2, int sign = 1) const {
        auto a1 = unflatten(f1), a2 = unflatten(f2);
        for (int a = 0; a < d; ++a)
            a1[a] = wrap(static_cast<long>(a1[a]) + sign * static_cast<long>(a2[a]));
        return flatten(a1);
    }

    // flat index of the grid node equal to xi; throws if xi is off-grid
    std::size_t index_of(const Vec3& xi) const {
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int a = 0; a < d; ++a) {
            double r = xi[a] / dk();
            long k = std::lround(r);
            if (std::abs(r - static_cast<double>(k)) > 1e-9 || k < -static_cast<long>(n / 2) ||
                k >= static_cast<long>(n / 2))
                throw GridMismatch("frequency is not a node of the grid");
            idx[a] = wrap(k);
        }
        return flatten(idx);
    }

    // smallest power-of-two point count with dx <= max_dx, never below n_min
    static std::size_t refine_for(double L, double max_dx, std::size_t n_min) {
        std::size_t n = n_min;
        while (L / static_cast<double>(n) > max_dx) n *= 2;
        return n;
    }

    bool operator==(const SpectralGrid& o) const {
        return d == o.d && n == o.n && box_length == o.box_length;
    }
};

}  // namespace osc
