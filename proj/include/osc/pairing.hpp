#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "osc/config.hpp"
#include "osc/grid.hpp"

namespace osc {

// Perfect matching of {0, .., 2n-1}; pairs (e, f) with e < f, listed by
// increasing e. left_vertices are the e's.
struct Pairing {
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> left_vertices;
};

inline bool is_perfect_matching(const Pairing& p, int two_n) {
    std::vector<int> seen(two_n, 0);
    for (auto [e, f] : p.pairs) {
        if (e < 0 || f >= two_n || e >= f) return false;
        if (seen[e]++ || seen[f]++) return false;
    }
    for (int s : seen)
        if (s != 1) return false;
    return static_cast<int>(p.pairs.size()) * 2 == two_n &&
           p.left_vertices.size() == p.pairs.size();
}

namespace detail {
inline void pair_up(std::vector<int>& free_idx, Pairing& cur, std::vector<Pairing>& out) {
    if (free_idx.empty()) {
        out.push_back(cur);
        return;
    }
    int e = free_idx.front();
    for (std::size_t k = 1; k < free_idx.size(); ++k) {
        int f = free_idx[k];
        std::vector<int> rest;
        rest.reserve(free_idx.size() - 2);
        for (std::size_t j = 1; j < free_idx.size(); ++j)
            if (j != k) rest.push_back(free_idx[j]);
        cur.pairs.emplace_back(e, f);
        cur.left_vertices.push_back(e);
        pair_up(rest, cur, out);
        cur.pairs.pop_back();
        cur.left_vertices.pop_back();
    }
}
}  // namespace detail

// All (2n-1)!! matchings; the smallest unpaired element is paired first and
// its partner runs in increasing order.
inline std::vector<Pairing> enumerate_pairings(int two_n) {
    if (two_n < 0 || two_n % 2) throw Error("enumerate_pairings: size must be even and >= 0");
    if (two_n > 12) throw GuardExceeded("enumerate_pairings: at most 12 elements");
    std::vector<int> idx(two_n);
    for (int i = 0; i < two_n; ++i) idx[i] = i;
    std::vector<Pairing> out;
    Pairing cur;
    detail::pair_up(idx, cur, out);
    return out;
}

struct PairingWeight {
    Pairing pairing;
    double r_product = 0.0;       // prod over pairs of R^(xi_e)
    bool constraints_hold = false;  // xi_f = -xi_e for every pair (on the grid)
    double value = 0.0;           // r_product * (dk^{-d})^{n} if constraints hold, else 0
};

struct GaussianMoment {
    std::vector<PairingWeight> terms;
    double total = 0.0;
};

// E prod_k q^(xi_k) = sum_pi prod_{(e f)} R^(xi_e) delta(xi_e + xi_f) on the
// periodic grid, delta = Kronecker / dk^d. Odd counts give the empty sum.
inline GaussianMoment gaussian_moment_potential(const std::vector<Pairing>& pairings,
                                                const std::function<double(const Vec3&)>& r_hat,
                                                const std::vector<Vec3>& frequencies, const SpectralGrid& g) {
    GaussianMoment gm;
    if (frequencies.size() % 2) return gm;
    std::vector<std::size_t> idx;
    for (const auto& xi : frequencies) idx.push_back(g.index_of(xi));
    const double inv_cell = 1.0 / g.cell_k();
    for (const auto& p : pairings) {
        PairingWeight w;
        w.pairing = p;
        w.r_product = 1.0;
        w.constraints_hold = true;
        for (auto [e, f] : p.pairs) {
            w.r_product *= r_hat(frequencies[e]);
            if (g.negate(idx[e]) != idx[f]) w.constraints_hold = false;
        }
        w.value = w.constraints_hold ? w.r_product * std::pow(inv_cell, static_cast<int>(p.pairs.size())) : 0.0;
        gm.total += w.value;
        gm.terms.push_back(w);
    }
    return gm;
}

}  // namespace osc
