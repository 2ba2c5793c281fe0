#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace osc {

inline constexpr double pi = std::numbers::pi;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input. Carries the offending key and, for file input, the line.
struct ConfigError : Error {
    std::string key;
    int line = 0;
    ConfigError(std::string k, const std::string& msg, int ln = 0)
        : Error(k + ": " + msg), key(std::move(k)), line(ln) {}
};

struct GridMismatch : Error {
    using Error::Error;
};

struct GuardExceeded : Error {
    using Error::Error;
};

struct QuadratureError : Error {
    using Error::Error;
};

struct SolverAbort : Error {
    long step;
    long realization = -1;
    SolverAbort(long s, const std::string& msg, long r = -1) : Error(msg), step(s), realization(r) {}
};

// Forward transform f^(xi) = int f(x) e^{-i xi x} dx, inverse with (2pi)^{-d}.
// The only convention implemented; the tag exists so configs state it.
enum class FourierConvention { forward_unitless_inverse_2pi };

struct PhysicalConfig {
    int d = 1;
    double m_order = 2.0;
    double eps = 0.4;
    FourierConvention fourier_convention = FourierConvention::forward_unitless_inverse_2pi;

    void validate() const {
        if (d < 1 || d > 3) throw ConfigError("physics.d", "must be 1, 2 or 3");
        if (!(m_order > d)) throw ConfigError("physics.m", "operator order must exceed d");
        if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("physics.eps", "must lie in (0, 1]");
    }

    // eps^{-d/2}, the potential amplitude
    double amplitude() const { return std::pow(eps, -0.5 * d); }

    double symbol(double abs_xi) const { return std::pow(abs_xi, m_order); }

    // midpoint of (d/m, 1)
    double default_rho() const { return 0.5 * (d / m_order + 1.0); }
};

}  // namespace osc
