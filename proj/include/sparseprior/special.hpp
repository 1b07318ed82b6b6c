#pragma once

#include <cmath>
#include <stdexcept>

// Scalar special functions. Log-gamma is a Lanczos approximation (g=7, n=9)
// rather than std::lgamma so results are identical on every libm; the unit
// tests pin it against factorial-product references at integer and
// half-integer arguments.

namespace sparseprior::special {

inline double lgamma_pos(double x) {
    static constexpr double coeff[9] = {
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7,
    };
    constexpr double half_log_two_pi = 0.91893853320467274178;  // ln(2*pi)/2
    if (!(x > 0.0)) throw std::domain_error("lgamma: argument must be positive");
    if (x < 0.5) {
        // reflection: lgamma(x) = ln(pi / sin(pi x)) - lgamma(1 - x)
        constexpr double pi = 3.14159265358979323846;
        return std::log(pi / std::sin(pi * x)) - lgamma_pos(1.0 - x);
    }
    const double z = x - 1.0;
    double a = coeff[0];
    for (int i = 1; i < 9; ++i) a += coeff[i] / (z + i);
    const double t = z + 7.5;
    return half_log_two_pi + (z + 0.5) * std::log(t) - t + std::log(a);
}

inline double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double z = 1.0 / (x * x);
    const double series =
        z * (1.0 / 12.0 -
             z * (1.0 / 120.0 -
                  z * (1.0 / 252.0 - z * (1.0 / 240.0 - z * (1.0 / 132.0 - z * 691.0 / 32760.0)))));
    return acc + std::log(x) - 0.5 / x - series;
}

}  // namespace sparseprior::special
