#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fluxonium/params.hpp"

namespace fluxonium::test {

// Device of the main spectrum: E_J = 23.4 GHz, C_sigma = 1.26 fF, L_q = 285 nH.
inline CircuitParams device(double phi_ext = 0.0) {
    return {23.4, charging_energy_from_capacitance(1.26), inductive_energy_from_inductance(285.0), phi_ext};
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Kolmogorov survival function P(K > x).
inline double kolmogorov_q(double x) {
    if (x < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

/// One-sample KS p-value against Exp(mean).
inline double ks_exponential_p(std::vector<double> x, double mean) {
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double cdf = 1.0 - std::exp(-x[i] / mean);
        d = std::max({d, cdf - double(i) / n, double(i + 1) / n - cdf});
    }
    const double s = std::sqrt(n);
    return kolmogorov_q((s + 0.12 + 0.11 / s) * d);
}

}  // namespace fluxonium::test
