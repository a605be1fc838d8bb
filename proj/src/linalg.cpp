#include "linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <lapacke.h>

#include "fluxonium/errors.hpp"

namespace fluxonium::detail {

void displacement_parts(double beta, int dim, Eigen::MatrixXd& cos_part, Eigen::MatrixXd& sin_part) {
    cos_part.setZero(dim, dim);
    sin_part.setZero(dim, dim);
    if (beta == 0.0) {
        cos_part.setIdentity();
        return;
    }
    // For m >= n, <m|D(i beta)|n> = i^(m-n) f, with
    // f = sqrt(n!/m!) beta^(m-n) exp(-beta^2/2) L_n^(m-n)(beta^2).
    // Along a diagonal d = m - n the normalized Laguerre recurrence in n is
    // forward stable; a running log-scale keeps the mantissa in range.
    const double x = beta * beta;
    const double log_beta = std::log(std::abs(beta));
    const double sign_beta = beta < 0.0 ? -1.0 : 1.0;
    constexpr double kRescale = 1e100;
    const double log_rescale = std::log(kRescale);
    for (int d = 0; d < dim; ++d) {
        double log_scale = d * log_beta - 0.5 * std::lgamma(d + 1.0) - 0.5 * x;
        const double sign = (d % 2 == 1) ? sign_beta : 1.0;
        double prev = 0.0;
        double cur = 1.0;
        // Real and imaginary parts of i^d.
        const int quarter = d % 4;
        const double re = quarter == 0 ? 1.0 : (quarter == 2 ? -1.0 : 0.0);
        const double im = quarter == 1 ? 1.0 : (quarter == 3 ? -1.0 : 0.0);
        for (int k = 0; k + d < dim; ++k) {
            const double value = log_scale > -745.0 ? sign * cur * std::exp(log_scale) : 0.0;
            const int m = k + d;
            if (re != 0.0) {
                cos_part(m, k) = re * value;
                cos_part(k, m) = re * value;
            } else {
                sin_part(m, k) = im * value;
                sin_part(k, m) = im * value;
            }
            const double next =
                ((2.0 * k + 1.0 + d - x) * cur - std::sqrt(double(k) * (k + d)) * prev) /
                std::sqrt((k + 1.0) * (k + 1.0 + d));
            prev = cur;
            cur = next;
            if (std::abs(cur) > kRescale) {
                cur /= kRescale;
                prev /= kRescale;
                log_scale += log_rescale;
            }
        }
    }
}

namespace {

double factorial_ratio(int m, int k) {
    // (m!)^2 / ((m-k)! (m+k)!)
    return std::exp(2.0 * std::lgamma(m + 1.0) - std::lgamma(m - k + 1.0) - std::lgamma(m + k + 1.0));
}

}  // namespace

Eigen::VectorXd second_derivative_weights(int half_width) {
    Eigen::VectorXd w(half_width);
    for (int k = 1; k <= half_width; ++k) {
        w(k - 1) = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * factorial_ratio(half_width, k) / (double(k) * k);
    }
    return w;
}

Eigen::VectorXd first_derivative_weights(int half_width) {
    Eigen::VectorXd w(half_width);
    for (int k = 1; k <= half_width; ++k) {
        w(k - 1) = ((k % 2 == 1) ? 1.0 : -1.0) * factorial_ratio(half_width, k) / double(k);
    }
    return w;
}

EigenPairs lowest_eigenpairs_dense(const Eigen::MatrixXd& a, int count, bool want_vectors) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    Eigen::MatrixXd work = a;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(want_vectors ? n : 1, want_vectors ? count : 1);
    std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(std::max(1, count)));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(
        LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'I', 'U', n, work.data(), n, 0.0, 0.0, 1, count,
        LAPACKE_dlamch('S'), &found, w.data(), z.data(), want_vectors ? n : 1, isuppz.data());
    if (info != 0 || found != count) {
        throw ConvergenceError("dsyevr failed (info " + std::to_string(info) + ")");
    }
    EigenPairs out;
    out.values = w.head(count);
    if (want_vectors) out.vectors = std::move(z);
    return out;
}

Eigen::VectorXd band_multiply(const Eigen::MatrixXd& band, int bandwidth, const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        y(j) += band(bandwidth, j) * x(j);
        for (int d = 1; d <= bandwidth && j - d >= 0; ++d) {
            const double h = band(bandwidth - d, j);  // H(j - d, j)
            y(j - d) += h * x(j);
            y(j) += h * x(j - d);
        }
    }
    return y;
}

EigenPairs lowest_eigenpairs_band(const Eigen::MatrixXd& band, int bandwidth, int count,
                                  bool want_vectors) {
    const lapack_int n = static_cast<lapack_int>(band.cols());
    const lapack_int kd = bandwidth;
    Eigen::MatrixXd ab = band;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd q(1, 1);
    Eigen::MatrixXd z(1, 1);
    std::vector<lapack_int> ifail(static_cast<std::size_t>(n));
    lapack_int found = 0;
    const lapack_int info =
        LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, kd, ab.data(), kd + 1, q.data(), 1, 0.0,
                       0.0, 1, count, 2.0 * LAPACKE_dlamch('S'), &found, w.data(), z.data(), 1,
                       ifail.data());
    if (info != 0 || found != count) {
        throw ConvergenceError("dsbevx failed (info " + std::to_string(info) + ")");
    }
    EigenPairs out;
    out.values = w.head(count);
    if (!want_vectors) return out;

    double norm = 0.0;
    for (int j = 0; j < n; ++j) {
        double row = std::abs(band(kd, j));
        for (int d = 1; d <= kd; ++d) {
            if (j - d >= 0) row += std::abs(band(kd - d, j));
            if (j + d < n) row += std::abs(band(kd - d, j + d));
        }
        norm = std::max(norm, row);
    }

    // General band LU storage: rows kl + ku + 1 + kl with kl = ku = kd.
    const lapack_int ldab = 3 * kd + 1;
    out.vectors.resize(n, count);
    Eigen::MatrixXd lu(ldab, n);
    std::vector<lapack_int> ipiv(static_cast<std::size_t>(n));
    for (int level = 0; level < count; ++level) {
        const double shift = out.values(level) - 64.0 * LAPACKE_dlamch('E') * norm;
        lu.setZero();
        for (int j = 0; j < n; ++j) {
            for (int i = std::max(0, j - kd); i <= std::min<int>(n - 1, j + kd); ++i) {
                const double h = i <= j ? band(kd + i - j, j) : band(kd + j - i, i);
                lu(2 * kd + i - j, j) = h - (i == j ? shift : 0.0);
            }
        }
        lapack_int f = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, lu.data(), ldab, ipiv.data());
        if (f < 0) throw ConvergenceError("dgbtrf failed");
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(0.731 * i + 1.3 * level);
        for (int iter = 0; iter < 4; ++iter) {
            f = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, 1, lu.data(), ldab, ipiv.data(),
                               v.data(), n);
            if (f != 0) throw ConvergenceError("dgbtrs failed");
            for (int prev = 0; prev < level; ++prev) {
                v -= out.vectors.col(prev).dot(v) * out.vectors.col(prev);
            }
            v.normalize();
        }
        out.vectors.col(level) = v;
    }
    return out;
}

}  // namespace fluxonium::detail
