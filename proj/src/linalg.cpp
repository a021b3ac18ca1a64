#include "wquant/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wquant/rng.hpp"

namespace wquant {

namespace {

// Lower-triangular factor attempt; pivots at or below `floor` abort.
bool try_cholesky_lower(const Matrix& a, double floor, Matrix& l) {
    const std::size_t n = a.rows();
    l = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > floor)) return false;
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return true;
}

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

} // namespace

UpperCholesky cholesky_upper(const SymMatrix& sigma) {
    const std::size_t n = sigma.dim();
    if (n == 0) throw DimensionMismatch("cholesky_upper: empty matrix");
    const double mean_diag = sigma.trace() / static_cast<double>(n);
    const double floor = 1e-10 * mean_diag;

    Matrix l;
    if (!try_cholesky_lower(sigma.entries(), floor, l)) {
        // One standard regularization before giving up on the layer.
        const double eps = 1e-8 * mean_diag;
        Matrix jittered = sigma.entries();
        for (std::size_t i = 0; i < n; ++i) jittered(i, i) += eps;
        if (!try_cholesky_lower(jittered, floor, l))
            throw NotPositiveDefinite("cholesky_upper: pivot at or below jitter floor");
    }

    UpperCholesky out;
    out.n = n;
    out.U = transpose(l);
    out.logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) out.logdet += std::log(out.U(i, i));
    return out;
}

Spectrum sym_eigen(const SymMatrix& sigma) {
    const std::size_t n = sigma.dim();
    Matrix a = sigma.entries();
    Matrix v = Matrix::identity(n);
    const double trace = std::abs(sigma.trace());
    const double tol = 1e-12 * trace;

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
        double off_sq = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off_sq += a(p, q) * a(p, q);
        if (std::sqrt(2.0 * off_sq) <= tol) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(p, k) = a(k, p);
                    a(k, q) = s * akp + c * akq;
                    a(q, k) = a(k, q);
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == kMaxSweeps) throw NoConvergence("sym_eigen: Jacobi sweep cap reached");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    Spectrum out;
    out.lambdas.resize(n);
    out.V = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double lam = a(order[j], order[j]);
        if (lam < 0.0 && lam > -1e-12 * trace) lam = 0.0; // roundoff on PSD input
        out.lambdas[j] = lam;
        for (std::size_t i = 0; i < n; ++i) out.V(i, j) = v(i, order[j]);
    }
    return out;
}

Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DimensionMismatch("random_orthogonal: n must be >= 1");
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = rng::normal(seed, i * n + j);

    // Modified Gram-Schmidt with one reorthogonalization pass; the column
    // norms play the role of the R diagonal and are positive, which is
    // exactly the sign-corrected QR convention needed for Haar measure.
    Matrix q(n, n);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = g(i, j);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * col[i];
                for (std::size_t i = 0; i < n; ++i) col[i] -= dot * q(i, k);
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += col[i] * col[i];
        norm = std::sqrt(norm);
        if (norm == 0.0) throw NumericalError("random_orthogonal: rank-deficient sample");
        for (std::size_t i = 0; i < n; ++i) q(i, j) = col[i] / norm;
    }
    return q;
}

SymMatrix rotate_covariance(const SymMatrix& sigma, const Matrix& v) {
    if (v.rows() != sigma.dim() || v.cols() != sigma.dim())
        throw DimensionMismatch("rotate_covariance: dimensions differ");
    return SymMatrix(matmul(transpose(v), matmul(sigma.entries(), v)));
}

Matrix gaussian_matrix(std::size_t n, std::size_t a, double sigma_w, std::uint64_t seed) {
    if (n < 1 || a < 1) throw DimensionMismatch("gaussian_matrix: dimensions must be >= 1");
    if (!(sigma_w > 0.0)) throw InputError("gaussian_matrix: sigma_w must be positive");
    Matrix w(n, a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < a; ++j) w(i, j) = sigma_w * rng::normal(seed, i * a + j);
    return w;
}

std::vector<double> elem_sym_log(const std::vector<double>& log_lambdas) {
    const std::size_t n = log_lambdas.size();
    std::vector<double> le(n + 1, -std::numeric_limits<double>::infinity());
    le[0] = 0.0; // e_0 = 1
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = std::min(m + 1, n); k >= 1; --k)
            le[k] = log_add_exp(le[k], log_lambdas[m] + le[k - 1]);
    }
    return le;
}

} // namespace wquant
