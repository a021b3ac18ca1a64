#include "wquant/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "wquant/errors.hpp"

namespace wquant {

namespace {

constexpr long long kMaxGridPoint = (1LL << 31) - 1;

void check_strictly_upper(const Matrix& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j <= i && j < b.cols(); ++j)
            if (b(i, j) != 0.0)
                throw InputError("SicConfig: feedback filter must be strictly upper triangular");
}

void check_alphas(std::span<const double> alphas) {
    for (double a : alphas)
        if (!(a > 0.0)) throw InputError("spacings must be strictly positive");
}

long long checked_round(double x) {
    if (!(std::abs(x) < static_cast<double>(kMaxGridPoint)))
        throw NumericalError("quantizer: grid index overflows 32-bit storage");
    return std::llround(x);
}

int resolve_threads(int threads, std::size_t a) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    return static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(a, 1)));
}

struct CoreResult {
    QuantizedWeights qw;
    std::uint64_t overloads = 0;
};

// Shared engine for GPTQ/WaterSIC/clipped variants: Y = U W once, then the
// i = n..1 cancellation loop applied to all columns. Columns are independent,
// so threads own disjoint column ranges and the output is schedule-free.
CoreResult sic_quantize_core(const Matrix& w, const SymMatrix& sigma,
                             std::vector<double> alphas, const ScalarCodebook& cb,
                             int threads) {
    const std::size_t n = w.rows();
    const std::size_t a = w.cols();
    if (sigma.dim() != n) throw DimensionMismatch("quantize: weight/covariance shapes differ");
    check_alphas(alphas);

    const UpperCholesky chol = cholesky_upper(sigma);
    const Matrix& u = chol.U;

    CoreResult out;
    out.qw.n = n;
    out.qw.a = a;
    out.qw.z.assign(n * a, 0);
    out.qw.alphas = std::move(alphas);
    out.qw.q.assign(n, 0);
    out.qw.sigma_logdet = chol.logdet;
    if (a == 0) return out;

    Matrix y(n, a);
    const int nthreads = resolve_threads(threads, a);
    std::vector<std::uint64_t> overloads(nthreads, 0);

    auto worker = [&](int t, std::size_t c0, std::size_t c1) {
        // Y = U W on this column slice (upper-triangular product).
        for (std::size_t i = 0; i < n; ++i) {
            double* yrow = y.row(i);
            for (std::size_t j = i; j < n; ++j) {
                const double uij = u(i, j);
                if (uij == 0.0) continue;
                const double* wrow = w.row(j);
                for (std::size_t c = c0; c < c1; ++c) yrow[c] += uij * wrow[c];
            }
        }
        for (std::size_t ii = n; ii-- > 0;) {
            const double scale = out.qw.alphas[ii] * u(ii, ii);
            double* yi = y.row(ii);
            std::int32_t* zi = out.qw.z.data() + ii * a;
            for (std::size_t c = c0; c < c1; ++c) {
                bool over = false;
                const long long zz = cb.nearest_int(yi[c] / scale, &over);
                if (over) ++overloads[t];
                zi[c] = static_cast<std::int32_t>(zz);
            }
            // cancel row ii's reconstruction from the residual rows j <= ii
            for (std::size_t j = 0; j <= ii; ++j) {
                const double coeff = out.qw.alphas[ii] * u(j, ii);
                if (coeff == 0.0) continue;
                double* yj = y.row(j);
                for (std::size_t c = c0; c < c1; ++c) yj[c] -= coeff * static_cast<double>(zi[c]);
            }
        }
    };

    if (nthreads == 1) {
        worker(0, 0, a);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(nthreads);
        pool.reserve(nthreads);
        const std::size_t chunk = (a + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const std::size_t c0 = std::min(a, static_cast<std::size_t>(t) * chunk);
            const std::size_t c1 = std::min(a, c0 + chunk);
            pool.emplace_back([&, t, c0, c1] {
                try {
                    worker(t, c0, c1);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t qi = 0;
        const std::int32_t* zi = out.qw.z.data() + i * a;
        for (std::size_t c = 0; c < a; ++c)
            qi = std::max(qi, static_cast<std::uint32_t>(zi[c] < 0 ? -static_cast<std::int64_t>(zi[c])
                                                                   : zi[c]));
        out.qw.q[i] = qi;
    }
    for (std::uint64_t o : overloads) out.overloads += o;
    return out;
}

std::vector<double> water_spacings(const UpperCholesky& chol, double alpha) {
    const double det_root = std::exp(chol.logdet / static_cast<double>(chol.n));
    std::vector<double> alphas(chol.n);
    for (std::size_t i = 0; i < chol.n; ++i) alphas[i] = alpha * det_root / chol.diag(i);
    return alphas;
}

} // namespace

ScalarCodebook ScalarCodebook::clipped(long long lo, long long hi) {
    if (lo >= hi) throw InputError("ScalarCodebook: clip range requires lo < hi");
    ScalarCodebook cb;
    cb.clip = true;
    cb.lo = lo;
    cb.hi = hi;
    return cb;
}

long long ScalarCodebook::nearest_int(double x, bool* overloaded) const {
    long long z = checked_round(x);
    if (clip) {
        if (z < lo) {
            z = lo;
            if (overloaded) *overloaded = true;
        } else if (z > hi) {
            z = hi;
            if (overloaded) *overloaded = true;
        }
    }
    return z;
}

std::vector<double> general_sic(std::span<const double> y, const SicConfig& cfg) {
    const std::size_t n = y.size();
    if (cfg.F.rows() != n || cfg.F.cols() != n || cfg.B.rows() != n || cfg.B.cols() != n ||
        cfg.alphas.size() != n)
        throw DimensionMismatch("general_sic: filter shapes differ from input");
    if (!(cfg.beta > 0.0)) throw InputError("general_sic: beta must be positive");
    check_strictly_upper(cfg.B);
    check_alphas(cfg.alphas);

    std::vector<double> work(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* frow = cfg.F.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += frow[j] * y[j];
        work[i] = acc;
    }

    std::vector<double> w_hat(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        const double alpha = cfg.alphas[i];
        w_hat[i] = alpha * static_cast<double>(cfg.codebook.nearest_int(work[i] / alpha));
        for (std::size_t j = 0; j < i; ++j) work[j] -= w_hat[i] * cfg.B(j, i);
    }
    for (double& v : w_hat) v *= cfg.beta;
    return w_hat;
}

HighRateFilters high_rate_filters(const UpperCholesky& chol) {
    const std::size_t n = chol.n;
    HighRateFilters hr;
    hr.beta = 1.0;
    hr.F = Matrix(n, n);
    hr.B = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dinv = 1.0 / chol.diag(i);
        hr.F(i, i) = dinv;
        for (std::size_t j = i + 1; j < n; ++j) hr.B(i, j) = chol.U(i, j) * dinv;
    }
    return hr;
}

SicResult sic(std::span<const double> y, const UpperCholesky& chol,
              std::span<const double> alphas) {
    const std::size_t n = chol.n;
    if (y.size() != n || alphas.size() != n) throw DimensionMismatch("sic: shapes differ");
    check_alphas(alphas);

    SicResult r;
    r.point.assign(n, 0.0);
    r.z.assign(n, 0);
    r.residual.assign(y.begin(), y.end());
    for (std::size_t i = n; i-- > 0;) {
        const long long zi = checked_round(r.residual[i] / (alphas[i] * chol.diag(i)));
        r.z[i] = zi;
        r.point[i] = alphas[i] * static_cast<double>(zi);
        for (std::size_t j = 0; j <= i; ++j) r.residual[j] -= r.point[i] * chol.U(j, i);
    }
    return r;
}

void QuantizedWeights::validate() const {
    if (z.size() != n * a || alphas.size() != n || q.size() != n)
        throw CorruptContainer("QuantizedWeights: field sizes are inconsistent");
    for (double al : alphas)
        if (!(al > 0.0) || !std::isfinite(al))
            throw CorruptContainer("QuantizedWeights: scales must be positive and finite");
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t* zi = z.data() + i * a;
        for (std::size_t c = 0; c < a; ++c) {
            const std::int64_t mag = zi[c] < 0 ? -static_cast<std::int64_t>(zi[c]) : zi[c];
            if (mag > q[i]) throw CorruptContainer("QuantizedWeights: entry exceeds row bound");
        }
    }
}

bool operator==(const QuantizedWeights& x, const QuantizedWeights& y) {
    return x.n == y.n && x.a == y.a && x.z == y.z && x.alphas == y.alphas && x.q == y.q;
}

QuantizedWeights watersic_quantize(const Matrix& w, const SymMatrix& sigma, double alpha,
                                   int threads) {
    if (!(alpha > 0.0)) throw InputError("watersic_quantize: alpha must be positive");
    const UpperCholesky chol = cholesky_upper(sigma);
    return sic_quantize_core(w, sigma, water_spacings(chol, alpha), ScalarCodebook::integers(),
                             threads)
        .qw;
}

QuantizedWeights gptq_quantize(const Matrix& w, const SymMatrix& sigma, double alpha,
                               int threads) {
    if (!(alpha > 0.0)) throw InputError("gptq_quantize: alpha must be positive");
    std::vector<double> alphas(w.rows(), alpha);
    return sic_quantize_core(w, sigma, std::move(alphas), ScalarCodebook::integers(), threads).qw;
}

ClippedQuantizeResult clipped_codebook_quantize(const Matrix& w, const SymMatrix& sigma,
                                                double alpha, long long lo, long long hi,
                                                int threads) {
    if (!(alpha > 0.0)) throw InputError("clipped_codebook_quantize: alpha must be positive");
    ScalarCodebook cb;
    if (lo == hi) {
        // degenerate single-codeword book
        cb.clip = true;
        cb.lo = lo;
        cb.hi = hi;
    } else {
        cb = ScalarCodebook::clipped(lo, hi);
    }
    std::vector<double> alphas(w.rows(), alpha);
    CoreResult core = sic_quantize_core(w, sigma, std::move(alphas), cb, threads);
    return {std::move(core.qw), core.overloads};
}

Matrix dequantize(const QuantizedWeights& qw) {
    qw.validate();
    Matrix w_hat(qw.n, qw.a);
    for (std::size_t i = 0; i < qw.n; ++i) {
        const double alpha = qw.alphas[i];
        const std::int32_t* zi = qw.z.data() + i * qw.a;
        double* row = w_hat.row(i);
        for (std::size_t c = 0; c < qw.a; ++c) row[c] = alpha * static_cast<double>(zi[c]);
    }
    return w_hat;
}

double wmse_distortion(const Matrix& w, const Matrix& w_hat, const UpperCholesky& chol) {
    if (!w.same_shape(w_hat) || w.rows() != chol.n)
        throw DimensionMismatch("wmse_distortion: shapes differ");
    const std::size_t n = w.rows();
    const std::size_t a = w.cols();
    if (a == 0) return 0.0;

    std::vector<double> err_row(a);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(err_row.begin(), err_row.end(), 0.0);
        for (std::size_t j = i; j < n; ++j) {
            const double uij = chol.U(i, j);
            if (uij == 0.0) continue;
            const double* wr = w.row(j);
            const double* hr = w_hat.row(j);
            for (std::size_t c = 0; c < a; ++c) err_row[c] += uij * (wr[c] - hr[c]);
        }
        for (double e : err_row) total += e * e;
    }
    return total / (static_cast<double>(n) * static_cast<double>(a));
}

double wmse_distortion(const Matrix& w, const Matrix& w_hat, const SymMatrix& sigma) {
    return wmse_distortion(w, w_hat, cholesky_upper(sigma));
}

CvpResult cvp_exact(std::span<const double> y, const UpperCholesky& chol,
                    std::span<const double> alphas, double search_radius) {
    const std::size_t n = chol.n;
    if (n > 12) throw DimensionTooLarge("cvp_exact: enumeration capped at n <= 12");
    if (y.size() != n || alphas.size() != n) throw DimensionMismatch("cvp_exact: shapes differ");
    check_alphas(alphas);

    // G = U diag(alpha); the Babai/SIC point provides a valid starting bound.
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) g(i, j) = chol.U(i, j) * alphas[j];

    const SicResult babai = sic(y, chol, alphas);
    double babai_cost = 0.0;
    for (double e : babai.residual) babai_cost += e * e;

    auto lex_less = [](const std::vector<long long>& a, const std::vector<long long>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    };

    std::vector<long long> best_z = babai.z;
    double best_cost = babai_cost;

    // Depth-first Schnorr-Euchner zig-zag, pruning on strictly larger partial
    // cost so exact ties can still be swept for the lexicographic rule.
    auto enumerate = [&](double bound) -> bool {
        std::vector<double> center(n, 0.0), above(n, 0.0);
        std::vector<long long> z(n, 0), delta(n, 0);
        bool found = false;

        auto load_level = [&](std::size_t i) {
            double r = y[i];
            for (std::size_t j = i + 1; j < n; ++j) r -= g(i, j) * static_cast<double>(z[j]);
            center[i] = r / g(i, i);
            z[i] = checked_round(center[i]);
            delta[i] = center[i] >= static_cast<double>(z[i]) ? 1 : -1;
        };
        auto advance = [&](std::size_t i) {
            z[i] += delta[i];
            delta[i] = -delta[i] - (delta[i] > 0 ? 1 : -1);
        };

        std::size_t i = n - 1;
        above[i] = 0.0;
        load_level(i);
        while (true) {
            const double resid = (center[i] - static_cast<double>(z[i])) * g(i, i);
            const double cost = above[i] + resid * resid;
            if (cost <= std::min(bound, best_cost)) {
                if (i == 0) {
                    if (cost < best_cost || (cost == best_cost && lex_less(z, best_z))) {
                        best_cost = cost;
                        best_z = z;
                        found = true;
                    }
                    advance(0);
                } else {
                    above[i - 1] = cost;
                    --i;
                    load_level(i);
                }
            } else {
                ++i;
                if (i == n) break;
                advance(i);
            }
        }
        return found;
    };

    if (search_radius > 0.0 && search_radius * search_radius < babai_cost) {
        // A candidate within the hint radius is provably optimal; otherwise
        // fall back to the always-sufficient Babai bound.
        if (!enumerate(search_radius * search_radius)) enumerate(best_cost);
    } else {
        enumerate(best_cost);
    }

    CvpResult r;
    r.z = std::move(best_z);
    r.sqdist = best_cost;
    r.point.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        r.point[i] = alphas[i] * static_cast<double>(r.z[i]);
    return r;
}

} // namespace wquant
