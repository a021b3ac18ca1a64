#include "wquant/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wquant/errors.hpp"
#include "wquant/linalg.hpp"

namespace wquant {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kE = 2.71828182845904523536;
constexpr double kTwoPiE = 2.0 * kPi * kE;
constexpr double kLn2 = 0.69314718055994530942; // bits = nats / kLn2

constexpr double kRateTol = 1e-10; // bits
constexpr int kBisectIters = 200;

double pow2(double x) { return std::exp2(x); }

void require_positive(const std::vector<double>& values, const char* who) {
    for (double v : values)
        if (!(v > 0.0)) throw SingularSpectrum(std::string(who) + ": requires strictly positive values");
}

} // namespace

WaterfillSolution waterfill_from_tau(const std::vector<double>& lambdas, double sigma_w,
                                     double tau) {
    if (!(sigma_w > 0.0)) throw InputError("waterfill: sigma_w must be positive");
    if (!(tau > 0.0)) throw InputError("waterfill: tau must be positive");
    const double sw2 = sigma_w * sigma_w;
    const std::size_t n = lambdas.size();

    WaterfillSolution sol;
    sol.tau = tau;
    sol.per_coord_D.resize(n);
    double dsum = 0.0;
    double rate_nats = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double var = lambdas[i] * sw2;
        sol.per_coord_D[i] = std::min(var, tau);
        dsum += sol.per_coord_D[i];
        if (var > tau) rate_nats += 0.5 * std::log(var / tau);
    }
    sol.distortion = dsum / static_cast<double>(n);
    sol.rate = rate_nats / (kLn2 * static_cast<double>(n));
    return sol;
}

WaterfillSolution waterfill_for_rate(const std::vector<double>& lambdas, double sigma_w,
                                     double rate_bits) {
    if (rate_bits < 0.0) throw InputError("waterfill_for_rate: rate must be non-negative");
    const double sw2 = sigma_w * sigma_w;
    double max_var = 0.0;
    double min_pos = std::numeric_limits<double>::infinity();
    for (double l : lambdas) {
        max_var = std::max(max_var, l * sw2);
        if (l > 0.0) min_pos = std::min(min_pos, l * sw2);
    }
    if (max_var == 0.0) throw AllZeroSpectrum("waterfill_for_rate: all eigenvalues are zero");
    if (rate_bits == 0.0) return waterfill_from_tau(lambdas, sigma_w, max_var);

    auto rate_at = [&](double tau) { return waterfill_from_tau(lambdas, sigma_w, tau).rate; };

    double lo = std::max(pow2(-2.0 * (rate_bits + 64.0)) * min_pos, 1e-300);
    double hi = max_var;
    // spectra with many zeros need a deeper bracket
    while (lo > 1e-300 && rate_at(lo) < rate_bits) lo = std::max(lo * 0x1p-128, 1e-300);
    double mid = lo;
    for (int it = 0; it < kBisectIters; ++it) {
        mid = std::sqrt(lo * hi);
        const double r = rate_at(mid);
        if (std::abs(r - rate_bits) < kRateTol) break;
        if (r > rate_bits)
            lo = mid;
        else
            hi = mid;
    }
    return waterfill_from_tau(lambdas, sigma_w, mid);
}

WaterfillSolution waterfill_for_distortion(const std::vector<double>& lambdas, double sigma_w,
                                           double distortion) {
    if (!(distortion > 0.0)) throw InputError("waterfill_for_distortion: distortion must be positive");
    const double sw2 = sigma_w * sigma_w;
    double max_var = 0.0;
    for (double l : lambdas) max_var = std::max(max_var, l * sw2);
    if (max_var == 0.0) throw AllZeroSpectrum("waterfill_for_distortion: all eigenvalues are zero");

    WaterfillSolution zero_rate = waterfill_from_tau(lambdas, sigma_w, max_var);
    if (distortion >= zero_rate.distortion) return zero_rate;

    double lo = std::max(distortion * 1e-6, 1e-300);
    double hi = max_var;
    auto dist_at = [&](double tau) { return waterfill_from_tau(lambdas, sigma_w, tau).distortion; };
    while (lo > 1e-300 && dist_at(lo) > distortion) lo = std::max(lo * 1e-6, 1e-300);
    double mid = lo;
    for (int it = 0; it < kBisectIters; ++it) {
        mid = std::sqrt(lo * hi);
        const double d = dist_at(mid);
        if (std::abs(d - distortion) <= 1e-13 * distortion) break;
        if (d < distortion)
            lo = mid;
        else
            hi = mid;
    }
    return waterfill_from_tau(lambdas, sigma_w, mid);
}

double d_high_rate(const std::vector<double>& lambdas, double sigma_w, double rate_bits) {
    require_positive(lambdas, "d_high_rate");
    double log_gm = 0.0;
    for (double l : lambdas) log_gm += std::log(l);
    log_gm /= static_cast<double>(lambdas.size());
    return std::exp(log_gm + 2.0 * std::log(sigma_w) - 2.0 * rate_bits * kLn2);
}

double d_iso(const std::vector<double>& lambdas, double sigma_w, double rate_bits) {
    if (rate_bits < 0.0) throw InputError("d_iso: rate must be non-negative");
    double tr = 0.0;
    for (double l : lambdas) tr += l;
    return pow2(-2.0 * rate_bits) * sigma_w * sigma_w * tr / static_cast<double>(lambdas.size());
}

RcPoint d_random_codebook(const std::vector<double>& lambdas, double sigma_w, double t) {
    if (t < 0.0) throw InputError("d_random_codebook: T must be non-negative");
    const std::size_t n = lambdas.size();
    RcPoint p;
    p.t = t;
    double rate_nats = 0.0;
    double dsum = 0.0;
    for (double l : lambdas) {
        rate_nats += 0.5 * std::log1p(l * t);
        dsum += l / (1.0 + l * t);
    }
    p.rate = rate_nats / (kLn2 * static_cast<double>(n));
    p.distortion = sigma_w * sigma_w * dsum / static_cast<double>(n);
    return p;
}

RcPoint random_codebook_for_rate(const std::vector<double>& lambdas, double sigma_w,
                                 double rate_bits) {
    if (rate_bits <= 0.0) return d_random_codebook(lambdas, sigma_w, 0.0);
    double hi = 1.0;
    while (d_random_codebook(lambdas, sigma_w, hi).rate < rate_bits) {
        hi *= 2.0;
        if (!std::isfinite(hi)) throw AllZeroSpectrum("random_codebook_for_rate: rate unreachable");
    }
    double lo = 1e-300;
    double mid = hi;
    for (int it = 0; it < kBisectIters; ++it) {
        mid = std::sqrt(lo * hi);
        const double r = d_random_codebook(lambdas, sigma_w, mid).rate;
        if (std::abs(r - rate_bits) < kRateTol) break;
        if (r < rate_bits)
            lo = mid;
        else
            hi = mid;
    }
    return d_random_codebook(lambdas, sigma_w, mid);
}

RcPoint random_codebook_for_distortion(const std::vector<double>& lambdas, double sigma_w,
                                       double distortion) {
    if (!(distortion > 0.0))
        throw InputError("random_codebook_for_distortion: distortion must be positive");
    RcPoint at_zero = d_random_codebook(lambdas, sigma_w, 0.0);
    if (distortion >= at_zero.distortion) return at_zero;
    double hi = 1.0;
    while (d_random_codebook(lambdas, sigma_w, hi).distortion > distortion) hi *= 2.0;
    double lo = 1e-300;
    double mid = hi;
    for (int it = 0; it < kBisectIters; ++it) {
        mid = std::sqrt(lo * hi);
        const double d = d_random_codebook(lambdas, sigma_w, mid).distortion;
        if (std::abs(d - distortion) <= 1e-13 * distortion) break;
        if (d > distortion)
            lo = mid;
        else
            hi = mid;
    }
    return d_random_codebook(lambdas, sigma_w, mid);
}

ScalarGridSolution scalar_grid_waterfill(const std::vector<double>& lambdas, double rate_bits) {
    if (rate_bits < 0.0) throw InputError("scalar_grid_waterfill: rate must be non-negative");
    const std::size_t n = lambdas.size();
    double max_base = 0.0;
    double min_pos = std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (double l : lambdas) {
        max_base = std::max(max_base, l / 12.0);
        if (l > 0.0) min_pos = std::min(min_pos, l / 12.0);
        mean += l / static_cast<double>(n);
    }
    if (max_base == 0.0) throw AllZeroSpectrum("scalar_grid_waterfill: all eigenvalues are zero");

    auto rate_at = [&](double tau) {
        double nats = 0.0;
        for (double l : lambdas)
            if (l / 12.0 > tau) nats += 0.5 * std::log(l / (12.0 * tau));
        return nats / (kLn2 * static_cast<double>(n));
    };

    double tau = max_base;
    if (rate_bits > 0.0) {
        double lo = std::max(pow2(-2.0 * (rate_bits + 64.0)) * min_pos, 1e-300);
        double hi = max_base;
        while (lo > 1e-300 && rate_at(lo) < rate_bits) lo = std::max(lo * 0x1p-128, 1e-300);
        for (int it = 0; it < kBisectIters; ++it) {
            tau = std::sqrt(lo * hi);
            const double r = rate_at(tau);
            if (std::abs(r - rate_bits) < kRateTol) break;
            if (r > rate_bits)
                lo = tau;
            else
                hi = tau;
        }
    }

    ScalarGridSolution sol;
    sol.tau = tau;
    sol.baseline = mean / 12.0 * pow2(-2.0 * rate_bits);
    sol.spacings.resize(n);
    double dsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dsum += std::min(tau, lambdas[i] / 12.0);
        sol.spacings[i] = std::min(std::sqrt(12.0 * tau / lambdas[i]), 1.0);
    }
    sol.distortion = dsum / static_cast<double>(n);
    return sol;
}

double am_gm_rate_gap(const std::vector<double>& values) {
    require_positive(values, "am_gm_rate_gap");
    const double n = static_cast<double>(values.size());
    double am = 0.0;
    double log_gm = 0.0;
    for (double v : values) {
        am += v / n;
        log_gm += std::log(v) / n;
    }
    return 0.5 * (std::log(am) - log_gm) / kLn2;
}

double zador_bound(std::size_t n, double log_gamma, double logdet_u) {
    if (n < 1) throw DimensionMismatch("zador_bound: n must be >= 1");
    const double nd = static_cast<double>(n);
    const double log_ball = (2.0 / nd) * std::lgamma(nd / 2.0 + 1.0) - std::log((nd + 2.0) * kPi);
    return std::exp(log_ball + (2.0 / nd) * (logdet_u - log_gamma));
}

double predict_gptq(const std::vector<double>& chol_diag, double sigma_w, double rate_bits) {
    if (rate_bits < 0.0) throw InputError("predict_gptq: rate must be non-negative");
    double mean_sq = 0.0;
    for (double u : chol_diag) mean_sq += u * u / static_cast<double>(chol_diag.size());
    return kTwoPiE / 12.0 * sigma_w * sigma_w * mean_sq * pow2(-2.0 * rate_bits);
}

double predict_watersic(double logdet_sigma, std::size_t n, double sigma_w, double rate_bits) {
    if (!std::isfinite(logdet_sigma))
        throw SingularSpectrum("predict_watersic: covariance must be nonsingular");
    return kTwoPiE / 12.0 * sigma_w * sigma_w *
           std::exp(logdet_sigma / static_cast<double>(n) - 2.0 * rate_bits * kLn2);
}

double shaped_lattice_rd(double nsm, double logdet_sigma, std::size_t n, double log_vol_s,
                         double rate_bits) {
    if (!(nsm > 0.0)) throw InputError("shaped_lattice_rd: NSM must be positive");
    const double nd = static_cast<double>(n);
    return nsm * std::exp(logdet_sigma / nd + 2.0 * log_vol_s / nd - 2.0 * rate_bits * kLn2);
}

double entropy_coded_rd(double nsm, double logdet_sigma, std::size_t n, double sigma_w,
                        double rate_bits) {
    if (!(nsm > 0.0)) throw InputError("entropy_coded_rd: NSM must be positive");
    return nsm * kTwoPiE * sigma_w * sigma_w *
           std::exp(logdet_sigma / static_cast<double>(n) - 2.0 * rate_bits * kLn2);
}

Shrinkage optimal_shrinkage(double trace_sigma_over_n, double sigma_w, double sigma2_ul) {
    if (trace_sigma_over_n < 0.0 || sigma2_ul < 0.0)
        throw InputError("optimal_shrinkage: inputs must be non-negative");
    const double s = sigma_w * sigma_w * trace_sigma_over_n;
    if (s == 0.0 && sigma2_ul == 0.0)
        throw InputError("optimal_shrinkage: signal and noise cannot both be zero");
    Shrinkage out;
    out.beta = s / (s + sigma2_ul);
    out.distortion = s * sigma2_ul / (s + sigma2_ul);
    return out;
}

std::vector<double> approx_chol_diag_rotated(const std::vector<double>& lambdas) {
    require_positive(lambdas, "approx_chol_diag_rotated");
    const std::size_t n = lambdas.size();
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(lambdas[i]);
    const std::vector<double> le = elem_sym_log(logs);
    std::vector<double> out(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const double ratio = static_cast<double>(k) / static_cast<double>(n - k + 1);
        out[k - 1] = ratio * std::exp(le[k] - le[k - 1]);
    }
    return out;
}

} // namespace wquant
