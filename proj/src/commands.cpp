#include "wquant/commands.hpp"

#include <algorithm>
#include <cmath>

#include "wquant/linalg.hpp"
#include "wquant/rng.hpp"

namespace wquant {

namespace {

constexpr double kAnalyzeRefRate = 4.0; // reference rate for prediction rows

std::vector<double> squared_diag(const UpperCholesky& chol) {
    std::vector<double> d(chol.n);
    for (std::size_t i = 0; i < chol.n; ++i) d[i] = chol.diag(i) * chol.diag(i);
    return d;
}

std::vector<double> diag_vector(const UpperCholesky& chol) {
    std::vector<double> d(chol.n);
    for (std::size_t i = 0; i < chol.n; ++i) d[i] = chol.diag(i);
    return d;
}

struct TrialStats {
    double mean = 0.0;
    double stderr_ = 0.0;
};

TrialStats summarize(const std::vector<double>& xs) {
    TrialStats s;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) s.mean += x / n;
    if (xs.size() > 1) {
        double var = 0.0;
        for (double x : xs) var += (x - s.mean) * (x - s.mean) / (n - 1.0);
        s.stderr_ = std::sqrt(var / n);
    }
    return s;
}

QuantizedWeights quantize_for(Scheme scheme, const Matrix& w, const SymMatrix& sigma,
                              double alpha, int threads) {
    switch (scheme) {
        case Scheme::watersic:
        case Scheme::watersic_rect:
            return watersic_quantize(w, sigma, alpha, threads);
        case Scheme::gptq:
        case Scheme::gptq_rect:
            return gptq_quantize(w, sigma, alpha, threads);
        case Scheme::limits:
            break;
    }
    throw InputError("quantize: scheme has no quantizer");
}

} // namespace

std::optional<Scheme> parse_scheme(const std::string& name) {
    if (name == "gptq") return Scheme::gptq;
    if (name == "watersic") return Scheme::watersic;
    if (name == "gptq_rect") return Scheme::gptq_rect;
    if (name == "watersic_rect") return Scheme::watersic_rect;
    if (name == "limits") return Scheme::limits;
    return std::nullopt;
}

std::string scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::gptq: return "gptq";
        case Scheme::watersic: return "watersic";
        case Scheme::gptq_rect: return "gptq_rect";
        case Scheme::watersic_rect: return "watersic_rect";
        case Scheme::limits: return "limits";
    }
    return "?";
}

void SweepSpec::validate() const {
    if (rates.empty()) throw InputError("sweep: needs at least one rate");
    for (std::size_t i = 0; i + 1 < rates.size(); ++i)
        if (!(rates[i] < rates[i + 1])) throw InputError("sweep: rates must be strictly increasing");
    if (trials < 1) throw InputError("sweep: trials must be >= 1");
    if (n < 1 || a < 1) throw InputError("sweep: dimensions must be >= 1");
}

std::vector<RdPoint> run_limits(const std::vector<double>& lambdas, double sigma_w,
                                const std::vector<double>& rates) {
    bool nonsingular = true;
    for (double l : lambdas) nonsingular = nonsingular && l > 0.0;

    std::vector<RdPoint> rows;
    for (double r : rates) {
        const WaterfillSolution wf = waterfill_for_rate(lambdas, sigma_w, r);
        rows.push_back({"waterfill", r, wf.distortion, {{"tau", wf.tau}}});
        rows.push_back({"iso", r, d_iso(lambdas, sigma_w, r), {}});
        const RcPoint rc = random_codebook_for_rate(lambdas, sigma_w, r);
        rows.push_back({"random_codebook", rc.rate, rc.distortion, {{"t", rc.t}}});
        if (nonsingular)
            rows.push_back({"high_rate", r, d_high_rate(lambdas, sigma_w, r), {}});
    }
    return rows;
}

double calibrate_alpha_for_rect_rate(const Matrix& w_cal, const SymMatrix& sigma,
                                     bool waterfilled, double target_rate_bits, int threads) {
    auto rate_at = [&](double alpha) {
        const QuantizedWeights qw = waterfilled ? watersic_quantize(w_cal, sigma, alpha, threads)
                                                : gptq_quantize(w_cal, sigma, alpha, threads);
        return rect_rate(qw).rate;
    };

    // rect_rate is monotone non-increasing in alpha
    double lo = 1.0, hi = 1.0;
    for (int i = 0; i < 60 && rate_at(lo) < target_rate_bits; ++i) lo *= 0.25;
    for (int i = 0; i < 60 && rate_at(hi) > target_rate_bits; ++i) hi *= 4.0;

    double mid = std::sqrt(lo * hi);
    for (int it = 0; it < 30; ++it) {
        mid = std::sqrt(lo * hi);
        const double r = rate_at(mid);
        if (std::abs(r - target_rate_bits) < 0.02) break;
        if (r > target_rate_bits)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

std::vector<RdPoint> run_evaluate(const SweepSpec& spec, const SymMatrix& sigma,
                                  const std::vector<double>& lambdas) {
    spec.validate();
    if (sigma.dim() != spec.n) throw DimensionMismatch("evaluate: covariance dimension differs");
    const UpperCholesky chol = cholesky_upper(sigma);
    const double entries = static_cast<double>(spec.n) * static_cast<double>(spec.a);

    std::vector<RdPoint> rows;
    for (double target : spec.rates) {
        for (Scheme scheme : spec.schemes) {
            if (scheme == Scheme::limits) {
                for (auto& row : run_limits(lambdas, spec.sigma_w, {target}))
                    rows.push_back(std::move(row));
                continue;
            }
            const bool rect = scheme == Scheme::gptq_rect || scheme == Scheme::watersic_rect;
            const bool water = scheme == Scheme::watersic || scheme == Scheme::watersic_rect;

            double alpha = 0.0;
            if (rect) {
                const Matrix w_cal =
                    gaussian_matrix(spec.n, spec.a, spec.sigma_w, rng::derive(spec.seed, 99));
                alpha = calibrate_alpha_for_rect_rate(w_cal, sigma, water, target, spec.threads);
            } else {
                alpha = alpha_for_rate(spec.sigma_w, target);
            }

            std::vector<double> dist(spec.trials), rate(spec.trials);
            for (int t = 0; t < spec.trials; ++t) {
                const Matrix w = gaussian_matrix(spec.n, spec.a, spec.sigma_w,
                                                 rng::derive(spec.seed, 100 + t));
                const QuantizedWeights qw = quantize_for(scheme, w, sigma, alpha, spec.threads);
                dist[t] = wmse_distortion(w, dequantize(qw), chol);
                const double side = static_cast<double>(spec.n) * 96.0;
                rate[t] = (rect ? rect_rate(qw).rate : entropy_rate(qw)) + side / entries;
            }
            const TrialStats d = summarize(dist);
            const TrialStats r = summarize(rate);
            rows.push_back({scheme_name(scheme),
                            r.mean,
                            d.mean,
                            {{"alpha", alpha},
                             {"nominal_rate", target},
                             {"stderr", d.stderr_},
                             {"trials", static_cast<double>(spec.trials)}}});
        }
    }
    return rows;
}

std::vector<RdPoint> run_analyze(const SymMatrix& sigma, std::uint64_t seed) {
    const std::size_t n = sigma.dim();
    const Spectrum eig = sym_eigen(sigma);
    const UpperCholesky chol = cholesky_upper(sigma);
    const Matrix v = random_orthogonal(n, rng::derive(seed, 7));
    const SymMatrix rotated = rotate_covariance(sigma, v);
    const UpperCholesky chol_rot = cholesky_upper(rotated);

    const std::vector<double> d2 = squared_diag(chol);
    const std::vector<double> d2_rot = squared_diag(chol_rot);
    const std::vector<double> approx = approx_chol_diag_rotated(eig.lambdas);

    std::vector<RdPoint> rows;
    rows.push_back({"eigen_amgm_gap", am_gm_rate_gap(eig.lambdas), 0.0, {}});
    // Cholesky-diagonal AM-GM gap = predicted GPTQ -> WaterSIC rate advantage
    rows.push_back({"chol_amgm_gap", am_gm_rate_gap(d2), 0.0, {{"rotated", 0.0}}});
    rows.push_back({"chol_amgm_gap_rotated", am_gm_rate_gap(d2_rot), 0.0, {{"rotated", 1.0}}});

    const double r = kAnalyzeRefRate;
    rows.push_back({"gptq_pred", r, predict_gptq(diag_vector(chol), 1.0, r), {{"rotated", 0.0}}});
    rows.push_back(
        {"gptq_pred_rotated", r, predict_gptq(diag_vector(chol_rot), 1.0, r), {{"rotated", 1.0}}});
    rows.push_back(
        {"watersic_pred", r, predict_watersic(2.0 * chol.logdet, n, 1.0, r), {{"rotated", 0.0}}});
    rows.push_back({"watersic_pred_rotated", r, predict_watersic(2.0 * chol_rot.logdet, n, 1.0, r),
                    {{"rotated", 1.0}}});

    for (std::size_t k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k + 1);
        rows.push_back({"ukk_actual", 0.0, d2_rot[k], {{"k", kk}}});
        rows.push_back({"ukk_approx", 0.0, approx[k], {{"k", kk}}});
    }
    return rows;
}

OracleReport run_oracle(const SymMatrix& sigma, double alpha, int trials, std::uint64_t seed) {
    const std::size_t n = sigma.dim();
    if (n > 12) throw DimensionTooLarge("oracle: exact CVP is capped at n <= 12");
    if (trials < 1) throw InputError("oracle: trials must be >= 1");
    if (!(alpha > 0.0)) throw InputError("oracle: alpha must be positive");

    const UpperCholesky chol = cholesky_upper(sigma);
    const double det_root = std::exp(chol.logdet / static_cast<double>(n));
    std::vector<double> alphas(n);
    for (std::size_t i = 0; i < n; ++i) alphas[i] = alpha * det_root / chol.diag(i);

    OracleReport rep;
    double sic_sum = 0.0, cvp_sum = 0.0, ratio_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        const Matrix w = gaussian_matrix(n, 1, 1.0, rng::derive(seed, 200 + t));
        std::vector<double> y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) y[i] += chol.U(i, j) * w(j, 0);

        const SicResult s = sic(y, chol, alphas);
        double sic_cost = 0.0;
        for (double e : s.residual) sic_cost += e * e;
        const CvpResult c = cvp_exact(y, chol, alphas);

        sic_sum += sic_cost;
        cvp_sum += c.sqdist;
        ratio_sum += sic_cost > 0.0 ? c.sqdist / sic_cost : 1.0;
        if (c.sqdist > sic_cost) ++rep.violations;
    }

    const double denom = static_cast<double>(trials) * static_cast<double>(n);
    rep.sic_distortion = sic_sum / denom;
    rep.cvp_distortion = cvp_sum / denom;
    rep.mean_ratio = ratio_sum / static_cast<double>(trials);
    rep.zador = zador_bound(n, -static_cast<double>(n) * std::log(alpha), chol.logdet);

    const std::map<std::string, double> meta{{"alpha", alpha},
                                             {"trials", static_cast<double>(trials)},
                                             {"violations", static_cast<double>(rep.violations)},
                                             {"mean_ratio", rep.mean_ratio}};
    rep.rows.push_back({"oracle_sic", 0.0, rep.sic_distortion, meta});
    rep.rows.push_back({"oracle_cvp", 0.0, rep.cvp_distortion, meta});
    rep.rows.push_back({"zador", 0.0, rep.zador, {{"alpha", alpha}}});
    return rep;
}

QuantizeOutcome run_quantize(const Matrix& w, const SymMatrix& sigma, Scheme scheme,
                             double alpha, int threads) {
    QuantizeOutcome out;
    out.qw = quantize_for(scheme, w, sigma, alpha, threads);
    out.container = encode_container(out.qw);
    out.report = rate_report(out.qw, out.container);
    out.wmse = wmse_distortion(w, dequantize(out.qw), sigma);
    return out;
}

} // namespace wquant
