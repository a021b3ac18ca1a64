#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wquant/coding.hpp"
#include "wquant/io.hpp"
#include "wquant/limits.hpp"
#include "wquant/quantizers.hpp"

namespace wquant {

enum class Scheme { gptq, watersic, gptq_rect, watersic_rect, limits };

std::optional<Scheme> parse_scheme(const std::string& name);
std::string scheme_name(Scheme scheme);

/// Benchmark-sweep description (the `evaluate` subcommand).
struct SweepSpec {
    std::vector<double> rates; // strictly increasing bits/entry targets
    std::vector<Scheme> schemes{Scheme::limits, Scheme::gptq, Scheme::watersic};
    std::size_t n = 256;
    std::size_t a = 4096;
    double sigma_w = 1.0;
    int trials = 8;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

/// Closed-form benchmark rows (waterfill, iso, random_codebook, high_rate)
/// for each requested rate.
std::vector<RdPoint> run_limits(const std::vector<double>& lambdas, double sigma_w,
                                const std::vector<double>& rates);

/// Monte-Carlo sweep: for every rate and scheme, quantize fresh Gaussian
/// weights per trial and report mean distortion with its standard error.
/// EC variants calibrate alpha from the rate relation and report
/// entropy_rate + side_info/(n a); rect variants bisect alpha against the
/// measured rectangular rate (30 steps, 0.02-bit tolerance).
std::vector<RdPoint> run_evaluate(const SweepSpec& spec, const SymMatrix& sigma,
                                  const std::vector<double>& lambdas);

/// AM-GM gap diagnostics and the rotated Cholesky-diagonal approximation.
std::vector<RdPoint> run_analyze(const SymMatrix& sigma, std::uint64_t seed);

/// SIC vs exact CVP comparison at small n.
struct OracleReport {
    std::vector<RdPoint> rows;
    double mean_ratio = 1.0;        // mean over trials of cvp/sic squared error
    std::uint64_t violations = 0;   // trials where CVP lost to SIC (must be 0)
    double sic_distortion = 0.0;    // per-entry means
    double cvp_distortion = 0.0;
    double zador = 0.0;
};
OracleReport run_oracle(const SymMatrix& sigma, double alpha, int trials, std::uint64_t seed);

/// One-shot quantization with full rate/distortion bookkeeping.
struct QuantizeOutcome {
    QuantizedWeights qw;
    std::vector<std::uint8_t> container;
    RateReport report;
    double wmse = 0.0;
};
QuantizeOutcome run_quantize(const Matrix& w, const SymMatrix& sigma, Scheme scheme,
                             double alpha, int threads = 1);

/// Bisection of alpha against the measured rect_rate on calibration weights.
double calibrate_alpha_for_rect_rate(const Matrix& w_cal, const SymMatrix& sigma,
                                     bool waterfilled, double target_rate_bits, int threads = 1);

} // namespace wquant
