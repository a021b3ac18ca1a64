#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wquant/linalg.hpp"
#include "wquant/matrix.hpp"

namespace wquant {

/// Scalar codebook: the integers, optionally clipped to [lo, hi].
/// Rounding ties go half-away-from-zero (std::llround), fixed for all paths.
struct ScalarCodebook {
    bool clip = false;
    long long lo = 0;
    long long hi = 0;

    static ScalarCodebook integers() { return {}; }
    static ScalarCodebook clipped(long long lo, long long hi);

    /// Nearest codeword as an integer; sets *overloaded when clipping bites.
    long long nearest_int(double x, bool* overloaded = nullptr) const;
};

/// Filters for the general successive-cancellation quantizer.
struct SicConfig {
    Matrix F;                   // feed-forward, unrestricted n x n
    Matrix B;                   // feedback, strictly upper triangular
    std::vector<double> alphas; // per-coordinate spacings, all > 0
    double beta = 1.0;          // output scale, > 0
    ScalarCodebook codebook;
};

/// generalSIC: y <- F y; for i = n..1: w_i <- alpha_i Q_i(y_i / alpha_i),
/// y <- y - w_i B_{:,i}; returns beta * w.
std::vector<double> general_sic(std::span<const double> y, const SicConfig& cfg);

/// High-rate filter choice: beta = 1, F = diag(U)^{-1}, B = diag(U)^{-1} U - I,
/// for which I - beta U (I+B)^{-1} F vanishes.
struct HighRateFilters {
    Matrix F;
    Matrix B;
    double beta = 1.0;
};
HighRateFilters high_rate_filters(const UpperCholesky& chol);

/// SIC over the scaled integer grid. point[i] = alphas[i] * z[i]; the residual
/// y - U * point lands in the product cell prod_i [-a_i U_ii/2, a_i U_ii/2).
struct SicResult {
    std::vector<double> point;
    std::vector<long long> z;
    std::vector<double> residual;
};
SicResult sic(std::span<const double> y, const UpperCholesky& chol,
              std::span<const double> alphas);

/// Quantized weight container contents (serialization lives in coding).
struct QuantizedWeights {
    std::size_t n = 0;
    std::size_t a = 0;
    std::vector<std::int32_t> z;   // row-major n x a integer grid points
    std::vector<double> alphas;    // per-row scales
    std::vector<std::uint32_t> q;  // per-row max |z|
    double sigma_logdet = 0.0;     // audit only: logdet of U (not serialized)

    std::int32_t at(std::size_t i, std::size_t j) const { return z[i * a + j]; }
    void validate() const; // throws CorruptContainer
};

bool operator==(const QuantizedWeights& x, const QuantizedWeights& y);

/// WaterSIC: per-column SIC with spacings alpha_i = alpha |U|^{1/n} / U_ii,
/// which equalize the per-coordinate residual widths at alpha |Sigma|^{1/2n}.
QuantizedWeights watersic_quantize(const Matrix& w, const SymMatrix& sigma, double alpha,
                                   int threads = 1);

/// SIC with uniform spacing alpha_i = alpha (the GPTQ algorithm).
QuantizedWeights gptq_quantize(const Matrix& w, const SymMatrix& sigma, double alpha,
                               int threads = 1);

/// GPTQ over the clipped-integer codebook [lo, hi]; overload events void the
/// fundamental-cell guarantee and are counted.
struct ClippedQuantizeResult {
    QuantizedWeights qw;
    std::uint64_t overloads = 0;
};
ClippedQuantizeResult clipped_codebook_quantize(const Matrix& w, const SymMatrix& sigma,
                                                double alpha, long long lo, long long hi,
                                                int threads = 1);

/// W_hat = diag(alphas) * z; uses only stored container fields.
Matrix dequantize(const QuantizedWeights& qw);

/// (1/(n a)) ||U (W - W_hat)||_F^2.
double wmse_distortion(const Matrix& w, const Matrix& w_hat, const UpperCholesky& chol);
double wmse_distortion(const Matrix& w, const Matrix& w_hat, const SymMatrix& sigma);

/// Exact CVP over the scaled integer grid by Schnorr-Euchner enumeration,
/// seeded at the SIC point so the result never loses to SIC. Ties in the
/// squared distance resolve to the lexicographically smallest z. The
/// enumeration cost explodes with n; this oracle is capped at n <= 12.
struct CvpResult {
    std::vector<double> point;
    std::vector<long long> z;
    double sqdist = 0.0;
};
CvpResult cvp_exact(std::span<const double> y, const UpperCholesky& chol,
                    std::span<const double> alphas, double search_radius = -1.0);

} // namespace wquant
