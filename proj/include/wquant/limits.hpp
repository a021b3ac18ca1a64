#pragma once

#include <map>
#include <string>
#include <vector>

namespace wquant {

// Rates are bits per entry (base-2 logs) throughout; internal math uses
// natural logs with a single ln2 conversion constant.

/// Reverse-waterfilling solution at water level tau (distortion units).
struct WaterfillSolution {
    double tau = 0.0;
    std::vector<double> per_coord_D; // D_i = min(lambda_i sigma_w^2, tau)
    double rate = 0.0;               // bits/entry
    double distortion = 0.0;
};

/// One row of a benchmark sweep.
struct RdPoint {
    std::string scheme;
    double rate = 0.0;       // bits/entry
    double distortion = 0.0; // WMSE per entry
    std::map<std::string, double> meta;
};

WaterfillSolution waterfill_from_tau(const std::vector<double>& lambdas, double sigma_w,
                                     double tau);

/// Inverts tau -> R(tau) by bisection to |R - target| < 1e-10 bits.
WaterfillSolution waterfill_for_rate(const std::vector<double>& lambdas, double sigma_w,
                                     double rate_bits);

/// Inverts tau -> D(tau) by bisection; distortion must lie in (0, max D].
WaterfillSolution waterfill_for_distortion(const std::vector<double>& lambdas, double sigma_w,
                                           double distortion);

/// High-rate limit |Sigma|^{1/n} sigma_w^2 2^{-2R}; geometric mean in log domain.
double d_high_rate(const std::vector<double>& lambdas, double sigma_w, double rate_bits);

/// Isotropic-codebook distortion 2^{-2R} (sigma_w^2/n) trace Sigma.
double d_iso(const std::vector<double>& lambdas, double sigma_w, double rate_bits);

/// Random isotropic-Gaussian codebook curve, parameterized by T >= 0.
struct RcPoint {
    double t = 0.0;
    double rate = 0.0;
    double distortion = 0.0;
};
RcPoint d_random_codebook(const std::vector<double>& lambdas, double sigma_w, double t);
RcPoint random_codebook_for_rate(const std::vector<double>& lambdas, double sigma_w,
                                 double rate_bits);
RcPoint random_codebook_for_distortion(const std::vector<double>& lambdas, double sigma_w,
                                       double distortion);

/// Scalar uniform-grid waterfilling for W_i ~ Uniform[-1/2, 1/2); returns the
/// optimized distortion, the equal-spacing baseline, and the grid spacings
/// eps_i = min(sqrt(12 tau / lambda_i), 1).
struct ScalarGridSolution {
    double tau = 0.0;
    double distortion = 0.0; // optimized allocation
    double baseline = 0.0;   // equal spacing, (mean lambda / 12) 2^{-2R}
    std::vector<double> spacings;
};
ScalarGridSolution scalar_grid_waterfill(const std::vector<double>& lambdas, double rate_bits);

/// (1/2) log2(arith mean / geo mean) of a positive sequence, in bits.
double am_gm_rate_gap(const std::vector<double>& values);

/// Zador lower bound on the second moment of a lattice UL:
/// Gamma(n/2+1)^{2/n} / ((n+2) pi) * gamma(L)^{-2/n} |U|^{2/n},
/// with the exact gamma-function constant (std::lgamma), not 1/(2 pi e).
/// log_gamma is the natural log of the point density gamma(L).
double zador_bound(std::size_t n, double log_gamma, double logdet_u);

/// (2 pi e / 12) sigma_w^2 * mean(U_ii^2) * 2^{-2R}.
double predict_gptq(const std::vector<double>& chol_diag, double sigma_w, double rate_bits);

/// (2 pi e / 12) sigma_w^2 * |Sigma|^{1/n} * 2^{-2R}, via logdet.
double predict_watersic(double logdet_sigma, std::size_t n, double sigma_w, double rate_bits);

/// NSM * |Sigma|^{1/n} * Vol^{2/n}(S) * 2^{-2R} for a shaped lattice quantizer.
double shaped_lattice_rd(double nsm, double logdet_sigma, std::size_t n, double log_vol_s,
                         double rate_bits);

/// Entropy-coded variant: Vol^{2/n}(S) replaced by 2 pi e sigma_w^2.
double entropy_coded_rd(double nsm, double logdet_sigma, std::size_t n, double sigma_w,
                        double rate_bits);

/// Dithered-quantization shrinkage: minimizes
/// (1-beta)^2 sigma_w^2 tr(Sigma)/n + beta^2 sigma^2(UL) over beta.
struct Shrinkage {
    double beta = 0.0;
    double distortion = 0.0;
};
Shrinkage optimal_shrinkage(double trace_sigma_over_n, double sigma_w, double sigma2_ul);

/// Approximation to the squared Cholesky diagonals of a randomly rotated
/// covariance with the given spectrum:
/// U_kk^2 ~= (k/(n-k+1)) e_k(lambda)/e_{k-1}(lambda).
std::vector<double> approx_chol_diag_rotated(const std::vector<double>& lambdas);

} // namespace wquant
