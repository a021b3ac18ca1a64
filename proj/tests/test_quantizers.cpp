#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wquant/coding.hpp"
#include "wquant/quantizers.hpp"
#include "wquant/rng.hpp"

using namespace wquant;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

SymMatrix sigma_from_upper(const Matrix& u) { return SymMatrix(matmul(transpose(u), u)); }

SymMatrix random_pd(std::size_t n, std::uint64_t seed) {
    const Matrix g = gaussian_matrix(n, n, 1.0, seed);
    Matrix s = matmul(transpose(g), g);
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5;
    return SymMatrix(std::move(s));
}

// E = U (W - W_hat), row by row
Matrix weighted_error(const Matrix& w, const Matrix& w_hat, const UpperCholesky& chol) {
    const std::size_t n = w.rows(), a = w.cols();
    Matrix e(n, a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double uij = chol.U(i, j);
            for (std::size_t c = 0; c < a; ++c) e(i, c) += uij * (w(j, c) - w_hat(j, c));
        }
    return e;
}

double ks_statistic_uniform01(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::abs(u[i] - static_cast<double>(i + 1) / n));
        d = std::max(d, std::abs(u[i] - static_cast<double>(i) / n));
    }
    return d;
}

} // namespace

TEST_CASE("general_sic reduces to coordinate rounding for trivial filters") {
    SicConfig cfg;
    cfg.F = Matrix::identity(3);
    cfg.B = Matrix(3, 3);
    cfg.alphas = {1.0, 1.0, 1.0};
    cfg.beta = 1.0;
    const std::vector<double> y{0.4, -1.2, 2.6};
    const std::vector<double> w = general_sic(y, cfg);
    CHECK(w == std::vector<double>{0.0, -1.0, 3.0});

    cfg.beta = 2.0;
    CHECK(general_sic(y, cfg) == std::vector<double>{0.0, -2.0, 6.0});
}

TEST_CASE("general_sic with high-rate filters matches the SIC hand trace") {
    const Matrix u = from_rows({{1.0, 0.6}, {0.0, 1.0}});
    const UpperCholesky chol{2, u, 0.0};
    const HighRateFilters hr = high_rate_filters(chol);

    SicConfig cfg;
    cfg.F = hr.F;
    cfg.B = hr.B;
    cfg.alphas = {1.0, 1.0};
    cfg.beta = hr.beta;
    const std::vector<double> w = general_sic(std::vector<double>{0.0, 0.9}, cfg);
    CHECK(w == std::vector<double>{-1.0, 1.0});

    // residual y - U w = (0.4, -0.1)
    CHECK(0.0 - (u(0, 0) * w[0] + u(0, 1) * w[1]) == doctest::Approx(0.4));
    CHECK(0.9 - u(1, 1) * w[1] == doctest::Approx(-0.1));
}

TEST_CASE("high_rate_filters closed form and inverse identity") {
    const UpperCholesky id{3, Matrix::identity(3), 0.0};
    const HighRateFilters triv = high_rate_filters(id);
    CHECK(triv.beta == 1.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(triv.F(i, j) == (i == j ? 1.0 : 0.0));
            CHECK(triv.B(i, j) == 0.0);
        }

    const Matrix u2 = from_rows({{2.0, 1.0}, {0.0, 2.0}});
    const HighRateFilters hr2 = high_rate_filters({2, u2, std::log(4.0)});
    CHECK(hr2.F(0, 0) == doctest::Approx(0.5));
    CHECK(hr2.F(1, 1) == doctest::Approx(0.5));
    CHECK(hr2.B(0, 1) == doctest::Approx(0.5));
    CHECK(hr2.B(0, 0) == 0.0);
    CHECK(hr2.B(1, 0) == 0.0);

    // (I + B)^{-1} F U = I within 1e-10 for a random factor
    const std::size_t n = 8;
    const UpperCholesky chol = cholesky_upper(random_pd(n, 31));
    const HighRateFilters hr = high_rate_filters(chol);
    Matrix ipb = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) ipb(i, j) += hr.B(i, j);
    const Matrix fu = matmul(hr.F, chol.U);
    // solve (I+B) X = F U by back substitution; X should be the identity
    Matrix x(n, n);
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t i = n; i-- > 0;) {
            double acc = fu(i, c);
            for (std::size_t j = i + 1; j < n; ++j) acc -= ipb(i, j) * x(j, c);
            x(i, c) = acc;
        }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) err += std::pow(x(i, j) - (i == j ? 1.0 : 0.0), 2);
    CHECK(std::sqrt(err) < 1e-10);
}

TEST_CASE("sic worked examples") {
    const UpperCholesky id{3, Matrix::identity(3), 0.0};
    const std::vector<double> al{1.0, 1.0, 1.0};
    const SicResult r0 = sic(std::vector<double>{0.4, -1.2, 2.6}, id, al);
    CHECK(r0.point == std::vector<double>{0.0, -1.0, 3.0});

    const Matrix u = from_rows({{1.0, 0.6}, {0.0, 1.0}});
    const UpperCholesky chol{2, u, 0.0};
    const SicResult r = sic(std::vector<double>{0.0, 0.9}, chol, std::vector<double>{1.0, 1.0});
    CHECK(r.z == std::vector<long long>{-1, 1});
    CHECK(r.residual[0] == doctest::Approx(0.4));
    CHECK(r.residual[1] == doctest::Approx(-0.1));
}

TEST_CASE("general_sic with high-rate filters reproduces the plain SIC recursion") {
    const std::size_t n = 8;
    const UpperCholesky chol = cholesky_upper(random_pd(n, 47));
    const HighRateFilters hr = high_rate_filters(chol);
    SicConfig cfg;
    cfg.F = hr.F;
    cfg.B = hr.B;
    cfg.beta = hr.beta;
    cfg.alphas.resize(n);
    for (std::size_t i = 0; i < n; ++i) cfg.alphas[i] = 0.3 + rng::uniform01(48, i);

    for (std::uint64_t t = 0; t < 400; ++t) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = 5.0 * rng::normal(4900 + t, i);
        const std::vector<double> general = general_sic(y, cfg);
        const SicResult plain = sic(y, chol, cfg.alphas);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(general[i] == doctest::Approx(plain.point[i]).epsilon(1e-12));
    }
}

TEST_CASE("sic shift equivariance") {
    const std::size_t n = 6;
    const UpperCholesky chol = cholesky_upper(random_pd(n, 17));
    std::vector<double> alphas(n);
    for (std::size_t i = 0; i < n; ++i) alphas[i] = 0.25 + rng::uniform01(5, i);

    for (std::uint64_t t = 0; t < 200; ++t) {
        std::vector<double> y(n), shifted(n);
        std::vector<long long> z(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 4.0 * rng::normal(100 + t, i);
            z[i] = static_cast<long long>(rng::splitmix64(200 + t, i) % 7) - 3;
        }
        for (std::size_t i = 0; i < n; ++i) {
            shifted[i] = y[i];
            for (std::size_t j = i; j < n; ++j)
                shifted[i] += chol.U(i, j) * alphas[j] * static_cast<double>(z[j]);
        }
        const SicResult base = sic(y, chol, alphas);
        const SicResult moved = sic(shifted, chol, alphas);
        for (std::size_t i = 0; i < n; ++i) CHECK(moved.z[i] == base.z[i] + z[i]);
    }
}

TEST_CASE("fundamental cell bounds hold for every residual coordinate") {
    for (std::size_t n : {std::size_t{2}, std::size_t{8}, std::size_t{64}}) {
        const UpperCholesky chol = cholesky_upper(random_pd(n, 40 + n));
        std::vector<double> alphas(n);
        for (std::size_t i = 0; i < n; ++i) alphas[i] = 0.2 + rng::uniform01(41, i);

        const int trials = 10000;
        std::size_t violations = 0;
        for (int t = 0; t < trials; ++t) {
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = 6.0 * rng::normal(5000 + t, i);
            const SicResult r = sic(y, chol, alphas);
            for (std::size_t i = 0; i < n; ++i) {
                const double half = 0.5 * alphas[i] * chol.diag(i);
                if (!(r.residual[i] >= -half && r.residual[i] < half)) ++violations;
            }
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("watersic spacings and identity covariance") {
    // identity covariance: plain rounding
    const Matrix w = gaussian_matrix(4, 9, 1.0, 3);
    const QuantizedWeights qw = watersic_quantize(w, SymMatrix(Matrix::identity(4)), 1.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 9; ++j)
            CHECK(qw.at(i, j) == static_cast<std::int32_t>(std::llround(w(i, j))));

    // diag(U) = (2, 0.5), alpha = 0.1 -> spacings (0.05, 0.2)
    const Matrix u = from_rows({{2.0, 1.0}, {0.0, 0.5}});
    const QuantizedWeights qs = watersic_quantize(gaussian_matrix(2, 5, 1.0, 4),
                                                  sigma_from_upper(u), 0.1);
    CHECK(qs.alphas[0] == doctest::Approx(0.05));
    CHECK(qs.alphas[1] == doctest::Approx(0.2));
}

TEST_CASE("watersic residual cell has equal width in every coordinate") {
    const std::size_t n = 12, a = 400;
    const SymMatrix sigma = random_pd(n, 15);
    const UpperCholesky chol = cholesky_upper(sigma);
    const double alpha = 0.2;
    const Matrix w = gaussian_matrix(n, a, 1.0, 16);
    const QuantizedWeights qw = watersic_quantize(w, sigma, alpha);

    // alpha_i U_ii = alpha |Sigma|^{1/2n} for every i
    const double half = 0.5 * alpha * std::exp(chol.logdet / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        CHECK(qw.alphas[i] * chol.diag(i) == doctest::Approx(2.0 * half).epsilon(1e-12));

    const Matrix err = weighted_error(w, dequantize(qw), chol);
    for (double e : err.data()) {
        CHECK(e >= -half);
        CHECK(e < half);
    }
}

TEST_CASE("watersic fixed point on grid-aligned weights") {
    const Matrix u = from_rows({{2.0, 1.0}, {0.0, 0.5}});
    const SymMatrix sigma = sigma_from_upper(u);
    const double alpha = 0.1;
    const std::vector<std::vector<long long>> z{{1, -2, 3}, {0, 4, -1}};
    Matrix w(2, 3);
    const std::vector<double> spac{0.05, 0.2};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) w(i, j) = spac[i] * static_cast<double>(z[i][j]);

    const QuantizedWeights qw = watersic_quantize(w, sigma, alpha);
    const Matrix w_hat = dequantize(qw);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(w_hat(i, j) == w(i, j));
}

TEST_CASE("gptq equals watersic for white covariance, container-identical") {
    const Matrix w = gaussian_matrix(8, 32, 1.0, 9);
    const SymMatrix sigma(Matrix::identity(8));
    const QuantizedWeights a = gptq_quantize(w, sigma, 0.3);
    const QuantizedWeights b = watersic_quantize(w, sigma, 0.3);
    CHECK(a == b);
    CHECK(encode_container(a) == encode_container(b));
}

TEST_CASE("gptq empirical distortion matches the closed form within 3%") {
    const std::size_t n = 128, a = 4096;
    const SymMatrix sigma = random_pd(n, 55);
    const UpperCholesky chol = cholesky_upper(sigma);
    const double alpha = alpha_for_rate(1.0, 7.0);

    const Matrix w = gaussian_matrix(n, a, 1.0, 56);
    const QuantizedWeights qw = gptq_quantize(w, sigma, alpha, 2);
    const double measured = wmse_distortion(w, dequantize(qw), chol);

    double mean_usq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_usq += chol.diag(i) * chol.diag(i) / static_cast<double>(n);
    const double predicted = alpha * alpha / 12.0 * mean_usq;
    CHECK(std::abs(measured - predicted) / predicted < 0.03);
}

TEST_CASE("gptq vs watersic distortion gap tracks the AM-GM ratio") {
    const std::size_t n = 64, a = 4096;
    const SymMatrix sigma = random_pd(n, 77);
    const UpperCholesky chol = cholesky_upper(sigma);
    const double alpha = alpha_for_rate(1.0, 6.0);

    const Matrix w = gaussian_matrix(n, a, 1.0, 78);
    const double d_gptq = wmse_distortion(w, dequantize(gptq_quantize(w, sigma, alpha, 2)), chol);
    const double d_water =
        wmse_distortion(w, dequantize(watersic_quantize(w, sigma, alpha, 2)), chol);
    CHECK(d_gptq >= d_water);

    std::vector<double> usq(n);
    for (std::size_t i = 0; i < n; ++i) usq[i] = chol.diag(i) * chol.diag(i);
    double am = 0.0, lg = 0.0;
    for (double v : usq) {
        am += v / static_cast<double>(n);
        lg += std::log(v) / static_cast<double>(n);
    }
    const double predicted_ratio = am / std::exp(lg);
    CHECK(d_gptq / d_water == doctest::Approx(predicted_ratio).epsilon(0.05));
}

TEST_CASE("watersic distortion is invariant under rotation of the covariance") {
    const std::size_t n = 48, a = 2048;
    const SymMatrix sigma = random_pd(n, 88);
    const Matrix v = random_orthogonal(n, 89);
    const SymMatrix rotated = rotate_covariance(sigma, v);
    const double alpha = alpha_for_rate(1.0, 5.0);

    const int trials = 4;
    std::vector<double> d0(trials), d1(trials);
    for (int t = 0; t < trials; ++t) {
        const Matrix w = gaussian_matrix(n, a, 1.0, 900 + t);
        d0[t] = wmse_distortion(w, dequantize(watersic_quantize(w, sigma, alpha, 2)), sigma);
        d1[t] = wmse_distortion(w, dequantize(watersic_quantize(w, rotated, alpha, 2)), rotated);
    }
    double m0 = 0, m1 = 0, v0 = 0, v1 = 0;
    for (int t = 0; t < trials; ++t) {
        m0 += d0[t] / trials;
        m1 += d1[t] / trials;
    }
    for (int t = 0; t < trials; ++t) {
        v0 += (d0[t] - m0) * (d0[t] - m0) / (trials - 1);
        v1 += (d1[t] - m1) * (d1[t] - m1) / (trials - 1);
    }
    const double se = std::sqrt(v0 / trials + v1 / trials);
    CHECK(std::abs(m0 - m1) < 3.0 * se);
}

TEST_CASE("grid overflow surfaces as an exception even from worker threads") {
    const SymMatrix id(Matrix::identity(2));
    Matrix w(2, 8);
    w(0, 0) = 1e18; // far beyond 32-bit grid storage
    CHECK_THROWS_AS(watersic_quantize(w, id, 1.0, 1), NumericalError);
    CHECK_THROWS_AS(watersic_quantize(w, id, 1.0, 4), NumericalError);
}

TEST_CASE("column quantization is schedule independent") {
    const std::size_t n = 32, a = 257;
    const SymMatrix sigma = random_pd(n, 61);
    const Matrix w = gaussian_matrix(n, a, 1.0, 62);
    const QuantizedWeights single = watersic_quantize(w, sigma, 0.2, 1);
    const QuantizedWeights multi = watersic_quantize(w, sigma, 0.2, 4);
    CHECK(single == multi);
}

TEST_CASE("dequantize") {
    QuantizedWeights qw;
    qw.n = 2;
    qw.a = 1;
    qw.z = {3, -1};
    qw.alphas = {0.05, 0.2};
    qw.q = {3, 1};
    const Matrix w = dequantize(qw);
    CHECK(w(0, 0) == doctest::Approx(0.15));
    CHECK(w(1, 0) == doctest::Approx(-0.2));

    qw.z = {0, 0};
    qw.q = {0, 0};
    const Matrix zero = dequantize(qw);
    CHECK(zero(0, 0) == 0.0);
    CHECK(zero(1, 0) == 0.0);

    qw.q = {0};
    CHECK_THROWS_AS(dequantize(qw), CorruptContainer);
}

TEST_CASE("quantize-dequantize-requantize is idempotent") {
    const SymMatrix sigma = random_pd(16, 71);
    const Matrix w = gaussian_matrix(16, 64, 1.0, 72);
    const QuantizedWeights first = watersic_quantize(w, sigma, 0.15);
    const QuantizedWeights second = watersic_quantize(dequantize(first), sigma, 0.15);
    CHECK(first == second);
}

TEST_CASE("wmse_distortion") {
    const SymMatrix id(Matrix::identity(3));
    const Matrix w = gaussian_matrix(3, 5, 1.0, 7);
    CHECK(wmse_distortion(w, w, id) == 0.0);

    Matrix w_hat = w;
    w_hat(1, 2) += 0.3;
    CHECK(wmse_distortion(w, w_hat, id) == doctest::Approx(0.09 / 15.0));

    // single column with weighted error (0.4, -0.1)
    const Matrix u = from_rows({{1.0, 0.6}, {0.0, 1.0}});
    const UpperCholesky chol{2, u, 0.0};
    Matrix w2(2, 1), h2(2, 1);
    w2(0, 0) = 0.46;  // U e = (0.4, -0.1) for e = (0.46, -0.1)
    w2(1, 0) = -0.1;
    CHECK(wmse_distortion(w2, h2, chol) == doctest::Approx(0.085));
}

TEST_CASE("cvp_exact equals rounding for the identity factor") {
    const UpperCholesky id{3, Matrix::identity(3), 0.0};
    const std::vector<double> al{1.0, 1.0, 1.0};
    const CvpResult r = cvp_exact(std::vector<double>{0.4, -1.2, 2.6}, id, al);
    CHECK(r.z == std::vector<long long>{0, -1, 3});
    CHECK(r.sqdist == doctest::Approx(0.16 + 0.04 + 0.16));
}

TEST_CASE("cvp_exact rejects large dimensions") {
    const std::size_t n = 13;
    const UpperCholesky chol{n, Matrix::identity(n), 0.0};
    CHECK_THROWS_AS(cvp_exact(std::vector<double>(n, 0.0), chol, std::vector<double>(n, 1.0)),
                    DimensionTooLarge);
}

TEST_CASE("cvp_exact never loses to SIC") {
    const std::size_t n = 4;
    const UpperCholesky chol = cholesky_upper(random_pd(n, 13));
    std::vector<double> alphas(n, 0.8);
    int improved = 0;
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * rng::normal(7000 + t, i);
        const SicResult s = sic(y, chol, alphas);
        double sic_cost = 0.0;
        for (double e : s.residual) sic_cost += e * e;
        const CvpResult c = cvp_exact(y, chol, alphas);
        CHECK(c.sqdist <= sic_cost);
        if (c.sqdist < sic_cost * (1.0 - 1e-12)) ++improved;
    }
    CHECK(improved > 0); // a correlated factor must show strict improvements
}

TEST_CASE("cvp_exact breaks exact ties toward the lexicographically smaller z") {
    const UpperCholesky id{1, Matrix::identity(1), 0.0};
    const std::vector<double> al{1.0};
    // y = 0.5 sits exactly between 0 and 1: SIC rounds away from zero,
    // the oracle prefers the lexicographically smaller point
    const SicResult s = sic(std::vector<double>{0.5}, id, al);
    CHECK(s.z == std::vector<long long>{1});
    const CvpResult c = cvp_exact(std::vector<double>{0.5}, id, al);
    CHECK(c.z == std::vector<long long>{0});
    CHECK(c.sqdist == doctest::Approx(0.25));
}

TEST_CASE("cvp_exact honors a small search radius hint") {
    const UpperCholesky chol = cholesky_upper(random_pd(3, 19));
    const std::vector<double> al{0.7, 0.7, 0.7};
    const std::vector<double> y{1.9, -0.4, 0.55};
    const CvpResult wide = cvp_exact(y, chol, al);
    const CvpResult tight = cvp_exact(y, chol, al, 1e-6);
    CHECK(wide.z == tight.z);
    CHECK(wide.sqdist == doctest::Approx(tight.sqdist));
}

TEST_CASE("clipped codebook quantization") {
    const SymMatrix sigma = random_pd(8, 91);
    const Matrix w = gaussian_matrix(8, 128, 1.0, 92);

    // wide range: identical to the unclipped quantizer, zero overloads
    const ClippedQuantizeResult wide = clipped_codebook_quantize(w, sigma, 0.2, -100000, 100000);
    CHECK(wide.overloads == 0);
    CHECK(wide.qw == gptq_quantize(w, sigma, 0.2));

    // single-codeword book quantizes everything to zero
    const ClippedQuantizeResult zero = clipped_codebook_quantize(w, sigma, 0.2, 0, 0);
    for (std::int32_t z : zero.qw.z) CHECK(z == 0);
    const double d0 = wmse_distortion(w, dequantize(zero.qw), sigma);
    CHECK(d0 == doctest::Approx(wmse_distortion(w, Matrix(8, 128), sigma)));

    // zero overloads imply the Lemma-1 residual cell still holds
    const UpperCholesky chol = cholesky_upper(sigma);
    const Matrix err = weighted_error(w, dequantize(wide.qw), chol);
    for (std::size_t i = 0; i < 8; ++i) {
        const double half = 0.5 * wide.qw.alphas[i] * chol.diag(i);
        for (std::size_t c = 0; c < 128; ++c) {
            CHECK(err(i, c) >= -half);
            CHECK(err(i, c) < half);
        }
    }
}

TEST_CASE("SIC residuals look uniform at high resolution") {
    const std::size_t n = 4, a = 10000;
    const SymMatrix sigma = random_pd(n, 23);
    const UpperCholesky chol = cholesky_upper(sigma);
    const double alpha = 0.05;

    const Matrix w = gaussian_matrix(n, a, 1.0, 24);
    const QuantizedWeights qw = watersic_quantize(w, sigma, alpha);
    const Matrix err = weighted_error(w, dequantize(qw), chol);

    // Kolmogorov-Smirnov at significance 1e-3: critical value 1.9495/sqrt(N)
    const double crit = 1.9495 / std::sqrt(static_cast<double>(a));
    for (std::size_t i = 0; i < n; ++i) {
        const double width = qw.alphas[i] * chol.diag(i);
        std::vector<double> u(a);
        for (std::size_t c = 0; c < a; ++c) u[c] = err(i, c) / width + 0.5;
        CHECK(ks_statistic_uniform01(std::move(u)) < crit);
    }
}
