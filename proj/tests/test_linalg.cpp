#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "wquant/linalg.hpp"
#include "wquant/rng.hpp"

using namespace wquant;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

SymMatrix random_pd(std::size_t n, std::uint64_t seed) {
    // G^T G + 0.1 I is comfortably positive definite
    const Matrix g = gaussian_matrix(n, n, 1.0, seed);
    Matrix s = matmul(transpose(g), g);
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.1;
    return SymMatrix(std::move(s));
}

double max_abs(const Matrix& m) {
    double v = 0.0;
    for (double x : m.data()) v = std::max(v, std::abs(x));
    return v;
}

} // namespace

TEST_CASE("cholesky_upper on the 2x2 worked example") {
    const UpperCholesky c = cholesky_upper(SymMatrix(from_rows({{4, 2}, {2, 5}})));
    CHECK(c.U(0, 0) == doctest::Approx(2.0));
    CHECK(c.U(0, 1) == doctest::Approx(1.0));
    CHECK(c.U(1, 0) == 0.0);
    CHECK(c.U(1, 1) == doctest::Approx(2.0));
    CHECK(c.logdet == doctest::Approx(std::log(4.0)));
    // verify U^T U reproduces the input by direct multiplication
    const Matrix r = matmul(transpose(c.U), c.U);
    CHECK(r(0, 0) == doctest::Approx(4.0));
    CHECK(r(0, 1) == doctest::Approx(2.0));
    CHECK(r(1, 1) == doctest::Approx(5.0));
}

TEST_CASE("cholesky_upper identity and diagonal cases") {
    const UpperCholesky id = cholesky_upper(SymMatrix(Matrix::identity(5)));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(id.U(i, j) == (i == j ? 1.0 : 0.0));

    const UpperCholesky d = cholesky_upper(SymMatrix(from_rows({{9, 0, 0}, {0, 1, 0}, {0, 0, 4}})));
    CHECK(d.U(0, 0) == doctest::Approx(3.0));
    CHECK(d.U(1, 1) == doctest::Approx(1.0));
    CHECK(d.U(2, 2) == doctest::Approx(2.0));
}

TEST_CASE("cholesky_upper reconstruction on random PD matrices") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SymMatrix s = random_pd(40, seed);
        const UpperCholesky c = cholesky_upper(s);
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t j = i + 1; j < 40; ++j) CHECK(c.U(j, i) == 0.0);
        Matrix diff = matmul(transpose(c.U), c.U);
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t j = 0; j < 40; ++j) diff(i, j) -= s(i, j);
        CHECK(max_abs(diff) < 1e-9 * max_abs(s.entries()));
    }
}

TEST_CASE("cholesky_upper rejects indefinite input after one jitter retry") {
    CHECK_THROWS_AS(cholesky_upper(SymMatrix(from_rows({{1, 2}, {2, 1}}))), NotPositiveDefinite);
}

TEST_CASE("jitter rescues a barely singular matrix") {
    // rank-1 outer product: first pivot fine, second exactly zero
    const UpperCholesky c = cholesky_upper(SymMatrix(from_rows({{1, 1}, {1, 1}})));
    CHECK(c.U(1, 1) > 0.0);
}

TEST_CASE("sym_eigen on fixed 2x2 examples") {
    const Spectrum d = sym_eigen(SymMatrix(from_rows({{3, 0}, {0, 1}})));
    CHECK(d.lambdas[0] == doctest::Approx(3.0));
    CHECK(d.lambdas[1] == doctest::Approx(1.0));
    CHECK(std::abs(d.V(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(d.V(1, 1)) == doctest::Approx(1.0));

    const Spectrum s = sym_eigen(SymMatrix(from_rows({{2, 1}, {1, 2}})));
    CHECK(s.lambdas[0] == doctest::Approx(3.0));
    CHECK(s.lambdas[1] == doctest::Approx(1.0));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    // eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2 up to sign
    CHECK(std::abs(s.V(0, 0) * inv_sqrt2 + s.V(1, 0) * inv_sqrt2) == doctest::Approx(1.0));
    CHECK(std::abs(s.V(0, 1) * inv_sqrt2 - s.V(1, 1) * inv_sqrt2) == doctest::Approx(1.0));
}

TEST_CASE("sym_eigen reconstructs random symmetric matrices") {
    const SymMatrix s = random_pd(30, 11);
    const Spectrum e = sym_eigen(s);

    Matrix vtv = matmul(transpose(e.V), e.V);
    for (std::size_t i = 0; i < 30; ++i) vtv(i, i) -= 1.0;
    CHECK(max_abs(vtv) < 1e-9);

    Matrix scaled = e.V;
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 30; ++j) scaled(i, j) *= e.lambdas[j];
    Matrix recon = matmul(scaled, transpose(e.V));
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 30; ++j) recon(i, j) -= s(i, j);
    CHECK(max_abs(recon) < 1e-8 * max_abs(s.entries()));

    for (std::size_t i = 0; i + 1 < 30; ++i) CHECK(e.lambdas[i] >= e.lambdas[i + 1]);
}

TEST_CASE("sym_eigen identity spectrum") {
    const Spectrum e = sym_eigen(SymMatrix(Matrix::identity(7)));
    for (double l : e.lambdas) CHECK(l == doctest::Approx(1.0));
}

TEST_CASE("random_orthogonal basics") {
    const Matrix q1 = random_orthogonal(1, 42);
    CHECK(std::abs(q1(0, 0)) == doctest::Approx(1.0));

    const Matrix a = random_orthogonal(16, 7);
    const Matrix b = random_orthogonal(16, 7);
    CHECK(a.data() == b.data()); // determinism

    const Matrix q = random_orthogonal(64, 3);
    Matrix qtq = matmul(transpose(q), q);
    for (std::size_t i = 0; i < 64; ++i) qtq(i, i) -= 1.0;
    CHECK(max_abs(qtq) < 1e-10);
}

TEST_CASE("rotate_covariance preserves spectrum, trace and determinant") {
    const SymMatrix s = random_pd(24, 5);
    const Matrix v = random_orthogonal(24, 9);

    const SymMatrix same = rotate_covariance(s, Matrix::identity(24));
    for (std::size_t i = 0; i < 24; ++i)
        for (std::size_t j = 0; j < 24; ++j) CHECK(same(i, j) == doctest::Approx(s(i, j)));

    const SymMatrix r = rotate_covariance(s, v);
    CHECK(r.trace() == doctest::Approx(s.trace()).epsilon(1e-10));

    const UpperCholesky cs = cholesky_upper(s);
    const UpperCholesky cr = cholesky_upper(r);
    CHECK(cr.logdet == doctest::Approx(cs.logdet).epsilon(1e-8));

    const Spectrum es = sym_eigen(s);
    const Spectrum er = sym_eigen(r);
    for (std::size_t i = 0; i < 24; ++i)
        CHECK(er.lambdas[i] == doctest::Approx(es.lambdas[i]).epsilon(1e-7));
}

TEST_CASE("gaussian_matrix moments and determinism") {
    const Matrix a = gaussian_matrix(3, 4, 1.0, 123);
    const Matrix b = gaussian_matrix(3, 4, 1.0, 123);
    CHECK(a.data() == b.data());
    CHECK_THROWS_AS(gaussian_matrix(3, 4, 0.0, 1), InputError);

    const std::size_t n = 1000, m = 1000;
    const double sigma_w = 1.7;
    const Matrix w = gaussian_matrix(n, m, sigma_w, 99);
    double sum = 0.0, sumsq = 0.0;
    for (double x : w.data()) {
        sum += x;
        sumsq += x * x;
    }
    const double count = static_cast<double>(n * m);
    const double mean = sum / count;
    const double var = sumsq / count - mean * mean;
    CHECK(std::abs(var - sigma_w * sigma_w) < 0.01 * sigma_w * sigma_w);
    CHECK(std::abs(mean) < 3.0 * sigma_w / std::sqrt(count));
}

TEST_CASE("elem_sym_log hand values and identities") {
    const std::vector<double> le = elem_sym_log({std::log(3.0), std::log(1.0)});
    CHECK(std::exp(le[0]) == doctest::Approx(1.0));
    CHECK(std::exp(le[1]) == doctest::Approx(4.0));
    CHECK(std::exp(le[2]) == doctest::Approx(3.0));

    // constant spectrum: e_k = C(n,k) c^k
    const std::size_t n = 12;
    const double c = 0.7;
    const std::vector<double> lc(n, std::log(c));
    const std::vector<double> lec = elem_sym_log(lc);
    double binom = 1.0;
    for (std::size_t k = 0; k <= n; ++k) {
        CHECK(std::exp(lec[k]) == doctest::Approx(binom * std::pow(c, static_cast<double>(k))));
        binom *= static_cast<double>(n - k) / static_cast<double>(k + 1);
    }

    // e_n = prod lambda_i = exp(2 logdet U)
    const SymMatrix s = random_pd(10, 21);
    const Spectrum e = sym_eigen(s);
    std::vector<double> logs(10);
    for (std::size_t i = 0; i < 10; ++i) logs[i] = std::log(e.lambdas[i]);
    const std::vector<double> les = elem_sym_log(logs);
    const UpperCholesky chol = cholesky_upper(s);
    CHECK(les[10] == doctest::Approx(2.0 * chol.logdet).epsilon(1e-9));
}

TEST_CASE("determinant and trace identities between Cholesky and Jacobi paths") {
    const SymMatrix s = random_pd(32, 77);
    const Spectrum e = sym_eigen(s);
    const UpperCholesky c = cholesky_upper(s);

    double log_prod_u = 0.0;
    for (std::size_t i = 0; i < 32; ++i) log_prod_u += 2.0 * std::log(c.U(i, i));
    double log_prod_l = 0.0;
    for (double l : e.lambdas) log_prod_l += std::log(l);
    CHECK(log_prod_u == doctest::Approx(log_prod_l).epsilon(1e-7));

    double frob_u = 0.0;
    for (double u : c.U.data()) frob_u += u * u;
    double sum_l = 0.0;
    for (double l : e.lambdas) sum_l += l;
    CHECK(frob_u == doctest::Approx(sum_l).epsilon(1e-8));
}
