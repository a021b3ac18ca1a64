#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wquant/coding.hpp"
#include "wquant/commands.hpp"
#include "wquant/io.hpp"
#include "wquant/limits.hpp"
#include "wquant/linalg.hpp"
#include "wquant/quantizers.hpp"

namespace py = pybind11;
using namespace wquant;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw InputError("expected a 2-D float64 array");
    Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), m.data().data());
    return m;
}

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> arr({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), arr.mutable_data());
    return arr;
}

SymMatrix to_sym(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    return SymMatrix(to_matrix(arr));
}

py::array_t<std::int32_t> z_to_numpy(const QuantizedWeights& qw) {
    py::array_t<std::int32_t> arr({qw.n, qw.a});
    std::copy(qw.z.begin(), qw.z.end(), arr.mutable_data());
    return arr;
}

UpperCholesky chol_of(const py::array_t<double, py::array::c_style | py::array::forcecast>& sigma) {
    return cholesky_upper(to_sym(sigma));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Weighted-MSE weight quantization: SIC/GPTQ/WaterSIC encoders, "
              "waterfilling benchmarks and the container codec";

    py::register_exception<NumericalError>(m, "NumericalError");
    py::register_exception<InputError>(m, "InputError");

    py::class_<QuantizedWeights>(m, "QuantizedWeights")
        .def_readonly("n", &QuantizedWeights::n)
        .def_readonly("a", &QuantizedWeights::a)
        .def_property_readonly("z", &z_to_numpy)
        .def_property_readonly("alphas",
                               [](const QuantizedWeights& qw) { return py::cast(qw.alphas); })
        .def_property_readonly("q", [](const QuantizedWeights& qw) { return py::cast(qw.q); })
        .def_readonly("sigma_logdet", &QuantizedWeights::sigma_logdet)
        .def("__eq__", [](const QuantizedWeights& x, const QuantizedWeights& y) { return x == y; });

    // linalg ------------------------------------------------------------
    m.def("cholesky_upper", [](const py::array_t<double>& sigma) {
        const UpperCholesky c = chol_of(sigma);
        return py::make_tuple(to_numpy(c.U), c.logdet);
    }, py::arg("sigma"), "Upper Cholesky factor (U, logdet) with Sigma = U^T U");

    m.def("sym_eigen", [](const py::array_t<double>& sigma) {
        const Spectrum s = sym_eigen(to_sym(sigma));
        return py::make_tuple(py::cast(s.lambdas), to_numpy(s.V));
    }, py::arg("sigma"), "(eigenvalues descending, eigenvector columns V)");

    m.def("random_orthogonal",
          [](std::size_t n, std::uint64_t seed) { return to_numpy(random_orthogonal(n, seed)); },
          py::arg("n"), py::arg("seed"));

    m.def("gaussian_matrix",
          [](std::size_t n, std::size_t a, double sigma_w, std::uint64_t seed) {
              return to_numpy(gaussian_matrix(n, a, sigma_w, seed));
          },
          py::arg("n"), py::arg("a"), py::arg("sigma_w"), py::arg("seed"));

    m.def("synth_covariance",
          [](std::size_t n, const std::string& spec, bool rotate, std::uint64_t seed) {
              return to_numpy(synth_covariance(n, SpectrumSpec::parse(spec), rotate, seed).entries());
          },
          py::arg("n"), py::arg("spec"), py::arg("rotate") = false, py::arg("seed") = 0,
          "Synthetic covariance from 'powerlaw:E', 'loguniform:LO,HI' or 'explicit:V,..'");

    m.def("synth_spectrum",
          [](std::size_t n, const std::string& spec, std::uint64_t seed) {
              return synth_spectrum(n, SpectrumSpec::parse(spec), seed);
          },
          py::arg("n"), py::arg("spec"), py::arg("seed") = 0);

    // limits --------------------------------------------------------------
    m.def("waterfill_from_tau", [](const std::vector<double>& l, double sw, double tau) {
        const WaterfillSolution s = waterfill_from_tau(l, sw, tau);
        return py::dict(py::arg("tau") = s.tau, py::arg("rate") = s.rate,
                        py::arg("distortion") = s.distortion,
                        py::arg("per_coord_D") = s.per_coord_D);
    }, py::arg("lambdas"), py::arg("sigma_w"), py::arg("tau"));

    m.def("waterfill_for_rate", [](const std::vector<double>& l, double sw, double rate) {
        const WaterfillSolution s = waterfill_for_rate(l, sw, rate);
        return py::dict(py::arg("tau") = s.tau, py::arg("rate") = s.rate,
                        py::arg("distortion") = s.distortion,
                        py::arg("per_coord_D") = s.per_coord_D);
    }, py::arg("lambdas"), py::arg("sigma_w"), py::arg("rate_bits"));

    m.def("waterfill_for_distortion", [](const std::vector<double>& l, double sw, double d) {
        const WaterfillSolution s = waterfill_for_distortion(l, sw, d);
        return py::dict(py::arg("tau") = s.tau, py::arg("rate") = s.rate,
                        py::arg("distortion") = s.distortion,
                        py::arg("per_coord_D") = s.per_coord_D);
    }, py::arg("lambdas"), py::arg("sigma_w"), py::arg("distortion"));

    m.def("d_high_rate", &d_high_rate, py::arg("lambdas"), py::arg("sigma_w"), py::arg("rate_bits"));
    m.def("d_iso", &d_iso, py::arg("lambdas"), py::arg("sigma_w"), py::arg("rate_bits"));
    m.def("d_random_codebook", [](const std::vector<double>& l, double sw, double t) {
        const RcPoint p = d_random_codebook(l, sw, t);
        return py::make_tuple(p.rate, p.distortion);
    }, py::arg("lambdas"), py::arg("sigma_w"), py::arg("t"));
    m.def("random_codebook_for_rate", [](const std::vector<double>& l, double sw, double rate) {
        const RcPoint p = random_codebook_for_rate(l, sw, rate);
        return py::make_tuple(p.rate, p.distortion);
    }, py::arg("lambdas"), py::arg("sigma_w"), py::arg("rate_bits"));
    m.def("random_codebook_for_distortion",
          [](const std::vector<double>& l, double sw, double d) {
              const RcPoint p = random_codebook_for_distortion(l, sw, d);
              return py::make_tuple(p.rate, p.distortion);
          },
          py::arg("lambdas"), py::arg("sigma_w"), py::arg("distortion"));

    m.def("scalar_grid_waterfill", [](const std::vector<double>& l, double rate) {
        const ScalarGridSolution s = scalar_grid_waterfill(l, rate);
        return py::dict(py::arg("tau") = s.tau, py::arg("distortion") = s.distortion,
                        py::arg("baseline") = s.baseline, py::arg("spacings") = s.spacings);
    }, py::arg("lambdas"), py::arg("rate_bits"));

    m.def("optimal_shrinkage", [](double trace_over_n, double sw, double sigma2_ul) {
        const Shrinkage s = optimal_shrinkage(trace_over_n, sw, sigma2_ul);
        return py::make_tuple(s.beta, s.distortion);
    }, py::arg("trace_sigma_over_n"), py::arg("sigma_w"), py::arg("sigma2_ul"));

    m.def("shaped_lattice_rd", &shaped_lattice_rd, py::arg("nsm"), py::arg("logdet_sigma"),
          py::arg("n"), py::arg("log_vol_s"), py::arg("rate_bits"));
    m.def("entropy_coded_rd", &entropy_coded_rd, py::arg("nsm"), py::arg("logdet_sigma"),
          py::arg("n"), py::arg("sigma_w"), py::arg("rate_bits"));
    m.def("elem_sym_log", &elem_sym_log, py::arg("log_lambdas"));
    m.def("am_gm_rate_gap", &am_gm_rate_gap, py::arg("values"));
    m.def("zador_bound", &zador_bound, py::arg("n"), py::arg("log_gamma"), py::arg("logdet_u"));
    m.def("predict_gptq", &predict_gptq, py::arg("chol_diag"), py::arg("sigma_w"),
          py::arg("rate_bits"));
    m.def("predict_watersic", &predict_watersic, py::arg("logdet_sigma"), py::arg("n"),
          py::arg("sigma_w"), py::arg("rate_bits"));
    m.def("approx_chol_diag_rotated", &approx_chol_diag_rotated, py::arg("lambdas"));

    // quantizers ----------------------------------------------------------
    m.def("watersic_quantize",
          [](const py::array_t<double>& w, const py::array_t<double>& sigma, double alpha,
             int threads) { return watersic_quantize(to_matrix(w), to_sym(sigma), alpha, threads); },
          py::arg("w"), py::arg("sigma"), py::arg("alpha"), py::arg("threads") = 1);

    m.def("gptq_quantize",
          [](const py::array_t<double>& w, const py::array_t<double>& sigma, double alpha,
             int threads) { return gptq_quantize(to_matrix(w), to_sym(sigma), alpha, threads); },
          py::arg("w"), py::arg("sigma"), py::arg("alpha"), py::arg("threads") = 1);

    m.def("clipped_codebook_quantize",
          [](const py::array_t<double>& w, const py::array_t<double>& sigma, double alpha,
             long long lo, long long hi, int threads) {
              const ClippedQuantizeResult r =
                  clipped_codebook_quantize(to_matrix(w), to_sym(sigma), alpha, lo, hi, threads);
              return py::make_tuple(r.qw, r.overloads);
          },
          py::arg("w"), py::arg("sigma"), py::arg("alpha"), py::arg("lo"), py::arg("hi"),
          py::arg("threads") = 1, "Returns (QuantizedWeights, overload_count)");

    m.def("high_rate_filters", [](const py::array_t<double>& sigma) {
        const HighRateFilters hr = high_rate_filters(chol_of(sigma));
        return py::make_tuple(to_numpy(hr.F), to_numpy(hr.B), hr.beta);
    }, py::arg("sigma"), "High-rate (F, B, beta) for the general SIC loop");

    m.def("rotate_covariance",
          [](const py::array_t<double>& sigma, const py::array_t<double>& v) {
              return to_numpy(rotate_covariance(to_sym(sigma), to_matrix(v)).entries());
          },
          py::arg("sigma"), py::arg("v"));

    m.def("dequantize", [](const QuantizedWeights& qw) { return to_numpy(dequantize(qw)); },
          py::arg("qw"));

    m.def("wmse_distortion",
          [](const py::array_t<double>& w, const py::array_t<double>& w_hat,
             const py::array_t<double>& sigma) {
              return wmse_distortion(to_matrix(w), to_matrix(w_hat), to_sym(sigma));
          },
          py::arg("w"), py::arg("w_hat"), py::arg("sigma"));

    m.def("sic",
          [](const std::vector<double>& y, const py::array_t<double>& sigma,
             const std::vector<double>& alphas) {
              const SicResult r = sic(y, chol_of(sigma), alphas);
              return py::dict(py::arg("point") = r.point, py::arg("z") = r.z,
                              py::arg("residual") = r.residual);
          },
          py::arg("y"), py::arg("sigma"), py::arg("alphas"));

    m.def("cvp_exact",
          [](const std::vector<double>& y, const py::array_t<double>& sigma,
             const std::vector<double>& alphas, double radius) {
              const CvpResult r = cvp_exact(y, chol_of(sigma), alphas, radius);
              return py::dict(py::arg("point") = r.point, py::arg("z") = r.z,
                              py::arg("sqdist") = r.sqdist);
          },
          py::arg("y"), py::arg("sigma"), py::arg("alphas"), py::arg("search_radius") = -1.0);

    // coding ----------------------------------------------------------------
    m.def("rect_rate", [](const QuantizedWeights& qw) {
        const RectRate r = rect_rate(qw);
        return py::make_tuple(r.rate, r.q);
    }, py::arg("qw"));
    m.def("entropy_rate", [](const QuantizedWeights& qw) { return entropy_rate(qw); },
          py::arg("qw"));
    m.def("alpha_for_rate", &alpha_for_rate, py::arg("sigma_w"), py::arg("rate_bits"));
    m.def("rate_for_alpha", &rate_for_alpha, py::arg("sigma_w"), py::arg("alpha"));

    m.def("encode_container", [](const QuantizedWeights& qw) {
        const auto bytes = encode_container(qw);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    }, py::arg("qw"));

    m.def("decode_container", [](const py::bytes& data) {
        const std::string_view view = data;
        return decode_container(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
    }, py::arg("data"));

    m.def("rate_report", [](const QuantizedWeights& qw, const py::bytes& data) {
        const std::string_view view = data;
        const RateReport rep = rate_report(qw, std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
        return py::dict(py::arg("rect_rate") = rep.rect_rate,
                        py::arg("entropy_rate") = rep.entropy_rate,
                        py::arg("coded_rate") = rep.coded_rate,
                        py::arg("side_info_bits") = rep.side_info_bits);
    }, py::arg("qw"), py::arg("container"));
}
