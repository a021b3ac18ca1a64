#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wquant/commands.hpp"
#include "wquant/linalg.hpp"
#include "wquant/rng.hpp"

namespace {

using namespace wquant;

struct CovOptions {
    std::string cov_path;
    std::string synth;
    std::size_t n = 0;
    bool rotate = false;
};

void add_cov_options(CLI::App* cmd, CovOptions& opt) {
    auto* file = cmd->add_option("--cov", opt.cov_path,
                                 "Covariance file (WMAT, or CSV by .csv extension)");
    auto* synth = cmd->add_option(
        "--synth", opt.synth, "Synthetic spectrum: powerlaw:EXP | loguniform:LO,HI | explicit:V,..");
    cmd->add_option("--n", opt.n, "Dimension for --synth");
    cmd->add_flag("--rotate", opt.rotate, "Apply a Haar random rotation to the synthetic covariance");
    file->excludes(synth);
}

struct ResolvedCov {
    SymMatrix sigma;
    std::vector<double> lambdas;
};

ResolvedCov resolve_covariance(const CovOptions& opt, std::uint64_t seed) {
    ResolvedCov out;
    if (!opt.cov_path.empty()) {
        const bool csv = opt.cov_path.size() > 4 &&
                         opt.cov_path.compare(opt.cov_path.size() - 4, 4, ".csv") == 0;
        const MatrixFile file = csv ? load_matrix_csv(opt.cov_path, MatrixKind::covariance)
                                    : load_matrix(opt.cov_path);
        out.sigma = file.as_covariance();
        out.lambdas = sym_eigen(out.sigma).lambdas;
        return out;
    }
    if (opt.synth.empty()) throw InputError("either --cov or --synth is required");
    if (opt.n < 1) throw InputError("--synth requires --n");
    const SpectrumSpec spec = SpectrumSpec::parse(opt.synth);
    out.sigma = synth_covariance(opt.n, spec, opt.rotate, seed);
    out.lambdas = synth_spectrum(opt.n, spec, seed);
    std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<>());
    return out;
}

Matrix load_weights(const std::string& path) {
    const bool csv = path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    const MatrixFile file = csv ? load_matrix_csv(path, MatrixKind::weights) : load_matrix(path);
    return file.payload;
}

OutputFormat parse_format(const std::string& name) {
    if (name == "csv") return OutputFormat::csv;
    if (name == "json") return OutputFormat::json;
    throw InputError("unknown format '" + name + "' (expected csv or json)");
}

void emit(const std::vector<RdPoint>& rows, const std::string& out, const std::string& format) {
    const OutputFormat fmt = parse_format(format);
    if (out.empty() || out == "-")
        std::cout << render_results(rows, fmt);
    else
        write_results(rows, out, fmt);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("write failed for " + path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wquant: weighted-MSE weight quantization toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand name

    std::uint64_t seed = 0;
    std::string out_path = "-";
    std::string format = "csv";
    int threads = 0;
    app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    app.add_option("--out", out_path, "Output path ('-' = stdout)")->capture_default_str();
    app.add_option("--format", format, "csv|json")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (0 = hardware)")->capture_default_str();

    // limits ----------------------------------------------------------------
    auto* limits_cmd = app.add_subcommand("limits", "Closed-form rate-distortion benchmarks");
    CovOptions limits_cov;
    add_cov_options(limits_cmd, limits_cov);
    double limits_sigma_w = 1.0;
    std::vector<double> limits_rates;
    limits_cmd->add_option("--sigma-w", limits_sigma_w, "Weight std dev")->capture_default_str();
    limits_cmd->add_option("--rates", limits_rates, "Rate grid, bits/entry")
        ->required()
        ->delimiter(',');

    // quantize --------------------------------------------------------------
    auto* quant_cmd = app.add_subcommand("quantize", "Quantize a weight matrix into a container");
    CovOptions quant_cov;
    add_cov_options(quant_cmd, quant_cov);
    std::string quant_weights, quant_scheme = "watersic", quant_report;
    double quant_alpha = 0.0, quant_rate = -1.0, quant_sigma_w = 1.0;
    quant_cmd->add_option("--weights", quant_weights, "Weight matrix file")->required();
    quant_cmd->add_option("--scheme", quant_scheme, "gptq|watersic")->capture_default_str();
    auto* alpha_opt = quant_cmd->add_option("--alpha", quant_alpha, "Base grid density scale");
    auto* rate_opt =
        quant_cmd->add_option("--rate", quant_rate, "Target EC rate (sets alpha via the rate relation)");
    quant_cmd->add_option("--sigma-w", quant_sigma_w, "Weight std dev for --rate")
        ->capture_default_str();
    quant_cmd->add_option("--report", quant_report, "Also write the rate report to this file");
    alpha_opt->excludes(rate_opt);

    // dequantize ------------------------------------------------------------
    auto* deq_cmd = app.add_subcommand("dequantize", "Reconstruct weights from a container");
    std::string deq_in;
    deq_cmd->add_option("--in", deq_in, "Container file")->required();

    // evaluate --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("evaluate", "Monte-Carlo rate-distortion sweep");
    CovOptions eval_cov;
    add_cov_options(eval_cmd, eval_cov);
    SweepSpec sweep;
    std::vector<std::string> eval_schemes{"limits", "gptq", "watersic"};
    eval_cmd->add_option("--rates", sweep.rates, "Rate grid, bits/entry")->required()->delimiter(',');
    eval_cmd->add_option("--schemes", eval_schemes, "limits,gptq,watersic,gptq_rect,watersic_rect")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--a", sweep.a, "Weight columns")->capture_default_str();
    eval_cmd->add_option("--trials", sweep.trials, "Monte-Carlo trials")->capture_default_str();
    eval_cmd->add_option("--sigma-w", sweep.sigma_w, "Weight std dev")->capture_default_str();

    // analyze ---------------------------------------------------------------
    auto* analyze_cmd = app.add_subcommand("analyze", "AM-GM gaps and Cholesky-diagonal diagnostics");
    CovOptions analyze_cov;
    add_cov_options(analyze_cmd, analyze_cov);

    // oracle ----------------------------------------------------------------
    auto* oracle_cmd = app.add_subcommand("oracle", "SIC vs exact CVP comparison (n <= 12)");
    CovOptions oracle_cov;
    add_cov_options(oracle_cmd, oracle_cov);
    double oracle_alpha = 1.0;
    int oracle_trials = 10000;
    oracle_cmd->add_option("--alpha", oracle_alpha, "Base grid density scale")->capture_default_str();
    oracle_cmd->add_option("--trials", oracle_trials, "Trials")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (limits_cmd->parsed()) {
            const ResolvedCov cov = resolve_covariance(limits_cov, seed);
            emit(run_limits(cov.lambdas, limits_sigma_w, limits_rates), out_path, format);
        } else if (quant_cmd->parsed()) {
            const auto scheme = parse_scheme(quant_scheme);
            if (!scheme || *scheme == Scheme::limits)
                throw InputError("quantize: scheme must be gptq or watersic");
            if (quant_rate < 0.0 && !(quant_alpha > 0.0))
                throw InputError("quantize: one of --alpha or --rate is required");
            const double alpha =
                quant_rate >= 0.0 ? alpha_for_rate(quant_sigma_w, quant_rate) : quant_alpha;
            const ResolvedCov cov = resolve_covariance(quant_cov, seed);
            const Matrix w = load_weights(quant_weights);
            const QuantizeOutcome res = run_quantize(w, cov.sigma, *scheme, alpha, threads);
            if (out_path.empty() || out_path == "-")
                throw InputError("quantize: --out must name a container file");
            write_bytes(out_path, res.container);

            const double entries = static_cast<double>(res.qw.n) * static_cast<double>(res.qw.a);
            std::vector<RdPoint> report{
                {scheme_name(*scheme),
                 res.report.entropy_rate + res.report.side_info_bits / entries,
                 res.wmse,
                 {{"alpha", alpha},
                  {"rect_rate", res.report.rect_rate},
                  {"entropy_rate", res.report.entropy_rate},
                  {"coded_rate", res.report.coded_rate},
                  {"side_info_bits", res.report.side_info_bits},
                  {"container_bytes", static_cast<double>(res.container.size())}}}};
            if (!quant_report.empty()) write_results(report, quant_report, parse_format(format));
            std::cout << render_results(report, parse_format(format));
        } else if (deq_cmd->parsed()) {
            if (out_path.empty() || out_path == "-")
                throw InputError("dequantize: --out must name a weights file");
            const QuantizedWeights qw = decode_container(read_bytes(deq_in));
            save_matrix(out_path, MatrixKind::weights, dequantize(qw));
        } else if (eval_cmd->parsed()) {
            sweep.seed = seed;
            sweep.threads = threads;
            sweep.schemes.clear();
            for (const auto& name : eval_schemes) {
                const auto s = parse_scheme(name);
                if (!s) throw InputError("evaluate: unknown scheme '" + name + "'");
                sweep.schemes.push_back(*s);
            }
            const ResolvedCov cov = resolve_covariance(eval_cov, seed);
            sweep.n = cov.sigma.dim();
            emit(run_evaluate(sweep, cov.sigma, cov.lambdas), out_path, format);
        } else if (analyze_cmd->parsed()) {
            const ResolvedCov cov = resolve_covariance(analyze_cov, seed);
            emit(run_analyze(cov.sigma, seed), out_path, format);
        } else if (oracle_cmd->parsed()) {
            const ResolvedCov cov = resolve_covariance(oracle_cov, seed);
            const OracleReport rep = run_oracle(cov.sigma, oracle_alpha, oracle_trials, seed);
            emit(rep.rows, out_path, format);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
