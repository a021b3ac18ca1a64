#include "wquant/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wquant/errors.hpp"
#include "wquant/linalg.hpp"
#include "wquant/rng.hpp"

namespace wquant {

namespace {

constexpr std::uint8_t kFileVersion = 1;

void check_finite(const Matrix& m, const char* what) {
    for (double v : m.data())
        if (!std::isfinite(v)) throw NonFinite(std::string(what) + ": non-finite entry");
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> sorted_meta_keys(const std::vector<RdPoint>& rows) {
    std::set<std::string> keys;
    for (const auto& row : rows)
        for (const auto& [k, v] : row.meta) keys.insert(k);
    return {keys.begin(), keys.end()};
}

} // namespace

SymMatrix MatrixFile::as_covariance() const {
    if (kind != MatrixKind::covariance) throw InputError("matrix file does not hold a covariance");
    return SymMatrix(payload);
}

MatrixFile load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("load_matrix: cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 16 || std::memcmp(bytes.data(), "WMAT", 4) != 0)
        throw BadHeader("load_matrix: bad magic");
    const auto kind_byte = static_cast<std::uint8_t>(bytes[4]);
    if (kind_byte > 1) throw BadHeader("load_matrix: unknown matrix kind");
    if (static_cast<std::uint8_t>(bytes[5]) != kFileVersion)
        throw BadHeader("load_matrix: unsupported version");
    std::uint32_t n = 0, a = 0;
    std::memcpy(&n, bytes.data() + 6, 4);
    std::memcpy(&a, bytes.data() + 10, 4);
    const std::size_t expected = 16 + static_cast<std::size_t>(n) * a * 8;
    if (bytes.size() != expected) throw BadHeader("load_matrix: file size does not match header");

    MatrixFile file;
    file.kind = static_cast<MatrixKind>(kind_byte);
    file.payload = Matrix(n, a);
    std::memcpy(file.payload.data().data(), bytes.data() + 16,
                static_cast<std::size_t>(n) * a * 8);
    check_finite(file.payload, "load_matrix");
    if (file.kind == MatrixKind::covariance) {
        if (n != a) throw NotSquare("load_matrix: covariance file is not square");
        file.payload = SymMatrix(file.payload).entries();
    }
    return file;
}

void save_matrix(const std::string& path, MatrixKind kind, const Matrix& m) {
    check_finite(m, "save_matrix");
    if (kind == MatrixKind::covariance && m.rows() != m.cols())
        throw NotSquare("save_matrix: covariance must be square");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("save_matrix: cannot open " + path);

    char header[16] = {};
    std::memcpy(header, "WMAT", 4);
    header[4] = static_cast<char>(kind);
    header[5] = static_cast<char>(kFileVersion);
    const std::uint32_t n = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t a = static_cast<std::uint32_t>(m.cols());
    std::memcpy(header + 6, &n, 4);
    std::memcpy(header + 10, &a, 4);
    out.write(header, 16);
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.size() * 8));
    if (!out) throw IoFailure("save_matrix: write failed for " + path);
}

MatrixFile load_matrix_csv(const std::string& path, MatrixKind kind) {
    std::ifstream in(path);
    if (!in) throw IoFailure("load_matrix_csv: cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw BadHeader("load_matrix_csv: cannot parse '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw BadHeader("load_matrix_csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw BadHeader("load_matrix_csv: empty file");

    MatrixFile file;
    file.kind = kind;
    file.payload = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) file.payload(i, j) = rows[i][j];
    check_finite(file.payload, "load_matrix_csv");
    if (kind == MatrixKind::covariance) {
        if (file.payload.rows() != file.payload.cols())
            throw NotSquare("load_matrix_csv: covariance file is not square");
        file.payload = SymMatrix(file.payload).entries();
    }
    return file;
}

SpectrumSpec SpectrumSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);

    auto parse_list = [&](const std::string& s) {
        std::vector<double> vals;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InputError("spectrum spec: cannot parse '" + cell + "'");
            }
        }
        return vals;
    };

    SpectrumSpec spec;
    if (head == "powerlaw") {
        spec.kind = Kind::powerlaw;
        const auto vals = parse_list(args.empty() ? "1.0" : args);
        if (vals.size() != 1) throw InputError("spectrum spec: powerlaw takes one exponent");
        spec.exponent = vals[0];
    } else if (head == "loguniform") {
        spec.kind = Kind::loguniform;
        const auto vals = parse_list(args);
        if (vals.size() != 2 || !(vals[0] > 0.0) || !(vals[1] > vals[0]))
            throw InputError("spectrum spec: loguniform takes 0 < lo < hi");
        spec.lo = vals[0];
        spec.hi = vals[1];
    } else if (head == "explicit") {
        spec.kind = Kind::explicit_list;
        spec.values = parse_list(args);
        if (spec.values.empty()) throw InputError("spectrum spec: explicit list is empty");
        for (double v : spec.values)
            if (v < 0.0) throw InputError("spectrum spec: eigenvalues must be non-negative");
    } else {
        throw InputError("spectrum spec: unknown kind '" + head + "'");
    }
    return spec;
}

std::vector<double> synth_spectrum(std::size_t n, const SpectrumSpec& spec, std::uint64_t seed) {
    if (n < 1) throw DimensionMismatch("synth_spectrum: n must be >= 1");
    std::vector<double> lambdas(n);
    switch (spec.kind) {
        case SpectrumSpec::Kind::powerlaw:
            for (std::size_t i = 0; i < n; ++i)
                lambdas[i] = std::pow(static_cast<double>(i + 1), -spec.exponent);
            break;
        case SpectrumSpec::Kind::loguniform: {
            const std::uint64_t s = rng::derive(seed, 0x5eed);
            const double llo = std::log(spec.lo);
            const double lhi = std::log(spec.hi);
            for (std::size_t i = 0; i < n; ++i)
                lambdas[i] = std::exp(llo + (lhi - llo) * rng::uniform01(s, i));
            std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
            break;
        }
        case SpectrumSpec::Kind::explicit_list:
            if (spec.values.size() != n)
                throw DimensionMismatch("synth_spectrum: explicit list length differs from n");
            lambdas = spec.values;
            break;
    }
    return lambdas;
}

SymMatrix synth_covariance(std::size_t n, const SpectrumSpec& spec, bool rotate,
                           std::uint64_t seed) {
    const std::vector<double> lambdas = synth_spectrum(n, spec, seed);
    if (!rotate) {
        Matrix d(n, n);
        for (std::size_t i = 0; i < n; ++i) d(i, i) = lambdas[i];
        return SymMatrix(std::move(d));
    }
    const Matrix v = random_orthogonal(n, rng::derive(seed, 0x5071));
    // V^T diag(lambda) V
    Matrix scaled = v; // row i scaled by lambda_i
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= lambdas[i];
    return SymMatrix(matmul(transpose(v), scaled));
}

std::string render_results(const std::vector<RdPoint>& rows, OutputFormat format) {
    const std::vector<std::string> keys = sorted_meta_keys(rows);

    if (format == OutputFormat::csv) {
        std::string out = "scheme,rate_bits,distortion";
        for (const auto& k : keys) out += "," + k;
        out += "\n";
        for (const auto& row : rows) {
            out += row.scheme + "," + format_double(row.rate) + "," + format_double(row.distortion);
            for (const auto& k : keys) {
                out += ",";
                const auto it = row.meta.find(k);
                if (it != row.meta.end()) out += format_double(it->second);
            }
            out += "\n";
        }
        return out;
    }

    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json obj;
        obj["scheme"] = row.scheme;
        obj["rate_bits"] = row.rate;
        obj["distortion"] = row.distortion;
        obj["meta"] = nlohmann::json::object();
        for (const auto& [k, v] : row.meta) obj["meta"][k] = v;
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

void write_results(const std::vector<RdPoint>& rows, const std::string& path,
                   OutputFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("write_results: cannot open " + path);
    out << render_results(rows, format);
    if (!out) throw IoFailure("write_results: write failed for " + path);
}

} // namespace wquant
