#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wquant/limits.hpp"
#include "wquant/matrix.hpp"

namespace wquant {

enum class MatrixKind : std::uint8_t { covariance = 0, weights = 1 };

/// A loaded matrix file; covariance payloads are symmetrized on load.
struct MatrixFile {
    MatrixKind kind = MatrixKind::weights;
    Matrix payload;

    SymMatrix as_covariance() const;
};

/// WMAT binary format: 16-byte header (magic "WMAT", kind u8, version u8,
/// n u32, a u32, 2 pad bytes), then f64 little-endian row-major payload.
MatrixFile load_matrix(const std::string& path);
void save_matrix(const std::string& path, MatrixKind kind, const Matrix& m);

/// Plain-text loader for hand-made fixtures: comma-separated rows.
MatrixFile load_matrix_csv(const std::string& path, MatrixKind kind);

/// Eigenvalue profile for synthetic covariances.
struct SpectrumSpec {
    enum class Kind { powerlaw, loguniform, explicit_list };
    Kind kind = Kind::powerlaw;
    double exponent = 1.0;           // powerlaw: lambda_i = i^{-exponent}
    double lo = 0.1, hi = 10.0;      // loguniform bounds
    std::vector<double> values;      // explicit eigenvalues

    /// Parses "powerlaw:1.0", "loguniform:0.1,10" or "explicit:3,1,...".
    static SpectrumSpec parse(const std::string& text);
};

/// Eigenvalues for the requested profile; random kinds are deterministic per
/// seed and sorted descending, explicit lists keep their order.
std::vector<double> synth_spectrum(std::size_t n, const SpectrumSpec& spec, std::uint64_t seed);

/// Sigma = V^T diag(lambda) V with Haar V (if rotate) or exactly diagonal.
SymMatrix synth_covariance(std::size_t n, const SpectrumSpec& spec, bool rotate,
                           std::uint64_t seed);

enum class OutputFormat { csv, json };

/// Stable column order: scheme, rate_bits, distortion, then meta keys sorted;
/// floats use the shortest round-trip representation.
std::string render_results(const std::vector<RdPoint>& rows, OutputFormat format);
void write_results(const std::vector<RdPoint>& rows, const std::string& path,
                   OutputFormat format);

} // namespace wquant
