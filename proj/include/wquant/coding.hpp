#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wquant/quantizers.hpp"

namespace wquant {

/// Rate accounting for one quantized matrix.
///  - rect_rate: rectangular-shaping rate (1/n) sum log2(1 + 2 q_i)
///  - entropy_rate: per-row plug-in Shannon entropy, averaged over rows
///  - coded_rate: arithmetic-coder payload bits / (n a)
///  - side_info_bits: bits the container spends on the scales alpha_i (f64)
///    and bounds q_i (u32); amortized over the a columns
struct RateReport {
    double rect_rate = 0.0;
    double entropy_rate = 0.0;
    double coded_rate = 0.0;
    double side_info_bits = 0.0;
};

struct RectRate {
    double rate = 0.0;
    std::vector<std::uint32_t> q;
};

RectRate rect_rate(const std::int32_t* z, std::size_t n, std::size_t a);
RectRate rect_rate(const QuantizedWeights& qw);

double entropy_rate(const std::int32_t* z, std::size_t n, std::size_t a);
double entropy_rate(const QuantizedWeights& qw);

/// alpha ~= sqrt(2 pi e sigma_w^2 2^{-2R}) and its inverse.
double alpha_for_rate(double sigma_w, double rate_bits);
double rate_for_alpha(double sigma_w, double alpha);

/// Container layout (little-endian, byte-exact):
///   "WQNT" | version u16 | n u32 | a u32 | flags u16
///   alphas n x f64 | q n x u32
///   per-row symbol counts, (2 q_i + 1) x u32 for symbols -q_i..q_i
///   payload bit count u64 | arithmetic-coded payload bytes
///   CRC32C u32 over everything above
std::vector<std::uint8_t> encode_container(const QuantizedWeights& qw);
QuantizedWeights decode_container(std::span<const std::uint8_t> bytes);

/// Report for a container produced by encode_container.
RateReport rate_report(const QuantizedWeights& qw, std::span<const std::uint8_t> container);

std::uint32_t crc32c(std::span<const std::uint8_t> bytes);

} // namespace wquant
