#include "wquant/coding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "wquant/errors.hpp"

namespace wquant {

namespace {

constexpr double kTwoPiE = 17.079468445347132;
constexpr std::uint16_t kVersion = 1;
constexpr std::uint64_t kMaxCoderTotal = 1ULL << 30;

// ---------------------------------------------------------------- crc32c ---

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0x82F63B78u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

// ------------------------------------------------------------- bit parse ---

struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
};

struct ByteReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t count) const {
        if (pos + count > bytes.size()) throw TruncatedPayload("container: unexpected end of data");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

// ------------------------------------------------- static arithmetic coder ---

constexpr std::uint32_t kHalf = 1u << 31;
constexpr std::uint32_t kQuarter = 1u << 30;
constexpr std::uint32_t kThreeQuarter = 3u << 30;

struct BitSink {
    std::vector<std::uint8_t> bytes;
    std::uint64_t bit_count = 0;

    void put(bool bit) {
        if (bit_count % 8 == 0) bytes.push_back(0);
        if (bit) bytes.back() |= static_cast<std::uint8_t>(1u << (7 - bit_count % 8));
        ++bit_count;
    }
};

struct BitSource {
    std::span<const std::uint8_t> bytes;
    std::uint64_t pos = 0;

    bool get() {
        // bits past the payload read as 0, matching the encoder's flush
        if (pos >= bytes.size() * 8) {
            ++pos;
            return false;
        }
        const bool bit = (bytes[pos / 8] >> (7 - pos % 8)) & 1u;
        ++pos;
        return bit;
    }
};

class ArithmeticEncoder {
public:
    explicit ArithmeticEncoder(BitSink& out) : out_(out) {}

    void encode(std::uint32_t cum_lo, std::uint32_t cum_hi, std::uint32_t total) {
        const std::uint64_t range = static_cast<std::uint64_t>(high_) - low_ + 1;
        high_ = low_ + static_cast<std::uint32_t>(range * cum_hi / total) - 1;
        low_ = low_ + static_cast<std::uint32_t>(range * cum_lo / total);
        for (;;) {
            if (high_ < kHalf) {
                emit(false);
            } else if (low_ >= kHalf) {
                emit(true);
                low_ -= kHalf;
                high_ -= kHalf;
            } else if (low_ >= kQuarter && high_ < kThreeQuarter) {
                ++pending_;
                low_ -= kQuarter;
                high_ -= kQuarter;
            } else {
                break;
            }
            low_ <<= 1;
            high_ = (high_ << 1) | 1u;
        }
    }

    void finish() {
        ++pending_;
        emit(low_ >= kQuarter);
    }

private:
    void emit(bool bit) {
        out_.put(bit);
        while (pending_ > 0) {
            out_.put(!bit);
            --pending_;
        }
    }

    BitSink& out_;
    std::uint32_t low_ = 0;
    std::uint32_t high_ = 0xFFFFFFFFu;
    std::uint64_t pending_ = 0;
};

class ArithmeticDecoder {
public:
    explicit ArithmeticDecoder(BitSource& in) : in_(in) {
        for (int i = 0; i < 32; ++i) value_ = (value_ << 1) | static_cast<std::uint32_t>(in_.get());
    }

    std::uint32_t target(std::uint32_t total) const {
        const std::uint64_t range = static_cast<std::uint64_t>(high_) - low_ + 1;
        return static_cast<std::uint32_t>(
            ((static_cast<std::uint64_t>(value_ - low_) + 1) * total - 1) / range);
    }

    void consume(std::uint32_t cum_lo, std::uint32_t cum_hi, std::uint32_t total) {
        const std::uint64_t range = static_cast<std::uint64_t>(high_) - low_ + 1;
        high_ = low_ + static_cast<std::uint32_t>(range * cum_hi / total) - 1;
        low_ = low_ + static_cast<std::uint32_t>(range * cum_lo / total);
        for (;;) {
            if (high_ < kHalf) {
                // nothing
            } else if (low_ >= kHalf) {
                value_ -= kHalf;
                low_ -= kHalf;
                high_ -= kHalf;
            } else if (low_ >= kQuarter && high_ < kThreeQuarter) {
                value_ -= kQuarter;
                low_ -= kQuarter;
                high_ -= kQuarter;
            } else {
                break;
            }
            low_ <<= 1;
            high_ = (high_ << 1) | 1u;
            value_ = (value_ << 1) | static_cast<std::uint32_t>(in_.get());
        }
    }

private:
    BitSource& in_;
    std::uint32_t low_ = 0;
    std::uint32_t high_ = 0xFFFFFFFFu;
    std::uint32_t value_ = 0;
};

// Per-row cumulative counts over the alphabet -q..q.
std::vector<std::uint32_t> cumulative(const std::vector<std::uint32_t>& counts) {
    std::vector<std::uint32_t> cum(counts.size() + 1, 0);
    for (std::size_t s = 0; s < counts.size(); ++s) cum[s + 1] = cum[s] + counts[s];
    return cum;
}

std::vector<std::uint32_t> row_counts(const std::int32_t* zi, std::size_t a, std::uint32_t q) {
    std::vector<std::uint32_t> counts(2 * static_cast<std::size_t>(q) + 1, 0);
    for (std::size_t c = 0; c < a; ++c)
        ++counts[static_cast<std::size_t>(static_cast<std::int64_t>(zi[c]) + q)];
    return counts;
}

} // namespace

std::uint32_t crc32c(std::span<const std::uint8_t> bytes) {
    static const std::array<std::uint32_t, 256> table = make_crc_table();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::uint8_t b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

RectRate rect_rate(const std::int32_t* z, std::size_t n, std::size_t a) {
    RectRate r;
    r.q.assign(n, 0);
    double bits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t qi = 0;
        for (std::size_t c = 0; c < a; ++c) {
            const std::int64_t mag = std::abs(static_cast<std::int64_t>(z[i * a + c]));
            qi = std::max(qi, static_cast<std::uint32_t>(mag));
        }
        r.q[i] = qi;
        bits += std::log2(1.0 + 2.0 * static_cast<double>(qi));
    }
    r.rate = n == 0 ? 0.0 : bits / static_cast<double>(n);
    return r;
}

RectRate rect_rate(const QuantizedWeights& qw) { return rect_rate(qw.z.data(), qw.n, qw.a); }

double entropy_rate(const std::int32_t* z, std::size_t n, std::size_t a) {
    if (n == 0 || a == 0) return 0.0;
    double total_bits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::int32_t lo = z[i * a];
        std::int32_t hi = lo;
        for (std::size_t c = 0; c < a; ++c) {
            lo = std::min(lo, z[i * a + c]);
            hi = std::max(hi, z[i * a + c]);
        }
        std::vector<std::uint64_t> counts(static_cast<std::size_t>(hi - lo) + 1, 0);
        for (std::size_t c = 0; c < a; ++c) ++counts[static_cast<std::size_t>(z[i * a + c] - lo)];
        double h = 0.0;
        for (std::uint64_t cnt : counts) {
            if (cnt == 0) continue;
            const double p = static_cast<double>(cnt) / static_cast<double>(a);
            h -= p * std::log2(p);
        }
        total_bits += h;
    }
    return total_bits / static_cast<double>(n);
}

double entropy_rate(const QuantizedWeights& qw) { return entropy_rate(qw.z.data(), qw.n, qw.a); }

double alpha_for_rate(double sigma_w, double rate_bits) {
    if (rate_bits < 0.0) throw InputError("alpha_for_rate: rate must be non-negative");
    return std::sqrt(kTwoPiE * sigma_w * sigma_w * std::exp2(-2.0 * rate_bits));
}

double rate_for_alpha(double sigma_w, double alpha) {
    if (!(alpha > 0.0)) throw InputError("rate_for_alpha: alpha must be positive");
    return 0.5 * std::log2(kTwoPiE * sigma_w * sigma_w / (alpha * alpha));
}

std::vector<std::uint8_t> encode_container(const QuantizedWeights& qw) {
    qw.validate();
    if (qw.a >= kMaxCoderTotal)
        throw InputError("encode_container: too many columns for the arithmetic coder");

    ByteWriter w;
    w.u8('W');
    w.u8('Q');
    w.u8('N');
    w.u8('T');
    w.u16(kVersion);
    w.u32(static_cast<std::uint32_t>(qw.n));
    w.u32(static_cast<std::uint32_t>(qw.a));
    w.u16(0); // flags
    for (double alpha : qw.alphas) w.f64(alpha);
    for (std::uint32_t qi : qw.q) w.u32(qi);

    std::vector<std::vector<std::uint32_t>> cums(qw.n);
    for (std::size_t i = 0; i < qw.n; ++i) {
        const auto counts = row_counts(qw.z.data() + i * qw.a, qw.a, qw.q[i]);
        for (std::uint32_t cnt : counts) w.u32(cnt);
        cums[i] = cumulative(counts);
    }

    BitSink sink;
    if (qw.a > 0) {
        ArithmeticEncoder enc(sink);
        const auto total = static_cast<std::uint32_t>(qw.a);
        for (std::size_t i = 0; i < qw.n; ++i) {
            const auto& cum = cums[i];
            const std::int32_t* zi = qw.z.data() + i * qw.a;
            for (std::size_t c = 0; c < qw.a; ++c) {
                const auto s = static_cast<std::size_t>(static_cast<std::int64_t>(zi[c]) + qw.q[i]);
                enc.encode(cum[s], cum[s + 1], total);
            }
        }
        enc.finish();
    }
    w.u64(sink.bit_count);
    w.bytes.insert(w.bytes.end(), sink.bytes.begin(), sink.bytes.end());

    w.u32(crc32c(w.bytes));
    return w.bytes;
}

QuantizedWeights decode_container(std::span<const std::uint8_t> bytes) {
    ByteReader r{bytes};
    r.need(16);
    if (r.u8() != 'W' || r.u8() != 'Q' || r.u8() != 'N' || r.u8() != 'T')
        throw BadMagic("container: bad magic");
    if (r.u16() != kVersion) throw BadHeader("container: unsupported version");
    const std::uint32_t n = r.u32();
    const std::uint32_t a = r.u32();
    if (r.u16() != 0) throw BadHeader("container: unknown flags");
    if (a >= kMaxCoderTotal) throw BadHeader("container: column count out of range");

    QuantizedWeights qw;
    qw.n = n;
    qw.a = a;
    r.need(12 * static_cast<std::size_t>(n)); // reject absurd n before allocating
    qw.alphas.resize(n);
    qw.q.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) qw.alphas[i] = r.f64();
    for (std::uint32_t i = 0; i < n; ++i) qw.q[i] = r.u32();

    std::vector<std::vector<std::uint32_t>> cums(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::size_t symbols = 2 * static_cast<std::size_t>(qw.q[i]) + 1;
        r.need(4 * symbols);
        std::vector<std::uint32_t> counts(symbols, 0);
        std::uint64_t sum = 0;
        for (auto& cnt : counts) {
            cnt = r.u32();
            sum += cnt;
        }
        if (sum != a) throw CorruptContainer("container: row frequencies do not sum to a");
        cums[i] = cumulative(counts);
    }

    const std::uint64_t payload_bits = r.u64();
    const std::uint64_t payload_bytes = (payload_bits + 7) / 8;
    r.need(payload_bytes + 4);
    std::span<const std::uint8_t> payload = bytes.subspan(r.pos, payload_bytes);
    r.pos += payload_bytes;

    const std::uint32_t stored_crc = r.u32();
    if (r.pos != bytes.size()) throw CorruptContainer("container: trailing bytes after checksum");
    if (crc32c(bytes.first(bytes.size() - 4)) != stored_crc)
        throw ChecksumMismatch("container: checksum mismatch");

    qw.z.assign(static_cast<std::size_t>(n) * a, 0);
    if (a > 0 && n > 0) {
        BitSource source{payload};
        ArithmeticDecoder dec(source);
        const auto total = static_cast<std::uint32_t>(a);
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto& cum = cums[i];
            std::int32_t* zi = qw.z.data() + static_cast<std::size_t>(i) * a;
            for (std::uint32_t c = 0; c < a; ++c) {
                const std::uint32_t t = dec.target(total);
                const auto it = std::upper_bound(cum.begin(), cum.end(), t);
                const auto s = static_cast<std::size_t>(it - cum.begin()) - 1;
                dec.consume(cum[s], cum[s + 1], total);
                zi[c] = static_cast<std::int32_t>(static_cast<std::int64_t>(s) - qw.q[i]);
            }
        }
    }
    qw.validate();
    return qw;
}

RateReport rate_report(const QuantizedWeights& qw, std::span<const std::uint8_t> container) {
    RateReport rep;
    rep.rect_rate = rect_rate(qw).rate;
    rep.entropy_rate = entropy_rate(qw);
    rep.side_info_bits = static_cast<double>(qw.n) * (64.0 + 32.0);

    // payload bit count sits after header, scales, bounds and tables
    ByteReader r{container};
    r.pos = 16 + 12 * qw.n;
    for (std::uint32_t qi : qw.q) r.pos += 4 * (2 * static_cast<std::size_t>(qi) + 1);
    const std::uint64_t payload_bits = r.u64();
    const double entries = static_cast<double>(qw.n) * static_cast<double>(qw.a);
    rep.coded_rate = entries == 0.0 ? 0.0 : static_cast<double>(payload_bits) / entries;
    return rep;
}

} // namespace wquant
