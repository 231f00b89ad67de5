#pragma once

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgsl {

using Bytes = std::vector<uint8_t>;

/// Shape/contract violations detected in tensor and model code.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Misuse of an API contract (non-scalar loss, missing tape, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Problems in external data (CSV rows, config files, checkpoints).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// uniform/normal mappings below avoid std::*_distribution, whose results
// vary between library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    uint32_t next_u32() { return static_cast<uint32_t>(gen_() >> 32); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 2.0 * M_PI * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // modulo bias is irrelevant at the scales used here (n << 2^64)
        return gen_() % n;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// log level from SG_LOG (error|warn|info|debug), default warn
enum class LogLevel : int { error = 0, warn = 1, info = 2, debug = 3 };
LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);
inline void log_warn(const std::string& msg) { log_msg(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }

std::string to_hex(const uint8_t* data, size_t len);
std::string to_hex(const Bytes& b);
Bytes from_hex(const std::string& s);

// little-endian scalar append/read helpers for wire formats
void put_u16le(Bytes& out, uint16_t v);
void put_u32le(Bytes& out, uint32_t v);
void put_u64le(Bytes& out, uint64_t v);
uint16_t get_u16le(const uint8_t* p);
uint32_t get_u32le(const uint8_t* p);
uint64_t get_u64le(const uint8_t* p);

} // namespace sgsl
