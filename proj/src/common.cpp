#include "sgsl/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace sgsl {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SG_LOG");
        if (!env) return LogLevel::warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

static const char* kHexDigits = "0123456789abcdef";

std::string to_hex(const uint8_t* data, size_t len) {
    std::string s;
    s.reserve(len * 2);
    for (size_t i = 0; i < len; i++) {
        s.push_back(kHexDigits[data[i] >> 4]);
        s.push_back(kHexDigits[data[i] & 0xf]);
    }
    return s;
}

std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

static int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Bytes from_hex(const std::string& s) {
    if (s.size() % 2 != 0) throw DataError("hex string has odd length");
    Bytes out(s.size() / 2);
    for (size_t i = 0; i < out.size(); i++) {
        int hi = hex_val(s[2 * i]), lo = hex_val(s[2 * i + 1]);
        if (hi < 0 || lo < 0) throw DataError("invalid hex character");
        out[i] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return out;
}

void put_u16le(Bytes& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32le(Bytes& out, uint32_t v) {
    for (int i = 0; i < 4; i++) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64le(Bytes& out, uint64_t v) {
    for (int i = 0; i < 8; i++) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; i--) v = (v << 8) | p[i];
    return v;
}

} // namespace sgsl
