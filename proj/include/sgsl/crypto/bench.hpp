#pragma once

#include <string>
#include <vector>

#include "sgsl/common.hpp"

namespace sgsl::crypto {

struct BenchRow {
    std::string name;
    double encrypt_ms = 0; // mask / encrypt over the payload, median of 9
    double decrypt_ms = 0; // demask / decrypt
    bool measured = true;  // false marks reported-but-not-measured entries
};

// Times mask/demask against AES-128-CTR, Simon64/128-CTR and Speck64/128-CTR
// over the same payload. payload_bytes must be >= 1 KiB.
std::vector<BenchRow> bench_ciphers(size_t payload_bytes);

std::string format_bench_table(const std::vector<BenchRow>& rows, size_t payload_bytes);

} // namespace sgsl::crypto
