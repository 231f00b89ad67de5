#include "sgsl/crypto/bench.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>

#include "sgsl/crypto/aes.hpp"
#include "sgsl/crypto/mask.hpp"
#include "sgsl/crypto/simon_speck.hpp"

namespace sgsl::crypto {

namespace {

double median_ms(const std::function<void()>& fn) {
    std::vector<double> runs;
    runs.reserve(9);
    for (int i = 0; i < 9; i++) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        runs.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(runs.begin(), runs.end());
    return runs[4];
}

} // namespace

std::vector<BenchRow> bench_ciphers(size_t payload_bytes) {
    if (payload_bytes < 1024) throw ContractError("benchmark payload must be >= 1 KiB");
    payload_bytes &= ~size_t{3}; // whole words

    Rng rng(0xbe9c);
    std::vector<uint32_t> payload_words(payload_bytes / 4);
    for (auto& w : payload_words) w = rng.next_u32();

    std::vector<BenchRow> rows;

    // mask / demask over the fixed-point words
    {
        MaskStream stream;
        for (size_t i = 0; i < 32; i++) stream.key[i] = static_cast<uint8_t>(rng.next_u32());
        for (size_t i = 0; i < 16; i++) stream.session_id[i] = static_cast<uint8_t>(rng.next_u32());
        IntBlob blob;
        blob.shape = {static_cast<int>(payload_words.size())};
        blob.frac_bits = 16;
        blob.words = payload_words;
        BenchRow row{"mask", 0, 0, true};
        uint64_t ctr = 0;
        row.encrypt_ms = median_ms([&] {
            mask_in_place(blob, stream, ctr, Direction::client_to_server);
            ctr++;
        });
        row.decrypt_ms = median_ms([&] {
            ctr--;
            demask_in_place(blob, stream, ctr, Direction::client_to_server);
        });
        rows.push_back(row);
    }

    Bytes buf(payload_bytes);
    for (size_t i = 0; i < buf.size(); i++)
        buf[i] = reinterpret_cast<const uint8_t*>(payload_words.data())[i];

    {
        uint8_t key[16], nonce[12] = {0};
        for (auto& b : key) b = static_cast<uint8_t>(rng.next_u32());
        BenchRow row{"aes-128-ctr", 0, 0, true};
        row.encrypt_ms = median_ms([&] { aes128_ctr_xor(key, nonce, 0, buf.data(), buf.size()); });
        row.decrypt_ms = median_ms([&] { aes128_ctr_xor(key, nonce, 0, buf.data(), buf.size()); });
        rows.push_back(row);
    }
    {
        uint32_t key[4];
        for (auto& k : key) k = rng.next_u32();
        BenchRow row{"simon64/128-ctr", 0, 0, true};
        row.encrypt_ms = median_ms([&] { simon64_ctr_xor(key, 42, buf.data(), buf.size()); });
        row.decrypt_ms = median_ms([&] { simon64_ctr_xor(key, 42, buf.data(), buf.size()); });
        rows.push_back(row);
    }
    {
        uint32_t key[4];
        for (auto& k : key) k = rng.next_u32();
        BenchRow row{"speck64/128-ctr", 0, 0, true};
        row.encrypt_ms = median_ms([&] { speck64_ctr_xor(key, 42, buf.data(), buf.size()); });
        row.decrypt_ms = median_ms([&] { speck64_ctr_xor(key, 42, buf.data(), buf.size()); });
        rows.push_back(row);
    }

    rows.push_back(BenchRow{"fhe", 0, 0, false}); // out of scope, reported as not measured
    return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows, size_t payload_bytes) {
    std::ostringstream os;
    os << "payload: " << payload_bytes << " bytes, median of 9 runs\n";
    os << "cipher              encrypt_ms   decrypt_ms\n";
    for (const auto& r : rows) {
        char line[128];
        if (r.measured)
            std::snprintf(line, sizeof(line), "%-18s %10.3f %12.3f\n", r.name.c_str(), r.encrypt_ms,
                          r.decrypt_ms);
        else
            std::snprintf(line, sizeof(line), "%-18s %10s %12s\n", r.name.c_str(), "n/a", "n/a");
        os << line;
    }
    return os.str();
}

} // namespace sgsl::crypto
