// Test-only double-precision forward reference. Independent of the float32
// library path: plain loops over std::vector<double>, used to freeze
// expected values and as the finite-difference oracle.
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace ref {

struct DT {
    std::vector<int> shape;
    std::vector<double> v;

    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(v.size()); }
};

inline DT make(std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return DT{std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0)};
}

inline DT matmul(const DT& a, const DT& b) {
    // supports [m,k]x[k,n], [B,m,k]x[k,n], [B,m,k]x[B,k,n]
    int batch, m, k, n;
    bool shared;
    if (a.rank() == 2) {
        batch = 1;
        m = a.dim(0);
        k = a.dim(1);
        n = b.dim(1);
        shared = true;
    } else if (b.rank() == 2) {
        batch = a.dim(0);
        m = a.dim(1);
        k = a.dim(2);
        n = b.dim(1);
        shared = true;
    } else {
        batch = a.dim(0);
        m = a.dim(1);
        k = a.dim(2);
        n = b.dim(2);
        shared = false;
    }
    DT c = a.rank() == 2 ? make({m, n}) : make({batch, m, n});
    for (int bi = 0; bi < batch; bi++) {
        const double* A = a.v.data() + static_cast<int64_t>(bi) * m * k;
        const double* B = b.v.data() + (shared ? 0 : static_cast<int64_t>(bi) * k * n);
        double* C = c.v.data() + static_cast<int64_t>(bi) * m * n;
        for (int i = 0; i < m; i++)
            for (int p = 0; p < k; p++)
                for (int j = 0; j < n; j++) C[static_cast<int64_t>(i) * n + j] += A[static_cast<int64_t>(i) * k + p] * B[static_cast<int64_t>(p) * n + j];
    }
    return c;
}

inline DT transpose_last2(const DT& a) {
    int r = a.rank();
    int rows = a.dim(r - 2), cols = a.dim(r - 1);
    auto shape = a.shape;
    std::swap(shape[static_cast<size_t>(r - 2)], shape[static_cast<size_t>(r - 1)]);
    DT c{shape, std::vector<double>(a.v.size())};
    int64_t outer = a.numel() / (static_cast<int64_t>(rows) * cols);
    for (int64_t o = 0; o < outer; o++)
        for (int i = 0; i < rows; i++)
            for (int j = 0; j < cols; j++)
                c.v[static_cast<size_t>(o * rows * cols + static_cast<int64_t>(j) * rows + i)] =
                    a.v[static_cast<size_t>(o * rows * cols + static_cast<int64_t>(i) * cols + j)];
    return c;
}

inline DT softmax_rows(const DT& a) {
    DT c = a;
    int d = a.shape.back();
    int64_t rows = a.numel() / d;
    for (int64_t r = 0; r < rows; r++) {
        double* x = c.v.data() + r * d;
        double mx = x[0];
        for (int i = 1; i < d; i++) mx = std::max(mx, x[i]);
        double sum = 0;
        for (int i = 0; i < d; i++) {
            x[i] = std::exp(x[i] - mx);
            sum += x[i];
        }
        for (int i = 0; i < d; i++) x[i] /= sum;
    }
    return c;
}

inline DT layernorm(const DT& a, const DT& gain, const DT& bias, double eps = 1e-5) {
    DT c = a;
    int d = a.shape.back();
    int64_t rows = a.numel() / d;
    for (int64_t r = 0; r < rows; r++) {
        double* x = c.v.data() + r * d;
        double mean = 0;
        for (int i = 0; i < d; i++) mean += x[i];
        mean /= d;
        double var = 0;
        for (int i = 0; i < d; i++) var += (x[i] - mean) * (x[i] - mean);
        var /= d;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int i = 0; i < d; i++) x[i] = gain.v[static_cast<size_t>(i)] * ((x[i] - mean) * inv) + bias.v[static_cast<size_t>(i)];
    }
    return c;
}

inline DT add(const DT& a, const DT& b) {
    DT c = a;
    for (size_t i = 0; i < c.v.size(); i++) c.v[i] += b.v[i];
    return c;
}

inline DT sub(const DT& a, const DT& b) {
    DT c = a;
    for (size_t i = 0; i < c.v.size(); i++) c.v[i] -= b.v[i];
    return c;
}

inline DT mul(const DT& a, const DT& b) {
    DT c = a;
    for (size_t i = 0; i < c.v.size(); i++) c.v[i] *= b.v[i];
    return c;
}

inline DT scale(const DT& a, double s) {
    DT c = a;
    for (auto& x : c.v) x *= s;
    return c;
}

inline DT add_bias(const DT& a, const DT& bias) {
    DT c = a;
    int d = a.shape.back();
    int64_t rows = a.numel() / d;
    for (int64_t r = 0; r < rows; r++)
        for (int i = 0; i < d; i++) c.v[static_cast<size_t>(r * d + i)] += bias.v[static_cast<size_t>(i)];
    return c;
}

inline DT add_table(const DT& a, const DT& t) {
    DT c = a;
    int64_t nd = t.numel();
    int B = a.dim(0);
    for (int bi = 0; bi < B; bi++)
        for (int64_t i = 0; i < nd; i++) c.v[static_cast<size_t>(bi * nd + i)] += t.v[static_cast<size_t>(i)];
    return c;
}

inline DT gelu(const DT& a) {
    DT c = a;
    for (auto& x : c.v) x = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    return c;
}

inline double mean_all(const DT& a) {
    double s = 0;
    for (double x : a.v) s += x;
    return s / static_cast<double>(a.numel());
}

inline DT mean_axis0(const DT& a) {
    int B = a.dim(0);
    int64_t rest = a.numel() / B;
    DT c{std::vector<int>(a.shape.begin() + 1, a.shape.end()),
         std::vector<double>(static_cast<size_t>(rest), 0.0)};
    for (int bi = 0; bi < B; bi++)
        for (int64_t i = 0; i < rest; i++) c.v[static_cast<size_t>(i)] += a.v[static_cast<size_t>(bi * rest + i)];
    for (auto& x : c.v) x /= B;
    return c;
}

inline DT l2norm_rows(const DT& a) {
    int B = a.dim(0);
    int64_t rest = a.numel() / B;
    DT c = make({B});
    for (int bi = 0; bi < B; bi++) {
        double s = 0;
        for (int64_t i = 0; i < rest; i++) {
            double x = a.v[static_cast<size_t>(bi * rest + i)];
            s += x * x;
        }
        c.v[static_cast<size_t>(bi)] = std::sqrt(s);
    }
    return c;
}

inline DT concat_axis(const std::vector<DT>& parts, int axis) {
    const auto& s0 = parts[0].shape;
    int r = parts[0].rank();
    int total = 0;
    for (const auto& p : parts) total += p.dim(axis);
    auto so = s0;
    so[static_cast<size_t>(axis)] = total;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; i++) outer *= s0[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; i++) inner *= s0[static_cast<size_t>(i)];
    DT c = make(so);
    int64_t dst_stride = static_cast<int64_t>(total) * inner;
    int64_t off = 0;
    for (const auto& p : parts) {
        int64_t chunk = static_cast<int64_t>(p.dim(axis)) * inner;
        for (int64_t o = 0; o < outer; o++)
            for (int64_t i = 0; i < chunk; i++)
                c.v[static_cast<size_t>(o * dst_stride + off + i)] = p.v[static_cast<size_t>(o * chunk + i)];
        off += chunk;
    }
    return c;
}

inline DT narrow(const DT& a, int axis, int start, int len) {
    int r = a.rank();
    auto so = a.shape;
    so[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; i++) outer *= a.dim(i);
    for (int i = axis + 1; i < r; i++) inner *= a.dim(i);
    DT c = make(so);
    int64_t src_stride = static_cast<int64_t>(a.dim(axis)) * inner;
    int64_t chunk = static_cast<int64_t>(len) * inner;
    for (int64_t o = 0; o < outer; o++)
        for (int64_t i = 0; i < chunk; i++)
            c.v[static_cast<size_t>(o * chunk + i)] =
                a.v[static_cast<size_t>(o * src_stride + static_cast<int64_t>(start) * inner + i)];
    return c;
}

inline DT reshape(const DT& a, std::vector<int> shape) { return DT{std::move(shape), a.v}; }

} // namespace ref
