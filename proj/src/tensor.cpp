#include "sgsl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace sgsl {

int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeError("negative dimension");
        n *= d;
    }
    return n;
}

static std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); i++) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

Tensor make_tensor(Shape shape, std::vector<float> values, bool requires_grad) {
    if (numel_of(shape) != static_cast<int64_t>(values.size()))
        throw ShapeError("value count does not match shape " + shape_str(shape));
    auto d = std::make_shared<detail::TensorData>();
    d->shape = std::move(shape);
    d->values = std::move(values);
    d->requires_grad = requires_grad;
    return Tensor(d);
}

Tensor Tensor::zeros(Shape shape) {
    auto n = numel_of(shape);
    return make_tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), 0.0f), false);
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0f); }

Tensor Tensor::full(Shape shape, float v) {
    auto n = numel_of(shape);
    return make_tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), v), false);
}

Tensor Tensor::scalar(float v) { return make_tensor({1}, {v}, false); }

Tensor Tensor::from(Shape shape, std::vector<float> values) {
    return make_tensor(std::move(shape), std::move(values), false);
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev) {
    auto n = numel_of(shape);
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.normal() * stddev);
    return make_tensor(std::move(shape), std::move(v), false);
}

float Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor");
    return d_->values[0];
}

bool Tensor::all_finite() const {
    for (float v : d_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---- tape ------------------------------------------------------------

static thread_local Tape* g_active_tape = nullptr;

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<detail::TensorData> out,
                  std::function<void(detail::TensorData&)> backprop) {
    nodes_.push_back(Node{std::move(out), std::move(backprop)});
}

void Tape::sweep() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->out->grad.empty()) continue; // nothing flowed into this node
        it->backprop(*it->out);
    }
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ContractError("backward() needs a scalar loss");
    if (nodes_.empty()) throw ContractError("backward() on an empty tape");
    float seed = 1.0f;
    backward_from(loss, std::span<const float>(&seed, 1));
}

void Tape::backward_from(const Tensor& t, std::span<const float> seed_grad) {
    if (static_cast<int64_t>(seed_grad.size()) != t.numel())
        throw ShapeError("seed gradient size mismatch");
    auto d = t.impl();
    d->ensure_grad();
    for (size_t i = 0; i < seed_grad.size(); i++) d->grad[i] += seed_grad[i];
    sweep();
}

void backward(const Tensor& loss) {
    Tape* t = Tape::active();
    if (!t) throw ContractError("backward() without an active tape");
    t->backward(loss);
}

// ---- op helpers ------------------------------------------------------

namespace {

using detail::TensorData;
using DPtr = std::shared_ptr<TensorData>;

bool taping(std::initializer_list<const Tensor*> ins) {
    if (!Tape::active()) return false;
    for (const Tensor* t : ins)
        if ((*t).requires_grad()) return true;
    return false;
}

Tensor make_out(Shape shape, std::vector<float> values, bool requires_grad) {
    return make_tensor(std::move(shape), std::move(values), requires_grad);
}

bool any_rg(std::initializer_list<const Tensor*> ins) {
    for (const Tensor* t : ins)
        if ((*t).requires_grad()) return true;
    return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

} // namespace

// ---- matmul ----------------------------------------------------------

namespace {

// C[m,n] += A[m,k] * B[k,n]; deterministic: each C element accumulates
// over k in ascending order
void mm_acc(const float* A, const float* B, float* C, int m, int k, int n) {
    for (int i = 0; i < m; i++) {
        const float* a = A + static_cast<size_t>(i) * k;
        float* c = C + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; p++) {
            float av = a[p];
            if (av == 0.0f) continue;
            const float* b = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; j++) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T where Bt is [n,k]
void mm_acc_nt(const float* A, const float* Bt, float* C, int m, int k, int n) {
    for (int i = 0; i < m; i++) {
        const float* a = A + static_cast<size_t>(i) * k;
        float* c = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; j++) {
            const float* b = Bt + static_cast<size_t>(j) * k;
            float acc = 0.0f;
            for (int p = 0; p < k; p++) acc += a[p] * b[p];
            c[j] += acc;
        }
    }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n]
void mm_acc_tn(const float* A, const float* B, float* C, int m, int k, int n) {
    for (int i = 0; i < m; i++) {
        const float* a = A + static_cast<size_t>(i) * k;
        const float* b = B + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; p++) {
            float av = a[p];
            if (av == 0.0f) continue;
            float* c = C + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; j++) c[j] += av * b[j];
        }
    }
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    int ra = a.rank(), rb = b.rank();

    int batch;
    int m, k, n;
    bool b_shared; // rhs shared across batch
    if (ra == 2 && rb == 2) {
        batch = 1;
        m = sa[0];
        k = sa[1];
        if (sb[0] != k) throw ShapeError("matmul: inner dimensions disagree");
        n = sb[1];
        b_shared = true;
    } else if (ra == 3 && rb == 2) {
        batch = sa[0];
        m = sa[1];
        k = sa[2];
        if (sb[0] != k) throw ShapeError("matmul: inner dimensions disagree");
        n = sb[1];
        b_shared = true;
    } else if (ra == 3 && rb == 3) {
        if (sa[0] != sb[0]) throw ShapeError("matmul: batch dimensions disagree");
        batch = sa[0];
        m = sa[1];
        k = sa[2];
        if (sb[1] != k) throw ShapeError("matmul: inner dimensions disagree");
        n = sb[2];
        b_shared = false;
    } else {
        throw ShapeError("matmul: unsupported ranks " + shape_str(sa) + " x " + shape_str(sb));
    }

    Shape so = (ra == 2 && rb == 2) ? Shape{m, n} : Shape{batch, m, n};
    std::vector<float> out(static_cast<size_t>(batch) * m * n, 0.0f);
    const float* A = a.values().data();
    const float* B = b.values().data();
    for (int bi = 0; bi < batch; bi++) {
        mm_acc(A + static_cast<size_t>(bi) * m * k, b_shared ? B : B + static_cast<size_t>(bi) * k * n,
               out.data() + static_cast<size_t>(bi) * m * n, m, k, n);
    }

    Tensor c = make_out(std::move(so), std::move(out), any_rg({&a, &b}));
    if (taping({&a, &b})) {
        auto da = a.impl();
        auto db = b.impl();
        bool need_a = a.requires_grad(), need_b = b.requires_grad();
        Tape::active()->record(c.impl(), [da, db, batch, m, k, n, b_shared, need_a,
                                          need_b](TensorData& outd) {
            const float* G = outd.grad.data();
            if (need_a) {
                da->ensure_grad();
                for (int bi = 0; bi < batch; bi++) {
                    // dA = G * B^T
                    mm_acc_nt(G + static_cast<size_t>(bi) * m * n,
                              b_shared ? db->values.data()
                                       : db->values.data() + static_cast<size_t>(bi) * k * n,
                              da->grad.data() + static_cast<size_t>(bi) * m * k, m, n, k);
                }
            }
            if (need_b) {
                db->ensure_grad();
                for (int bi = 0; bi < batch; bi++) {
                    // dB = A^T * G (accumulates across batch when shared)
                    mm_acc_tn(da->values.data() + static_cast<size_t>(bi) * m * k,
                              G + static_cast<size_t>(bi) * m * n,
                              b_shared ? db->grad.data()
                                       : db->grad.data() + static_cast<size_t>(bi) * k * n,
                              m, k, n);
                }
            }
        });
    }
    return c;
}

Tensor transpose_last2(const Tensor& a) {
    if (a.rank() < 2) throw ShapeError("transpose_last2: rank < 2");
    Shape so = a.shape();
    int r = a.rank();
    std::swap(so[static_cast<size_t>(r - 2)], so[static_cast<size_t>(r - 1)]);
    int rows = a.shape()[static_cast<size_t>(r - 2)];
    int cols = a.shape()[static_cast<size_t>(r - 1)];
    int64_t outer = a.numel() / (static_cast<int64_t>(rows) * cols);

    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* src = a.values().data();
    for (int64_t o = 0; o < outer; o++) {
        const float* s = src + o * rows * cols;
        float* d = out.data() + o * rows * cols;
        for (int i = 0; i < rows; i++)
            for (int j = 0; j < cols; j++) d[static_cast<size_t>(j) * rows + i] = s[static_cast<size_t>(i) * cols + j];
    }
    Tensor c = make_out(std::move(so), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da, rows, cols, outer](TensorData& outd) {
            da->ensure_grad();
            const float* G = outd.grad.data();
            for (int64_t o = 0; o < outer; o++) {
                const float* g = G + o * rows * cols;
                float* d = da->grad.data() + o * rows * cols;
                for (int j = 0; j < cols; j++)
                    for (int i = 0; i < rows; i++)
                        d[static_cast<size_t>(i) * cols + j] += g[static_cast<size_t>(j) * rows + i];
            }
        });
    }
    return c;
}

// ---- softmax / layernorm ----------------------------------------------

Tensor softmax_rows(const Tensor& a) {
    if (a.rank() < 1) throw ShapeError("softmax_rows: rank 0");
    int d = a.shape().back();
    int64_t rows = a.numel() / d;
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* src = a.values().data();
    for (int64_t r = 0; r < rows; r++) {
        const float* x = src + r * d;
        float* y = out.data() + r * d;
        float mx = x[0];
        for (int i = 1; i < d; i++) mx = std::max(mx, x[i]);
        float sum = 0.0f;
        for (int i = 0; i < d; i++) {
            y[i] = std::exp(x[i] - mx);
            sum += y[i];
        }
        float inv = 1.0f / sum;
        for (int i = 0; i < d; i++) y[i] *= inv;
    }
    Tensor c = make_out(a.shape(), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da, d, rows](TensorData& outd) {
            da->ensure_grad();
            const float* Y = outd.values.data();
            const float* G = outd.grad.data();
            for (int64_t r = 0; r < rows; r++) {
                const float* y = Y + r * d;
                const float* g = G + r * d;
                float* dx = da->grad.data() + r * d;
                float dot = 0.0f;
                for (int i = 0; i < d; i++) dot += y[i] * g[i];
                for (int i = 0; i < d; i++) dx[i] += y[i] * (g[i] - dot);
            }
        });
    }
    return c;
}

Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias, float eps) {
    if (eps <= 0.0f) throw ContractError("layernorm: eps must be > 0");
    int d = a.shape().back();
    if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d)
        throw ShapeError("layernorm: gain/bias must be [D]");
    int64_t rows = a.numel() / d;

    std::vector<float> out(static_cast<size_t>(a.numel()));
    std::vector<float> xhat(static_cast<size_t>(a.numel()));
    std::vector<float> inv_sigma(static_cast<size_t>(rows));
    const float* X = a.values().data();
    const float* g = gain.values().data();
    const float* b = bias.values().data();
    for (int64_t r = 0; r < rows; r++) {
        const float* x = X + r * d;
        float mean = 0.0f;
        for (int i = 0; i < d; i++) mean += x[i];
        mean /= static_cast<float>(d);
        float var = 0.0f;
        for (int i = 0; i < d; i++) {
            float t = x[i] - mean;
            var += t * t;
        }
        var /= static_cast<float>(d);
        float inv = 1.0f / std::sqrt(var + eps);
        inv_sigma[static_cast<size_t>(r)] = inv;
        float* xh = xhat.data() + r * d;
        float* y = out.data() + r * d;
        for (int i = 0; i < d; i++) {
            xh[i] = (x[i] - mean) * inv;
            y[i] = g[i] * xh[i] + b[i];
        }
    }
    Tensor c = make_out(a.shape(), std::move(out), any_rg({&a, &gain, &bias}));
    if (taping({&a, &gain, &bias})) {
        auto da = a.impl();
        auto dg = gain.impl();
        auto db = bias.impl();
        bool need_a = a.requires_grad(), need_g = gain.requires_grad(), need_b = bias.requires_grad();
        auto xh_keep = std::make_shared<std::vector<float>>(std::move(xhat));
        auto is_keep = std::make_shared<std::vector<float>>(std::move(inv_sigma));
        Tape::active()->record(c.impl(), [da, dg, db, xh_keep, is_keep, d, rows, need_a, need_g,
                                          need_b](TensorData& outd) {
            const float* G = outd.grad.data();
            const float* XH = xh_keep->data();
            if (need_g) dg->ensure_grad();
            if (need_b) db->ensure_grad();
            if (need_a) da->ensure_grad();
            for (int64_t r = 0; r < rows; r++) {
                const float* gr = G + r * d;
                const float* xh = XH + r * d;
                if (need_g)
                    for (int i = 0; i < d; i++) dg->grad[static_cast<size_t>(i)] += gr[i] * xh[i];
                if (need_b)
                    for (int i = 0; i < d; i++) db->grad[static_cast<size_t>(i)] += gr[i];
                if (need_a) {
                    // dxhat = g .* dy ; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat.*xhat)) * inv_sigma
                    float m1 = 0.0f, m2 = 0.0f;
                    const float* gv = dg->values.data();
                    for (int i = 0; i < d; i++) {
                        float dxh = gv[i] * gr[i];
                        m1 += dxh;
                        m2 += dxh * xh[i];
                    }
                    m1 /= static_cast<float>(d);
                    m2 /= static_cast<float>(d);
                    float inv = (*is_keep)[static_cast<size_t>(r)];
                    float* dx = da->grad.data() + r * d;
                    for (int i = 0; i < d; i++) {
                        float dxh = gv[i] * gr[i];
                        dx[i] += (dxh - m1 - xh[i] * m2) * inv;
                    }
                }
            }
        });
    }
    return c;
}

// ---- elementwise -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    const float* y = b.values().data();
    for (size_t i = 0; i < out.size(); i++) out[i] = x[i] + y[i];
    Tensor c = make_out(a.shape(), std::move(out), any_rg({&a, &b}));
    if (taping({&a, &b})) {
        auto da = a.impl();
        auto db = b.impl();
        bool na = a.requires_grad(), nb = b.requires_grad();
        Tape::active()->record(c.impl(), [da, db, na, nb](TensorData& outd) {
            const float* G = outd.grad.data();
            if (na) {
                da->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += G[i];
            }
            if (nb) {
                db->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) db->grad[i] += G[i];
            }
        });
    }
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    const float* y = b.values().data();
    for (size_t i = 0; i < out.size(); i++) out[i] = x[i] - y[i];
    Tensor c = make_out(a.shape(), std::move(out), any_rg({&a, &b}));
    if (taping({&a, &b})) {
        auto da = a.impl();
        auto db = b.impl();
        bool na = a.requires_grad(), nb = b.requires_grad();
        Tape::active()->record(c.impl(), [da, db, na, nb](TensorData& outd) {
            const float* G = outd.grad.data();
            if (na) {
                da->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += G[i];
            }
            if (nb) {
                db->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) db->grad[i] -= G[i];
            }
        });
    }
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    const float* y = b.values().data();
    for (size_t i = 0; i < out.size(); i++) out[i] = x[i] * y[i];
    Tensor c = make_out(a.shape(), std::move(out), any_rg({&a, &b}));
    if (taping({&a, &b})) {
        auto da = a.impl();
        auto db = b.impl();
        bool na = a.requires_grad(), nb = b.requires_grad();
        Tape::active()->record(c.impl(), [da, db, na, nb](TensorData& outd) {
            const float* G = outd.grad.data();
            if (na) {
                da->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += G[i] * db->values[i];
            }
            if (nb) {
                db->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) db->grad[i] += G[i] * da->values[i];
            }
        });
    }
    return c;
}

Tensor scale(const Tensor& a, float cst) {
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    for (size_t i = 0; i < out.size(); i++) out[i] = x[i] * cst;
    Tensor c = make_out(a.shape(), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da, cst](TensorData& outd) {
            da->ensure_grad();
            const float* G = outd.grad.data();
            for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += G[i] * cst;
        });
    }
    return c;
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    int d = a.shape().back();
    if (bias.rank() != 1 || bias.dim(0) != d) throw ShapeError("add_bias: bias must be [D]");
    int64_t rows = a.numel() / d;
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    const float* b = bias.values().data();
    for (int64_t r = 0; r < rows; r++)
        for (int i = 0; i < d; i++) out[static_cast<size_t>(r * d + i)] = x[r * d + i] + b[i];
    Tensor c = make_out(a.shape(), std::move(out), any_rg({&a, &bias}));
    if (taping({&a, &bias})) {
        auto da = a.impl();
        auto db = bias.impl();
        bool na = a.requires_grad(), nb = bias.requires_grad();
        Tape::active()->record(c.impl(), [da, db, na, nb, d, rows](TensorData& outd) {
            const float* G = outd.grad.data();
            if (na) {
                da->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += G[i];
            }
            if (nb) {
                db->ensure_grad();
                for (int64_t r = 0; r < rows; r++)
                    for (int i = 0; i < d; i++) db->grad[static_cast<size_t>(i)] += G[r * d + i];
            }
        });
    }
    return c;
}

Tensor add_table(const Tensor& a, const Tensor& table) {
    if (a.rank() != 3 || table.rank() != 2 || a.dim(1) != table.dim(0) || a.dim(2) != table.dim(1))
        throw ShapeError("add_table: need [B,N,D] + [N,D]");
    int B = a.dim(0);
    int64_t nd = static_cast<int64_t>(a.dim(1)) * a.dim(2);
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    const float* t = table.values().data();
    for (int bi = 0; bi < B; bi++)
        for (int64_t i = 0; i < nd; i++) out[static_cast<size_t>(bi * nd + i)] = x[bi * nd + i] + t[i];
    Tensor c = make_out(a.shape(), std::move(out), any_rg({&a, &table}));
    if (taping({&a, &table})) {
        auto da = a.impl();
        auto dt = table.impl();
        bool na = a.requires_grad(), nt = table.requires_grad();
        Tape::active()->record(c.impl(), [da, dt, na, nt, B, nd](TensorData& outd) {
            const float* G = outd.grad.data();
            if (na) {
                da->ensure_grad();
                for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += G[i];
            }
            if (nt) {
                dt->ensure_grad();
                for (int bi = 0; bi < B; bi++)
                    for (int64_t i = 0; i < nd; i++) dt->grad[static_cast<size_t>(i)] += G[bi * nd + i];
            }
        });
    }
    return c;
}

// ---- GELU --------------------------------------------------------------

static inline float gelu_val(float x) {
    return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
}

static inline float gelu_grad(float x) {
    const float kInvSqrt2Pi = 0.39894228040143268f;
    float cdf = 0.5f * (1.0f + std::erf(x * 0.70710678118654752f));
    float pdf = kInvSqrt2Pi * std::exp(-0.5f * x * x);
    return cdf + x * pdf;
}

Tensor gelu(const Tensor& a) {
    std::vector<float> out(static_cast<size_t>(a.numel()));
    const float* x = a.values().data();
    for (size_t i = 0; i < out.size(); i++) out[i] = gelu_val(x[i]);
    Tensor c = make_out(a.shape(), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da](TensorData& outd) {
            da->ensure_grad();
            const float* G = outd.grad.data();
            for (size_t i = 0; i < outd.grad.size(); i++)
                da->grad[i] += G[i] * gelu_grad(da->values[i]);
        });
    }
    return c;
}

// ---- reductions ----------------------------------------------------------

Tensor mean_all(const Tensor& a) {
    if (a.numel() == 0) throw ContractError("mean_all: empty tensor");
    float sum = 0.0f;
    for (float v : a.values()) sum += v;
    float m = sum / static_cast<float>(a.numel());
    Tensor c = make_out({1}, {m}, a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        float inv = 1.0f / static_cast<float>(a.numel());
        Tape::active()->record(c.impl(), [da, inv](TensorData& outd) {
            da->ensure_grad();
            float g = outd.grad[0] * inv;
            for (auto& v : da->grad) v += g;
        });
    }
    return c;
}

Tensor mean_axis0(const Tensor& a) {
    if (a.rank() < 2) throw ShapeError("mean_axis0: rank < 2");
    int B = a.dim(0);
    int64_t rest = a.numel() / B;
    Shape so(a.shape().begin() + 1, a.shape().end());
    std::vector<float> out(static_cast<size_t>(rest), 0.0f);
    const float* x = a.values().data();
    for (int bi = 0; bi < B; bi++)
        for (int64_t i = 0; i < rest; i++) out[static_cast<size_t>(i)] += x[bi * rest + i];
    float inv = 1.0f / static_cast<float>(B);
    for (auto& v : out) v *= inv;
    Tensor c = make_out(std::move(so), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da, B, rest, inv](TensorData& outd) {
            da->ensure_grad();
            const float* G = outd.grad.data();
            for (int bi = 0; bi < B; bi++)
                for (int64_t i = 0; i < rest; i++) da->grad[static_cast<size_t>(bi * rest + i)] += G[i] * inv;
        });
    }
    return c;
}

Tensor l2norm_rows(const Tensor& a) {
    if (a.rank() < 1) throw ShapeError("l2norm_rows: rank 0");
    int B = a.dim(0);
    int64_t rest = a.numel() / B;
    std::vector<float> out(static_cast<size_t>(B));
    const float* x = a.values().data();
    for (int bi = 0; bi < B; bi++) {
        float s = 0.0f;
        for (int64_t i = 0; i < rest; i++) {
            float v = x[bi * rest + i];
            s += v * v;
        }
        out[static_cast<size_t>(bi)] = std::sqrt(s);
    }
    Tensor c = make_out({B}, std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da, B, rest](TensorData& outd) {
            da->ensure_grad();
            for (int bi = 0; bi < B; bi++) {
                float n = outd.values[static_cast<size_t>(bi)];
                if (n <= 0.0f) continue; // subgradient 0 at the kink
                float g = outd.grad[static_cast<size_t>(bi)] / n;
                for (int64_t i = 0; i < rest; i++)
                    da->grad[static_cast<size_t>(bi * rest + i)] += g * da->values[static_cast<size_t>(bi * rest + i)];
            }
        });
    }
    return c;
}

// ---- shape ops ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    int r = parts[0].rank();
    if (axis < 0 || axis >= r) throw ShapeError("concat: bad axis");
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != r) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < r; i++)
            if (i != axis && p.shape()[static_cast<size_t>(i)] != s0[static_cast<size_t>(i)])
                throw ShapeError("concat: non-axis dimension mismatch");
        total += p.dim(axis);
    }
    Shape so = s0;
    so[static_cast<size_t>(axis)] = total;

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; i++) outer *= s0[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; i++) inner *= s0[static_cast<size_t>(i)];

    std::vector<float> out(static_cast<size_t>(numel_of(so)));
    int64_t dst_stride = static_cast<int64_t>(total) * inner;
    int64_t off = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        int64_t chunk = static_cast<int64_t>(p.dim(axis)) * inner;
        const float* src = p.values().data();
        for (int64_t o = 0; o < outer; o++)
            std::memcpy(out.data() + o * dst_stride + off, src + o * chunk,
                        static_cast<size_t>(chunk) * sizeof(float));
        off += chunk;
        rg = rg || p.requires_grad();
    }

    Tensor c = make_out(std::move(so), std::move(out), rg);
    if (Tape::active() && rg) {
        struct Piece {
            DPtr d;
            int64_t chunk;
            bool need;
        };
        auto pieces = std::make_shared<std::vector<Piece>>();
        for (const Tensor& p : parts)
            pieces->push_back({p.impl(), static_cast<int64_t>(p.dim(axis)) * inner, p.requires_grad()});
        Tape::active()->record(c.impl(), [pieces, outer, dst_stride](TensorData& outd) {
            const float* G = outd.grad.data();
            int64_t off = 0;
            for (auto& pc : *pieces) {
                if (pc.need) {
                    pc.d->ensure_grad();
                    for (int64_t o = 0; o < outer; o++) {
                        const float* g = G + o * dst_stride + off;
                        float* d = pc.d->grad.data() + o * pc.chunk;
                        for (int64_t i = 0; i < pc.chunk; i++) d[i] += g[i];
                    }
                }
                off += pc.chunk;
            }
        });
    }
    return c;
}

Tensor narrow(const Tensor& a, int axis, int start, int len) {
    int r = a.rank();
    if (axis < 0 || axis >= r) throw ShapeError("narrow: bad axis");
    int extent = a.dim(axis);
    if (start < 0 || len < 0 || start + len > extent) throw ShapeError("narrow: range out of bounds");

    Shape so = a.shape();
    so[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; i++) outer *= a.dim(i);
    for (int i = axis + 1; i < r; i++) inner *= a.dim(i);

    std::vector<float> out(static_cast<size_t>(numel_of(so)));
    int64_t src_stride = static_cast<int64_t>(extent) * inner;
    int64_t chunk = static_cast<int64_t>(len) * inner;
    const float* src = a.values().data();
    for (int64_t o = 0; o < outer; o++)
        std::memcpy(out.data() + o * chunk, src + o * src_stride + static_cast<int64_t>(start) * inner,
                    static_cast<size_t>(chunk) * sizeof(float));

    Tensor c = make_out(std::move(so), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        int64_t src_off = static_cast<int64_t>(start) * inner;
        Tape::active()->record(c.impl(), [da, outer, chunk, src_stride, src_off](TensorData& outd) {
            da->ensure_grad();
            const float* G = outd.grad.data();
            for (int64_t o = 0; o < outer; o++) {
                float* d = da->grad.data() + o * src_stride + src_off;
                const float* g = G + o * chunk;
                for (int64_t i = 0; i < chunk; i++) d[i] += g[i];
            }
        });
    }
    return c;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel()) throw ShapeError("reshape: element count mismatch");
    std::vector<float> out(a.values().begin(), a.values().end());
    Tensor c = make_out(std::move(shape), std::move(out), a.requires_grad());
    if (taping({&a})) {
        auto da = a.impl();
        Tape::active()->record(c.impl(), [da](TensorData& outd) {
            da->ensure_grad();
            for (size_t i = 0; i < outd.grad.size(); i++) da->grad[i] += outd.grad[i];
        });
    }
    return c;
}

Tensor detach(const Tensor& a) {
    std::vector<float> out(a.values().begin(), a.values().end());
    return make_out(a.shape(), std::move(out), false);
}

// ---- losses ----------------------------------------------------------------

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    if (logits.numel() != targets.numel()) throw ShapeError("bce_with_logits: size mismatch");
    int64_t n = logits.numel();
    const float* s = logits.values().data();
    const float* y = targets.values().data();
    float loss = 0.0f;
    for (int64_t i = 0; i < n; i++) {
        float v = s[i];
        loss += std::max(v, 0.0f) - v * y[i] + std::log1p(std::exp(-std::fabs(v)));
    }
    loss /= static_cast<float>(n);
    Tensor c = make_out({1}, {loss}, logits.requires_grad());
    if (taping({&logits})) {
        auto dl = logits.impl();
        auto ty = targets.impl();
        Tape::active()->record(c.impl(), [dl, ty, n](TensorData& outd) {
            dl->ensure_grad();
            float g = outd.grad[0] / static_cast<float>(n);
            for (int64_t i = 0; i < n; i++) {
                float sig = 1.0f / (1.0f + std::exp(-dl->values[static_cast<size_t>(i)]));
                dl->grad[static_cast<size_t>(i)] += g * (sig - ty->values[static_cast<size_t>(i)]);
            }
        });
    }
    return c;
}

} // namespace sgsl
