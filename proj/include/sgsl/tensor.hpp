#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sgsl/common.hpp"

namespace sgsl {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& s);

namespace detail {
struct TensorData {
    Shape shape;
    std::vector<float> values;
    std::vector<float> grad; // allocated lazily, same size as values
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0f);
    }
};
} // namespace detail

// Dense row-major float32 tensor. Copying a Tensor copies the handle, not
// the buffer; ops always allocate fresh outputs.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, float v);
    static Tensor scalar(float v); // shape {1}
    static Tensor from(Shape shape, std::vector<float> values);
    // i.i.d. N(0, stddev^2)
    static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    int dim(int i) const { return d_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(d_->values.size()); }

    std::span<const float> values() const { return d_->values; }
    std::span<float> values_mut() { return d_->values; }
    float item() const;

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        d_->requires_grad = v;
        return *this;
    }
    bool has_grad() const { return !d_->grad.empty(); }
    std::span<const float> grad() const { return d_->grad; }
    std::span<float> grad_mut() {
        d_->ensure_grad();
        return d_->grad;
    }
    void zero_grad() { d_->grad.clear(); }

    bool all_finite() const;

    std::shared_ptr<detail::TensorData> impl() const { return d_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<detail::TensorData> d_;

    friend Tensor make_tensor(Shape, std::vector<float>, bool);
};

Tensor make_tensor(Shape shape, std::vector<float> values, bool requires_grad);

// Reverse-mode tape. Ops push one node per primitive while a tape is
// active; node order is topological by construction. One tape per step.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Activates a tape for the current thread for the guard's lifetime.
    class Scope {
    public:
        explicit Scope(Tape& t);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* active();

    void record(std::shared_ptr<detail::TensorData> out, std::function<void(detail::TensorData&)> backprop);

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse,
    // accumulating into .grad of every recorded tensor.
    void backward(const Tensor& loss);
    // Backward from an arbitrary tensor with an externally supplied output
    // gradient (the split-learning cut uses this on the client side).
    void backward_from(const Tensor& t, std::span<const float> seed_grad);

private:
    struct Node {
        std::shared_ptr<detail::TensorData> out;
        std::function<void(detail::TensorData&)> backprop;
    };
    std::vector<Node> nodes_;
    void sweep();
};

// ---- primitive ops -------------------------------------------------------

// [m,k]x[k,n], [B,m,k]x[k,n] (shared rhs) or [B,m,k]x[B,k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);

// softmax along the last axis, stabilized by per-row max subtraction
Tensor softmax_rows(const Tensor& a);

// layer normalization over the last axis, then affine gain/bias (both [D])
Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float c);

// broadcast bias [D] over the last axis
Tensor add_bias(const Tensor& a, const Tensor& bias);
// broadcast table [N,D] over the batch axis of a [B,N,D]
Tensor add_table(const Tensor& a, const Tensor& table);

Tensor gelu(const Tensor& a);

Tensor mean_all(const Tensor& a);           // -> scalar {1}
Tensor mean_axis0(const Tensor& a);         // [B,rest] -> [rest]
Tensor l2norm_rows(const Tensor& a);        // [B,rest] -> [B], per-sample L2 norm
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor narrow(const Tensor& a, int axis, int start, int len);
Tensor reshape(const Tensor& a, Shape shape);
Tensor detach(const Tensor& a);

// mean over B of max(s,0) - s*y + log(1+exp(-|s|)); targets are constants
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Backward on the active tape; contract error if none is active or the
// loss is not scalar.
void backward(const Tensor& loss);

} // namespace sgsl
