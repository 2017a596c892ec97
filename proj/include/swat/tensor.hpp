#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "swat/error.hpp"

namespace swat {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class ComputationTape;

namespace detail {

// Shared tensor storage. Reshape produces a new node that aliases both the
// value and gradient buffers, so gradients written through a reshaped view
// land in the original parameter with no extra bookkeeping.
struct TensorNode {
    Shape shape;
    std::shared_ptr<std::vector<double>> values;
    std::shared_ptr<std::vector<double>> grad;  // null unless gradients are tracked
    bool requires_grad = false;
    ComputationTape* producer = nullptr;  // tape that recorded the op producing this node
};

}  // namespace detail

// Dense row-major tensor of doubles. Handles are cheap to copy; they share the
// underlying buffer. Values are mutable only for leaves (initialization,
// optimizer steps); anything produced by an op should be treated as frozen.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int64_t dim() const { return static_cast<int64_t>(shape().size()); }
    int64_t extent(int axis) const;
    int64_t size() const;

    // Handles share storage, so constness is shallow (as with shared_ptr):
    // a const Tensor still exposes mutable buffers.
    std::vector<double>& values() const;

    bool requires_grad() const;
    bool has_grad() const;
    std::vector<double>& grad() const;
    void zero_grad() const;

    // Scalar extraction; throws ShapeError unless the tensor has exactly one element.
    double item() const;

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

  private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape. Constructing one makes it the active tape for the current
// thread (they nest as a stack); ops record backward closures onto the active
// tape whenever an input tracks gradients. backward() replays the closures in
// reverse and may run once per tape; a second call without clear() is a
// contract violation.
class ComputationTape {
  public:
    ComputationTape();
    ~ComputationTape();
    ComputationTape(const ComputationTape&) = delete;
    ComputationTape& operator=(const ComputationTape&) = delete;

    void backward(const Tensor& loss);
    void clear();
    std::size_t size() const { return entries_.size(); }

    static ComputationTape* current();

    // Registers one executed op. The closure reads the output gradient and
    // accumulates into the inputs' gradient buffers. Marks the output as
    // gradient-tracking when recording happens.
    static void record(const Tensor& output, const std::vector<Tensor>& inputs,
                       std::function<void()> backward_fn);

  private:
    std::vector<std::function<void()>> entries_;
    bool consumed_ = false;
    ComputationTape* prev_ = nullptr;
};

// ---- view ops ----
Tensor reshape(const Tensor& x, Shape new_shape);          // metadata only, aliases storage
Tensor permute(const Tensor& x, const std::vector<int>& axes);  // materializes
Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t length);

// ---- elementwise / reductions ----
Tensor add(const Tensor& a, const Tensor& b);  // b may be a trailing-shape broadcast of a
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor mean_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

// ---- contractions ----
// a: [*batch, m, k] times b: [*batch, k, n]; a 2-D broadcasts over b's batch
// dims and vice versa.
Tensor matmul(const Tensor& a, const Tensor& b);

// x: (B, Cin, H, W), w: (Cout, Cin/groups, kh, kw), bias: (Cout) or undefined.
// Cross-correlation with zero padding, floor-division output extents.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding,
              int groups = 1);

// ---- activations / norms / loss ----
Tensor gelu(const Tensor& x);  // tanh approximation
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, int axis);
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels);

}  // namespace swat
