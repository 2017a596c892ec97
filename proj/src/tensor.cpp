#include "swat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal.hpp"

namespace swat {

using internal::make_result;
using internal::row_major_strides;

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ')';
    return os.str();
}

static void check_shape_valid(const Shape& s) {
    for (int64_t e : s) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(s));
    }
}

// ---- Tensor ----

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape_valid(shape);
    auto node = std::make_shared<detail::TensorNode>();
    int64_t n = shape_numel(shape);
    node->shape = std::move(shape);
    node->values = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), value);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), 0.0);
    return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    check_shape_valid(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not fill shape " +
                         shape_str(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::make_shared<std::vector<double>>(std::move(data));
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad = std::make_shared<std::vector<double>>(node->values->size(), 0.0);
    return wrap(std::move(node));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return node_->shape;
}

int64_t Tensor::extent(int axis) const {
    const Shape& s = shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    }
    return s[static_cast<std::size_t>(axis)];
}

int64_t Tensor::size() const { return shape_numel(shape()); }

std::vector<double>& Tensor::values() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return *node_->values;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad != nullptr; }

std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient buffer");
    return *node_->grad;
}

void Tensor::zero_grad() const {
    if (has_grad()) std::fill(node_->grad->begin(), node_->grad->end(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
    return (*node_->values)[0];
}

// ---- ComputationTape ----

namespace {
thread_local ComputationTape* g_active_tape = nullptr;
}

ComputationTape::ComputationTape() : prev_(g_active_tape) { g_active_tape = this; }

ComputationTape::~ComputationTape() { g_active_tape = prev_; }

ComputationTape* ComputationTape::current() { return g_active_tape; }

void ComputationTape::record(const Tensor& output, const std::vector<Tensor>& inputs,
                             std::function<void()> backward_fn) {
    ComputationTape* tape = current();
    if (!tape) return;
    bool any = false;
    for (const Tensor& in : inputs) {
        if (in.requires_grad()) {
            any = true;
            break;
        }
    }
    if (!any) return;
    detail::TensorNode* out = output.node();
    out->requires_grad = true;
    if (!out->grad) out->grad = std::make_shared<std::vector<double>>(out->values->size(), 0.0);
    out->producer = tape;
    tape->entries_.push_back(std::move(backward_fn));
}

void ComputationTape::backward(const Tensor& loss) {
    if (consumed_) {
        throw ContractError("backward() called twice on the same tape; call clear() to reuse it");
    }
    if (loss.size() != 1) {
        throw ContractError("backward() expects a scalar loss, got " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad() || loss.node()->producer != this) {
        throw ContractError("loss tensor was not produced by an op recorded on this tape");
    }
    consumed_ = true;
    (*loss.node()->grad)[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void ComputationTape::clear() {
    entries_.clear();
    consumed_ = false;
}

// ---- shared op helpers ----

namespace {

// Copies (or accumulates) src permuted by `axes` into dst, where dst's shape
// is src's shape with axes applied: dst[i0,..] = src[i_axes[0],..]. Used by
// both the forward permute and its backward (with the inverse permutation).
void permute_copy(const Shape& src_shape, const double* src, const std::vector<int>& axes,
                  double* dst, bool accumulate) {
    const int nd = static_cast<int>(src_shape.size());
    Shape dst_shape(nd);
    for (int d = 0; d < nd; ++d) dst_shape[d] = src_shape[static_cast<std::size_t>(axes[d])];
    std::vector<int64_t> src_strides = row_major_strides(src_shape);
    // Stride in src for a unit step along dst axis d.
    std::vector<int64_t> step(nd);
    for (int d = 0; d < nd; ++d) step[d] = src_strides[static_cast<std::size_t>(axes[d])];

    const int64_t total = shape_numel(dst_shape);
    std::vector<int64_t> idx(nd, 0);
    int64_t src_off = 0;
    for (int64_t flat = 0; flat < total; ++flat) {
        if (accumulate) {
            dst[flat] += src[src_off];
        } else {
            dst[flat] = src[src_off];
        }
        // advance mixed-radix counter over dst coordinates
        for (int d = nd - 1; d >= 0; --d) {
            src_off += step[d];
            if (++idx[d] < dst_shape[d]) break;
            src_off -= step[d] * dst_shape[d];
            idx[d] = 0;
        }
    }
}

}  // namespace

// ---- view ops ----

Tensor reshape(const Tensor& x, Shape new_shape) {
    check_shape_valid(new_shape);
    if (shape_numel(new_shape) != x.size()) {
        throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                         ": element counts differ");
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(new_shape);
    node->values = x.node()->values;
    node->grad = x.node()->grad;
    node->requires_grad = x.node()->requires_grad;
    node->producer = x.node()->producer;
    return Tensor::wrap(std::move(node));
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    const Shape& in_shape = x.shape();
    const int nd = static_cast<int>(in_shape.size());
    if (static_cast<int>(axes.size()) != nd) {
        throw ShapeError("permute axes count " + std::to_string(axes.size()) +
                         " does not match rank of " + shape_str(in_shape));
    }
    std::vector<bool> seen(static_cast<std::size_t>(nd), false);
    for (int a : axes) {
        if (a < 0 || a >= nd || seen[static_cast<std::size_t>(a)]) {
            throw ShapeError("permute axes are not a permutation of 0.." + std::to_string(nd - 1));
        }
        seen[static_cast<std::size_t>(a)] = true;
    }

    Shape out_shape(static_cast<std::size_t>(nd));
    for (int d = 0; d < nd; ++d) out_shape[static_cast<std::size_t>(d)] = in_shape[static_cast<std::size_t>(axes[d])];
    Tensor out = make_result(out_shape);
    permute_copy(in_shape, x.values().data(), axes, out.values().data(), false);

    std::vector<int> inverse(static_cast<std::size_t>(nd));
    for (int d = 0; d < nd; ++d) inverse[static_cast<std::size_t>(axes[d])] = d;
    ComputationTape::record(out, {x}, [x, out, inverse]() {
        if (!x.has_grad()) return;
        permute_copy(out.shape(), out.grad().data(), inverse, x.grad().data(), true);
    });
    return out;
}

Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t length) {
    const Shape& s = x.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw ShapeError("narrow axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    }
    const int64_t extent = s[static_cast<std::size_t>(axis)];
    if (start < 0 || length <= 0 || start + length > extent) {
        throw ShapeError("narrow range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") exceeds extent " + std::to_string(extent));
    }
    Shape out_shape = s;
    out_shape[static_cast<std::size_t>(axis)] = length;

    std::vector<int64_t> strides = row_major_strides(s);
    const int64_t inner = strides[static_cast<std::size_t>(axis)];
    int64_t outer = 1;
    for (int d = 0; d < axis; ++d) outer *= s[static_cast<std::size_t>(d)];

    Tensor out = make_result(out_shape);
    {
        const double* src = x.values().data();
        double* dst = out.values().data();
        for (int64_t o = 0; o < outer; ++o) {
            const double* block = src + o * extent * inner + start * inner;
            std::copy(block, block + length * inner, dst);
            dst += length * inner;
        }
    }
    ComputationTape::record(out, {x}, [x, out, axis, start, length, inner, outer, extent]() {
        if (!x.has_grad()) return;
        const double* g = out.grad().data();
        double* dst = x.grad().data();
        for (int64_t o = 0; o < outer; ++o) {
            const double* gblock = g + o * length * inner;
            double* block = dst + o * extent * inner + start * inner;
            for (int64_t i = 0; i < length * inner; ++i) block[i] += gblock[i];
        }
    });
    return out;
}

// ---- elementwise / reductions ----

namespace {

// b must match a trailing slice of a's shape (suffix broadcast), or equal it.
void check_suffix_broadcast(const Shape& a, const Shape& b) {
    if (b.size() > a.size()) {
        throw ShapeError("shape " + shape_str(b) + " does not broadcast onto " + shape_str(a));
    }
    std::size_t off = a.size() - b.size();
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (a[off + i] != b[i]) {
            throw ShapeError("shape " + shape_str(b) + " does not broadcast onto " + shape_str(a));
        }
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_suffix_broadcast(a.shape(), b.shape());
    const int64_t n = a.size();
    const int64_t bn = b.size();
    Tensor out = make_result(a.shape());
    {
        const double* pa = a.values().data();
        const double* pb = b.values().data();
        double* po = out.values().data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i % bn];
    }
    ComputationTape::record(out, {a, b}, [a, b, out, n, bn]() {
        const double* g = out.grad().data();
        if (a.has_grad()) {
            double* ga = a.grad().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b.has_grad()) {
            double* gb = b.grad().data();
            for (int64_t i = 0; i < n; ++i) gb[i % bn] += g[i];
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_suffix_broadcast(a.shape(), b.shape());
    const int64_t n = a.size();
    const int64_t bn = b.size();
    Tensor out = make_result(a.shape());
    {
        const double* pa = a.values().data();
        const double* pb = b.values().data();
        double* po = out.values().data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i % bn];
    }
    ComputationTape::record(out, {a, b}, [a, b, out, n, bn]() {
        const double* g = out.grad().data();
        if (a.has_grad()) {
            double* ga = a.grad().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b.has_grad()) {
            double* gb = b.grad().data();
            for (int64_t i = 0; i < n; ++i) gb[i % bn] -= g[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise product needs matching shapes, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const int64_t n = a.size();
    Tensor out = make_result(a.shape());
    {
        const double* pa = a.values().data();
        const double* pb = b.values().data();
        double* po = out.values().data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    }
    ComputationTape::record(out, {a, b}, [a, b, out, n]() {
        const double* g = out.grad().data();
        if (a.has_grad()) {
            double* ga = a.grad().data();
            const double* pb = b.values().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
        }
        if (b.has_grad()) {
            double* gb = b.grad().data();
            const double* pa = a.values().data();
            for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
        }
    });
    return out;
}

Tensor scale(const Tensor& x, double s) {
    const int64_t n = x.size();
    Tensor out = make_result(x.shape());
    {
        const double* px = x.values().data();
        double* po = out.values().data();
        for (int64_t i = 0; i < n; ++i) po[i] = px[i] * s;
    }
    ComputationTape::record(out, {x}, [x, out, s, n]() {
        if (!x.has_grad()) return;
        const double* g = out.grad().data();
        double* gx = x.grad().data();
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * s;
    });
    return out;
}

Tensor mean_axis(const Tensor& x, int axis) {
    const Shape& s = x.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw ShapeError("mean axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    }
    const int64_t len = s[static_cast<std::size_t>(axis)];
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[static_cast<std::size_t>(d)];
    for (int d = axis + 1; d < static_cast<int>(s.size()); ++d) inner *= s[static_cast<std::size_t>(d)];

    Shape out_shape;
    for (int d = 0; d < static_cast<int>(s.size()); ++d) {
        if (d != axis) out_shape.push_back(s[static_cast<std::size_t>(d)]);
    }
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor out = make_result(out_shape);
    {
        const double* px = x.values().data();
        double* po = out.values().data();
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t i = 0; i < inner; ++i) {
                double acc = 0.0;
                for (int64_t k = 0; k < len; ++k) acc += px[(o * len + k) * inner + i];
                po[o * inner + i] = acc / static_cast<double>(len);
            }
        }
    }
    ComputationTape::record(out, {x}, [x, out, outer, inner, len]() {
        if (!x.has_grad()) return;
        const double* g = out.grad().data();
        double* gx = x.grad().data();
        const double inv = 1.0 / static_cast<double>(len);
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t k = 0; k < len; ++k) {
                for (int64_t i = 0; i < inner; ++i) {
                    gx[(o * len + k) * inner + i] += g[o * inner + i] * inv;
                }
            }
        }
    });
    return out;
}

Tensor sum_all(const Tensor& x) {
    const int64_t n = x.size();
    Tensor out = make_result({1});
    {
        const double* px = x.values().data();
        double acc = 0.0;
        for (int64_t i = 0; i < n; ++i) acc += px[i];
        out.values()[0] = acc;
    }
    ComputationTape::record(out, {x}, [x, out, n]() {
        if (!x.has_grad()) return;
        const double g = out.grad()[0];
        double* gx = x.grad().data();
        for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
    return out;
}

}  // namespace swat
