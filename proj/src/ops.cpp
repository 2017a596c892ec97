#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "internal.hpp"
#include "swat/tensor.hpp"

namespace swat {

using internal::make_result;

namespace {

// C (m x n) = op(A) * op(B), with op transposing when the flag is set.
// Accumulation order over the contraction axis is fixed (ascending p) so
// repeated runs are bitwise identical.
void mm_kernel(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n,
               bool transA, bool transB, bool accumulate) {
    if (!accumulate) std::fill(C, C + m * n, 0.0);
    for (int64_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double a = transA ? A[p * m + i] : A[i * k + p];
            if (transB) {
                for (int64_t j = 0; j < n; ++j) crow[j] += a * B[j * k + p];
            } else {
                const double* brow = B + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
            }
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2) {
        throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(sa) + " and " +
                         shape_str(sb));
    }
    const int64_t m = sa[sa.size() - 2];
    const int64_t k = sa[sa.size() - 1];
    const int64_t k2 = sb[sb.size() - 2];
    const int64_t n = sb[sb.size() - 1];
    if (k != k2) {
        throw ShapeError("matmul inner extents differ: " + shape_str(sa) + " vs " + shape_str(sb));
    }

    Shape batch_a(sa.begin(), sa.end() - 2);
    Shape batch_b(sb.begin(), sb.end() - 2);
    const bool bcast_a = batch_a.empty() && !batch_b.empty();
    const bool bcast_b = batch_b.empty() && !batch_a.empty();
    if (!bcast_a && !bcast_b && batch_a != batch_b) {
        throw ShapeError("matmul batch dims differ: " + shape_str(sa) + " vs " + shape_str(sb));
    }
    const Shape& batch = bcast_a ? batch_b : batch_a;
    const int64_t nb = shape_numel(batch);

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor out = make_result(out_shape);
    {
        const double* pa = a.values().data();
        const double* pb = b.values().data();
        double* po = out.values().data();
        for (int64_t bi = 0; bi < nb; ++bi) {
            const double* A = pa + (bcast_a ? 0 : bi * m * k);
            const double* B = pb + (bcast_b ? 0 : bi * k * n);
            mm_kernel(A, B, po + bi * m * n, m, k, n, false, false, false);
        }
    }

    ComputationTape::record(out, {a, b}, [a, b, out, m, k, n, nb, bcast_a, bcast_b]() {
        const double* g = out.grad().data();
        const double* pa = a.values().data();
        const double* pb = b.values().data();
        if (a.has_grad()) {
            double* ga = a.grad().data();
            for (int64_t bi = 0; bi < nb; ++bi) {
                const double* B = pb + (bcast_b ? 0 : bi * k * n);
                // dA = dY * B^T
                mm_kernel(g + bi * m * n, B, ga + (bcast_a ? 0 : bi * m * k), m, n, k, false, true,
                          true);
            }
        }
        if (b.has_grad()) {
            double* gb = b.grad().data();
            for (int64_t bi = 0; bi < nb; ++bi) {
                const double* A = pa + (bcast_a ? 0 : bi * m * k);
                // dB = A^T * dY
                mm_kernel(A, g + bi * m * n, gb + (bcast_b ? 0 : bi * k * n), k, m, n, true, false,
                          true);
            }
        }
    });
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding,
              int groups) {
    const Shape& sx = x.shape();
    const Shape& sw = w.shape();
    if (sx.size() != 4) throw ShapeError("conv2d input must be (B, C, H, W), got " + shape_str(sx));
    if (sw.size() != 4) {
        throw ShapeError("conv2d weight must be (Cout, Cin/groups, kh, kw), got " + shape_str(sw));
    }
    if (stride < 1) throw ShapeError("conv2d stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0) throw ShapeError("conv2d padding must be >= 0, got " + std::to_string(padding));
    if (groups < 1) throw ShapeError("conv2d groups must be >= 1, got " + std::to_string(groups));

    const int64_t B = sx[0], Cin = sx[1], H = sx[2], W = sx[3];
    const int64_t Cout = sw[0], kh = sw[2], kw = sw[3];
    if (Cin % groups != 0 || Cout % groups != 0) {
        throw ShapeError("conv2d channels (" + std::to_string(Cin) + " -> " + std::to_string(Cout) +
                         ") not divisible by groups=" + std::to_string(groups));
    }
    const int64_t cin_g = Cin / groups;
    const int64_t cout_g = Cout / groups;
    if (sw[1] != cin_g) {
        throw ShapeError("conv2d weight expects " + std::to_string(cin_g) +
                         " input channels per group, got " + shape_str(sw));
    }
    if (bias.defined() && (bias.dim() != 1 || bias.extent(0) != Cout)) {
        throw ShapeError("conv2d bias must be (" + std::to_string(Cout) + "), got " +
                         shape_str(bias.shape()));
    }
    const int64_t OH = (H + 2 * padding - kh) / stride + 1;
    const int64_t OW = (W + 2 * padding - kw) / stride + 1;
    if (H + 2 * padding < kh || W + 2 * padding < kw || OH < 1 || OW < 1) {
        throw ShapeError("conv2d output would be empty for input " + shape_str(sx) + " with kernel " +
                         shape_str(sw) + ", stride " + std::to_string(stride) + ", padding " +
                         std::to_string(padding));
    }

    Tensor out = make_result({B, Cout, OH, OW});
    {
        const double* px = x.values().data();
        const double* pw = w.values().data();
        const double* pbias = bias.defined() ? bias.values().data() : nullptr;
        double* po = out.values().data();
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t g = 0; g < groups; ++g) {
                for (int64_t ocg = 0; ocg < cout_g; ++ocg) {
                    const int64_t oc = g * cout_g + ocg;
                    const double* wk = pw + oc * cin_g * kh * kw;
                    for (int64_t oh = 0; oh < OH; ++oh) {
                        for (int64_t ow = 0; ow < OW; ++ow) {
                            double acc = pbias ? pbias[oc] : 0.0;
                            for (int64_t ic = 0; ic < cin_g; ++ic) {
                                const double* xc = px + ((b * Cin + g * cin_g + ic) * H) * W;
                                const double* wc = wk + ic * kh * kw;
                                for (int64_t ky = 0; ky < kh; ++ky) {
                                    const int64_t iy = oh * stride - padding + ky;
                                    if (iy < 0 || iy >= H) continue;
                                    for (int64_t kx = 0; kx < kw; ++kx) {
                                        const int64_t ix = ow * stride - padding + kx;
                                        if (ix < 0 || ix >= W) continue;
                                        acc += xc[iy * W + ix] * wc[ky * kw + kx];
                                    }
                                }
                            }
                            po[((b * Cout + oc) * OH + oh) * OW + ow] = acc;
                        }
                    }
                }
            }
        }
    }

    std::vector<Tensor> inputs = {x, w};
    if (bias.defined()) inputs.push_back(bias);
    ComputationTape::record(out, inputs,
                            [x, w, bias, out, B, Cin, H, W, Cout, kh, kw, OH, OW, cin_g, cout_g,
                             stride, padding, groups]() {
        const double* g = out.grad().data();
        const double* px = x.values().data();
        const double* pw = w.values().data();
        double* gx = x.has_grad() ? x.grad().data() : nullptr;
        double* gw = w.has_grad() ? w.grad().data() : nullptr;
        double* gb = (bias.defined() && bias.has_grad()) ? bias.grad().data() : nullptr;
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t gr = 0; gr < groups; ++gr) {
                for (int64_t ocg = 0; ocg < cout_g; ++ocg) {
                    const int64_t oc = gr * cout_g + ocg;
                    const double* wk = pw + oc * cin_g * kh * kw;
                    double* gwk = gw ? gw + oc * cin_g * kh * kw : nullptr;
                    for (int64_t oh = 0; oh < OH; ++oh) {
                        for (int64_t ow = 0; ow < OW; ++ow) {
                            const double go = g[((b * Cout + oc) * OH + oh) * OW + ow];
                            if (gb) gb[oc] += go;
                            for (int64_t ic = 0; ic < cin_g; ++ic) {
                                const int64_t xbase = ((b * Cin + gr * cin_g + ic) * H) * W;
                                for (int64_t ky = 0; ky < kh; ++ky) {
                                    const int64_t iy = oh * stride - padding + ky;
                                    if (iy < 0 || iy >= H) continue;
                                    for (int64_t kx = 0; kx < kw; ++kx) {
                                        const int64_t ix = ow * stride - padding + kx;
                                        if (ix < 0 || ix >= W) continue;
                                        const int64_t wi = (ic * kh + ky) * kw + kx;
                                        if (gx) gx[xbase + iy * W + ix] += go * wk[wi];
                                        if (gwk) gwk[wi] += go * px[xbase + iy * W + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

namespace {

// tanh form of gelu; the constant is sqrt(2/pi) to the precision used everywhere
// in this codebase.
constexpr double kGeluC = 0.7978845608;
constexpr double kGeluCube = 0.044715;

void check_finite_input(const Tensor& x, const char* op) {
    if (!internal::all_finite(x.values())) {
        throw NumericError(std::string(op) + " received non-finite input");
    }
}

}  // namespace

Tensor gelu(const Tensor& x) {
    check_finite_input(x, "gelu");
    const int64_t n = x.size();
    Tensor out = make_result(x.shape());
    {
        const double* px = x.values().data();
        double* po = out.values().data();
        for (int64_t i = 0; i < n; ++i) {
            const double v = px[i];
            const double t = std::tanh(kGeluC * (v + kGeluCube * v * v * v));
            po[i] = 0.5 * v * (1.0 + t);
        }
    }
    ComputationTape::record(out, {x}, [x, out, n]() {
        if (!x.has_grad()) return;
        const double* g = out.grad().data();
        const double* px = x.values().data();
        double* gx = x.grad().data();
        for (int64_t i = 0; i < n; ++i) {
            const double v = px[i];
            const double u = kGeluC * (v + kGeluCube * v * v * v);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluCube * v * v);
            gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
        }
    });
    return out;
}

namespace {

int check_row_axis(const Tensor& x, int axis, const char* op) {
    const int nd = static_cast<int>(x.dim());
    if (axis < 0 || axis >= nd) {
        throw ShapeError(std::string(op) + " axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
    }
    return nd;
}

std::vector<int> move_axis_last(int nd, int axis) {
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(nd));
    for (int d = 0; d < nd; ++d) {
        if (d != axis) order.push_back(d);
    }
    order.push_back(axis);
    return order;
}

std::vector<int> restore_axis(int nd, int axis) {
    // inverse of move_axis_last
    std::vector<int> order(static_cast<std::size_t>(nd));
    int src = 0;
    for (int d = 0; d < nd; ++d) {
        if (d == axis) {
            order[static_cast<std::size_t>(d)] = nd - 1;
        } else {
            order[static_cast<std::size_t>(d)] = src++;
        }
    }
    return order;
}

Tensor softmax_last(const Tensor& x) {
    const int64_t len = x.extent(static_cast<int>(x.dim()) - 1);
    const int64_t rows = x.size() / len;
    Tensor out = make_result(x.shape());
    {
        const double* px = x.values().data();
        double* po = out.values().data();
        for (int64_t r = 0; r < rows; ++r) {
            const double* row = px + r * len;
            double* orow = po + r * len;
            double mx = row[0];
            for (int64_t i = 1; i < len; ++i) mx = std::max(mx, row[i]);
            double denom = 0.0;
            for (int64_t i = 0; i < len; ++i) {
                orow[i] = std::exp(row[i] - mx);
                denom += orow[i];
            }
            for (int64_t i = 0; i < len; ++i) orow[i] /= denom;
        }
    }
    ComputationTape::record(out, {x}, [x, out, rows, len]() {
        if (!x.has_grad()) return;
        const double* g = out.grad().data();
        const double* py = out.values().data();
        double* gx = x.grad().data();
        for (int64_t r = 0; r < rows; ++r) {
            const double* grow = g + r * len;
            const double* yrow = py + r * len;
            double dot = 0.0;
            for (int64_t i = 0; i < len; ++i) dot += grow[i] * yrow[i];
            for (int64_t i = 0; i < len; ++i) gx[r * len + i] += yrow[i] * (grow[i] - dot);
        }
    });
    return out;
}

Tensor layer_norm_last(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int64_t len = x.extent(static_cast<int>(x.dim()) - 1);
    if (gamma.dim() != 1 || gamma.extent(0) != len || beta.dim() != 1 || beta.extent(0) != len) {
        throw ShapeError("layer_norm scale/shift must both be (" + std::to_string(len) + "), got " +
                         shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    }
    const int64_t rows = x.size() / len;
    Tensor out = make_result(x.shape());
    // cache per-row statistics for the backward pass
    auto invstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    auto means = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    {
        const double* px = x.values().data();
        const double* pg = gamma.values().data();
        const double* pb = beta.values().data();
        double* po = out.values().data();
        for (int64_t r = 0; r < rows; ++r) {
            const double* row = px + r * len;
            double mean = 0.0;
            for (int64_t i = 0; i < len; ++i) mean += row[i];
            mean /= static_cast<double>(len);
            double var = 0.0;
            for (int64_t i = 0; i < len; ++i) {
                const double d = row[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(len);
            const double inv = 1.0 / std::sqrt(var + eps);
            (*means)[static_cast<std::size_t>(r)] = mean;
            (*invstd)[static_cast<std::size_t>(r)] = inv;
            for (int64_t i = 0; i < len; ++i) {
                po[r * len + i] = (row[i] - mean) * inv * pg[i] + pb[i];
            }
        }
    }
    ComputationTape::record(out, {x, gamma, beta}, [x, gamma, beta, out, rows, len, invstd, means]() {
        const double* g = out.grad().data();
        const double* px = x.values().data();
        const double* pg = gamma.values().data();
        double* gx = x.has_grad() ? x.grad().data() : nullptr;
        double* gg = gamma.has_grad() ? gamma.grad().data() : nullptr;
        double* gb = beta.has_grad() ? beta.grad().data() : nullptr;
        const double invlen = 1.0 / static_cast<double>(len);
        for (int64_t r = 0; r < rows; ++r) {
            const double mean = (*means)[static_cast<std::size_t>(r)];
            const double inv = (*invstd)[static_cast<std::size_t>(r)];
            const double* grow = g + r * len;
            const double* xrow = px + r * len;
            if (gg || gb) {
                for (int64_t i = 0; i < len; ++i) {
                    const double xhat = (xrow[i] - mean) * inv;
                    if (gg) gg[i] += grow[i] * xhat;
                    if (gb) gb[i] += grow[i];
                }
            }
            if (gx) {
                double sum_gp = 0.0, sum_gpx = 0.0;
                for (int64_t i = 0; i < len; ++i) {
                    const double gp = grow[i] * pg[i];
                    const double xhat = (xrow[i] - mean) * inv;
                    sum_gp += gp;
                    sum_gpx += gp * xhat;
                }
                for (int64_t i = 0; i < len; ++i) {
                    const double gp = grow[i] * pg[i];
                    const double xhat = (xrow[i] - mean) * inv;
                    gx[r * len + i] += inv * (gp - invlen * sum_gp - xhat * invlen * sum_gpx);
                }
            }
        }
    });
    return out;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
    check_finite_input(x, "softmax");
    const int nd = check_row_axis(x, axis, "softmax");
    if (axis == nd - 1) return softmax_last(x);
    Tensor moved = permute(x, move_axis_last(nd, axis));
    return permute(softmax_last(moved), restore_axis(nd, axis));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, int axis) {
    if (!(eps > 0.0)) throw ConfigError("layer_norm epsilon must be positive");
    check_finite_input(x, "layer_norm");
    const int nd = check_row_axis(x, axis, "layer_norm");
    if (axis == nd - 1) return layer_norm_last(x, gamma, beta, eps);
    Tensor moved = permute(x, move_axis_last(nd, axis));
    return permute(layer_norm_last(moved, gamma, beta, eps), restore_axis(nd, axis));
}

Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels) {
    const Shape& s = logits.shape();
    if (s.size() != 2) throw ShapeError("cross entropy expects (B, classes) logits, got " + shape_str(s));
    const int64_t B = s[0], K = s[1];
    if (static_cast<int64_t>(labels.size()) != B) {
        throw ContractError("label count " + std::to_string(labels.size()) +
                            " does not match batch " + std::to_string(B));
    }
    for (int y : labels) {
        if (y < 0 || y >= K) {
            throw ContractError("label " + std::to_string(y) + " outside [0, " + std::to_string(K) + ")");
        }
    }
    check_finite_input(logits, "cross_entropy");

    Tensor out = make_result({1});
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(B * K));
    {
        const double* pl = logits.values().data();
        double total = 0.0;
        for (int64_t i = 0; i < B; ++i) {
            const double* row = pl + i * K;
            double mx = row[0];
            for (int64_t j = 1; j < K; ++j) mx = std::max(mx, row[j]);
            double denom = 0.0;
            for (int64_t j = 0; j < K; ++j) {
                const double e = std::exp(row[j] - mx);
                (*probs)[static_cast<std::size_t>(i * K + j)] = e;
                denom += e;
            }
            for (int64_t j = 0; j < K; ++j) (*probs)[static_cast<std::size_t>(i * K + j)] /= denom;
            total += (mx + std::log(denom)) - row[labels[static_cast<std::size_t>(i)]];
        }
        out.values()[0] = total / static_cast<double>(B);
    }
    ComputationTape::record(out, {logits}, [logits, out, labels, probs, B, K]() {
        if (!logits.has_grad()) return;
        const double g = out.grad()[0] / static_cast<double>(B);
        double* gl = logits.grad().data();
        for (int64_t i = 0; i < B; ++i) {
            for (int64_t j = 0; j < K; ++j) {
                const double p = (*probs)[static_cast<std::size_t>(i * K + j)];
                const double onehot = (labels[static_cast<std::size_t>(i)] == j) ? 1.0 : 0.0;
                gl[i * K + j] += g * (p - onehot);
            }
        }
    });
    return out;
}

}  // namespace swat
