#include "swat/layers.hpp"

#include <cmath>

namespace swat {

void ParamRegistry::add(std::string name, Tensor t) {
    for (const auto& e : items_) {
        if (e.name == name) throw ContractError("duplicate parameter name: " + name);
    }
    if (!t.defined()) throw ContractError("cannot register undefined tensor: " + name);
    items_.push_back({std::move(name), std::move(t)});
}

Tensor ParamRegistry::find(const std::string& name) const {
    for (const auto& e : items_) {
        if (e.name == name) return e.tensor;
    }
    throw ContractError("no parameter named " + name);
}

int64_t ParamRegistry::total_count() const {
    int64_t n = 0;
    for (const auto& e : items_) n += e.tensor.size();
    return n;
}

void ParamRegistry::zero_grads() const {
    for (const auto& e : items_) e.tensor.zero_grad();
}

double TruncNormal::next() {
    for (;;) {
        if (have_spare_) {
            have_spare_ = false;
            if (std::abs(spare_) <= 2.0) return spare_;
            continue;
        }
        // 53-bit mantissa uniforms; u1 shifted into (0,1] so the log is finite
        const double u1 = 1.0 - static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double z0 = r * std::cos(2.0 * M_PI * u2);
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        if (std::abs(z0) <= 2.0) return z0;
    }
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void init_params(const ParamRegistry& params, const InitPolicy& policy) {
    if (!(policy.sigma > 0.0)) throw ConfigError("init sigma must be positive");
    TruncNormal rng(policy.seed);
    for (const auto& e : params.entries()) {
        std::vector<double>& v = e.tensor.values();
        if (ends_with(e.name, ".weight") || ends_with(e.name, ".pos_emb")) {
            for (double& x : v) x = policy.sigma * rng.next();
        } else if (ends_with(e.name, ".bias") || ends_with(e.name, ".beta")) {
            std::fill(v.begin(), v.end(), 0.0);
        } else if (ends_with(e.name, ".gamma")) {
            std::fill(v.begin(), v.end(), 1.0);
        } else {
            throw ContractError("parameter " + e.name + " has no recognized init suffix");
        }
        e.tensor.zero_grad();
    }
}

// ---- LinearLayer ----

LinearLayer::LinearLayer(int64_t in, int64_t out)
    : weight(Tensor::zeros({out, in}, true)), bias(Tensor::zeros({out}, true)) {}

Tensor LinearLayer::forward(const Tensor& x) const {
    const Shape& s = x.shape();
    const int64_t in = weight.extent(1);
    const int64_t out = weight.extent(0);
    if (s.empty() || s.back() != in) {
        throw ShapeError("linear layer expects trailing extent " + std::to_string(in) + ", got " +
                         shape_str(s));
    }
    const int64_t rows = x.size() / in;
    Tensor flat = reshape(x, {rows, in});
    Tensor y = add(matmul(flat, permute(weight, {1, 0})), bias);
    Shape out_shape = s;
    out_shape.back() = out;
    return reshape(y, out_shape);
}

void LinearLayer::register_params(ParamRegistry& r, const std::string& prefix) const {
    r.add(prefix + ".weight", weight);
    r.add(prefix + ".bias", bias);
}

// ---- LayerNormLayer ----

LayerNormLayer::LayerNormLayer(int64_t width)
    : gamma(Tensor::zeros({width}, true)), beta(Tensor::zeros({width}, true)) {}

Tensor LayerNormLayer::forward(const Tensor& x) const {
    return layer_norm(x, gamma, beta, eps, static_cast<int>(x.dim()) - 1);
}

void LayerNormLayer::register_params(ParamRegistry& r, const std::string& prefix) const {
    r.add(prefix + ".gamma", gamma);
    r.add(prefix + ".beta", beta);
}

// ---- Conv2dLayer ----

Conv2dLayer::Conv2dLayer(int64_t in, int64_t out, int kernel, int stride, int padding, int groups)
    : weight(Tensor::zeros({out, in / groups, kernel, kernel}, true)),
      bias(Tensor::zeros({out}, true)),
      stride(stride),
      padding(padding),
      groups(groups) {
    if (in % groups != 0 || out % groups != 0) {
        throw ConfigError("conv channels " + std::to_string(in) + " -> " + std::to_string(out) +
                          " not divisible by groups=" + std::to_string(groups));
    }
}

Tensor Conv2dLayer::forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding, groups); }

void Conv2dLayer::register_params(ParamRegistry& r, const std::string& prefix) const {
    r.add(prefix + ".weight", weight);
    r.add(prefix + ".bias", bias);
}

// ---- attention ----

Tensor attention_core(const Tensor& qkv, int heads, Tensor* attn_out) {
    const Shape& s = qkv.shape();
    if (s.size() != 3 || s[2] % 3 != 0) {
        throw ShapeError("attention_core expects (B, N, 3C), got " + shape_str(s));
    }
    const int64_t B = s[0], N = s[1], C = s[2] / 3;
    if (heads < 1 || C % heads != 0) {
        throw ConfigError("embed width " + std::to_string(C) + " not divisible by heads=" +
                          std::to_string(heads));
    }
    const int64_t dh = C / heads;

    // (B,N,3C) -> three (B,heads,N,dh) tensors
    auto split_heads = [&](int which) {
        Tensor part = narrow(qkv, 2, which * C, C);
        return permute(reshape(part, {B, N, heads, dh}), {0, 2, 1, 3});
    };
    Tensor q = split_heads(0);
    Tensor k = split_heads(1);
    Tensor v = split_heads(2);

    Tensor scores = matmul(scale(q, 1.0 / std::sqrt(static_cast<double>(dh))),
                           permute(k, {0, 1, 3, 2}));
    Tensor attn = softmax(scores, 3);
    if (attn_out) *attn_out = attn;
    Tensor mixed = matmul(attn, v);  // (B,heads,N,dh)
    return reshape(permute(mixed, {0, 2, 1, 3}), {B, N, C});
}

MhsaLayer::MhsaLayer(int64_t embed, int heads)
    : heads(heads), qkv(embed, 3 * embed), proj(embed, embed) {
    if (heads < 1 || embed % heads != 0) {
        throw ConfigError("embed width " + std::to_string(embed) + " not divisible by heads=" +
                          std::to_string(heads));
    }
}

Tensor MhsaLayer::forward(const Tensor& x, Tensor* attn_out) const {
    if (x.dim() != 3) throw ShapeError("attention input must be (B, N, C), got " + shape_str(x.shape()));
    return proj.forward(attention_core(qkv.forward(x), heads, attn_out));
}

void MhsaLayer::register_params(ParamRegistry& r, const std::string& prefix) const {
    qkv.register_params(r, prefix + ".qkv");
    proj.register_params(r, prefix + ".proj");
}

}  // namespace swat
