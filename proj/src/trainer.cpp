#include "swat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace swat {

namespace {

void check_dataset(const Dataset& data, const char* who) {
    if (data.size() < 1) throw ContractError(std::string(who) + " needs a non-empty dataset");
    if (static_cast<int64_t>(data.labels.size()) != data.size()) {
        throw ContractError("dataset has " + std::to_string(data.size()) + " images but " +
                            std::to_string(data.labels.size()) + " labels");
    }
}

// Rows lo..hi of `order` gathered into one contiguous batch.
Tensor gather_batch(const Tensor& images, const std::vector<int64_t>& order, int64_t lo,
                    int64_t hi) {
    const int64_t stride = images.size() / images.extent(0);
    Shape shape = images.shape();
    shape[0] = hi - lo;
    Tensor out = Tensor::zeros(shape);
    for (int64_t i = lo; i < hi; ++i) {
        std::copy_n(images.values().begin() + order[static_cast<std::size_t>(i)] * stride, stride,
                    out.values().begin() + (i - lo) * stride);
    }
    return out;
}

}  // namespace

Dataset make_synthetic_dataset(const DatasetSpec& spec) {
    if (spec.n_samples < 1) throw ConfigError("dataset needs n_samples >= 1");
    if (spec.classes < 2) throw ConfigError("dataset needs at least 2 classes");
    if (spec.image_size < 1 || spec.channels < 1) throw ConfigError("empty image geometry");
    if (spec.period < 2) throw ConfigError("stripe period must be >= 2 pixels");
    if (spec.noise < 0.0) throw ConfigError("noise sigma must be >= 0");

    const int s = spec.image_size;
    const int phases = (spec.classes + 1) / 2;
    const double phase_step = static_cast<double>(spec.period) / phases;
    TruncNormal noise(spec.seed);

    std::vector<double> pix(static_cast<std::size_t>(spec.n_samples) * spec.channels * s * s);
    std::vector<int> labels(static_cast<std::size_t>(spec.n_samples));
    std::size_t at = 0;
    for (int i = 0; i < spec.n_samples; ++i) {
        const int k = i % spec.classes;
        labels[static_cast<std::size_t>(i)] = k;
        const bool rows = (k % 2) == 0;
        const double phase = (k / 2) * phase_step;
        for (int c = 0; c < spec.channels; ++c) {
            for (int r = 0; r < s; ++r) {
                for (int q = 0; q < s; ++q) {
                    const double u = static_cast<double>(rows ? r : q) + phase;
                    const double v =
                        0.5 + 0.35 * std::cos(2.0 * std::numbers::pi * u / spec.period);
                    pix[at++] = v + spec.noise * noise.next();
                }
            }
        }
    }

    Dataset out;
    out.images = Tensor::from_data({spec.n_samples, spec.channels, s, s}, std::move(pix));
    out.labels = std::move(labels);
    out.classes = spec.classes;
    return out;
}

void OptimizerConfig::validate() const {
    if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ConfigError("betas must lie in [0, 1)");
    }
    if (eps <= 0.0) throw ConfigError("optimizer epsilon must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
}

std::vector<double> snapshot_params(const Model& m) {
    std::vector<double> out;
    ParamRegistry reg = m.params();
    for (const auto& e : reg.entries()) {
        out.insert(out.end(), e.tensor.values().begin(), e.tensor.values().end());
    }
    return out;
}

void restore_params(const Model& m, const std::vector<double>& snapshot) {
    ParamRegistry reg = m.params();
    std::size_t pos = 0;
    for (const auto& e : reg.entries()) {
        auto& v = e.tensor.values();
        if (pos + v.size() > snapshot.size()) throw ContractError("parameter snapshot too short");
        std::copy_n(snapshot.begin() + static_cast<std::ptrdiff_t>(pos), v.size(), v.begin());
        pos += v.size();
    }
    if (pos != snapshot.size()) {
        throw ContractError("parameter snapshot holds " + std::to_string(snapshot.size()) +
                            " values, model wants " + std::to_string(pos));
    }
}

double evaluate(const Model& m, const Dataset& data) {
    check_dataset(data, "evaluate");
    const int64_t n = data.size();
    std::vector<int64_t> order(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    int64_t correct = 0;
    constexpr int64_t kChunk = 64;
    for (int64_t lo = 0; lo < n; lo += kChunk) {
        const int64_t hi = std::min(n, lo + kChunk);
        Tensor logits = m.forward(gather_batch(data.images, order, lo, hi));
        const int64_t k = logits.extent(1);
        const double* row = logits.values().data();
        for (int64_t i = lo; i < hi; ++i, row += k) {
            int64_t best = 0;
            for (int64_t j = 1; j < k; ++j) {
                if (row[j] > row[best]) best = j;
            }
            if (best == data.labels[static_cast<std::size_t>(i)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

TrainResult train(const Model& m, const Dataset& data, const OptimizerConfig& opt, uint64_t seed) {
    opt.validate();
    check_dataset(data, "train");

    ParamRegistry reg = m.params();
    const auto& entries = reg.entries();
    std::vector<std::vector<double>> m1(entries.size()), m2(entries.size());
    for (std::size_t p = 0; p < entries.size(); ++p) {
        m1[p].assign(entries[p].tensor.values().size(), 0.0);
        m2[p].assign(entries[p].tensor.values().size(), 0.0);
    }

    const int64_t n = data.size();
    std::vector<int64_t> order(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);

    TrainResult result;
    double best_acc = -1.0;
    int64_t step = 0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        // Fisher-Yates by hand: std::shuffle's draw sequence is
        // implementation-defined and the run must replay exactly.
        for (int64_t i = n - 1; i > 0; --i) {
            const int64_t j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double loss_sum = 0.0;
        for (int64_t lo = 0; lo < n; lo += opt.batch) {
            const int64_t hi = std::min(n, lo + opt.batch);
            Tensor xb = gather_batch(data.images, order, lo, hi);
            std::vector<int> yb(static_cast<std::size_t>(hi - lo));
            for (int64_t i = lo; i < hi; ++i) {
                yb[static_cast<std::size_t>(i - lo)] =
                    data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            }

            reg.zero_grads();
            double batch_loss = 0.0;
            try {
                ComputationTape tape;
                Tensor loss = cross_entropy_logits(m.forward(xb), yb);
                batch_loss = loss.item();
                if (std::isfinite(batch_loss)) tape.backward(loss);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                   e.what());
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ": non-finite loss");
            }
            loss_sum += batch_loss * static_cast<double>(hi - lo);

            ++step;
            const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
            for (std::size_t p = 0; p < entries.size(); ++p) {
                const Tensor& t = entries[p].tensor;
                auto& w = t.values();
                const std::vector<double>* g = t.has_grad() ? &t.grad() : nullptr;
                for (std::size_t j = 0; j < w.size(); ++j) {
                    const double gj = g ? (*g)[j] : 0.0;
                    m1[p][j] = opt.beta1 * m1[p][j] + (1.0 - opt.beta1) * gj;
                    m2[p][j] = opt.beta2 * m2[p][j] + (1.0 - opt.beta2) * gj * gj;
                    const double mhat = m1[p][j] / c1;
                    const double vhat = m2[p][j] / c2;
                    w[j] -= opt.lr * (mhat / (std::sqrt(vhat) + opt.eps) +
                                      opt.weight_decay * w[j]);
                }
            }
        }

        EpochStats stats;
        stats.loss = loss_sum / static_cast<double>(n);
        stats.accuracy = evaluate(m, data);
        result.history.push_back(stats);
        if (stats.accuracy > best_acc) {
            best_acc = stats.accuracy;
            result.best_epoch = epoch;
            result.best_params = snapshot_params(m);
        }
    }
    return result;
}

}  // namespace swat
