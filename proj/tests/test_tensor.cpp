#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "swat/tensor.hpp"

using namespace swat;

TEST_CASE("construction validates shapes and data length") {
    CHECK_THROWS_AS(Tensor::zeros({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({-1}), ShapeError);
    CHECK_THROWS_AS(Tensor::from_data({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    Tensor t = Tensor::full({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.values()[5] == 1.5);
    CHECK_THROWS_AS(t.item(), ShapeError);
    CHECK(Tensor::full({1}, 7.0).item() == 7.0);
}

TEST_CASE("reshape relocates elements by row-major index arithmetic") {
    // (2,3,4,4) -> (2,48): element (b,c,i,j) must land at (b, c*16 + i*4 + j).
    std::vector<double> data(96);
    for (int i = 0; i < 96; ++i) data[static_cast<std::size_t>(i)] = i;
    Tensor x = Tensor::from_data({2, 3, 4, 4}, data);
    Tensor y = reshape(x, {2, 48});
    for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    const double orig = x.values()[static_cast<std::size_t>(((b * 3 + c) * 4 + i) * 4 + j)];
                    const double moved = y.values()[static_cast<std::size_t>(b * 48 + c * 16 + i * 4 + j)];
                    CHECK(orig == moved);
                }
            }
        }
    }
    CHECK_THROWS_AS(reshape(x, {2, 47}), ShapeError);
}

TEST_CASE("reshape aliases storage instead of copying") {
    Tensor x = Tensor::zeros({4, 6});
    Tensor y = reshape(x, {24});
    x.values()[13] = 3.25;
    CHECK(y.values()[13] == 3.25);
}

TEST_CASE("permute matches direct index remapping") {
    auto data = oracle::random_vec(2 * 3 * 5, 11);
    Tensor x = Tensor::from_data({2, 3, 5}, data);
    Tensor y = permute(x, {2, 0, 1});  // (5,2,3)
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 3; ++b) {
            for (int c = 0; c < 5; ++c) {
                CHECK(y.values()[static_cast<std::size_t>((c * 2 + a) * 3 + b)] ==
                      data[static_cast<std::size_t>((a * 3 + b) * 5 + c)]);
            }
        }
    }
    // round trip restores the original ordering bitwise
    Tensor back = permute(y, {1, 2, 0});
    CHECK(oracle::max_abs_diff(back.values(), data) == 0.0);

    CHECK_THROWS_AS(permute(x, {0, 1}), ShapeError);
    CHECK_THROWS_AS(permute(x, {0, 0, 1}), ShapeError);
    CHECK_THROWS_AS(permute(x, {0, 1, 3}), ShapeError);
}

TEST_CASE("narrow slices along an axis") {
    std::vector<double> data(24);
    for (int i = 0; i < 24; ++i) data[static_cast<std::size_t>(i)] = i;
    Tensor x = Tensor::from_data({2, 3, 4}, data);
    Tensor y = narrow(x, 1, 1, 2);
    CHECK(y.shape() == Shape{2, 2, 4});
    for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 2; ++c) {
            for (int i = 0; i < 4; ++i) {
                CHECK(y.values()[static_cast<std::size_t>((b * 2 + c) * 4 + i)] ==
                      data[static_cast<std::size_t>((b * 3 + c + 1) * 4 + i)]);
            }
        }
    }
    CHECK_THROWS_AS(narrow(x, 1, 2, 2), ShapeError);
    CHECK_THROWS_AS(narrow(x, 3, 0, 1), ShapeError);
}

TEST_CASE("elementwise arithmetic with trailing broadcast") {
    Tensor a = Tensor::from_data({2, 2, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    Tensor b = Tensor::from_data({3}, {10, 20, 30});
    Tensor s = a + b;
    CHECK(s.values()[0] == 11.0);
    CHECK(s.values()[5] == 36.0);
    CHECK(s.values()[11] == 42.0);
    Tensor d = a - b;
    CHECK(d.values()[3] == -6.0);
    CHECK(d.values()[4] == -15.0);
    Tensor m = a * a;
    CHECK(m.values()[11] == 144.0);
    Tensor sc = 0.5 * a;
    CHECK(sc.values()[1] == 1.0);
    CHECK_THROWS_AS(add(b, a), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
}

TEST_CASE("mean and sum reductions") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor m1 = mean_axis(x, 1);
    CHECK(m1.shape() == Shape{2});
    CHECK(m1.values()[0] == doctest::Approx(2.0));
    CHECK(m1.values()[1] == doctest::Approx(5.0));
    Tensor m0 = mean_axis(x, 0);
    CHECK(m0.values()[2] == doctest::Approx(4.5));
    CHECK(sum_all(x).item() == doctest::Approx(21.0));
}

TEST_CASE("matmul agrees with the triple-loop oracle across random trials") {
    struct Dims {
        int64_t m, k, n;
    };
    const Dims cases[] = {{1, 1, 1}, {3, 4, 5}, {7, 2, 9}, {5, 8, 3}, {6, 6, 6}};
    int trial = 0;
    for (const auto& d : cases) {
        for (int rep = 0; rep < 5; ++rep, ++trial) {
            auto av = oracle::random_vec(static_cast<std::size_t>(d.m * d.k), 100 + trial);
            auto bv = oracle::random_vec(static_cast<std::size_t>(d.k * d.n), 200 + trial);
            Tensor a = Tensor::from_data({d.m, d.k}, av);
            Tensor b = Tensor::from_data({d.k, d.n}, bv);
            auto want = oracle::matmul2d(av, bv, d.m, d.k, d.n);
            CHECK(oracle::max_abs_diff(matmul(a, b).values(), want) < 1e-12);
        }
    }
    CHECK(trial >= 20);
}

TEST_CASE("matmul batching and 2-D broadcast") {
    const int64_t B = 3, m = 4, k = 5, n = 2;
    auto av = oracle::random_vec(static_cast<std::size_t>(B * m * k), 7);
    auto bv = oracle::random_vec(static_cast<std::size_t>(B * k * n), 8);
    Tensor a = Tensor::from_data({B, m, k}, av);
    Tensor b = Tensor::from_data({B, k, n}, bv);
    Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{B, m, n});
    for (int64_t bi = 0; bi < B; ++bi) {
        auto slabA = std::vector<double>(av.begin() + bi * m * k, av.begin() + (bi + 1) * m * k);
        auto slabB = std::vector<double>(bv.begin() + bi * k * n, bv.begin() + (bi + 1) * k * n);
        auto want = oracle::matmul2d(slabA, slabB, m, k, n);
        auto got = std::vector<double>(c.values().begin() + bi * m * n,
                                       c.values().begin() + (bi + 1) * m * n);
        CHECK(oracle::max_abs_diff(got, want) < 1e-12);
    }

    // 2-D lhs against batched rhs reuses the lhs per batch
    auto wv = oracle::random_vec(static_cast<std::size_t>(n * k), 9);
    Tensor w = Tensor::from_data({n, k}, wv);
    Tensor wb = matmul(w, b);  // (B, n, n)
    for (int64_t bi = 0; bi < B; ++bi) {
        auto slabB = std::vector<double>(bv.begin() + bi * k * n, bv.begin() + (bi + 1) * k * n);
        auto want = oracle::matmul2d(wv, slabB, n, k, n);
        auto got = std::vector<double>(wb.values().begin() + bi * n * n,
                                       wb.values().begin() + (bi + 1) * n * n);
        CHECK(oracle::max_abs_diff(got, want) < 1e-12);
    }

    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), ShapeError);
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3, 4}), Tensor::zeros({3, 4, 2})), ShapeError);
    CHECK_THROWS_AS(matmul(Tensor::zeros({5}), Tensor::zeros({5, 2})), ShapeError);
}

TEST_CASE("conv2d agrees with the direct-loop oracle across strides, paddings, groups") {
    int trial = 0;
    for (int stride : {1, 2}) {
        for (int padding : {0, 1, 2}) {
            for (int groups : {1, 2, 4}) {
                const int64_t B = 2, Cin = 4, H = 6, W = 5, Cout = 4, kh = 3, kw = 3;
                auto xv = oracle::random_vec(static_cast<std::size_t>(B * Cin * H * W), 300 + trial);
                auto wv = oracle::random_vec(static_cast<std::size_t>(Cout * (Cin / groups) * kh * kw),
                                             400 + trial);
                auto bv = oracle::random_vec(static_cast<std::size_t>(Cout), 500 + trial);
                Tensor x = Tensor::from_data({B, Cin, H, W}, xv);
                Tensor w = Tensor::from_data({Cout, Cin / groups, kh, kw}, wv);
                Tensor bias = Tensor::from_data({Cout}, bv);
                auto want = oracle::conv2d_ref(xv, wv, bv, B, Cin, H, W, Cout, kh, kw, stride,
                                               padding, groups);
                Tensor y = conv2d(x, w, bias, stride, padding, groups);
                CHECK(oracle::max_abs_diff(y.values(), want) < 1e-12);
                // bias omitted entirely
                auto want_nb = oracle::conv2d_ref(xv, wv, {}, B, Cin, H, W, Cout, kh, kw, stride,
                                                  padding, groups);
                Tensor ynb = conv2d(x, w, Tensor(), stride, padding, groups);
                CHECK(oracle::max_abs_diff(ynb.values(), want_nb) < 1e-12);
                ++trial;
            }
        }
    }
    CHECK(trial >= 18);

    // depthwise: groups == channels
    const int64_t C = 3, H = 5, W = 5;
    auto xv = oracle::random_vec(static_cast<std::size_t>(C * H * W), 42);
    auto wv = oracle::random_vec(static_cast<std::size_t>(C * 9), 43);
    Tensor x = Tensor::from_data({1, C, H, W}, xv);
    Tensor w = Tensor::from_data({C, 1, 3, 3}, wv);
    auto want = oracle::conv2d_ref(xv, wv, {}, 1, C, H, W, C, 3, 3, 1, 1, static_cast<int>(C));
    CHECK(oracle::max_abs_diff(conv2d(x, w, Tensor(), 1, 1, static_cast<int>(C)).values(), want) <
          1e-12);
}

TEST_CASE("conv2d rejects inconsistent geometry") {
    Tensor x = Tensor::zeros({1, 4, 8, 8});
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({4, 4, 3, 3}), Tensor(), 1, 1, 2), ShapeError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({3, 2, 3, 3}), Tensor(), 1, 1, 2), ShapeError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({4, 4, 11, 11}), Tensor(), 1, 1, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({4, 4, 3, 3}), Tensor::zeros({5}), 1, 1, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({4, 4, 3, 3}), Tensor(), 0, 1, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({4, 8, 8}), Tensor::zeros({4, 4, 3, 3}), Tensor(), 1, 1, 1),
                    ShapeError);
}

TEST_CASE("gelu matches the tanh-form reference values") {
    Tensor x = Tensor::from_data({3}, {3.0, -1.0, 0.5});
    Tensor y = gelu(x);
    CHECK(y.values()[0] == doctest::Approx(2.9963626079181394).epsilon(1e-12));
    CHECK(y.values()[1] == doctest::Approx(-0.1588080093925231).epsilon(1e-12));
    CHECK(y.values()[2] == doctest::Approx(0.34571400982483486).epsilon(1e-12));
    CHECK(gelu(Tensor::zeros({2})).values()[0] == 0.0);

    Tensor bad = Tensor::from_data({1}, {std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(gelu(bad), NumericError);
    Tensor inf = Tensor::from_data({1}, {std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(gelu(inf), NumericError);
}

TEST_CASE("softmax normalizes rows and handles arbitrary axes") {
    Tensor x = Tensor::from_data({1, 3}, {1.0, 2.0, 3.0});
    Tensor y = softmax(x, 1);
    CHECK(y.values()[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));
    CHECK(y.values()[0] + y.values()[1] + y.values()[2] == doctest::Approx(1.0).epsilon(1e-12));

    // softmax along axis 0 must equal transposing, softmax on rows, transposing back
    auto data = oracle::random_vec(4 * 3, 77, -3.0, 3.0);
    Tensor a = Tensor::from_data({4, 3}, data);
    Tensor s0 = softmax(a, 0);
    Tensor manual = permute(softmax(permute(a, {1, 0}), 1), {1, 0});
    CHECK(oracle::max_abs_diff(s0.values(), manual.values()) == 0.0);

    // large magnitudes stay finite thanks to the max shift
    Tensor big = Tensor::from_data({1, 2}, {1000.0, 1001.0});
    Tensor sb = softmax(big, 1);
    CHECK(std::isfinite(sb.values()[0]));
    CHECK(sb.values()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(a, 2), ShapeError);
    Tensor bad = Tensor::from_data({2}, {1.0, std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(softmax(bad, 0), NumericError);
}

TEST_CASE("layer_norm standardizes rows then applies scale and shift") {
    Tensor x = Tensor::from_data({1, 4}, {1.0, 2.0, 3.0, 4.0});
    Tensor gamma = Tensor::full({4}, 1.0);
    Tensor beta = Tensor::zeros({4});
    Tensor y = layer_norm(x, gamma, beta, 1e-6, 1);
    CHECK(y.values()[0] == doctest::Approx(-1.341640249843881).epsilon(1e-12));
    CHECK(y.values()[1] == doctest::Approx(-0.44721341661462705).epsilon(1e-12));
    CHECK(y.values()[3] == doctest::Approx(1.341640249843881).epsilon(1e-12));

    // constant rows normalize to zero, so the output is just beta
    Tensor c = Tensor::full({2, 4}, 5.0);
    Tensor beta2 = Tensor::from_data({4}, {0.5, -0.5, 1.0, 0.0});
    Tensor yc = layer_norm(c, gamma, beta2, 1e-6, 1);
    for (int r = 0; r < 2; ++r) {
        for (int i = 0; i < 4; ++i) {
            CHECK(yc.values()[static_cast<std::size_t>(r * 4 + i)] ==
                  doctest::Approx(beta2.values()[static_cast<std::size_t>(i)]).epsilon(1e-9));
        }
    }

    // scale and shift are applied after standardization
    Tensor g2 = Tensor::from_data({4}, {2.0, 2.0, 2.0, 2.0});
    Tensor b2 = Tensor::from_data({4}, {1.0, 1.0, 1.0, 1.0});
    Tensor y2 = layer_norm(x, g2, b2, 1e-6, 1);
    CHECK(y2.values()[0] == doctest::Approx(2.0 * -1.341640249843881 + 1.0).epsilon(1e-12));

    CHECK_THROWS_AS(layer_norm(x, gamma, beta, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(layer_norm(x, gamma, beta, -1.0, 1), ConfigError);
    CHECK_THROWS_AS(layer_norm(x, Tensor::zeros({3}), beta, 1e-6, 1), ShapeError);
}

TEST_CASE("cross entropy of uniform logits is log(classes)") {
    Tensor logits = Tensor::zeros({3, 4});
    Tensor loss = cross_entropy_logits(logits, {0, 1, 3});
    CHECK(loss.item() == doctest::Approx(1.3862943611198906).epsilon(1e-12));

    CHECK_THROWS_AS(cross_entropy_logits(logits, {0, 1}), ContractError);
    CHECK_THROWS_AS(cross_entropy_logits(logits, {0, 1, 4}), ContractError);
    CHECK_THROWS_AS(cross_entropy_logits(logits, {0, -1, 2}), ContractError);
    CHECK_THROWS_AS(cross_entropy_logits(Tensor::zeros({3, 4, 1}), {0, 1, 2}), ShapeError);
}

TEST_CASE("finite differences confirm every op's gradient") {
    const double tol = 1e-5;
    int seeds_used = 0;

    SUBCASE("matmul") {
        for (uint64_t seed = 0; seed < 4; ++seed, ++seeds_used) {
            Tensor a = Tensor::from_data({3, 4}, oracle::random_vec(12, seed * 3 + 1), true);
            Tensor b = Tensor::from_data({4, 2}, oracle::random_vec(8, seed * 3 + 2), true);
            auto loss = [&]() { return sum_all(gelu(matmul(a, b))); };
            CHECK(oracle::grad_check_rel_err(loss, {a, b}) < tol);
        }
    }
    SUBCASE("batched matmul with broadcast lhs") {
        Tensor w = Tensor::from_data({2, 4}, oracle::random_vec(8, 91), true);
        Tensor b = Tensor::from_data({3, 4, 2}, oracle::random_vec(24, 92), true);
        auto loss = [&]() { return sum_all(gelu(matmul(w, b))); };
        CHECK(oracle::grad_check_rel_err(loss, {w, b}) < tol);
    }
    SUBCASE("conv2d with stride, padding, groups, bias") {
        for (uint64_t seed = 0; seed < 3; ++seed, ++seeds_used) {
            Tensor x = Tensor::from_data({2, 4, 5, 5}, oracle::random_vec(200, 60 + seed), true);
            Tensor w = Tensor::from_data({4, 2, 3, 3}, oracle::random_vec(72, 70 + seed), true);
            Tensor bias = Tensor::from_data({4}, oracle::random_vec(4, 80 + seed), true);
            auto loss = [&]() { return sum_all(gelu(conv2d(x, w, bias, 2, 1, 2))); };
            CHECK(oracle::grad_check_rel_err(loss, {x, w, bias}) < tol);
        }
    }
    SUBCASE("gelu") {
        for (uint64_t seed = 0; seed < 3; ++seed, ++seeds_used) {
            Tensor x = Tensor::from_data({8}, oracle::random_vec(8, 30 + seed, -2.0, 2.0), true);
            Tensor m = Tensor::from_data({8}, oracle::random_vec(8, 40 + seed), false);
            auto loss = [&]() { return sum_all(mul(gelu(x), m)); };
            CHECK(oracle::grad_check_rel_err(loss, {x}) < tol);
        }
    }
    SUBCASE("softmax on both axes") {
        for (uint64_t seed = 0; seed < 3; ++seed, ++seeds_used) {
            Tensor x = Tensor::from_data({3, 5}, oracle::random_vec(15, 50 + seed, -2.0, 2.0), true);
            Tensor m = Tensor::from_data({3, 5}, oracle::random_vec(15, 55 + seed), false);
            auto loss_last = [&]() { return sum_all(mul(softmax(x, 1), m)); };
            CHECK(oracle::grad_check_rel_err(loss_last, {x}) < tol);
            auto loss_first = [&]() { return sum_all(mul(softmax(x, 0), m)); };
            CHECK(oracle::grad_check_rel_err(loss_first, {x}) < tol);
        }
    }
    SUBCASE("layer_norm including scale and shift") {
        for (uint64_t seed = 0; seed < 3; ++seed, ++seeds_used) {
            Tensor x = Tensor::from_data({4, 6}, oracle::random_vec(24, 10 + seed), true);
            Tensor gamma = Tensor::from_data({6}, oracle::random_vec(6, 20 + seed, 0.5, 1.5), true);
            Tensor beta = Tensor::from_data({6}, oracle::random_vec(6, 25 + seed), true);
            Tensor m = Tensor::from_data({4, 6}, oracle::random_vec(24, 35 + seed), false);
            auto loss = [&]() { return sum_all(mul(layer_norm(x, gamma, beta, 1e-6, 1), m)); };
            CHECK(oracle::grad_check_rel_err(loss, {x, gamma, beta}) < tol);
        }
    }
    SUBCASE("views and reductions") {
        for (uint64_t seed = 0; seed < 3; ++seed, ++seeds_used) {
            Tensor x = Tensor::from_data({2, 3, 4}, oracle::random_vec(24, 110 + seed), true);
            Tensor m = Tensor::from_data({4, 3}, oracle::random_vec(12, 120 + seed), false);
            auto loss = [&]() {
                Tensor p = permute(x, {2, 1, 0});         // (4,3,2)
                Tensor n = narrow(p, 2, 1, 1);            // (4,3,1)
                Tensor r = reshape(n, {4, 3});
                return sum_all(mul(mean_axis(x, 1), mean_axis(x, 1))) + sum_all(mul(r, m));
            };
            CHECK(oracle::grad_check_rel_err(loss, {x}) < tol);
        }
    }
    SUBCASE("broadcast add routes gradients to both operands") {
        Tensor x = Tensor::from_data({2, 3, 4}, oracle::random_vec(24, 130), true);
        Tensor bias = Tensor::from_data({4}, oracle::random_vec(4, 131), true);
        auto loss = [&]() { return sum_all(gelu(x + bias)); };
        CHECK(oracle::grad_check_rel_err(loss, {x, bias}) < tol);
        seeds_used += 1;
    }
    SUBCASE("classifier composite with cross entropy") {
        for (uint64_t seed = 0; seed < 3; ++seed, ++seeds_used) {
            Tensor x = Tensor::from_data({4, 5}, oracle::random_vec(20, 140 + seed), true);
            Tensor w1 = Tensor::from_data({5, 6}, oracle::random_vec(30, 150 + seed), true);
            Tensor w2 = Tensor::from_data({6, 3}, oracle::random_vec(18, 160 + seed), true);
            std::vector<int> labels = {0, 2, 1, 2};
            auto loss = [&]() { return cross_entropy_logits(matmul(gelu(matmul(x, w1)), w2), labels); };
            CHECK(oracle::grad_check_rel_err(loss, {x, w1, w2}) < tol);
        }
    }
}

TEST_CASE("tape contracts") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);

    SUBCASE("backward twice without clear is rejected") {
        ComputationTape tape;
        Tensor loss = sum_all(mul(x, x));
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), ContractError);
    }
    SUBCASE("clear allows reuse") {
        ComputationTape tape;
        Tensor loss = sum_all(mul(x, x));
        tape.backward(loss);
        tape.clear();
        x.zero_grad();
        Tensor loss2 = sum_all(mul(x, x));
        tape.backward(loss2);
        CHECK(x.grad()[0] == doctest::Approx(2.0));
        CHECK(x.grad()[1] == doctest::Approx(4.0));
    }
    SUBCASE("non-scalar loss is rejected") {
        ComputationTape tape;
        Tensor y = mul(x, x);
        CHECK_THROWS_AS(tape.backward(y), ContractError);
    }
    SUBCASE("a leaf or detached tensor is not a valid loss") {
        ComputationTape tape;
        Tensor leaf = Tensor::full({1}, 3.0, true);
        CHECK_THROWS_AS(tape.backward(leaf), ContractError);
        Tensor computed_elsewhere = [&]() {
            ComputationTape inner;
            return sum_all(mul(x, x));
        }();
        CHECK_THROWS_AS(tape.backward(computed_elsewhere), ContractError);
    }
    SUBCASE("no recording happens without an active tape") {
        Tensor y = sum_all(mul(x, x));
        CHECK_FALSE(y.requires_grad());
    }
    SUBCASE("gradients accumulate across uses of the same tensor") {
        x.zero_grad();
        ComputationTape tape;
        Tensor loss = sum_all(mul(x, x)) + sum_all(x);
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(3.0));  // 2*1 + 1
        CHECK(x.grad()[1] == doctest::Approx(5.0));  // 2*2 + 1
    }
}

TEST_CASE("gradients flow through reshape because storage is shared") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    ComputationTape tape;
    Tensor flat = reshape(x, {6});
    Tensor loss = sum_all(mul(flat, flat));
    tape.backward(loss);
    CHECK(x.grad()[4] == doctest::Approx(10.0));
}

TEST_CASE("identical graphs produce bitwise identical results and gradients") {
    auto run = [](std::vector<double>* grads) {
        Tensor x = Tensor::from_data({2, 3, 4, 4}, oracle::random_vec(96, 9001), true);
        Tensor w = Tensor::from_data({5, 3, 3, 3}, oracle::random_vec(135, 9002), true);
        ComputationTape tape;
        Tensor y = conv2d(x, w, Tensor(), 1, 1, 1);
        Tensor z = softmax(reshape(gelu(y), {2, 5 * 16}), 1);
        Tensor loss = sum_all(mul(z, z));
        tape.backward(loss);
        *grads = w.grad();
        return loss.item();
    };
    std::vector<double> g1, g2;
    const double l1 = run(&g1);
    const double l2 = run(&g2);
    CHECK(l1 == l2);
    CHECK(oracle::max_abs_diff(g1, g2) == 0.0);
}
