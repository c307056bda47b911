#include <doctest.h>

#include <cmath>
#include <numeric>

#include "biaslens/error.hpp"
#include "biaslens/net.hpp"
#include "biaslens/rng.hpp"

using namespace biaslens;
using net::ArchSpec;
using net::ExampleSet;
using net::Params;
using net::TrainConfig;

namespace {

ArchSpec tiny_arch(int input, std::vector<int> blocks, std::vector<int> fc,
                   int classes) {
    ArchSpec a;
    a.input_h = a.input_w = input;
    a.conv_filters = std::move(blocks);
    a.fc_widths = std::move(fc);
    a.num_classes = classes;
    return a;
}

ExampleSet random_examples(SplitMix64& rng, int n, int size, int classes) {
    ExampleSet set;
    set.height = set.width = size;
    for (int i = 0; i < n; ++i) {
        std::vector<double> img(static_cast<size_t>(size) * size);
        for (double& v : img) v = rng.next_double();
        set.images.push_back(std::move(img));
        set.labels.push_back(static_cast<int>(rng.next_below(classes)));
    }
    return set;
}

void zero_params(Params& p) {
    for (auto& t : p.tensors)
        for (double& v : t) v = 0.0;
}

}  // namespace

TEST_CASE("init is deterministic with zero biases") {
    const auto arch = tiny_arch(8, {4, 8}, {16, 3}, 3);
    const auto a = net::init_params(arch, 77);
    const auto b = net::init_params(arch, 77);
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (size_t t = 0; t < a.tensors.size(); ++t) CHECK(a.tensors[t] == b.tensors[t]);
    const auto c = net::init_params(arch, 78);
    CHECK(a.tensors[0] != c.tensors[0]);
    // Declaration order: conv W, conv b, ... ; odd indices are biases.
    for (size_t t = 1; t < a.tensors.size(); t += 2)
        for (const double v : a.tensors[t]) CHECK(v == 0.0);
}

TEST_CASE("He init variance: 3x3x64 fan-in within 20% of 2/576") {
    const auto arch = tiny_arch(8, {64, 64}, {3}, 3);
    const auto p = net::init_params(arch, 5);
    const auto& w = p.tensors[2];  // second block: 64 filters x 64 channels x 9
    REQUIRE(w.size() == 64 * 64 * 9);
    double mean = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
    double var = 0.0;
    for (const double v : w) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.size());
    const double target = 2.0 / 576.0;
    CHECK(var > 0.8 * target);
    CHECK(var < 1.2 * target);
}

TEST_CASE("zero parameters give zero logits") {
    const auto arch = tiny_arch(8, {2}, {4, 3}, 3);
    auto params = net::init_params(arch, 1);
    zero_params(params);
    const std::vector<double> img(64, 0.0);
    const auto logits = net::forward_logits(arch, params, img);
    for (const double v : logits) CHECK(v == 0.0);
}

TEST_CASE("three pooling stages bring 64x64 to 8x8 before the FC stack") {
    const auto arch = tiny_arch(64, {1, 1, 1}, {2}, 2);
    const auto p = net::init_params(arch, 1);
    // FC weight tensor is num_classes x (1 channel * 8 * 8).
    CHECK(p.tensors[6].size() == 2u * 64u);
}

TEST_CASE("hand-computed forward trace, center-tap conv") {
    // 4x4 input 1..16 (scaled), conv kernel = 2 at the center tap, bias 0.1:
    // z = 2x + 0.1, all positive. Pool maxima are the block bottom-right
    // values: 0.85, 1.10, 1.85, 2.10. FC then gives {0.90, -0.55}.
    const auto arch = tiny_arch(4, {1}, {2}, 2);
    auto params = net::init_params(arch, 1);
    zero_params(params);
    params.tensors[0][4] = 2.0;   // center of the 3x3 kernel
    params.tensors[1][0] = 0.1;   // conv bias
    params.tensors[2] = {1, 0, 0, 0, 0.5, 0.5, -1, 0.25};
    params.tensors[3] = {0.05, -0.2};

    std::vector<double> img(16);
    for (int i = 0; i < 16; ++i) img[i] = (i + 1) / 16.0;
    const auto logits = net::forward_logits(arch, params, img);
    CHECK(logits[0] == doctest::Approx(0.90).epsilon(1e-12));
    CHECK(logits[1] == doctest::Approx(-0.55).epsilon(1e-12));
}

TEST_CASE("hand-computed forward trace, off-center tap exercises padding") {
    // Kernel tap at (ky=0,kx=1): z[y][x] = in[y-1][x], zero at the first row.
    // Input {0.2,0.4;0.6,0.8} -> z = {0,0;0.2,0.4} -> pool max 0.4.
    // FC W {{2},{-1}}, b {0,0.1} -> logits {0.8, -0.3}.
    const auto arch = tiny_arch(2, {1}, {2}, 2);
    auto params = net::init_params(arch, 1);
    zero_params(params);
    params.tensors[0][1] = 1.0;
    params.tensors[2] = {2, -1};
    params.tensors[3] = {0, 0.1};
    const std::vector<double> img = {0.2, 0.4, 0.6, 0.8};
    const auto logits = net::forward_logits(arch, params, img);
    CHECK(logits[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(logits[1] == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("softmax rows are non-negative and sum to 1") {
    SplitMix64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(5);
        for (double& v : logits) v = rng.next_double(-30.0, 30.0);
        const auto p = net::softmax(logits);
        double sum = 0.0;
        for (const double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("uniform logits give loss ln(C)") {
    const auto arch = tiny_arch(8, {2}, {5, 10}, 10);
    auto params = net::init_params(arch, 3);
    zero_params(params);
    SplitMix64 rng(4);
    auto data = random_examples(rng, 10, 8, 10);
    Params grads;
    const std::vector<size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const double loss = net::loss_and_grads(arch, params, data, batch, grads);
    CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("a freshly initialized model starts at ln(C): zero head") {
    const auto arch = tiny_arch(8, {2, 4}, {6, 4}, 4);
    auto params = net::init_params(arch, 99);
    SplitMix64 rng(5);
    auto data = random_examples(rng, 8, 8, 4);
    Params grads;
    const std::vector<size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
    const double loss = net::loss_and_grads(arch, params, data, batch, grads);
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("duplicating every batch item changes neither loss nor gradients") {
    const auto arch = tiny_arch(8, {2}, {4, 3}, 3);
    const auto params = net::init_params(arch, 11);
    SplitMix64 rng(12);
    auto data = random_examples(rng, 6, 8, 3);

    Params g1, g2;
    const std::vector<size_t> batch = {0, 1, 2, 3, 4, 5};
    std::vector<size_t> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    const double l1 = net::loss_and_grads(arch, params, data, batch, g1);
    const double l2 = net::loss_and_grads(arch, params, data, doubled, g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-13));
    for (size_t t = 0; t < g1.tensors.size(); ++t)
        for (size_t i = 0; i < g1.tensors[t].size(); ++i)
            CHECK(g1.tensors[t][i] == doctest::Approx(g2.tensors[t][i]).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto arch = tiny_arch(8, {2, 3}, {5, 3}, 3);
    SplitMix64 rng(21);
    auto data = random_examples(rng, 4, 8, 3);
    const std::vector<size_t> batch = {0, 1, 2, 3};

    for (const uint64_t seed : {1ull, 2ull}) {
        auto params = net::init_params(arch, seed);
        // Warm up past the zero head so every layer carries real gradient.
        net::RmspropState state;
        TrainConfig warm;
        warm.learning_rate = 1e-2;
        for (int step = 0; step < 3; ++step) {
            Params g;
            net::loss_and_grads(arch, params, data, batch, g);
            net::rmsprop_step(params, g, state, warm);
        }
        Params grads;
        net::loss_and_grads(arch, params, data, batch, grads);

        const double h = 1e-4;
        double worst = 0.0;
        for (size_t t = 0; t < params.tensors.size(); ++t) {
            for (size_t i = 0; i < params.tensors[t].size(); ++i) {
                const double keep = params.tensors[t][i];
                Params scratch;
                params.tensors[t][i] = keep + h;
                const double up = net::loss_and_grads(arch, params, data, batch, scratch);
                params.tensors[t][i] = keep - h;
                const double dn = net::loss_and_grads(arch, params, data, batch, scratch);
                params.tensors[t][i] = keep;
                const double numeric = (up - dn) / (2.0 * h);
                const double analytic = grads.tensors[t][i];
                const double rel = std::abs(analytic - numeric) /
                                   std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                worst = std::max(worst, rel);
            }
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("rmsprop: zero gradient leaves parameters unchanged") {
    const auto arch = tiny_arch(4, {1}, {2}, 2);
    auto params = net::init_params(arch, 31);
    const auto before = params;
    Params grads;
    net::RmspropState state;
    // Zero grads of the right shapes.
    grads.tensors = params.tensors;
    for (auto& t : grads.tensors)
        for (double& v : t) v = 0.0;
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    net::rmsprop_step(params, grads, state, cfg);
    for (size_t t = 0; t < params.tensors.size(); ++t)
        CHECK(params.tensors[t] == before.tensors[t]);
}

TEST_CASE("rmsprop single step matches the hand computation") {
    // g=1, rho=0.9, lr=0.1, eps=1e-8: s=0.1, delta = -0.1/(sqrt(0.1)+1e-8).
    const auto arch = tiny_arch(4, {1}, {2}, 2);
    auto params = net::init_params(arch, 32);
    auto grads = params;
    for (auto& t : grads.tensors)
        for (double& v : t) v = 1.0;
    const auto before = params;
    net::RmspropState state;
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.rho = 0.9;
    cfg.epsilon = 1e-8;
    net::rmsprop_step(params, grads, state, cfg);
    const double expected_delta = -0.1 / (std::sqrt(0.1) + 1e-8);
    CHECK(expected_delta == doctest::Approx(-0.31622776).epsilon(1e-7));
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        for (size_t i = 0; i < params.tensors[t].size(); ++i) {
            CHECK(params.tensors[t][i] - before.tensors[t][i] ==
                  doctest::Approx(expected_delta).epsilon(1e-12));
            CHECK(state.sq_avg[t][i] == doctest::Approx(0.1).epsilon(1e-12));
        }
    }
}

TEST_CASE("rmsprop updates tensors independently") {
    const auto arch = tiny_arch(4, {1}, {2}, 2);
    auto params = net::init_params(arch, 33);
    auto grads = params;
    for (auto& t : grads.tensors)
        for (double& v : t) v = 0.0;
    for (double& v : grads.tensors[0]) v = 2.0;  // only the conv weights move
    const auto before = params;
    net::RmspropState state;
    TrainConfig cfg;
    net::rmsprop_step(params, grads, state, cfg);
    CHECK(params.tensors[0] != before.tensors[0]);
    for (size_t t = 1; t < params.tensors.size(); ++t)
        CHECK(params.tensors[t] == before.tensors[t]);
}

TEST_CASE("arch validation catches contract violations") {
    CHECK_THROWS_AS(net::validate_arch(tiny_arch(8, {2}, {4, 5}, 3)), ParameterError);
    CHECK_THROWS_AS(net::validate_arch(tiny_arch(10, {2, 2}, {3}, 3)), ParameterError);
    CHECK_THROWS_AS(net::validate_arch(tiny_arch(8, {2}, {}, 3)), ParameterError);
    CHECK_THROWS_AS(net::validate_arch(tiny_arch(8, {2}, {1}, 1)), ParameterError);
    CHECK_NOTHROW(net::validate_arch(tiny_arch(8, {}, {4, 2}, 2)));
}

TEST_CASE("shape mismatches name the offending layer") {
    const auto arch = tiny_arch(8, {2}, {4, 3}, 3);
    const auto params = net::init_params(arch, 41);
    const std::vector<double> wrong(10 * 10, 0.1);
    CHECK_THROWS_WITH_AS(net::forward_logits(arch, params, wrong),
                         doctest::Contains("input layer"), ShapeError);
}
