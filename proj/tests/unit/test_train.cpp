#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "biaslens/error.hpp"
#include "biaslens/net.hpp"
#include "biaslens/rng.hpp"

using namespace biaslens;
using net::ArchSpec;
using net::ExampleSet;
using net::TrainConfig;

namespace {

ArchSpec small_arch(int classes) {
    ArchSpec a;
    a.input_h = a.input_w = 8;
    a.conv_filters = {4};
    a.fc_widths = {8, classes};
    a.num_classes = classes;
    return a;
}

// Two linearly separable classes: bright vs dark images with mild noise.
ExampleSet bright_dark(SplitMix64& rng, int n) {
    ExampleSet set;
    set.height = set.width = 8;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        const double base = label == 0 ? 0.2 : 0.8;
        std::vector<double> img(64);
        for (double& v : img) v = base + rng.next_double(-0.05, 0.05);
        set.images.push_back(std::move(img));
        set.labels.push_back(label);
    }
    return set;
}

}  // namespace

TEST_CASE("training twice with the same seed is bit-identical") {
    SplitMix64 rng(50);
    const auto train_set = bright_dark(rng, 24);
    const auto val_set = bright_dark(rng, 8);
    const auto arch = small_arch(2);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 9;

    const auto m1 = net::train(train_set, val_set, arch, cfg);
    const auto m2 = net::train(train_set, val_set, arch, cfg);
    REQUIRE(m1.params.tensors.size() == m2.params.tensors.size());
    for (size_t t = 0; t < m1.params.tensors.size(); ++t)
        CHECK(m1.params.tensors[t] == m2.params.tensors[t]);
    REQUIRE(m1.history.size() == m2.history.size());
    for (size_t e = 0; e < m1.history.size(); ++e) {
        CHECK(m1.history[e].train_loss == m2.history[e].train_loss);
        CHECK(m1.history[e].val_acc == m2.history[e].val_acc);
    }
}

TEST_CASE("separable bright/dark task reaches 100% train accuracy in 5 epochs") {
    SplitMix64 rng(51);
    const auto train_set = bright_dark(rng, 40);
    const auto val_set = bright_dark(rng, 10);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.seed = 2;
    const auto model = net::train(train_set, val_set, small_arch(2), cfg);
    CHECK(model.history.size() == 5);
    CHECK(model.history.back().train_acc == doctest::Approx(1.0));
}

TEST_CASE("history length equals epochs") {
    SplitMix64 rng(52);
    const auto train_set = bright_dark(rng, 12);
    const auto val_set = bright_dark(rng, 4);
    TrainConfig cfg;
    cfg.epochs = 7;
    cfg.batch_size = 4;
    const auto model = net::train(train_set, val_set, small_arch(2), cfg);
    CHECK(model.history.size() == 7);
}

TEST_CASE("a class missing from the train split is a dataset error") {
    SplitMix64 rng(53);
    auto train_set = bright_dark(rng, 10);
    for (auto& label : train_set.labels) label = 0;  // class 1 vanishes
    const auto val_set = bright_dark(rng, 4);
    TrainConfig cfg;
    CHECK_THROWS_AS(net::train(train_set, val_set, small_arch(2), cfg), DatasetError);
}

TEST_CASE("all-zero logits predict class 0 everywhere (tie toward lower id)") {
    const auto arch = small_arch(4);
    net::TrainedModel model;
    model.arch = arch;
    model.params = net::init_params(arch, 1);
    for (auto& t : model.params.tensors)
        for (double& v : t) v = 0.0;

    SplitMix64 rng(54);
    ExampleSet data;
    data.height = data.width = 8;
    int class0 = 0;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> img(64);
        for (double& v : img) v = rng.next_double();
        data.images.push_back(std::move(img));
        const int label = static_cast<int>(rng.next_below(4));
        class0 += label == 0 ? 1 : 0;
        data.labels.push_back(label);
    }
    const auto metrics = net::evaluate(model, data);
    CHECK(metrics.n == 20);
    CHECK(metrics.accuracy == doctest::Approx(class0 / 20.0));
    // Every prediction lands in column 0.
    for (int t = 0; t < 4; ++t)
        for (int p = 1; p < 4; ++p) CHECK(metrics.confusion[t * 4 + p] == 0);
}

TEST_CASE("confusion matrix row sums equal per-class counts") {
    SplitMix64 rng(55);
    const auto train_set = bright_dark(rng, 20);
    const auto val_set = bright_dark(rng, 6);
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto model = net::train(train_set, val_set, small_arch(2), cfg);
    const auto data = bright_dark(rng, 30);
    const auto metrics = net::evaluate(model, data);
    int total = 0;
    for (int t = 0; t < 2; ++t) {
        int row = 0;
        for (int p = 0; p < 2; ++p) row += metrics.confusion[t * 2 + p];
        int want = 0;
        for (const int label : data.labels) want += label == t ? 1 : 0;
        CHECK(row == want);
        total += row;
    }
    CHECK(total == metrics.n);
}

TEST_CASE("20 memorizable images are memorized: diagonal confusion") {
    SplitMix64 rng(56);
    const auto train_set = bright_dark(rng, 20);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 15;
    cfg.batch_size = 5;
    const auto model = net::train(train_set, train_set, small_arch(2), cfg);
    const auto metrics = net::evaluate(model, train_set);
    CHECK(metrics.accuracy == doctest::Approx(1.0));
    CHECK(metrics.confusion[0 * 2 + 1] == 0);
    CHECK(metrics.confusion[1 * 2 + 0] == 0);
}

TEST_CASE("per-item outputs are pure functions of pixels and parameters") {
    SplitMix64 rng(57);
    const auto train_set = bright_dark(rng, 16);
    const auto val_set = bright_dark(rng, 4);
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto model = net::train(train_set, val_set, small_arch(2), cfg);

    auto data = bright_dark(rng, 12);
    std::vector<std::vector<double>> per_item;
    for (const auto& img : data.images)
        per_item.push_back(net::forward_logits(model.arch, model.params, img));

    // Reversing dataset order must not change any per-item logits.
    ExampleSet reversed;
    reversed.height = reversed.width = 8;
    for (size_t i = data.images.size(); i-- > 0;) {
        reversed.images.push_back(data.images[i]);
        reversed.labels.push_back(data.labels[i]);
    }
    for (size_t i = 0; i < reversed.images.size(); ++i) {
        const auto logits =
            net::forward_logits(model.arch, model.params, reversed.images[i]);
        CHECK(logits == per_item[per_item.size() - 1 - i]);
    }
}

TEST_CASE("checkpoint round trip preserves predictions") {
    SplitMix64 rng(58);
    const auto train_set = bright_dark(rng, 16);
    const auto val_set = bright_dark(rng, 4);
    TrainConfig cfg;
    cfg.epochs = 3;
    const auto model = net::train(train_set, val_set, small_arch(2), cfg);

    const auto path = std::filesystem::temp_directory_path() / "biaslens_ckpt.blns";
    net::save_model(model, path);
    const auto loaded = net::load_model(path);
    CHECK(loaded.arch.num_classes == 2);
    CHECK(loaded.arch.conv_filters == model.arch.conv_filters);

    // float32 storage: parameters agree to float precision, predictions agree.
    const auto data = bright_dark(rng, 20);
    const auto m1 = net::evaluate(model, data);
    const auto m2 = net::evaluate(loaded, data);
    CHECK(m1.accuracy == m2.accuracy);
    for (size_t t = 0; t < model.params.tensors.size(); ++t)
        for (size_t i = 0; i < model.params.tensors[t].size(); ++i)
            CHECK(std::abs(model.params.tensors[t][i] -
                           loaded.params.tensors[t][i]) < 1e-6);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto path = std::filesystem::temp_directory_path() / "biaslens_bad.blns";
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOPE1234";
    }
    CHECK_THROWS_AS(net::load_model(path), FormatError);
}

TEST_CASE("single-model ensemble equals plain prediction") {
    SplitMix64 rng(59);
    const auto train_set = bright_dark(rng, 16);
    const auto val_set = bright_dark(rng, 4);
    TrainConfig cfg;
    cfg.epochs = 3;
    const auto model = net::train(train_set, val_set, small_arch(2), cfg);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> pix(64);
        for (double& v : pix) v = rng.next_double();
        const auto img = image::make_image(8, 8, 1, std::move(pix));
        const auto probs = net::predict_probs(model, img);
        const int plain = probs[1] > probs[0] ? 1 : 0;
        const int ens = net::ensemble_predict({&model},
                                              {transforms::TransformSpec::identity()},
                                              img);
        CHECK(ens == plain);
    }
}

TEST_CASE("ensemble averages softmax vectors: hand example") {
    // Two bias-only models on a 1x1 input: logits = b, so softmax outputs
    // are exactly (0.6,0.4) and (0.2,0.8); the average (0.4,0.6) picks 1.
    ArchSpec a;
    a.input_h = a.input_w = 1;
    a.conv_filters = {};
    a.fc_widths = {2};
    a.num_classes = 2;

    net::TrainedModel m1, m2;
    m1.arch = m2.arch = a;
    m1.params = net::init_params(a, 1);
    m2.params = net::init_params(a, 1);
    for (auto* m : {&m1, &m2})
        for (auto& t : m->params.tensors)
            for (double& v : t) v = 0.0;
    m1.params.tensors[1] = {std::log(0.6), std::log(0.4)};
    m2.params.tensors[1] = {std::log(0.2), std::log(0.8)};

    const auto img = image::constant_image(1, 1, 1, 0.5);
    CHECK(net::predict_probs(m1, img)[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(net::predict_probs(m2, img)[1] == doctest::Approx(0.8).epsilon(1e-12));

    const std::vector<const net::TrainedModel*> models = {&m1, &m2};
    const std::vector<transforms::TransformSpec> specs = {
        transforms::TransformSpec::identity(), transforms::TransformSpec::identity()};
    CHECK(net::ensemble_predict(models, specs, img) == 1);
}

TEST_CASE("ensemble length mismatch is a parameter error") {
    net::TrainedModel m;
    m.arch = small_arch(2);
    m.params = net::init_params(m.arch, 1);
    const auto img = image::constant_image(8, 8, 1, 0.5);
    CHECK_THROWS_AS(net::ensemble_predict({&m}, {}, img), ParameterError);
    CHECK_THROWS_AS(net::ensemble_predict({}, {}, img), ParameterError);
}
