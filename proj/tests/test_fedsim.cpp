#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "ghost/fedsim.hpp"
#include "ghost/synth.hpp"

using namespace ghost;

namespace {

SynthCorpus fixture_corpus() {
    SynthSpec spec;
    spec.vocab_size = 80;
    spec.dim = 8;
    spec.n_lemma_clusters = 16;
    spec.cluster_radius = 0.9;
    spec.signal_strength = 4.0;
    spec.signal_tokens_per_class = 12;
    spec.n_train = 80;
    spec.n_test = 20;
    spec.seed = 5;
    return generate_corpus(spec);
}

ToyModel fixture_model(const SynthCorpus& corpus, int layers = 2) {
    ModelConfig cfg;
    cfg.n_layers = layers;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.max_len = 12;
    cfg.n_classes = 2;
    cfg.seed = 13;
    return ToyModel::init_with_embeddings(cfg, corpus.table);
}

GradientSnapshot demo_gradient(size_t n, double value = 1.0) {
    GradientSnapshot g;
    g.segments = {{"all", 0, n, 1, static_cast<int>(n)}};
    g.values.assign(n, value);
    return g;
}

}  // namespace

TEST_SUITE("fedsim") {

TEST_CASE("noise defense: degenerate and clipping cases") {
    auto g = demo_gradient(16, 0.1);  // norm 0.4
    auto same = apply_noise_defense(g, 0.0, 1.0, 7);
    CHECK(same.values == g.values);

    // norm 2C clips to exactly C
    auto big = demo_gradient(16, 1.0);  // norm 4
    auto clipped = apply_noise_defense(big, 0.0, 2.0, 7);
    CHECK(clipped.l2_norm() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("noise defense perturbation magnitude matches sigma*C*sqrt(dim)") {
    const size_t dim = 400;
    auto g = demo_gradient(dim, 0.0);
    const double sigma = 0.05, clip = 1.0;
    double mean_l2 = 0.0;
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
        auto noisy = apply_noise_defense(g, sigma, clip, static_cast<uint64_t>(s));
        double norm = 0.0;
        for (double v : noisy.values) norm += v * v;
        mean_l2 += std::sqrt(norm);
    }
    mean_l2 /= seeds;
    const double expected = sigma * clip * std::sqrt(static_cast<double>(dim));
    CHECK(mean_l2 == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("prune defense zeroes exactly the requested fraction") {
    auto g = demo_gradient(10, 2.0);
    auto same = apply_prune_defense(g, 0.0, 3);
    CHECK(same.values == g.values);
    auto zeroed = apply_prune_defense(g, 1.0, 3);
    for (double v : zeroed.values) CHECK(v == 0.0);
    auto half = apply_prune_defense(g, 0.5, 3);
    int zeros = 0;
    for (double v : half.values) zeros += v == 0.0 ? 1 : 0;
    CHECK(zeros == 5);
    // defense preserves length and segment map
    CHECK(half.values.size() == g.values.size());
    CHECK(half.segments.size() == g.segments.size());
}

TEST_CASE("zero learning rate trains nothing but still logs") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus);
    FedConfig cfg;
    cfg.lr = 0.0;
    cfg.max_epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 3;
    auto result = fedsgd_run(model, corpus.train, cfg);
    CHECK(result.model.params() == model.params());
    CHECK(!result.rounds.empty());
    for (const auto& r : result.rounds) CHECK(r.gradient.size() == model.params().size());
}

TEST_CASE("training reaches high accuracy on the separable corpus") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus);
    FedConfig cfg;
    cfg.lr = 1e-2;
    cfg.max_epochs = 100;
    cfg.patience = 20;
    cfg.batch_size = 16;
    cfg.seed = 11;
    auto result = fedsgd_run(model, corpus.train, cfg);
    const auto report = evaluate(result.model, corpus.train);
    CHECK(report.accuracy >= 0.95);
}

TEST_CASE("identical seeds give identical round logs") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus, 1);
    FedConfig cfg;
    cfg.lr = 1e-3;
    cfg.max_epochs = 2;
    cfg.batch_size = 8;
    cfg.defense = DefenseKind::noise;
    cfg.seed = 17;
    auto a = fedsgd_run(model, corpus.train, cfg);
    auto b = fedsgd_run(model, corpus.train, cfg);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].gradient == b.rounds[i].gradient);
        CHECK(a.rounds[i].batch_ids == b.rounds[i].batch_ids);
        CHECK(a.rounds[i].loss == b.rounds[i].loss);
    }
}

TEST_CASE("ghost defense logs raw gradients of the obfuscated batch") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus, 1);
    FedConfig cfg;
    cfg.lr = 1e-4;
    cfg.max_epochs = 1;
    cfg.batch_size = 4;
    cfg.defense = DefenseKind::ghost;
    cfg.seed = 19;
    auto result = fedsgd_run(model, corpus.train, cfg);
    // replay: same batches by logged ids, raw gradient must match the log
    ToyModel replay = model;
    for (const auto& log : result.rounds) {
        std::vector<LabeledSentence> batch;
        for (size_t id : log.batch_ids) batch.push_back(corpus.train[id]);
        auto [loss, grad] = replay.loss_and_gradients(batch);
        CHECK(loss == log.loss);
        REQUIRE(grad.values.size() == log.gradient.size());
        for (size_t i = 0; i < grad.values.size(); ++i)
            CHECK(static_cast<float>(grad.values[i]) == log.gradient[i]);
        replay.sgd_step(grad, cfg.lr);
    }
}

TEST_CASE("early stopping respects patience and max epochs") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus, 1);
    FedConfig cfg;
    cfg.lr = 0.0;  // eval loss can never improve after the first epoch
    cfg.max_epochs = 30;
    cfg.patience = 3;
    cfg.batch_size = 16;
    cfg.seed = 23;
    auto result = fedsgd_run(model, corpus.train, cfg);
    CHECK(result.early_stopped);
    CHECK(result.epochs_run == 4);  // epoch 1 sets the best, 3 stale epochs follow
}

TEST_CASE("evaluate reports uniform-logit loss for a zeroed head") {
    auto corpus = fixture_corpus();
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 8;
    cfg.max_len = 12;
    cfg.n_classes = 4;
    cfg.seed = 3;
    auto model = ToyModel::init_with_embeddings(cfg, corpus.table);
    for (auto& v : model.segment("head.w")) v = 0.0;
    for (auto& v : model.segment("head.b")) v = 0.0;
    std::vector<LabeledSentence> data(corpus.train.begin(), corpus.train.begin() + 10);
    for (auto& s : data) s.label = static_cast<int>(&s - data.data()) % 4;
    auto rep = evaluate(model, data);
    CHECK(rep.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(rep.perplexity == doctest::Approx(4.0).epsilon(1e-9));
    auto rep2 = evaluate(model, data);
    CHECK(rep.loss == rep2.loss);
    CHECK(rep.accuracy == rep2.accuracy);
}

TEST_CASE("round log archive round trips") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus, 1);
    FedConfig cfg;
    cfg.lr = 1e-3;
    cfg.max_epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 29;
    auto result = fedsgd_run(model, corpus.train, cfg);
    const std::string path = "fedsim_rounds_test.jsonl";
    save_round_logs(path, cfg, result.rounds);
    auto [cfg2, rounds2] = load_round_logs(path);
    std::remove(path.c_str());
    CHECK(cfg2.batch_size == cfg.batch_size);
    CHECK(cfg2.seed == cfg.seed);
    REQUIRE(rounds2.size() == result.rounds.size());
    for (size_t i = 0; i < rounds2.size(); ++i) {
        CHECK(rounds2[i].gradient == result.rounds[i].gradient);
        CHECK(rounds2[i].batch_ids == result.rounds[i].batch_ids);
    }
}

TEST_CASE("bad inputs are rejected") {
    auto corpus = fixture_corpus();
    auto model = fixture_model(corpus, 1);
    FedConfig cfg;
    CHECK_THROWS_AS(fedsgd_run(model, {}, cfg), Error);
    cfg.eval_split = 1.5;
    CHECK_THROWS_AS(fedsgd_run(model, corpus.train, cfg), Error);
    CHECK_THROWS_AS(evaluate(model, {}), Error);
    auto g = demo_gradient(4);
    CHECK_THROWS_AS(apply_noise_defense(g, -1.0, 1.0, 1), Error);
    CHECK_THROWS_AS(apply_prune_defense(g, 1.5, 1), Error);
}

}  // TEST_SUITE
