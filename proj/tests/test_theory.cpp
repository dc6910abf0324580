#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "ghost/fedsim.hpp"
#include "ghost/theory.hpp"
#include "ghost/synth.hpp"

using namespace ghost;

namespace {

struct TheoryFixture {
    SynthCorpus corpus;
    ToyModel pretrained;
    std::vector<ObfuscatedPair> pairs;

    TheoryFixture() : corpus(make_corpus()), pretrained(make_model(corpus)) {
        ShadowParams sp;
        sp.k0 = 5;
        sp.tau_o = 0.5;
        auto map = search_shadow_tokens(corpus.vocab, corpus.table, corpus.lemmas, sp, 2);
        SelectConfig sel;
        sel.seed = 41;
        auto [all_pairs, stats] = obfuscate_dataset(corpus.train, pretrained, map, sel, 2);
        (void)stats;
        pairs = std::move(all_pairs);
    }

    static SynthCorpus make_corpus() {
        SynthSpec spec;
        spec.vocab_size = 60;
        spec.dim = 8;
        spec.n_lemma_clusters = 12;
        spec.cluster_radius = 0.9;
        spec.signal_strength = 4.0;
        spec.signal_tokens_per_class = 10;
        spec.n_train = 60;
        spec.n_test = 10;
        spec.seed = 7;
        return generate_corpus(spec);
    }
    static ToyModel make_model(const SynthCorpus& corpus) {
        ModelConfig cfg;
        cfg.n_layers = 2;
        cfg.n_heads = 2;
        cfg.d_ff = 16;
        cfg.max_len = 12;
        cfg.n_classes = 2;
        cfg.seed = 43;
        return ToyModel::init_with_embeddings(cfg, corpus.table);
    }
};

}  // namespace

TEST_SUITE("theory") {

TEST_CASE("identical models give zero drift; identical pairs give zero deviation") {
    TheoryFixture fx;
    std::vector<ObfuscatedPair> degenerate;
    for (int i = 0; i < 5; ++i) {
        ObfuscatedPair p;
        p.original = fx.corpus.train[static_cast<size_t>(i)];
        p.obfuscated = p.original;
        degenerate.push_back(p);
    }
    auto set = compute_deviations(fx.pretrained, fx.pretrained, fx.pretrained, degenerate);
    CHECK(set.drift.eps_theta_star == 0.0);
    CHECK(set.drift.eps_theta_tilde == 0.0);
    for (const auto& r : set.records) {
        CHECK(r.eps_l == 0.0);
        CHECK(r.eps_g == 0.0);
        CHECK(r.dev_l_tuned == 0.0);
        CHECK(r.dev_g_tuned == 0.0);
        CHECK(r.global_eps == 0.0);
    }
}

TEST_CASE("all quantities are non-negative and finite") {
    TheoryFixture fx;
    std::vector<ObfuscatedPair> sample(fx.pairs.begin(), fx.pairs.begin() + 20);
    auto set = compute_deviations(fx.pretrained, fx.pretrained, fx.pretrained, sample);
    for (const auto& r : set.records) {
        for (double v : {r.eps_l, r.eps_g, r.dev_l_tuned, r.dev_g_tuned, r.local_eps, r.global_eps}) {
            CHECK(v >= 0.0);
            CHECK(std::isfinite(v));
        }
        CHECK(r.local_eps == std::max(r.eps_l, r.eps_g));
        CHECK(r.global_eps >= r.local_eps);
    }
}

TEST_CASE("regression recovers exact linear slopes") {
    std::vector<DeviationRecord> records;
    for (int i = 1; i <= 12; ++i) {
        DeviationRecord r;
        r.local_eps = 0.5 * i;
        r.dev_l_tuned = 0.1 * r.local_eps;
        r.dev_g_tuned = 10.0 * r.local_eps;
        records.push_back(r);
    }
    auto reg = deviation_regression(records);
    CHECK(reg.slope_loss == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(reg.slope_grad == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("degenerate regressors are rejected") {
    std::vector<DeviationRecord> records(12);
    for (auto& r : records) r.local_eps = 1.0;
    CHECK_THROWS_AS(deviation_regression(records), Error);
    records.resize(5);
    CHECK_THROWS_AS(deviation_regression(records), Error);
}

TEST_CASE("full pipeline: gradient deviations dominate loss deviations") {
    TheoryFixture fx;
    FedConfig fed;
    fed.lr = 5e-3;
    fed.max_epochs = 20;
    fed.patience = 5;
    fed.batch_size = 16;
    fed.seed = 47;
    auto run_orig = fedsgd_run(fx.pretrained, fx.corpus.train, fed);
    std::vector<LabeledSentence> obf_train;
    for (const auto& p : fx.pairs) obf_train.push_back(p.obfuscated);
    fed.defense = DefenseKind::ghost;
    auto run_obf = fedsgd_run(fx.pretrained, obf_train, fed);

    auto set = compute_deviations(fx.pretrained, run_orig.model, run_obf.model, fx.pairs);
    auto reg = deviation_regression(set.records);
    CHECK(reg.mean_grad_dev > reg.mean_loss_dev);
    CHECK(reg.slope_grad > reg.slope_loss);
    CHECK(set.drift.eps_theta_star > 0.0);
    CHECK(set.drift.eps_theta_tilde > 0.0);
    // the obfuscated-tuned model prefers the data it was tuned on
    CHECK(set.mean_loss_obf_on_tuned <= set.mean_loss_orig_on_tuned);
    CHECK(set.grad_componentwise_fraction >= 0.0);
    CHECK(set.grad_componentwise_fraction <= 1.0);
}

TEST_CASE("csv and svg emission") {
    TheoryFixture fx;
    std::vector<ObfuscatedPair> sample(fx.pairs.begin(), fx.pairs.begin() + 12);
    auto set = compute_deviations(fx.pretrained, fx.pretrained, fx.pretrained, sample);
    const std::string csv_path = "theory_test.csv";
    const std::string svg_path = "theory_test.svg";
    save_deviations_csv(csv_path, set.records);
    save_deviations_svg(svg_path, set.records);
    std::ifstream csv(csv_path);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "eps_L,eps_g,dev_L_tuned,dev_g_tuned,local_eps,global_eps");
    size_t rows = 0;
    std::string line;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == sample.size());
    std::ifstream svg(svg_path);
    std::string svg_text((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(svg_text.find("<svg") != std::string::npos);
    std::remove(csv_path.c_str());
    std::remove(svg_path.c_str());
}

TEST_CASE("mismatched models and empty pairs are rejected") {
    TheoryFixture fx;
    ModelConfig other;
    other.vocab_size = 60;
    other.d_e = 8;
    other.n_layers = 1;
    other.n_heads = 2;
    other.d_ff = 8;
    other.max_len = 12;
    other.seed = 1;
    auto small = ToyModel::init(other);
    CHECK_THROWS_AS(compute_deviations(fx.pretrained, small, small, fx.pairs), Error);
    CHECK_THROWS_AS(compute_deviations(fx.pretrained, fx.pretrained, fx.pretrained, {}), Error);
}

}  // TEST_SUITE
