#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ghost/common.hpp"
#include "ghost/geometry.hpp"

using namespace ghost;

namespace {

EmbeddingTable table_from(std::vector<std::vector<float>> rows) {
    EmbeddingTable t;
    t.dim = static_cast<int>(rows[0].size());
    for (auto& r : rows) t.matrix.insert(t.matrix.end(), r.begin(), r.end());
    return t;
}

EmbeddingTable random_table(size_t rows, int dim, uint64_t seed) {
    Rng rng(seed);
    EmbeddingTable t;
    t.dim = dim;
    t.matrix.resize(rows * static_cast<size_t>(dim));
    for (auto& v : t.matrix) v = static_cast<float>(rng.normal());
    return t;
}

// independent full-sort oracle used by the acceptance suite as well
std::vector<TokenId> brute_force_neighbors(TokenId t, int k, const EmbeddingTable& table) {
    const int n = static_cast<int>(table.rows());
    std::vector<std::pair<double, TokenId>> all;
    for (TokenId o = 0; o < n; ++o) {
        if (o == t) continue;
        const auto a = table.row(t);
        const auto b = table.row(o);
        double dot = 0, na = 0, nb = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            dot += static_cast<double>(a[i]) * b[i];
            na += static_cast<double>(a[i]) * a[i];
            nb += static_cast<double>(b[i]) * b[i];
        }
        const double dist = std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
        all.emplace_back(dist, o);
    }
    std::stable_sort(all.begin(), all.end());
    std::vector<TokenId> out;
    for (int i = 0; i < k; ++i) out.push_back(all[static_cast<size_t>(i)].second);
    return out;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("cosine distance basics") {
    const std::vector<float> a{3.0f, 4.0f};
    const std::vector<float> ex{1.0f, 0.0f};
    const std::vector<float> ey{0.0f, 1.0f};
    const std::vector<float> nx{-1.0f, 0.0f};
    CHECK(cosine_distance(a, a) == 0.0);
    CHECK(cosine_distance(ex, ey) == doctest::Approx(1.0));
    CHECK(cosine_distance(ex, nx) == doctest::Approx(2.0));

    const std::vector<float> zero{0.0f, 0.0f};
    CHECK_THROWS_AS(cosine_distance(ex, zero), Error);
    const std::vector<float> three{1.0f, 2.0f, 3.0f};
    CHECK_THROWS_AS(cosine_distance(ex, three), Error);
}

TEST_CASE("cosine distance is exactly symmetric") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> a(8), b(8);
        for (auto& v : a) v = static_cast<float>(rng.normal());
        for (auto& v : b) v = static_cast<float>(rng.normal());
        CHECK(cosine_distance(a, b) == cosine_distance(b, a));
    }
}

TEST_CASE("top-k on the four-token example") {
    auto table = table_from({{1, 0}, {0.9f, 0.1f}, {0, 1}, {-1, 0}});
    CHECK(top_k_neighbors(0, 2, table) == std::vector<TokenId>{1, 2});
    // full ordering is a permutation of everyone else
    auto full = top_k_neighbors(0, 3, table);
    std::sort(full.begin(), full.end());
    CHECK(full == std::vector<TokenId>{1, 2, 3});
    CHECK_THROWS_AS(top_k_neighbors(0, 0, table), Error);
    CHECK_THROWS_AS(top_k_neighbors(0, 4, table), Error);
}

TEST_CASE("ties break toward the lower id") {
    // tokens 1 and 2 sit at the same distance from token 0
    auto table = table_from({{1, 0}, {0, 1}, {0, 1}, {1, 1}});
    auto nb = top_k_neighbors(0, 3, table);
    CHECK(nb == std::vector<TokenId>{3, 1, 2});
}

TEST_CASE("matches brute-force oracle on random tables") {
    for (uint64_t seed : {1, 2, 3}) {
        auto table = random_table(60, 5, seed);
        for (int k : {1, 5, 59})
            for (TokenId t : {0, 17, 42})
                CHECK(top_k_neighbors(t, k, table) == brute_force_neighbors(t, k, table));
    }
}

TEST_CASE("neighbor index agrees with direct queries and k is monotone") {
    auto table = random_table(40, 4, 13);
    NeighborIndex index(table, 39);
    for (TokenId t = 0; t < 40; ++t) {
        auto direct = top_k_neighbors(t, 7, table);
        auto cached = index.neighbors(t, 7);
        CHECK(std::equal(direct.begin(), direct.end(), cached.begin(), cached.end()));
        // enlarging k never drops an existing neighbor
        auto bigger = index.neighbors(t, 20);
        for (TokenId o : direct)
            CHECK(std::find(bigger.begin(), bigger.end(), o) != bigger.end());
    }
}

TEST_CASE("indirect similarity thresholds strictly") {
    auto table = random_table(30, 6, 21);
    NeighborIndex index(table, 29);
    const int k = 10;
    const double tau = 0.1;  // threshold count is exactly 1
    bool saw_overlap_1 = false, saw_overlap_2 = false;
    for (TokenId t1 = 0; t1 < 30; ++t1)
        for (TokenId t2 = 0; t2 < 30; ++t2) {
            const size_t overlap = neighbor_overlap(t1, t2, k, index);
            CHECK(indirect_similar(t1, t2, k, tau, index) == (overlap > tau * k));
            if (t1 != t2 && overlap == 1) {
                CHECK_FALSE(indirect_similar(t1, t2, k, tau, index));  // 1 is not > 1
                saw_overlap_1 = true;
            }
            if (t1 != t2 && overlap == 2) {
                CHECK(indirect_similar(t1, t2, k, tau, index));  // 2 > 1
                saw_overlap_2 = true;
            }
        }
    // both sides of the strict boundary actually occurred
    CHECK(saw_overlap_1);
    CHECK(saw_overlap_2);
    // overlap of a token with itself is k, so any tau < 1 flags it
    CHECK(indirect_similar(3, 3, k, tau, index));
    CHECK_THROWS_AS(indirect_similar(0, 1, k, 0.0, index), Error);
    CHECK_THROWS_AS(indirect_similar(0, 1, k, 1.5, index), Error);
}

TEST_CASE("direct similarity requires mutual membership") {
    // hub geometry: token 0 near everyone, token 3 remote
    auto table = table_from({{1, 0, 0},
                             {0.99f, 0.1f, 0},
                             {0.98f, -0.1f, 0},
                             {0.9f, 0.43f, 0},
                             {-1, 0.1f, 0},
                             {-1, -0.1f, 0}});
    NeighborIndex index(table, 5);
    const int k = 2;
    // mutual nearest pair
    const bool m01 = index.contains(0, 1, k) && index.contains(1, 0, k);
    CHECK(direct_similar(0, 1, k, index) == m01);
    // asymmetric: 3's top-2 contains 0 but not vice versa
    CHECK(index.contains(3, 0, k));
    CHECK_FALSE(index.contains(0, 3, k));
    CHECK_FALSE(direct_similar(0, 3, k, index));
    // with k = n_V - 1 every distinct pair is mutual
    for (TokenId a = 0; a < 6; ++a)
        for (TokenId b = 0; b < 6; ++b)
            if (a != b) CHECK(direct_similar(a, b, 5, index));
}

TEST_CASE("similarity predicates are symmetric") {
    auto table = random_table(25, 4, 31);
    NeighborIndex index(table, 24);
    for (TokenId a = 0; a < 10; ++a)
        for (TokenId b = 0; b < 10; ++b) {
            CHECK(indirect_similar(a, b, 6, 0.2, index) == indirect_similar(b, a, 6, 0.2, index));
            CHECK(direct_similar(a, b, 6, index) == direct_similar(b, a, 6, index));
        }
}

TEST_CASE("common lemma similarity") {
    auto vocab = Vocabulary::from_surfaces({"<unk>", "go", "went", "stop"}, 0);
    LemmaTable lemmas;
    lemmas.entries["went"] = "go";
    CHECK(common_lemma_similar(1, 2, vocab, lemmas));
    CHECK(common_lemma_similar(2, 1, vocab, lemmas));
    CHECK_FALSE(common_lemma_similar(1, 3, vocab, lemmas));
    CHECK(common_lemma_similar(3, 3, vocab, lemmas));
}

}  // TEST_SUITE
