#include "ghost/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ghost {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size() || a.empty())
        throw Error("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        if (!std::isfinite(x) || !std::isfinite(y)) throw Error("cosine: non-finite input");
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na <= 0.0 || nb <= 0.0) throw Error("cosine: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
    const double d = 1.0 - cosine_similarity(a, b);
    return std::clamp(d, 0.0, 2.0);
}

double cosine_distance(const EmbeddingTable& table, TokenId a, TokenId b) {
    return cosine_distance(table.row(a), table.row(b));
}

std::vector<TokenId> top_k_neighbors(TokenId t, int k, const EmbeddingTable& table) {
    const int n = static_cast<int>(table.rows());
    if (t < 0 || t >= n) throw Error("neighbors: token id out of range");
    if (k < 1 || k > n - 1)
        throw Error("neighbors: k=" + std::to_string(k) + " outside [1, " + std::to_string(n - 1) +
                    "]");
    std::vector<std::pair<double, TokenId>> dists;
    dists.reserve(static_cast<size_t>(n) - 1);
    for (TokenId o = 0; o < n; ++o) {
        if (o == t) continue;
        dists.emplace_back(cosine_distance(table, t, o), o);
    }
    std::sort(dists.begin(), dists.end());  // ties fall back to ascending id
    std::vector<TokenId> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<size_t>(i)] = dists[static_cast<size_t>(i)].second;
    return out;
}

NeighborIndex::NeighborIndex(const EmbeddingTable& table, int k, unsigned threads) : k_(k) {
    const int n = static_cast<int>(table.rows());
    if (n < 2) throw Error("neighbor index: vocabulary too small");
    if (k < 1 || k > n - 1) throw Error("neighbor index: k outside [1, n_V-1]");
    order_.resize(static_cast<size_t>(n));
    rank_.resize(static_cast<size_t>(n));
    parallel_for(static_cast<size_t>(n), threads, [&](size_t ti) {
        const TokenId t = static_cast<TokenId>(ti);
        order_[ti] = top_k_neighbors(t, n - 1, table);
        auto& ranks = rank_[ti];
        ranks.assign(static_cast<size_t>(n), 0);
        for (size_t pos = 0; pos < order_[ti].size(); ++pos)
            ranks[static_cast<size_t>(order_[ti][pos])] = static_cast<int32_t>(pos) + 1;
    });
}

std::span<const TokenId> NeighborIndex::neighbors(TokenId t, int k) const {
    if (t < 0 || static_cast<size_t>(t) >= order_.size())
        throw Error("neighbor index: token id out of range");
    const auto& full = order_[static_cast<size_t>(t)];
    if (k < 1) throw Error("neighbor index: k must be positive");
    const size_t take = std::min(static_cast<size_t>(k), full.size());
    return {full.data(), take};
}

int NeighborIndex::rank(TokenId t, TokenId other) const {
    if (t < 0 || static_cast<size_t>(t) >= rank_.size() || other < 0 ||
        static_cast<size_t>(other) >= rank_.size())
        throw Error("neighbor index: token id out of range");
    return rank_[static_cast<size_t>(t)][static_cast<size_t>(other)];
}

size_t neighbor_overlap(TokenId t1, TokenId t2, int k, const NeighborIndex& index) {
    size_t count = 0;
    for (TokenId o : index.neighbors(t1, k))
        if (index.contains(t2, o, k)) ++count;
    return count;
}

bool indirect_similar(TokenId t1, TokenId t2, int k, double tau_o, const NeighborIndex& index) {
    if (!(tau_o > 0.0) || tau_o > 1.0)
        throw Error("indirect similarity: tau_o must lie in (0, 1]");
    const double overlap = static_cast<double>(neighbor_overlap(t1, t2, k, index));
    return overlap > tau_o * static_cast<double>(k);
}

bool direct_similar(TokenId t1, TokenId t2, int k, const NeighborIndex& index) {
    return index.contains(t1, t2, k) && index.contains(t2, t1, k);
}

bool common_lemma_similar(TokenId t1, TokenId t2, const Vocabulary& vocab,
                          const LemmaTable& lemmas) {
    return lemma_of(t1, vocab, lemmas) == lemma_of(t2, vocab, lemmas);
}

}  // namespace ghost
