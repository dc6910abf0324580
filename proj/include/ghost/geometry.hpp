#pragma once

#include <span>
#include <vector>

#include "ghost/corpus.hpp"

namespace ghost {

// 1 - cos(a, b), clamped to [0, 2]
double cosine_distance(std::span<const float> a, std::span<const float> b);
double cosine_distance(const EmbeddingTable& table, TokenId a, TokenId b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// k nearest neighbors of t, self excluded, ordered by (distance asc, id asc)
std::vector<TokenId> top_k_neighbors(TokenId t, int k, const EmbeddingTable& table);

// Precomputed neighbor machinery. For every token the full distance ordering
// over all other tokens is stored once; N(t, k) is then a prefix slice, which
// is what makes Algorithm-style k escalation cheap.
class NeighborIndex {
public:
    NeighborIndex(const EmbeddingTable& table, int k, unsigned threads = 1);

    int k() const { return k_; }
    size_t vocab_size() const { return order_.size(); }

    // N(t, k) for any k' <= built k
    std::span<const TokenId> neighbors(TokenId t) const { return neighbors(t, k_); }
    std::span<const TokenId> neighbors(TokenId t, int k) const;

    // rank of `other` in t's distance ordering (1 = nearest); 0 for t itself
    int rank(TokenId t, TokenId other) const;

    bool contains(TokenId t, TokenId other, int k) const {
        const int r = rank(t, other);
        return r >= 1 && r <= k;
    }

private:
    int k_;
    std::vector<std::vector<TokenId>> order_;  // per token: all others sorted
    std::vector<std::vector<int32_t>> rank_;   // inverse permutation
};

// |N(t1,k) intersect N(t2,k)| > tau_o * k, strict
bool indirect_similar(TokenId t1, TokenId t2, int k, double tau_o, const NeighborIndex& index);

// t1 in N(t2,k) and t2 in N(t1,k)
bool direct_similar(TokenId t1, TokenId t2, int k, const NeighborIndex& index);

bool common_lemma_similar(TokenId t1, TokenId t2, const Vocabulary& vocab,
                          const LemmaTable& lemmas);

size_t neighbor_overlap(TokenId t1, TokenId t2, int k, const NeighborIndex& index);

}  // namespace ghost
