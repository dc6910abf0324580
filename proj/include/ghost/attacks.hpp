#pragma once

#include <string>
#include <vector>

#include "ghost/fedsim.hpp"
#include "ghost/shadow_search.hpp"

namespace ghost {

struct AttackResult {
    std::vector<TokenId> recovered;
    std::string attacker;
    int iterations = 0;
    double residual = 0.0;
    bool diverged = false;
};

// Batch-1 token-set recovery from the nonzero rows of the embedding-layer
// gradient (untied embeddings leak exactly the tokens that were looked up).
// Recovered ids are distinct and ascending.
AttackResult embedding_leakage_attack(const RoundLog& log, const ToyModel& model,
                                      double threshold = 1e-12);

// Dummy-embedding optimization against the observed gradient: dummy rows are
// driven by central-finite-difference descent on || grad(dummy) - observed ||^2
// over all non-embedding segments, then snapped to the nearest vocabulary
// embeddings by cosine distance.
AttackResult gradient_matching_attack(const RoundLog& log, const ToyModel& model,
                                      const EmbeddingTable& table, int seq_len, int label,
                                      int iters, double lr_a, uint64_t seed);

enum class AdaptiveStrategy { sampling, max_similarity, median_similarity, mean_embedding };

AdaptiveStrategy adaptive_strategy_from_string(const std::string& s);
std::string to_string(AdaptiveStrategy strategy);

// ShadowMap inversion with full knowledge of the defense: per obfuscated token
// look up every original that could have produced it and pick by strategy
AttackResult adaptive_recover(std::span<const TokenId> obfuscated_tokens,
                              const std::map<TokenId, std::set<TokenId>>& reverse,
                              const EmbeddingTable& table, AdaptiveStrategy strategy,
                              uint64_t seed);

// ROUGE-1 over distinct-token bags, the scoring rule for set-valued recoveries
double bag_rouge1(std::span<const TokenId> recovered, std::span<const TokenId> original);

}  // namespace ghost
