#pragma once

#include <map>
#include <set>
#include <vector>

#include "ghost/geometry.hpp"

namespace ghost {

struct HeuristicFlags {
    bool use_indirect = true;
    bool use_direct = true;
    bool use_lemma = true;
};

struct ShadowParams {
    int k0 = 70;
    double tau_o = 0.1;
    HeuristicFlags flags;
};

struct ShadowEntry {
    int k_used = 0;
    std::vector<TokenId> candidates;  // ascending distance, then ascending id
    bool fallback = false;            // escalation exhausted, max-distance emergency pick
};

// per-token shadow candidate lists (Algorithm 1 output); UNK is neither a key
// nor a candidate
struct ShadowMap {
    ShadowParams params;
    std::map<TokenId, ShadowEntry> entries;

    const ShadowEntry* find(TokenId t) const {
        auto it = entries.find(t);
        return it == entries.end() ? nullptr : &it->second;
    }
    size_t fallback_count() const;
};

// multi-criteria search: for each token keep the top-k neighbors that fail
// every enabled similarity predicate, escalating k by 10 until something
// survives (capped at n_V-1, then the documented max-distance fallback)
ShadowMap search_shadow_tokens(const Vocabulary& vocab, const EmbeddingTable& table,
                               const LemmaTable& lemmas, const ShadowParams& params,
                               unsigned threads = 1);

// same, reusing a prebuilt full-ordering index
ShadowMap search_shadow_tokens(const Vocabulary& vocab, const NeighborIndex& index,
                               const LemmaTable& lemmas, const ShadowParams& params,
                               unsigned threads = 1);

// t -> set of tokens that list t as a candidate (the adaptive attacker's view)
std::map<TokenId, std::set<TokenId>> reverse_map(const ShadowMap& map);

std::string shadow_map_to_json(const ShadowMap& map);
ShadowMap shadow_map_from_json(const std::string& text);
void save_shadow_map(const std::string& path, const ShadowMap& map);
ShadowMap load_shadow_map(const std::string& path);

}  // namespace ghost
