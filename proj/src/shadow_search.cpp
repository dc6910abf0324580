#include "ghost/shadow_search.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace ghost {

size_t ShadowMap::fallback_count() const {
    size_t n = 0;
    for (const auto& [t, e] : entries) n += e.fallback ? 1 : 0;
    return n;
}

namespace {

bool any_similarity(TokenId t, TokenId cand, int k, const ShadowParams& p,
                    const NeighborIndex& index, const Vocabulary& vocab,
                    const LemmaTable& lemmas) {
    if (p.flags.use_indirect && indirect_similar(t, cand, k, p.tau_o, index)) return true;
    if (p.flags.use_direct && direct_similar(t, cand, k, index)) return true;
    if (p.flags.use_lemma && common_lemma_similar(t, cand, vocab, lemmas)) return true;
    return false;
}

ShadowEntry search_one(TokenId t, const ShadowParams& p, const NeighborIndex& index,
                       const Vocabulary& vocab, const LemmaTable& lemmas) {
    const int n = static_cast<int>(vocab.size());
    const int k_max = n - 1;
    int k = std::min(p.k0, k_max);
    for (;;) {
        ShadowEntry entry;
        entry.k_used = k;
        for (TokenId cand : index.neighbors(t, k)) {
            if (cand == vocab.unk_id) continue;
            if (!any_similarity(t, cand, k, p, index, vocab, lemmas))
                entry.candidates.push_back(cand);
        }
        if (!entry.candidates.empty()) return entry;
        if (k >= k_max) break;
        k = std::min(k + 10, k_max);
    }
    // escalation exhausted: fall back to the farthest token that does not
    // share the lemma (or the farthest token outright if all of them do)
    ShadowEntry entry;
    entry.k_used = k_max;
    entry.fallback = true;
    const auto full = index.neighbors(t, k_max);
    for (auto it = full.rbegin(); it != full.rend(); ++it) {
        if (*it == vocab.unk_id) continue;
        if (!common_lemma_similar(t, *it, vocab, lemmas)) {
            entry.candidates.push_back(*it);
            return entry;
        }
    }
    for (auto it = full.rbegin(); it != full.rend(); ++it) {
        if (*it == vocab.unk_id) continue;
        entry.candidates.push_back(*it);
        return entry;
    }
    throw Error("shadow search: no eligible fallback candidate for token " + std::to_string(t));
}

}  // namespace

ShadowMap search_shadow_tokens(const Vocabulary& vocab, const NeighborIndex& index,
                               const LemmaTable& lemmas, const ShadowParams& params,
                               unsigned threads) {
    const int n = static_cast<int>(vocab.size());
    if (n < 3) throw Error("shadow search: vocabulary smaller than 3 tokens");
    if (params.k0 < 1) throw Error("shadow search: k0 must be positive");
    if (!(params.tau_o > 0.0) || params.tau_o > 1.0)
        throw Error("shadow search: tau_o must lie in (0, 1]");

    std::vector<TokenId> keys;
    keys.reserve(static_cast<size_t>(n) - 1);
    for (TokenId t = 0; t < n; ++t)
        if (t != vocab.unk_id) keys.push_back(t);

    std::vector<ShadowEntry> results(keys.size());
    parallel_for(keys.size(), threads, [&](size_t i) {
        results[i] = search_one(keys[i], params, index, vocab, lemmas);
    });

    ShadowMap map;
    map.params = params;
    for (size_t i = 0; i < keys.size(); ++i) map.entries.emplace(keys[i], std::move(results[i]));
    return map;
}

ShadowMap search_shadow_tokens(const Vocabulary& vocab, const EmbeddingTable& table,
                               const LemmaTable& lemmas, const ShadowParams& params,
                               unsigned threads) {
    NeighborIndex index(table, static_cast<int>(table.rows()) - 1, threads);
    return search_shadow_tokens(vocab, index, lemmas, params, threads);
}

std::map<TokenId, std::set<TokenId>> reverse_map(const ShadowMap& map) {
    std::map<TokenId, std::set<TokenId>> rev;
    for (const auto& [t, entry] : map.entries)
        for (TokenId cand : entry.candidates) rev[cand].insert(t);
    return rev;
}

std::string shadow_map_to_json(const ShadowMap& map) {
    nlohmann::json j;
    j["params"] = {{"k0", map.params.k0},
                   {"tau_o", map.params.tau_o},
                   {"flags",
                    {{"use_indirect", map.params.flags.use_indirect},
                     {"use_direct", map.params.flags.use_direct},
                     {"use_lemma", map.params.flags.use_lemma}}}};
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [t, e] : map.entries) {
        nlohmann::json je;
        je["k_used"] = e.k_used;
        je["candidates"] = e.candidates;
        if (e.fallback) je["fallback"] = true;
        entries[std::to_string(t)] = std::move(je);
    }
    j["entries"] = std::move(entries);
    return j.dump();
}

ShadowMap shadow_map_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("shadow map: bad JSON: ") + e.what());
    }
    ShadowMap map;
    const auto& p = j.at("params");
    map.params.k0 = p.at("k0").get<int>();
    map.params.tau_o = p.at("tau_o").get<double>();
    const auto& f = p.at("flags");
    map.params.flags.use_indirect = f.at("use_indirect").get<bool>();
    map.params.flags.use_direct = f.at("use_direct").get<bool>();
    map.params.flags.use_lemma = f.at("use_lemma").get<bool>();
    for (const auto& [key, je] : j.at("entries").items()) {
        ShadowEntry e;
        e.k_used = je.at("k_used").get<int>();
        e.candidates = je.at("candidates").get<std::vector<TokenId>>();
        e.fallback = je.value("fallback", false);
        if (e.candidates.empty()) throw Error("shadow map: empty candidate list for " + key);
        map.entries[static_cast<TokenId>(std::stol(key))] = std::move(e);
    }
    return map;
}

void save_shadow_map(const std::string& path, const ShadowMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("shadow map: cannot write '" + path + "'");
    out << shadow_map_to_json(map) << '\n';
}

ShadowMap load_shadow_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("shadow map: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return shadow_map_from_json(text);
}

}  // namespace ghost
