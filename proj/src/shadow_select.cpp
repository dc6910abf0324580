#include "ghost/shadow_select.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"

namespace ghost {

SelectMode select_mode_from_string(const std::string& s) {
    if (s == "optimized") return SelectMode::optimized;
    if (s == "random") return SelectMode::random_pick;
    if (s == "nearest") return SelectMode::nearest;
    throw Error("select: unknown mode '" + s + "' (optimized|random|nearest)");
}

std::string to_string(SelectMode mode) {
    switch (mode) {
        case SelectMode::optimized: return "optimized";
        case SelectMode::random_pick: return "random";
        case SelectMode::nearest: return "nearest";
    }
    return "?";
}

void SelectConfig::validate() const {
    if (beam_width < 1) throw Error("select: beam width must be >= 1");
    if (!(tau_d > 0.0)) throw Error("select: tau_d must be positive");
    if (max_sweeps < 1) throw Error("select: max_sweeps must be >= 1");
}

namespace {

struct Position {
    bool fixed = false;                // UNK or unmapped: passes through
    std::vector<TokenId> candidates;   // ascending distance order from the map
};

std::vector<Position> layout_positions(const LabeledSentence& sentence, const ShadowMap& map,
                                       int* passthrough) {
    std::vector<Position> pos(sentence.tokens.size());
    for (size_t i = 0; i < sentence.tokens.size(); ++i) {
        const ShadowEntry* entry = map.find(sentence.tokens[i]);
        if (entry == nullptr) {
            pos[i].fixed = true;
            pos[i].candidates = {sentence.tokens[i]};
            if (passthrough) ++(*passthrough);
        } else {
            pos[i].candidates = entry->candidates;
        }
    }
    return pos;
}

}  // namespace

ObfuscatedPair select_shadow_tokens(const LabeledSentence& sentence, const ToyModel& model,
                                    const ShadowMap& map, const SelectConfig& cfg,
                                    SelectTrace* trace) {
    cfg.validate();
    if (sentence.tokens.empty()) throw Error("select: empty sentence");

    int passthrough = 0;
    const auto positions = layout_positions(sentence, map, &passthrough);
    if (trace) trace->passthrough_positions = passthrough;

    const HiddenStates h_ori = model.forward_hidden_states(sentence.tokens).hidden;
    // hidden states of every scored sequence are recomputed against the same
    // cached original states; the memo collapses repeat evaluations
    std::map<std::vector<TokenId>, double> memo;
    auto score = [&](const std::vector<TokenId>& tokens) {
        auto it = memo.find(tokens);
        if (it != memo.end()) return it->second;
        const double mse = hidden_state_mse(model.forward_hidden_states(tokens).hidden, h_ori);
        memo.emplace(tokens, mse);
        return mse;
    };

    Rng rng(cfg.seed);
    auto random_tokens = [&] {
        std::vector<TokenId> t(sentence.tokens.size());
        for (size_t i = 0; i < t.size(); ++i)
            t[i] = positions[i].candidates[rng.uniform_index(positions[i].candidates.size())];
        return t;
    };
    auto nearest_tokens = [&] {
        std::vector<TokenId> t(sentence.tokens.size());
        for (size_t i = 0; i < t.size(); ++i) t[i] = positions[i].candidates.front();
        return t;
    };

    ObfuscatedPair out;
    out.original = sentence;
    out.obfuscated.label = sentence.label;

    if (cfg.mode == SelectMode::nearest || cfg.mode == SelectMode::random_pick) {
        out.obfuscated.tokens =
            cfg.mode == SelectMode::nearest ? nearest_tokens() : random_tokens();
        out.final_mse = score(out.obfuscated.tokens);
        out.sweeps = 0;
        return out;
    }

    // beam search; hypothesis 1 is the deterministic nearest seed, the rest
    // are random draws, so beam=1 reduces to greedy coordinate descent
    using Hypothesis = std::pair<double, std::vector<TokenId>>;
    std::map<std::vector<TokenId>, double> beam_set;
    beam_set.emplace(nearest_tokens(), 0.0);
    while (static_cast<int>(beam_set.size()) < cfg.beam_width) {
        const size_t before = beam_set.size();
        beam_set.emplace(random_tokens(), 0.0);
        if (beam_set.size() == before) {
            // duplicate draw; tolerate sparse candidate spaces where fewer
            // than beam_width distinct sequences exist
            bool saturated = true;
            size_t combos = 1;
            for (const auto& p : positions) {
                combos *= p.candidates.size();
                if (combos >= static_cast<size_t>(cfg.beam_width)) {
                    saturated = false;
                    break;
                }
            }
            if (saturated) break;
        }
    }

    std::vector<Hypothesis> beam;
    for (const auto& [tokens, unused] : beam_set) {
        (void)unused;
        beam.emplace_back(score(tokens), tokens);
    }
    std::sort(beam.begin(), beam.end());

    double prev_best = beam.front().first;
    if (trace) trace->initial_mse = prev_best;

    int sweeps_done = 0;
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        for (size_t i = 0; i < positions.size(); ++i) {
            if (positions[i].fixed) continue;
            std::map<std::vector<TokenId>, double> expanded;
            for (const auto& [mse, tokens] : beam) {
                (void)mse;
                std::vector<TokenId> probe = tokens;
                for (TokenId cand : positions[i].candidates) {
                    probe[i] = cand;
                    if (!expanded.count(probe)) expanded.emplace(probe, score(probe));
                }
            }
            std::vector<Hypothesis> ranked;
            ranked.reserve(expanded.size());
            for (auto& [tokens, mse] : expanded) ranked.emplace_back(mse, tokens);
            std::sort(ranked.begin(), ranked.end());
            if (static_cast<int>(ranked.size()) > cfg.beam_width)
                ranked.resize(static_cast<size_t>(cfg.beam_width));
            beam = std::move(ranked);
        }
        sweeps_done = sweep;
        const double best = beam.front().first;
        if (trace) trace->sweep_best_mse.push_back(best);
        if (prev_best - best < cfg.tau_d) break;
        prev_best = best;
    }

    out.obfuscated.tokens = beam.front().second;
    out.final_mse = beam.front().first;
    out.sweeps = sweeps_done;
    return out;
}

std::pair<std::vector<ObfuscatedPair>, ObfuscationStats> obfuscate_dataset(
    const std::vector<LabeledSentence>& dataset, const ToyModel& model, const ShadowMap& map,
    const SelectConfig& cfg, unsigned threads) {
    cfg.validate();
    std::vector<ObfuscatedPair> pairs(dataset.size());
    std::vector<int> passthrough(dataset.size(), 0);
    parallel_for(dataset.size(), threads, [&](size_t i) {
        SelectConfig local = cfg;
        local.seed = derive_seed(cfg.seed, i);  // per-sentence independence
        SelectTrace trace;
        pairs[i] = select_shadow_tokens(dataset[i], model, map, local, &trace);
        passthrough[i] = trace.passthrough_positions;
    });

    ObfuscationStats stats;
    stats.n_sentences = pairs.size();
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        stats.mean_final_mse += p.final_mse;
        stats.mean_sweeps += p.sweeps;
        stats.passthrough_positions += static_cast<size_t>(passthrough[i]);
        size_t changed = 0;
        for (size_t j = 0; j < p.original.tokens.size(); ++j)
            if (p.original.tokens[j] != p.obfuscated.tokens[j]) ++changed;
        stats.mean_token_change_rate +=
            static_cast<double>(changed) / static_cast<double>(p.original.tokens.size());
    }
    if (!pairs.empty()) {
        stats.mean_final_mse /= static_cast<double>(pairs.size());
        stats.mean_sweeps /= static_cast<double>(pairs.size());
        stats.mean_token_change_rate /= static_cast<double>(pairs.size());
    }
    return {std::move(pairs), stats};
}

void save_obfuscated(const std::string& path, const std::vector<ObfuscatedPair>& pairs,
                     const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("obfuscated dataset: cannot write '" + path + "'");
    for (const auto& p : pairs) {
        nlohmann::json j;
        j["text"] = p.original.raw;
        j["obf_text"] = detokenize(p.obfuscated.tokens, vocab);
        j["label"] = p.original.label;
        j["mse"] = p.final_mse;
        j["sweeps"] = p.sweeps;
        out << j.dump() << '\n';
    }
}

std::vector<ObfuscatedPair> load_obfuscated(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw Error("obfuscated dataset: cannot open '" + path + "'");
    std::vector<ObfuscatedPair> pairs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("obfuscated dataset: bad JSON on line " + std::to_string(lineno) + ": " +
                        e.what());
        }
        ObfuscatedPair p;
        p.original.raw = j.at("text").get<std::string>();
        p.original.label = j.at("label").get<int>();
        p.original.tokens = tokenize(p.original.raw, vocab);
        p.obfuscated.raw = j.at("obf_text").get<std::string>();
        p.obfuscated.label = p.original.label;
        p.obfuscated.tokens = tokenize(p.obfuscated.raw, vocab);
        p.final_mse = j.at("mse").get<double>();
        p.sweeps = j.at("sweeps").get<int>();
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace ghost
