#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ghost/shadow_search.hpp"
#include "ghost/toymodel.hpp"

namespace ghost {

enum class SelectMode { optimized, random_pick, nearest };

SelectMode select_mode_from_string(const std::string& s);
std::string to_string(SelectMode mode);

struct SelectConfig {
    int beam_width = 1;
    double tau_d = 1e-6;   // early-stop threshold on best-MSE improvement
    int max_sweeps = 20;
    SelectMode mode = SelectMode::optimized;
    uint64_t seed = 1;

    void validate() const;
};

struct ObfuscatedPair {
    LabeledSentence original;
    LabeledSentence obfuscated;
    double final_mse = 0.0;
    int sweeps = 0;
};

// optional per-sweep diagnostics (best hypothesis MSE after each sweep)
struct SelectTrace {
    double initial_mse = 0.0;
    std::vector<double> sweep_best_mse;
    int passthrough_positions = 0;  // UNK / unmapped tokens left unchanged
};

ObfuscatedPair select_shadow_tokens(const LabeledSentence& sentence, const ToyModel& model,
                                    const ShadowMap& map, const SelectConfig& cfg,
                                    SelectTrace* trace = nullptr);

struct ObfuscationStats {
    double mean_final_mse = 0.0;
    double mean_token_change_rate = 0.0;
    double mean_sweeps = 0.0;
    size_t passthrough_positions = 0;
    size_t n_sentences = 0;
};

std::pair<std::vector<ObfuscatedPair>, ObfuscationStats> obfuscate_dataset(
    const std::vector<LabeledSentence>& dataset, const ToyModel& model, const ShadowMap& map,
    const SelectConfig& cfg, unsigned threads = 1);

// obfuscated dataset JSONL: one line per pair with original text, obfuscated
// text, label, final mse and sweep count
void save_obfuscated(const std::string& path, const std::vector<ObfuscatedPair>& pairs,
                     const Vocabulary& vocab);
std::vector<ObfuscatedPair> load_obfuscated(const std::string& path, const Vocabulary& vocab);

}  // namespace ghost
