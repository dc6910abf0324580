#pragma once

#include <string>
#include <vector>

#include "ghost/corpus.hpp"

namespace ghost {

// token-level ROUGE-N F-measure, n in {1, 2}; clipped n-gram overlap
double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
               int n);

// LCS-based ROUGE-L F-measure
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

// METEOR with exact and lemma stages only: greedy one-to-one alignment,
// F_mean = P*R / (0.9*P + 0.1*R), fragmentation penalty 0.5*(chunks/matches)^3
double meteor_lite(std::span<const std::string> candidate,
                   std::span<const std::string> reference, const LemmaTable& lemmas);

struct SimilarityReport {
    double r1 = 0.0;
    double r2 = 0.0;
    double rl = 0.0;
    double meteor = 0.0;
    size_t n_pairs = 0;
};

// averages per-pair scores over aligned sentence lists (token id sequences
// are rendered through the vocabulary first)
SimilarityReport similarity_report(const std::vector<std::vector<TokenId>>& candidates,
                                   const std::vector<std::vector<TokenId>>& references,
                                   const Vocabulary& vocab, const LemmaTable& lemmas);

std::string similarity_report_to_json(const SimilarityReport& report);

// accuracy and F1 (positive-class F1 for binary, macro-F1 otherwise)
std::pair<double, double> classification_metrics(std::span<const int> predictions,
                                                 std::span<const int> labels);

double perplexity(double mean_loss);

std::vector<std::string> id_to_surface(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace ghost
