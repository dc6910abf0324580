#pragma once

#include <vector>

#include "ghost/corpus.hpp"

namespace ghost {

// Desk-scale corpus generator: clustered embedding geometry (lemma-mates are
// embedding-close), class-signal token regions, label-balanced sentences.
struct SynthSpec {
    int vocab_size = 300;
    int dim = 16;
    int n_lemma_clusters = 60;
    double cluster_radius = 0.9;
    int n_classes = 2;
    // explicit class-signal sets; left empty they are derived from whole
    // clusters, signal_tokens_per_class per class
    std::vector<std::vector<TokenId>> signal_sets;
    int signal_tokens_per_class = 40;
    double signal_strength = 7.0;
    int min_sentence_len = 4;
    int max_sentence_len = 8;
    int n_train = 400;
    int n_test = 100;
    uint64_t seed = 1;

    void validate() const;
};

struct SynthCorpus {
    Vocabulary vocab;
    EmbeddingTable table;
    LemmaTable lemmas;
    std::vector<LabeledSentence> train;
    std::vector<LabeledSentence> test;
    std::vector<std::vector<TokenId>> signal_sets;
    std::vector<TokenId> distractors;  // non-signal, non-UNK vocabulary
};

SynthCorpus generate_corpus(const SynthSpec& spec);

}  // namespace ghost
