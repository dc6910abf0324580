#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ghost/common.hpp"

namespace ghost {

using TokenId = int32_t;

// Closed vocabulary: surfaces are unique, id_of inverts surface order exactly.
struct Vocabulary {
    std::vector<std::string> surfaces;
    std::unordered_map<std::string, TokenId> id_of;
    TokenId unk_id = 0;

    size_t size() const { return surfaces.size(); }

    TokenId id(const std::string& surface) const {
        auto it = id_of.find(surface);
        return it == id_of.end() ? unk_id : it->second;
    }

    const std::string& surface(TokenId id) const;

    static Vocabulary from_surfaces(std::vector<std::string> surfaces, TokenId unk_id);
};

// n_V x d_e embedding matrix, row i = embedding of surface i. Entries are
// 32-bit floats, matching the on-disk GHEM payload bit for bit so that
// write-then-read round trips exactly.
struct EmbeddingTable {
    std::vector<float> matrix;  // row-major
    int dim = 0;

    size_t rows() const { return dim == 0 ? 0 : matrix.size() / static_cast<size_t>(dim); }

    std::span<const float> row(TokenId id) const {
        return {matrix.data() + static_cast<size_t>(id) * dim, static_cast<size_t>(dim)};
    }

    void validate(size_t expected_rows) const;
};

// surface -> lemma; lookups outside the table map to the surface itself
struct LemmaTable {
    std::unordered_map<std::string, std::string> entries;

    std::string lemma(const std::string& surface) const {
        auto it = entries.find(surface);
        return it == entries.end() ? surface : it->second;
    }
};

struct LabeledSentence {
    std::vector<TokenId> tokens;
    int label = 0;
    std::string raw;
};

// --- text processing ---

// lowercase + whitespace/punctuation split; every surviving word is looked up
// in the closed vocabulary, unknown words map to unk_id
std::vector<std::string> normalize_words(const std::string& text);
std::vector<TokenId> tokenize(const std::string& text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

std::string lemma_of(TokenId id, const Vocabulary& vocab, const LemmaTable& lemmas);

// --- file formats ---

// GHEM: "GHEM" magic, u32le vocab_size, u32le dim, then vocab_size*dim f32le
// row-major. A sibling "<name>.vocab.txt" holds one surface per line.
std::pair<Vocabulary, EmbeddingTable> load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const Vocabulary& vocab,
                     const EmbeddingTable& table);
std::string vocab_sibling_path(const std::string& ghem_path);

LemmaTable load_lemmas(const std::string& path);
void save_lemmas(const std::string& path, const LemmaTable& lemmas);

// dataset JSONL: {"text": ..., "label": n} per line; tokenized on load.
// `text_field` selects the column, e.g. "obf_text" of an obfuscated file.
std::vector<LabeledSentence> load_dataset(const std::string& path, const Vocabulary& vocab,
                                          const std::string& text_field = "text");
void save_dataset(const std::string& path, const std::vector<LabeledSentence>& data);

}  // namespace ghost
