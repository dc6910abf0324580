#include "ghost/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ghost {

const std::string& Vocabulary::surface(TokenId id) const {
    if (id < 0 || static_cast<size_t>(id) >= surfaces.size())
        throw Error("vocabulary: token id " + std::to_string(id) + " out of range");
    return surfaces[static_cast<size_t>(id)];
}

Vocabulary Vocabulary::from_surfaces(std::vector<std::string> surfaces, TokenId unk_id) {
    if (surfaces.empty()) throw Error("vocabulary: empty surface list");
    if (unk_id < 0 || static_cast<size_t>(unk_id) >= surfaces.size())
        throw Error("vocabulary: unk_id out of range");
    Vocabulary v;
    v.surfaces = std::move(surfaces);
    v.unk_id = unk_id;
    v.id_of.reserve(v.surfaces.size());
    for (size_t i = 0; i < v.surfaces.size(); ++i) {
        auto [it, inserted] = v.id_of.emplace(v.surfaces[i], static_cast<TokenId>(i));
        if (!inserted) throw Error("vocabulary: duplicate surface '" + v.surfaces[i] + "'");
    }
    return v;
}

void EmbeddingTable::validate(size_t expected_rows) const {
    if (dim <= 0) throw Error("embedding table: non-positive dimension");
    if (matrix.size() != expected_rows * static_cast<size_t>(dim))
        throw Error("embedding table: vocab/matrix length mismatch (" +
                    std::to_string(expected_rows) + " surfaces, " +
                    std::to_string(matrix.size() / static_cast<size_t>(dim)) + " rows)");
    for (size_t r = 0; r < expected_rows; ++r) {
        double norm_sq = 0.0;
        for (int c = 0; c < dim; ++c) {
            const float v = matrix[r * static_cast<size_t>(dim) + static_cast<size_t>(c)];
            if (!std::isfinite(v))
                throw Error("embedding table: non-finite entry in row " + std::to_string(r));
            norm_sq += static_cast<double>(v) * static_cast<double>(v);
        }
        if (norm_sq <= 0.0)
            throw Error("embedding table: zero-norm row " + std::to_string(r));
    }
}

std::vector<std::string> normalize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        // ASCII letters/digits form words; '<', '>', '#', '_' survive so
        // markers like <unk> and subword surfaces like ##sub stay intact
        const bool keep = std::isalnum(c) || c == '<' || c == '>' || c == '#' || c == '_' ||
                          c >= 0x80;
        if (keep) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::vector<TokenId> tokenize(const std::string& text, const Vocabulary& vocab) {
    const auto words = normalize_words(text);
    if (words.empty()) throw Error("tokenize: empty input after normalization");
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(vocab.id(w));
    return ids;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += vocab.surface(tokens[i]);
    }
    return out;
}

std::string lemma_of(TokenId id, const Vocabulary& vocab, const LemmaTable& lemmas) {
    return lemmas.lemma(vocab.surface(id));
}

std::string vocab_sibling_path(const std::string& ghem_path) {
    std::string base = ghem_path;
    if (base.size() > 5 && base.compare(base.size() - 5, 5, ".ghem") == 0)
        base.resize(base.size() - 5);
    return base + ".vocab.txt";
}

namespace {
uint32_t read_u32le(std::istream& in, const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw Error(std::string("GHEM: truncated ") + what);
    return static_cast<uint32_t>(buf[0]) | static_cast<uint32_t>(buf[1]) << 8 |
           static_cast<uint32_t>(buf[2]) << 16 | static_cast<uint32_t>(buf[3]) << 24;
}

void write_u32le(std::ostream& out, uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                                  static_cast<unsigned char>((v >> 8) & 0xff),
                                  static_cast<unsigned char>((v >> 16) & 0xff),
                                  static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}
}  // namespace

std::pair<Vocabulary, EmbeddingTable> load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("GHEM: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GHEM", 4) != 0)
        throw Error("GHEM: magic mismatch in '" + path + "'");
    const uint32_t vocab_size = read_u32le(in, "vocab_size");
    const uint32_t dim = read_u32le(in, "dim");
    if (vocab_size == 0 || dim == 0) throw Error("GHEM: zero vocab_size or dim");

    EmbeddingTable table;
    table.dim = static_cast<int>(dim);
    table.matrix.resize(static_cast<size_t>(vocab_size) * dim);
    static_assert(sizeof(float) == 4);
    in.read(reinterpret_cast<char*>(table.matrix.data()),
            static_cast<std::streamsize>(table.matrix.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(table.matrix.size() * sizeof(float)))
        throw Error("GHEM: truncated payload in '" + path + "'");
    // little-endian floats assumed; this codebase targets LE hosts only

    const std::string vocab_path = vocab_sibling_path(path);
    std::ifstream vin(vocab_path);
    if (!vin) throw Error("GHEM: missing vocab file '" + vocab_path + "'");
    std::vector<std::string> surfaces;
    std::string line;
    while (std::getline(vin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        surfaces.push_back(line);
    }
    if (surfaces.size() != vocab_size)
        throw Error("GHEM: vocab/matrix length mismatch (" + std::to_string(surfaces.size()) +
                    " surfaces, " + std::to_string(vocab_size) + " rows)");

    TokenId unk = 0;
    for (size_t i = 0; i < surfaces.size(); ++i)
        if (surfaces[i] == "<unk>") unk = static_cast<TokenId>(i);
    auto vocab = Vocabulary::from_surfaces(std::move(surfaces), unk);
    table.validate(vocab.size());
    return {std::move(vocab), std::move(table)};
}

void save_embeddings(const std::string& path, const Vocabulary& vocab,
                     const EmbeddingTable& table) {
    table.validate(vocab.size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("GHEM: cannot write '" + path + "'");
    out.write("GHEM", 4);
    write_u32le(out, static_cast<uint32_t>(vocab.size()));
    write_u32le(out, static_cast<uint32_t>(table.dim));
    out.write(reinterpret_cast<const char*>(table.matrix.data()),
              static_cast<std::streamsize>(table.matrix.size() * sizeof(float)));
    if (!out) throw Error("GHEM: write failed for '" + path + "'");

    std::ofstream vout(vocab_sibling_path(path), std::ios::binary);
    if (!vout) throw Error("GHEM: cannot write vocab sibling of '" + path + "'");
    for (const auto& s : vocab.surfaces) vout << s << '\n';
}

LemmaTable load_lemmas(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("lemmas: cannot open '" + path + "'");
    LemmaTable table;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("lemmas: missing tab on line " + std::to_string(lineno));
        table.entries[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return table;
}

void save_lemmas(const std::string& path, const LemmaTable& lemmas) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("lemmas: cannot write '" + path + "'");
    // sorted for reproducible files
    std::vector<std::pair<std::string, std::string>> rows(lemmas.entries.begin(),
                                                          lemmas.entries.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [surface, lemma] : rows) out << surface << '\t' << lemma << '\n';
}

std::vector<LabeledSentence> load_dataset(const std::string& path, const Vocabulary& vocab,
                                          const std::string& text_field) {
    std::ifstream in(path);
    if (!in) throw Error("dataset: cannot open '" + path + "'");
    std::vector<LabeledSentence> data;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("dataset: bad JSON on line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains(text_field) || !j.contains("label"))
            throw Error("dataset: missing " + text_field + "/label on line " +
                        std::to_string(lineno));
        LabeledSentence s;
        s.raw = j[text_field].get<std::string>();
        s.label = j["label"].get<int>();
        if (s.label < 0) throw Error("dataset: negative label on line " + std::to_string(lineno));
        s.tokens = tokenize(s.raw, vocab);
        data.push_back(std::move(s));
    }
    return data;
}

void save_dataset(const std::string& path, const std::vector<LabeledSentence>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("dataset: cannot write '" + path + "'");
    for (const auto& s : data) {
        nlohmann::json j;
        j["text"] = s.raw;
        j["label"] = s.label;
        out << j.dump() << '\n';
    }
}

}  // namespace ghost
