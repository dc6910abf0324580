#include "ghost/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace ghost {

void SynthSpec::validate() const {
    if (vocab_size < 10) throw Error("synth: vocab_size too small");
    if (dim < n_classes || dim < 2) throw Error("synth: dim must be >= max(n_classes, 2)");
    if (n_lemma_clusters < 1 || n_lemma_clusters > vocab_size - 1)
        throw Error("synth: n_lemma_clusters outside [1, vocab_size-1]");
    if (!(cluster_radius > 0.0)) throw Error("synth: cluster_radius must be positive");
    if (n_classes < 2) throw Error("synth: need at least 2 classes");
    if (min_sentence_len < 1 || max_sentence_len < min_sentence_len)
        throw Error("synth: bad sentence length range");
    if (n_train < 1 || n_test < 0) throw Error("synth: bad corpus sizes");
    const int per_class =
        signal_sets.empty() ? signal_tokens_per_class : static_cast<int>(signal_sets[0].size());
    if (vocab_size <= n_classes * per_class)
        throw Error("synth: vocab_size must exceed n_classes * signal set size");
}

namespace {

std::string token_surface(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%04d", i);
    return buf;
}

std::string cluster_lemma(int j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "lem%03d", j);
    return buf;
}

}  // namespace

SynthCorpus generate_corpus(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    SynthCorpus out;

    // surfaces: id 0 is the reserved unknown marker
    std::vector<std::string> surfaces;
    surfaces.reserve(static_cast<size_t>(spec.vocab_size));
    surfaces.push_back("<unk>");
    for (int i = 1; i < spec.vocab_size; ++i) surfaces.push_back(token_surface(i));
    out.vocab = Vocabulary::from_surfaces(std::move(surfaces), 0);

    // contiguous cluster blocks over the non-UNK ids
    const int n_real = spec.vocab_size - 1;
    std::vector<int> cluster_of(static_cast<size_t>(spec.vocab_size), -1);
    std::vector<std::vector<TokenId>> clusters(static_cast<size_t>(spec.n_lemma_clusters));
    for (int i = 0; i < n_real; ++i) {
        const int c = i * spec.n_lemma_clusters / n_real;
        cluster_of[static_cast<size_t>(i + 1)] = c;
        clusters[static_cast<size_t>(c)].push_back(static_cast<TokenId>(i + 1));
    }
    for (int c = 0; c < spec.n_lemma_clusters; ++c)
        for (TokenId t : clusters[static_cast<size_t>(c)])
            out.lemmas.entries[out.vocab.surface(t)] = cluster_lemma(c);

    // class-signal sets: explicit, or whole clusters from the front
    out.signal_sets = spec.signal_sets;
    if (out.signal_sets.empty()) {
        out.signal_sets.assign(static_cast<size_t>(spec.n_classes), {});
        int cluster_cursor = 0;
        for (int c = 0; c < spec.n_classes; ++c) {
            auto& set = out.signal_sets[static_cast<size_t>(c)];
            while (static_cast<int>(set.size()) < spec.signal_tokens_per_class) {
                if (cluster_cursor >= spec.n_lemma_clusters)
                    throw Error("synth: not enough clusters for the requested signal sets");
                for (TokenId t : clusters[static_cast<size_t>(cluster_cursor)]) {
                    if (static_cast<int>(set.size()) >= spec.signal_tokens_per_class) break;
                    set.push_back(t);
                }
                ++cluster_cursor;
            }
        }
    }
    if (static_cast<int>(out.signal_sets.size()) != spec.n_classes)
        throw Error("synth: one signal set per class required");
    std::set<TokenId> all_signals;
    for (const auto& set : out.signal_sets) {
        if (set.empty()) throw Error("synth: empty signal set");
        for (TokenId t : set) {
            if (t <= 0 || t >= spec.vocab_size) throw Error("synth: signal token out of range");
            if (!all_signals.insert(t).second)
                throw Error("synth: signal sets overlap across classes");
        }
    }

    std::vector<int> class_of(static_cast<size_t>(spec.vocab_size), -1);
    for (int c = 0; c < spec.n_classes; ++c)
        for (TokenId t : out.signal_sets[static_cast<size_t>(c)])
            class_of[static_cast<size_t>(t)] = c;

    // embeddings: cluster centers plus within-radius offsets. The first
    // n_classes axes are reserved: zero everywhere except on the tokens of
    // that class, which carry signal_strength there. Every class signal is
    // therefore readable off the mean embedding, and any substitution that
    // stays inside a class region keeps the label information.
    std::vector<std::vector<double>> centers(static_cast<size_t>(spec.n_lemma_clusters),
                                             std::vector<double>(static_cast<size_t>(spec.dim)));
    for (auto& center : centers)
        for (auto& v : center) v = rng.normal();
    out.table.dim = spec.dim;
    out.table.matrix.assign(static_cast<size_t>(spec.vocab_size) * spec.dim, 0.0f);
    for (TokenId t = 0; t < spec.vocab_size; ++t) {
        std::vector<double> e(static_cast<size_t>(spec.dim));
        if (t == out.vocab.unk_id) {
            for (auto& v : e) v = rng.normal();
        } else {
            const auto& center = centers[static_cast<size_t>(cluster_of[static_cast<size_t>(t)])];
            for (int j = 0; j < spec.dim; ++j)
                e[static_cast<size_t>(j)] =
                    center[static_cast<size_t>(j)] + spec.cluster_radius * rng.normal();
        }
        for (int c = 0; c < spec.n_classes; ++c) e[static_cast<size_t>(c)] = 0.0;
        if (t != out.vocab.unk_id && class_of[static_cast<size_t>(t)] >= 0)
            e[static_cast<size_t>(class_of[static_cast<size_t>(t)])] = spec.signal_strength;
        double norm = 0.0;
        for (double v : e) norm += v * v;
        norm = std::sqrt(norm);
        if (norm <= 0.0) throw Error("synth: degenerate embedding row");
        for (int j = 0; j < spec.dim; ++j)
            out.table.matrix[static_cast<size_t>(t) * spec.dim + j] =
                static_cast<float>(e[static_cast<size_t>(j)] / norm);
    }
    out.table.validate(static_cast<size_t>(spec.vocab_size));

    for (TokenId t = 1; t < spec.vocab_size; ++t)
        if (class_of[static_cast<size_t>(t)] < 0) out.distractors.push_back(t);

    // sentences: labels round-robin for exact balance, 1-2 signal tokens of
    // the label's class, distractors elsewhere
    auto make_sentence = [&](int label) {
        const int len = spec.min_sentence_len +
                        static_cast<int>(rng.uniform_index(
                            static_cast<uint64_t>(spec.max_sentence_len - spec.min_sentence_len + 1)));
        const auto& signals = out.signal_sets[static_cast<size_t>(label)];
        const int n_signal = (len >= 2 && rng.uniform_index(2) == 1) ? 2 : 1;
        std::vector<TokenId> tokens(static_cast<size_t>(len));
        for (int i = 0; i < len; ++i)
            tokens[static_cast<size_t>(i)] =
                out.distractors[rng.uniform_index(out.distractors.size())];
        std::vector<int> positions(static_cast<size_t>(len));
        for (int i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = i;
        rng.shuffle(positions);
        for (int s = 0; s < n_signal; ++s)
            tokens[static_cast<size_t>(positions[static_cast<size_t>(s)])] =
                signals[rng.uniform_index(signals.size())];
        LabeledSentence sent;
        sent.tokens = std::move(tokens);
        sent.label = label;
        sent.raw = detokenize(sent.tokens, out.vocab);
        return sent;
    };

    std::set<std::vector<TokenId>> train_keys;
    out.train.reserve(static_cast<size_t>(spec.n_train));
    for (int i = 0; i < spec.n_train; ++i) {
        auto s = make_sentence(i % spec.n_classes);
        train_keys.insert(s.tokens);
        out.train.push_back(std::move(s));
    }
    out.test.reserve(static_cast<size_t>(spec.n_test));
    for (int i = 0; i < spec.n_test; ++i) {
        // resample until the sentence is unseen in train
        for (int attempt = 0;; ++attempt) {
            auto s = make_sentence(i % spec.n_classes);
            if (!train_keys.count(s.tokens)) {
                out.test.push_back(std::move(s));
                break;
            }
            if (attempt > 1000) throw Error("synth: cannot generate test sentence distinct from train");
        }
    }
    return out;
}

}  // namespace ghost
