#include "ghost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

namespace ghost {

namespace {

double f_measure(double overlap, double n_cand, double n_ref) {
    if (overlap <= 0.0 || n_cand <= 0.0 || n_ref <= 0.0) return 0.0;
    const double p = overlap / n_cand;
    const double r = overlap / n_ref;
    return 2.0 * p * r / (p + r);
}

}  // namespace

double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
               int n) {
    if (n != 1 && n != 2) throw Error("rouge_n: n must be 1 or 2");
    const size_t un = static_cast<size_t>(n);
    if (candidate.size() < un || reference.size() < un) return 0.0;
    std::map<std::vector<std::string>, int> ref_grams;
    for (size_t i = 0; i + un <= reference.size(); ++i)
        ++ref_grams[{reference.begin() + i, reference.begin() + i + un}];
    double overlap = 0.0;
    for (size_t i = 0; i + un <= candidate.size(); ++i) {
        auto it = ref_grams.find({candidate.begin() + i, candidate.begin() + i + un});
        if (it != ref_grams.end() && it->second > 0) {
            --it->second;  // clipped counts
            overlap += 1.0;
        }
    }
    return f_measure(overlap, static_cast<double>(candidate.size() - un + 1),
                     static_cast<double>(reference.size() - un + 1));
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const size_t nc = candidate.size(), nr = reference.size();
    std::vector<size_t> prev(nr + 1, 0), cur(nr + 1, 0);
    for (size_t i = 1; i <= nc; ++i) {
        for (size_t j = 1; j <= nr; ++j)
            cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                          : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return f_measure(static_cast<double>(prev[nr]), static_cast<double>(nc),
                     static_cast<double>(nr));
}

double meteor_lite(std::span<const std::string> candidate,
                   std::span<const std::string> reference, const LemmaTable& lemmas) {
    if (candidate.empty() || reference.empty()) return 0.0;
    constexpr double kAlpha = 0.9;
    constexpr double kGamma = 0.5;
    constexpr double kBeta = 3.0;

    // alignment[i] = matched reference position of candidate token i
    std::vector<int> alignment(candidate.size(), -1);
    std::vector<bool> ref_used(reference.size(), false);

    // stage 1: exact matches, leftmost-first
    for (size_t i = 0; i < candidate.size(); ++i)
        for (size_t j = 0; j < reference.size(); ++j)
            if (!ref_used[j] && candidate[i] == reference[j]) {
                alignment[i] = static_cast<int>(j);
                ref_used[j] = true;
                break;
            }
    // stage 2: lemma matches on what is left
    for (size_t i = 0; i < candidate.size(); ++i) {
        if (alignment[i] >= 0) continue;
        const std::string lc = lemmas.lemma(candidate[i]);
        for (size_t j = 0; j < reference.size(); ++j)
            if (!ref_used[j] && lc == lemmas.lemma(reference[j])) {
                alignment[i] = static_cast<int>(j);
                ref_used[j] = true;
                break;
            }
    }

    int matches = 0;
    for (int a : alignment) matches += a >= 0 ? 1 : 0;
    if (matches == 0) return 0.0;

    // chunks: maximal runs adjacent in both sequences
    int chunks = 0;
    int prev_ref = -2;
    for (size_t i = 0; i < candidate.size(); ++i) {
        if (alignment[i] < 0) {
            prev_ref = -2;
            continue;
        }
        if (alignment[i] != prev_ref + 1) ++chunks;
        prev_ref = alignment[i];
    }

    const double p = static_cast<double>(matches) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(matches) / static_cast<double>(reference.size());
    const double f_mean = p * r / (kAlpha * p + (1.0 - kAlpha) * r);
    const double penalty =
        kGamma * std::pow(static_cast<double>(chunks) / static_cast<double>(matches), kBeta);
    return f_mean * (1.0 - penalty);
}

std::vector<std::string> id_to_surface(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids) out.push_back(vocab.surface(id));
    return out;
}

SimilarityReport similarity_report(const std::vector<std::vector<TokenId>>& candidates,
                                   const std::vector<std::vector<TokenId>>& references,
                                   const Vocabulary& vocab, const LemmaTable& lemmas) {
    if (candidates.size() != references.size())
        throw Error("similarity report: candidate/reference count mismatch");
    SimilarityReport rep;
    rep.n_pairs = candidates.size();
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto cand = id_to_surface(candidates[i], vocab);
        const auto ref = id_to_surface(references[i], vocab);
        rep.r1 += rouge_n(cand, ref, 1);
        rep.r2 += rouge_n(cand, ref, 2);
        rep.rl += rouge_l(cand, ref);
        rep.meteor += meteor_lite(cand, ref, lemmas);
    }
    if (rep.n_pairs > 0) {
        rep.r1 /= static_cast<double>(rep.n_pairs);
        rep.r2 /= static_cast<double>(rep.n_pairs);
        rep.rl /= static_cast<double>(rep.n_pairs);
        rep.meteor /= static_cast<double>(rep.n_pairs);
    }
    return rep;
}

std::string similarity_report_to_json(const SimilarityReport& report) {
    nlohmann::json j;
    j["r1"] = report.r1;
    j["r2"] = report.r2;
    j["rl"] = report.rl;
    j["meteor"] = report.meteor;
    j["n_pairs"] = report.n_pairs;
    return j.dump();
}

std::pair<double, double> classification_metrics(std::span<const int> predictions,
                                                 std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw Error("classification metrics: prediction/label length mismatch");
    if (predictions.empty()) throw Error("classification metrics: empty input");
    int n_classes = 0;
    size_t correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        n_classes = std::max({n_classes, predictions[i] + 1, labels[i] + 1});
        correct += predictions[i] == labels[i] ? 1 : 0;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());

    auto f1_of_class = [&](int c) {
        size_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < predictions.size(); ++i) {
            if (predictions[i] == c && labels[i] == c) ++tp;
            else if (predictions[i] == c) ++fp;
            else if (labels[i] == c) ++fn;
        }
        if (tp == 0) return 0.0;
        const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
        return 2.0 * p * r / (p + r);
    };

    double f1;
    if (n_classes <= 2) {
        f1 = f1_of_class(1);
    } else {
        f1 = 0.0;
        for (int c = 0; c < n_classes; ++c) f1 += f1_of_class(c);
        f1 /= n_classes;
    }
    return {accuracy, f1};
}

double perplexity(double mean_loss) {
    if (!std::isfinite(mean_loss)) throw Error("perplexity: non-finite loss");
    return std::exp(mean_loss);
}

}  // namespace ghost
