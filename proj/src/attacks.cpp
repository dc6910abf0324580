#include "ghost/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ghost/geometry.hpp"

namespace ghost {

AttackResult embedding_leakage_attack(const RoundLog& log, const ToyModel& model,
                                      double threshold) {
    if (log.gradient.size() != model.params().size())
        throw Error("leakage attack: gradient length does not match the model");
    const ParamSegment* emb = nullptr;
    for (const auto& s : model.segments())
        if (s.name == "embedding") emb = &s;
    if (emb == nullptr) throw Error("leakage attack: snapshot has no embedding segment");

    AttackResult result;
    result.attacker = "leakage";
    const int d = emb->cols;
    for (int t = 0; t < emb->rows; ++t) {
        double norm = 0.0;
        for (int j = 0; j < d; ++j) {
            const double v = log.gradient[emb->offset + static_cast<size_t>(t) * d + j];
            norm += v * v;
        }
        if (std::sqrt(norm) > threshold) result.recovered.push_back(static_cast<TokenId>(t));
    }
    return result;
}

double bag_rouge1(std::span<const TokenId> recovered, std::span<const TokenId> original) {
    std::set<TokenId> rec(recovered.begin(), recovered.end());
    std::set<TokenId> ori(original.begin(), original.end());
    if (rec.empty() || ori.empty()) return 0.0;
    size_t overlap = 0;
    for (TokenId t : rec) overlap += ori.count(t);
    if (overlap == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(rec.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(ori.size());
    return 2.0 * p * r / (p + r);
}

namespace {

// squared L2 over every segment except the embedding table, which the dummy
// input bypasses entirely
double matching_objective(const GradientSnapshot& dummy, const std::vector<float>& observed) {
    double total = 0.0;
    for (const auto& seg : dummy.segments) {
        if (seg.name == "embedding") continue;
        for (size_t i = seg.offset; i < seg.offset + seg.count; ++i) {
            const double d = dummy.values[i] - static_cast<double>(observed[i]);
            total += d * d;
        }
    }
    return total;
}

}  // namespace

AttackResult gradient_matching_attack(const RoundLog& log, const ToyModel& model,
                                      const EmbeddingTable& table, int seq_len, int label,
                                      int iters, double lr_a, uint64_t seed) {
    if (log.gradient.size() != model.params().size())
        throw Error("matching attack: gradient length does not match the model");
    if (seq_len < 1 || seq_len > model.config().max_len)
        throw Error("matching attack: bad sequence length");

    const int d = model.config().d_e;
    Rng rng(seed);
    Mat dummy(seq_len, d);
    for (auto& v : dummy.a) v = rng.normal(0.0, 0.5);

    auto objective = [&](const Mat& rows) {
        const auto [loss, grad] = model.loss_and_gradients_from_rows(rows, label);
        (void)loss;
        return matching_objective(grad, log.gradient);
    };

    AttackResult result;
    result.attacker = "matching";

    constexpr double kFdStep = 1e-4;
    Mat best = dummy;
    double best_obj = objective(dummy);
    double obj = best_obj;
    // Adam-style moments keep the step size usable across the broad range of
    // curvature this objective exhibits
    Mat m1(seq_len, d), m2(seq_len, d);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
    int done = 0;
    for (int it = 0; it < iters; ++it) {
        Mat grad(seq_len, d);
        bool finite = true;
        for (size_t i = 0; i < dummy.a.size() && finite; ++i) {
            const double saved = dummy.a[i];
            dummy.a[i] = saved + kFdStep;
            const double up = objective(dummy);
            dummy.a[i] = saved - kFdStep;
            const double down = objective(dummy);
            dummy.a[i] = saved;
            grad.a[i] = (up - down) / (2.0 * kFdStep);
            finite = std::isfinite(up) && std::isfinite(down);
        }
        if (!finite) {
            result.diverged = true;
            break;
        }
        for (size_t i = 0; i < dummy.a.size(); ++i) {
            m1.a[i] = kBeta1 * m1.a[i] + (1.0 - kBeta1) * grad.a[i];
            m2.a[i] = kBeta2 * m2.a[i] + (1.0 - kBeta2) * grad.a[i] * grad.a[i];
            const double mh = m1.a[i] / (1.0 - std::pow(kBeta1, it + 1));
            const double vh = m2.a[i] / (1.0 - std::pow(kBeta2, it + 1));
            dummy.a[i] -= lr_a * mh / (std::sqrt(vh) + kAdamEps);
        }
        obj = objective(dummy);
        done = it + 1;
        if (!std::isfinite(obj)) {
            result.diverged = true;
            break;
        }
        if (obj < best_obj) {
            best_obj = obj;
            best = dummy;
        }
    }
    result.iterations = done;
    result.residual = best_obj;

    // snap each optimized row to the nearest vocabulary embedding
    std::vector<float> row_f(static_cast<size_t>(d));
    for (int i = 0; i < seq_len; ++i) {
        for (int j = 0; j < d; ++j) row_f[static_cast<size_t>(j)] = static_cast<float>(best.at(i, j));
        TokenId nearest = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (TokenId t = 0; t < static_cast<TokenId>(table.rows()); ++t) {
            const double dist = cosine_distance(row_f, table.row(t));
            if (dist < best_dist) {
                best_dist = dist;
                nearest = t;
            }
        }
        result.recovered.push_back(nearest);
    }
    return result;
}

AdaptiveStrategy adaptive_strategy_from_string(const std::string& s) {
    if (s == "sampling") return AdaptiveStrategy::sampling;
    if (s == "max") return AdaptiveStrategy::max_similarity;
    if (s == "median") return AdaptiveStrategy::median_similarity;
    if (s == "mean") return AdaptiveStrategy::mean_embedding;
    throw Error("adaptive attack: unknown strategy '" + s + "' (sampling|max|median|mean)");
}

std::string to_string(AdaptiveStrategy strategy) {
    switch (strategy) {
        case AdaptiveStrategy::sampling: return "sampling";
        case AdaptiveStrategy::max_similarity: return "max";
        case AdaptiveStrategy::median_similarity: return "median";
        case AdaptiveStrategy::mean_embedding: return "mean";
    }
    return "?";
}

AttackResult adaptive_recover(std::span<const TokenId> obfuscated_tokens,
                              const std::map<TokenId, std::set<TokenId>>& reverse,
                              const EmbeddingTable& table, AdaptiveStrategy strategy,
                              uint64_t seed) {
    AttackResult result;
    result.attacker = to_string(strategy);
    Rng rng(seed);

    for (TokenId t : obfuscated_tokens) {
        auto it = reverse.find(t);
        if (it == reverse.end() || it->second.empty()) {
            result.recovered.push_back(t);  // never used as a shadow: keep it
            continue;
        }
        // candidates in ascending id order with their similarity to t
        std::vector<std::pair<TokenId, double>> scored;
        scored.reserve(it->second.size());
        for (TokenId ori : it->second)
            scored.emplace_back(ori, cosine_similarity(table.row(t), table.row(ori)));

        TokenId picked = scored.front().first;
        switch (strategy) {
            case AdaptiveStrategy::sampling: {
                // similarities shifted by +1 so the weights are non-negative
                double total = 0.0;
                for (const auto& [ori, sim] : scored) total += sim + 1.0;
                double draw = rng.uniform() * total;
                picked = scored.back().first;
                for (const auto& [ori, sim] : scored) {
                    draw -= sim + 1.0;
                    if (draw <= 0.0) {
                        picked = ori;
                        break;
                    }
                }
                break;
            }
            case AdaptiveStrategy::max_similarity: {
                double best = -2.0;
                for (const auto& [ori, sim] : scored)
                    if (sim > best) {
                        best = sim;
                        picked = ori;
                    }
                break;
            }
            case AdaptiveStrategy::median_similarity: {
                // descending similarity, ascending id on ties; upper median
                std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                    if (a.second != b.second) return a.second > b.second;
                    return a.first < b.first;
                });
                picked = scored[(scored.size() - 1) / 2].first;
                break;
            }
            case AdaptiveStrategy::mean_embedding: {
                std::vector<float> mean(static_cast<size_t>(table.dim), 0.0f);
                for (const auto& [ori, sim] : scored) {
                    (void)sim;
                    const auto row = table.row(ori);
                    for (size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
                }
                double mean_norm = 0.0;
                for (auto& v : mean) {
                    v /= static_cast<float>(scored.size());
                    mean_norm += static_cast<double>(v) * v;
                }
                double best = -2.0;
                for (const auto& [ori, sim] : scored) {
                    // degenerate zero mean: similarity to it is undefined, rank
                    // by direct similarity instead
                    const double score_v =
                        mean_norm > 0.0 ? cosine_similarity(table.row(ori), mean) : sim;
                    if (score_v > best) {
                        best = score_v;
                        picked = ori;
                    }
                }
                break;
            }
        }
        result.recovered.push_back(picked);
    }
    return result;
}

}  // namespace ghost
