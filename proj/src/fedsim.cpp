#include "ghost/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ghost/metrics.hpp"
#include "json.hpp"

namespace ghost {

DefenseKind defense_from_string(const std::string& s) {
    if (s == "none") return DefenseKind::none;
    if (s == "noise") return DefenseKind::noise;
    if (s == "prune") return DefenseKind::prune;
    if (s == "ghost") return DefenseKind::ghost;
    throw Error("defense: unknown kind '" + s + "' (none|noise|prune|ghost)");
}

std::string to_string(DefenseKind defense) {
    switch (defense) {
        case DefenseKind::none: return "none";
        case DefenseKind::noise: return "noise";
        case DefenseKind::prune: return "prune";
        case DefenseKind::ghost: return "ghost";
    }
    return "?";
}

void FedConfig::validate() const {
    if (batch_size < 1) throw Error("fed config: batch_size must be >= 1");
    if (!(eval_split > 0.0) || !(eval_split < 1.0))
        throw Error("fed config: eval_split must lie in (0, 1)");
    if (max_epochs < 1 || patience < 0) throw Error("fed config: bad epoch/patience settings");
    if (noise_sigma < 0.0 || !(noise_clip > 0.0))
        throw Error("fed config: noise defense needs sigma >= 0 and clip > 0");
    if (prune_ratio < 0.0 || prune_ratio > 1.0)
        throw Error("fed config: prune ratio must lie in [0, 1]");
}

GradientSnapshot apply_noise_defense(const GradientSnapshot& g, double sigma, double clip,
                                     uint64_t seed) {
    if (sigma < 0.0 || !(clip > 0.0)) throw Error("noise defense: sigma >= 0 and clip > 0 required");
    GradientSnapshot out = g;
    double norm = 0.0;
    for (double v : out.values) {
        if (!std::isfinite(v)) throw Error("noise defense: non-finite gradient");
        norm += v * v;
    }
    norm = std::sqrt(norm);
    const double scale = norm > clip ? clip / norm : 1.0;
    Rng rng(seed);
    const double stddev = sigma * clip;
    for (double& v : out.values) v = v * scale + (stddev > 0.0 ? rng.normal(0.0, stddev) : 0.0);
    return out;
}

GradientSnapshot apply_prune_defense(const GradientSnapshot& g, double ratio, uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) throw Error("prune defense: ratio must lie in [0, 1]");
    GradientSnapshot out = g;
    const size_t n = out.values.size();
    const size_t prune = static_cast<size_t>(std::floor(ratio * static_cast<double>(n)));
    if (prune == 0) return out;
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (size_t i = 0; i < prune; ++i) {  // partial Fisher-Yates
        const size_t j = i + static_cast<size_t>(rng.uniform_index(n - i));
        std::swap(idx[i], idx[j]);
        out.values[idx[i]] = 0.0;
    }
    return out;
}

EvalReport evaluate(const ToyModel& model, const std::vector<LabeledSentence>& dataset) {
    if (dataset.empty()) throw Error("evaluate: empty dataset");
    EvalReport rep;
    std::vector<int> predictions, labels;
    predictions.reserve(dataset.size());
    labels.reserve(dataset.size());
    for (const auto& s : dataset) {
        const auto fwd = model.forward_hidden_states(s.tokens);
        int best = 0;
        for (size_t c = 1; c < fwd.logits.size(); ++c)
            if (fwd.logits[c] > fwd.logits[static_cast<size_t>(best)]) best = static_cast<int>(c);
        predictions.push_back(best);
        labels.push_back(s.label);
        rep.loss += model.loss_only(s.tokens, s.label);
    }
    rep.loss /= static_cast<double>(dataset.size());
    const auto [acc, f1] = classification_metrics(predictions, labels);
    rep.accuracy = acc;
    rep.f1 = f1;
    rep.perplexity = perplexity(rep.loss);
    return rep;
}

FedRunResult fedsgd_run(const ToyModel& initial, const std::vector<LabeledSentence>& train,
                        const FedConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw Error("fedsgd: empty training set");

    // held-out split for early stopping
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(cfg.seed, 0));
    split_rng.shuffle(order);
    size_t n_eval = static_cast<size_t>(std::floor(cfg.eval_split * static_cast<double>(train.size())));
    n_eval = std::max<size_t>(1, std::min(n_eval, train.size() - 1));
    std::vector<size_t> eval_ids(order.begin(), order.begin() + static_cast<long>(n_eval));
    std::vector<size_t> pool(order.begin() + static_cast<long>(n_eval), order.end());
    std::vector<LabeledSentence> eval_set;
    eval_set.reserve(eval_ids.size());
    for (size_t id : eval_ids) eval_set.push_back(train[id]);

    FedRunResult result(initial);
    double best_eval = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;
    int round = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, 1 + static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(pool);
        for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(pool.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<LabeledSentence> batch;
            std::vector<size_t> batch_ids;
            for (size_t i = start; i < stop; ++i) {
                batch.push_back(train[pool[i]]);
                batch_ids.push_back(pool[i]);
            }
            auto [loss, grad] = result.model.loss_and_gradients(batch);
            if (!std::isfinite(loss))
                throw Error("fedsgd: non-finite loss in round " + std::to_string(round));

            GradientSnapshot shared = [&] {
                const uint64_t defense_seed = derive_seed(cfg.seed, 1000000 + static_cast<uint64_t>(round));
                switch (cfg.defense) {
                    case DefenseKind::noise:
                        return apply_noise_defense(grad, cfg.noise_sigma, cfg.noise_clip,
                                                   defense_seed);
                    case DefenseKind::prune:
                        return apply_prune_defense(grad, cfg.prune_ratio, defense_seed);
                    case DefenseKind::none:
                    case DefenseKind::ghost:
                        // ghost obfuscates tokens up front; gradients go out untouched
                        return grad;
                }
                return grad;
            }();

            RoundLog log;
            log.round = round;
            log.epoch = epoch;
            log.batch_ids = std::move(batch_ids);
            log.loss = loss;
            log.gradient.resize(shared.values.size());
            for (size_t i = 0; i < shared.values.size(); ++i)
                log.gradient[i] = static_cast<float>(shared.values[i]);
            result.rounds.push_back(std::move(log));

            result.model.sgd_step(shared, cfg.lr);
            ++round;
        }
        const double eval_loss = evaluate(result.model, eval_set).loss;
        result.eval_losses.push_back(eval_loss);
        result.epochs_run = epoch + 1;
        if (eval_loss < best_eval) {
            best_eval = eval_loss;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }
    return result;
}

void save_round_logs(const std::string& path, const FedConfig& cfg,
                     const std::vector<RoundLog>& rounds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("round log: cannot write '" + path + "'");
    nlohmann::json header;
    header["type"] = "header";
    header["config"] = {{"batch_size", cfg.batch_size},
                        {"lr", cfg.lr},
                        {"max_epochs", cfg.max_epochs},
                        {"patience", cfg.patience},
                        {"eval_split", cfg.eval_split},
                        {"defense", to_string(cfg.defense)},
                        {"noise_sigma", cfg.noise_sigma},
                        {"noise_clip", cfg.noise_clip},
                        {"prune_ratio", cfg.prune_ratio},
                        {"seed", cfg.seed}};
    out << header.dump() << '\n';
    for (const auto& r : rounds) {
        nlohmann::json j;
        j["type"] = "round";
        j["round"] = r.round;
        j["epoch"] = r.epoch;
        j["batch"] = r.batch_ids;
        j["loss"] = r.loss;
        j["grad_b64"] = base64_encode(r.gradient);
        out << j.dump() << '\n';
    }
}

std::pair<FedConfig, std::vector<RoundLog>> load_round_logs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("round log: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error("round log: missing header line");
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("type", "") != "header") throw Error("round log: first line is not a header");
    FedConfig cfg;
    const auto& c = header.at("config");
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.lr = c.at("lr").get<double>();
    cfg.max_epochs = c.at("max_epochs").get<int>();
    cfg.patience = c.at("patience").get<int>();
    cfg.eval_split = c.at("eval_split").get<double>();
    cfg.defense = defense_from_string(c.at("defense").get<std::string>());
    cfg.noise_sigma = c.at("noise_sigma").get<double>();
    cfg.noise_clip = c.at("noise_clip").get<double>();
    cfg.prune_ratio = c.at("prune_ratio").get<double>();
    cfg.seed = c.at("seed").get<uint64_t>();

    std::vector<RoundLog> rounds;
    size_t expected_len = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("type", "") != "round") continue;
        RoundLog r;
        r.round = j.at("round").get<int>();
        r.epoch = j.value("epoch", 0);
        r.batch_ids = j.at("batch").get<std::vector<size_t>>();
        r.loss = j.at("loss").get<double>();
        r.gradient = base64_decode_floats(j.at("grad_b64").get<std::string>());
        if (expected_len == 0) expected_len = r.gradient.size();
        if (r.gradient.size() != expected_len)
            throw Error("round log: inconsistent gradient length at round " +
                        std::to_string(r.round));
        rounds.push_back(std::move(r));
    }
    return {cfg, std::move(rounds)};
}

}  // namespace ghost
