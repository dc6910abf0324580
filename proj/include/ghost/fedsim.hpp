#pragma once

#include <string>
#include <vector>

#include "ghost/toymodel.hpp"

namespace ghost {

enum class DefenseKind { none, noise, prune, ghost };

DefenseKind defense_from_string(const std::string& s);
std::string to_string(DefenseKind defense);

struct FedConfig {
    int batch_size = 32;
    double lr = 1e-5;
    int max_epochs = 50;
    int patience = 5;
    double eval_split = 0.2;
    DefenseKind defense = DefenseKind::none;
    double noise_sigma = 0.05;  // noise defense strength
    double noise_clip = 1.0;    // clip norm C
    double prune_ratio = 0.99;  // prune defense strength
    uint64_t seed = 1;

    void validate() const;
};

// one shared (post-defense) gradient per local iteration, FedSGD style
struct RoundLog {
    int round = 0;
    int epoch = 0;
    std::vector<std::size_t> batch_ids;  // indices into the training set
    double loss = 0.0;
    std::vector<float> gradient;  // flattened, quantized to the wire format
};

struct FedRunResult {
    explicit FedRunResult(ToyModel m) : model(std::move(m)) {}

    ToyModel model;
    std::vector<RoundLog> rounds;
    std::vector<double> eval_losses;  // one per completed epoch
    int epochs_run = 0;
    bool early_stopped = false;
};

// clip to L2 norm C, then add N(0, sigma^2 C^2) noise per coordinate
GradientSnapshot apply_noise_defense(const GradientSnapshot& g, double sigma, double clip,
                                     uint64_t seed);

// zero floor(ratio * len) uniformly chosen coordinates
GradientSnapshot apply_prune_defense(const GradientSnapshot& g, double ratio, uint64_t seed);

// single victim client; per round: batch, gradients, defense, log, sgd step.
// With defense=ghost the caller passes the pre-obfuscated training set and
// gradients are shared unmodified.
FedRunResult fedsgd_run(const ToyModel& initial, const std::vector<LabeledSentence>& train,
                        const FedConfig& cfg);

struct EvalReport {
    double loss = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    double perplexity = 0.0;
};

EvalReport evaluate(const ToyModel& model, const std::vector<LabeledSentence>& dataset);

// JSONL archive: header line with the config echo, then one line per round
// with a base64 f32 gradient payload
void save_round_logs(const std::string& path, const FedConfig& cfg,
                     const std::vector<RoundLog>& rounds);
std::pair<FedConfig, std::vector<RoundLog>> load_round_logs(const std::string& path);

}  // namespace ghost
