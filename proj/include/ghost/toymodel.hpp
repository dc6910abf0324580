#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ghost/corpus.hpp"

namespace ghost {

// row-major double matrix, just enough for the model below
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    std::span<double> row(int r) { return {a.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const double> row(int r) const { return {a.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
};

struct ModelConfig {
    int d_e = 16;
    int n_layers = 2;
    int n_heads = 2;
    int d_ff = 32;
    int max_len = 16;
    int n_classes = 2;
    int vocab_size = 0;
    uint64_t seed = 1;
    // whether the raw embedding+position output joins the hidden-state set
    bool include_embedding_in_hidden = false;

    void validate() const;
};

struct ParamSegment {
    std::string name;
    size_t offset = 0;
    size_t count = 0;
    int rows = 0;
    int cols = 0;
};

// flattened per-parameter gradient plus the segment layout it was taken under
struct GradientSnapshot {
    std::vector<double> values;
    std::vector<ParamSegment> segments;

    std::span<const double> segment(const std::string& name) const;
    double l2_norm() const;
};

// post-block outputs, one seq_len x d_e matrix per considered layer
struct HiddenStates {
    std::vector<Mat> layers;
};

double hidden_state_mse(const HiddenStates& h1, const HiddenStates& h2);

struct ForwardResult {
    HiddenStates hidden;
    std::vector<double> logits;
};

// Small pre-norm transformer classifier: learned positions, GELU feed-forward,
// first-token pooling, untied classification head. Gradients are exact
// analytic reverse-mode derivatives, computed in 64-bit throughout.
class ToyModel {
public:
    static ToyModel init(const ModelConfig& cfg);
    // embedding rows copied from the table; everything else as init()
    static ToyModel init_with_embeddings(ModelConfig cfg, const EmbeddingTable& table);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& mutable_params() { return params_; }
    const std::vector<ParamSegment>& segments() const { return segments_; }
    std::span<double> segment(const std::string& name);
    std::span<const double> segment(const std::string& name) const;

    ForwardResult forward_hidden_states(std::span<const TokenId> tokens) const;

    std::pair<double, GradientSnapshot> loss_and_gradients(
        const std::vector<LabeledSentence>& batch) const;

    // forward/backward with caller-supplied input rows standing in for the
    // embedding lookup (the gradient-matching attacker's entry point); the
    // embedding segment of the returned gradient is zero
    std::pair<double, GradientSnapshot> loss_and_gradients_from_rows(const Mat& rows,
                                                                     int label) const;

    double loss_only(std::span<const TokenId> tokens, int label) const;

    void sgd_step(const GradientSnapshot& g, double lr);

    void save(const std::string& path) const;
    static ToyModel load(const std::string& path);

private:
    ToyModel() = default;

    Mat embed(std::span<const TokenId> tokens) const;
    void check_tokens(std::span<const TokenId> tokens) const;

    ModelConfig cfg_;
    std::vector<double> params_;
    std::vector<ParamSegment> segments_;
};

double parameter_distance(const ToyModel& a, const ToyModel& b);

}  // namespace ghost
