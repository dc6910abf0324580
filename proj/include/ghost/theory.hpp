#pragma once

#include <string>
#include <vector>

#include "ghost/shadow_select.hpp"
#include "ghost/toymodel.hpp"

namespace ghost {

// per original/obfuscated pair: loss and gradient deviations under the
// pre-trained and the obfuscated-tuned parameters
struct DeviationRecord {
    double eps_l = 0.0;         // |L(x;th) - L(x~;th)|, pre-trained
    double eps_g = 0.0;         // ||grad L(x;th) - grad L(x~;th)||, pre-trained
    double dev_l_tuned = 0.0;   // same loss deviation under the tuned model
    double dev_g_tuned = 0.0;   // same gradient deviation under the tuned model
    double local_eps = 0.0;     // max(eps_l, eps_g)
    double global_eps = 0.0;    // max(drifts, local_eps)
};

struct DriftRecord {
    double eps_theta_star = 0.0;   // ||theta* - theta||, tuned on original data
    double eps_theta_tilde = 0.0;  // ||theta~ - theta||, tuned on obfuscated data
};

struct DeviationSet {
    std::vector<DeviationRecord> records;
    DriftRecord drift;
    // report-only Assumption-style diagnostics
    double mean_loss_obf_on_tuned = 0.0;   // mean L(x~; theta~)
    double mean_loss_orig_on_tuned = 0.0;  // mean L(x; theta~)
    double grad_componentwise_fraction = 0.0;
};

DeviationSet compute_deviations(const ToyModel& pretrained, const ToyModel& tuned_original,
                                const ToyModel& tuned_obfuscated,
                                const std::vector<ObfuscatedPair>& pairs);

struct RegressionSummary {
    double slope_loss = 0.0;
    double slope_grad = 0.0;
    double mean_loss_dev = 0.0;
    double mean_grad_dev = 0.0;
    size_t n_records = 0;
};

// OLS in linear scale of the tuned-model deviations against local_eps
RegressionSummary deviation_regression(const std::vector<DeviationRecord>& records);

void save_deviations_csv(const std::string& path, const std::vector<DeviationRecord>& records);
std::string regression_summary_to_json(const RegressionSummary& summary, const DeviationSet& set);

// cosmetic scatter of both deviation series against local_eps; the CSV is the
// contract, this is a convenience
void save_deviations_svg(const std::string& path, const std::vector<DeviationRecord>& records);

}  // namespace ghost
