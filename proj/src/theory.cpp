#include "ghost/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace ghost {

namespace {

double grad_l2_diff(const GradientSnapshot& a, const GradientSnapshot& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::pair<double, GradientSnapshot> single(const ToyModel& model, const LabeledSentence& s) {
    return model.loss_and_gradients({s});
}

}  // namespace

DeviationSet compute_deviations(const ToyModel& pretrained, const ToyModel& tuned_original,
                                const ToyModel& tuned_obfuscated,
                                const std::vector<ObfuscatedPair>& pairs) {
    if (pairs.empty()) throw Error("deviations: empty pair list");
    if (pretrained.params().size() != tuned_original.params().size() ||
        pretrained.params().size() != tuned_obfuscated.params().size())
        throw Error("deviations: model configurations do not match");

    DeviationSet out;
    out.drift.eps_theta_star = parameter_distance(tuned_original, pretrained);
    out.drift.eps_theta_tilde = parameter_distance(tuned_obfuscated, pretrained);
    const double drift_max = std::max(out.drift.eps_theta_star, out.drift.eps_theta_tilde);

    size_t comps_total = 0, comps_ok = 0;
    for (const auto& pair : pairs) {
        const auto [loss_x_pre, grad_x_pre] = single(pretrained, pair.original);
        const auto [loss_o_pre, grad_o_pre] = single(pretrained, pair.obfuscated);
        const auto [loss_x_tun, grad_x_tun] = single(tuned_obfuscated, pair.original);
        const auto [loss_o_tun, grad_o_tun] = single(tuned_obfuscated, pair.obfuscated);

        DeviationRecord rec;
        rec.eps_l = std::abs(loss_x_pre - loss_o_pre);
        rec.eps_g = grad_l2_diff(grad_x_pre, grad_o_pre);
        rec.dev_l_tuned = std::abs(loss_x_tun - loss_o_tun);
        rec.dev_g_tuned = grad_l2_diff(grad_x_tun, grad_o_tun);
        rec.local_eps = std::max(rec.eps_l, rec.eps_g);
        rec.global_eps = std::max(drift_max, rec.local_eps);
        out.records.push_back(rec);

        out.mean_loss_orig_on_tuned += loss_x_tun;
        out.mean_loss_obf_on_tuned += loss_o_tun;
        // componentwise gradient comparison of the adaptation assumption; the
        // fraction is reported, never asserted
        for (size_t i = 0; i < grad_o_tun.values.size(); ++i) {
            ++comps_total;
            if (grad_o_tun.values[i] <= grad_x_tun.values[i]) ++comps_ok;
        }
    }
    out.mean_loss_orig_on_tuned /= static_cast<double>(pairs.size());
    out.mean_loss_obf_on_tuned /= static_cast<double>(pairs.size());
    out.grad_componentwise_fraction =
        comps_total == 0 ? 0.0 : static_cast<double>(comps_ok) / static_cast<double>(comps_total);
    return out;
}

RegressionSummary deviation_regression(const std::vector<DeviationRecord>& records) {
    if (records.size() < 10) throw Error("regression: need at least 10 records");
    RegressionSummary s;
    s.n_records = records.size();
    const double n = static_cast<double>(records.size());
    double mean_x = 0.0;
    for (const auto& r : records) {
        mean_x += r.local_eps;
        s.mean_loss_dev += r.dev_l_tuned;
        s.mean_grad_dev += r.dev_g_tuned;
    }
    mean_x /= n;
    s.mean_loss_dev /= n;
    s.mean_grad_dev /= n;

    double var_x = 0.0, cov_l = 0.0, cov_g = 0.0;
    for (const auto& r : records) {
        const double dx = r.local_eps - mean_x;
        var_x += dx * dx;
        cov_l += dx * (r.dev_l_tuned - s.mean_loss_dev);
        cov_g += dx * (r.dev_g_tuned - s.mean_grad_dev);
    }
    if (var_x <= 0.0) throw Error("regression: degenerate regressor (zero variance in local_eps)");
    s.slope_loss = cov_l / var_x;
    s.slope_grad = cov_g / var_x;
    return s;
}

void save_deviations_csv(const std::string& path, const std::vector<DeviationRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("deviations: cannot write '" + path + "'");
    out << "eps_L,eps_g,dev_L_tuned,dev_g_tuned,local_eps,global_eps\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.eps_l, r.eps_g,
                      r.dev_l_tuned, r.dev_g_tuned, r.local_eps, r.global_eps);
        out << buf;
    }
}

std::string regression_summary_to_json(const RegressionSummary& summary, const DeviationSet& set) {
    nlohmann::json j;
    j["slope_loss"] = summary.slope_loss;
    j["slope_grad"] = summary.slope_grad;
    j["mean_loss_dev"] = summary.mean_loss_dev;
    j["mean_grad_dev"] = summary.mean_grad_dev;
    j["n_records"] = summary.n_records;
    j["drift_theta_star"] = set.drift.eps_theta_star;
    j["drift_theta_tilde"] = set.drift.eps_theta_tilde;
    j["mean_loss_obf_on_tuned"] = set.mean_loss_obf_on_tuned;
    j["mean_loss_orig_on_tuned"] = set.mean_loss_orig_on_tuned;
    j["grad_componentwise_fraction"] = set.grad_componentwise_fraction;
    return j.dump();
}

void save_deviations_svg(const std::string& path, const std::vector<DeviationRecord>& records) {
    if (records.empty()) throw Error("deviations svg: no records");
    const int w = 640, h = 420, margin = 50;
    double max_x = 0.0, max_y = 0.0;
    for (const auto& r : records) {
        max_x = std::max(max_x, r.local_eps);
        max_y = std::max({max_y, r.dev_l_tuned, r.dev_g_tuned});
    }
    if (max_x <= 0.0) max_x = 1.0;
    if (max_y <= 0.0) max_y = 1.0;
    auto px = [&](double x) { return margin + x / max_x * (w - 2 * margin); };
    auto py = [&](double y) { return h - margin - y / max_y * (h - 2 * margin); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("deviations svg: cannot write '" + path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<line x1='" << margin << "' y1='" << h - margin << "' x2='" << w - margin << "' y2='"
        << h - margin << "' stroke='black'/>\n";
    out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
        << h - margin << "' stroke='black'/>\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf),
                      "<circle cx='%.1f' cy='%.1f' r='3' fill='steelblue' fill-opacity='0.7'/>\n",
                      px(r.local_eps), py(r.dev_l_tuned));
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<circle cx='%.1f' cy='%.1f' r='3' fill='indianred' fill-opacity='0.7'/>\n",
                      px(r.local_eps), py(r.dev_g_tuned));
        out << buf;
    }
    out << "<text x='" << w / 2 << "' y='" << h - 12
        << "' font-size='12' text-anchor='middle'>local epsilon</text>\n";
    out << "<text x='" << w - margin << "' y='" << margin
        << "' font-size='12' text-anchor='end'>blue: loss deviation, red: gradient deviation"
           "</text>\n";
    out << "</svg>\n";
}

}  // namespace ghost
