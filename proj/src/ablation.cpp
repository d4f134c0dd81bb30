#include "disarm/ablation.hpp"

#include <iomanip>
#include <sstream>

namespace disarm::ablation {

AblationOutcome run_ablation(model::Variant variant, const model::ModelDims& dims,
                             const train::TrainConfig& cfg, const std::vector<std::string>& vocab,
                             const train::InstanceSet& train_set, const train::InstanceSet& val_set,
                             const train::InstanceSet& test_set, bool ct_tanh, int jobs) {
    AblationOutcome out;
    out.variant = variant;
    try {
        model::ModelParams params = model::init_model_params(
            variant, dims, vocab, derive_seed(cfg.seed, std::string("ablation:") + model::variant_name(variant)),
            cfg.threshold, ct_tanh);
        out.history = train::train(params, train_set, val_set, cfg);
        out.reports = train::evaluate(params, test_set, jobs);
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

std::vector<AblationOutcome> run_all_ablations(const model::ModelDims& dims, const train::TrainConfig& cfg,
                                               const std::vector<std::string>& vocab,
                                               const train::InstanceSet& train_set,
                                               const train::InstanceSet& val_set,
                                               const train::InstanceSet& test_set, bool ct_tanh, int jobs) {
    std::vector<AblationOutcome> outcomes;
    for (model::Variant v : model::kAllVariants)
        outcomes.push_back(run_ablation(v, dims, cfg, vocab, train_set, val_set, test_set, ct_tanh, jobs));
    return outcomes;
}

std::string format_ablation_table(const std::vector<AblationOutcome>& outcomes) {
    // Columns follow the per-scenario layout: F1 then per-class P/R.
    std::vector<std::string> scenarios;
    for (const auto& o : outcomes)
        for (const auto& [name, rep] : o.reports)
            if (name != "pooled" && std::find(scenarios.begin(), scenarios.end(), name) == scenarios.end())
                scenarios.push_back(name);
    std::sort(scenarios.begin(), scenarios.end());
    if (scenarios.empty()) scenarios.push_back("pooled");

    std::ostringstream out;
    out << std::left << std::setw(16) << "Approach" << std::right;
    for (const auto& s : scenarios)
        for (const char* col : {"F1", "NH-P", "NH-R", "H-P", "H-R"}) out << std::setw(9) << (s + ":" + col);
    out << "\n" << std::fixed << std::setprecision(4);
    for (const auto& o : outcomes) {
        out << std::left << std::setw(16) << model::variant_name(o.variant) << std::right;
        if (!o.ok) {
            out << "  error: " << o.error << "\n";
            continue;
        }
        for (const auto& s : scenarios) {
            const auto it = o.reports.find(s);
            if (it == o.reports.end()) {
                for (int k = 0; k < 5; ++k) out << std::setw(9) << "-";
                continue;
            }
            const train::EvalReport& r = it->second;
            for (double v : {r.macro_f1, r.not_harmful.precision, r.not_harmful.recall, r.harmful.precision,
                             r.harmful.recall})
                out << std::setw(9) << v;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace disarm::ablation
