#pragma once

#include "disarm/train.hpp"

// Runs the nine-variant grid: three unimodal representations, the pairwise
// fusions (concatenation and joint-space pooling), and the full model. Each
// variant trains and evaluates exactly like the main path.

namespace disarm::ablation {

struct AblationOutcome {
    model::Variant variant = model::Variant::Full;
    bool ok = false;
    std::string error;
    std::map<std::string, train::EvalReport> reports;
    train::TrainHistory history;
};

AblationOutcome run_ablation(model::Variant variant, const model::ModelDims& dims,
                             const train::TrainConfig& cfg, const std::vector<std::string>& vocab,
                             const train::InstanceSet& train_set, const train::InstanceSet& val_set,
                             const train::InstanceSet& test_set, bool ct_tanh = true, int jobs = 1);

// All nine variants in report order; one variant failing does not stop the
// others.
std::vector<AblationOutcome> run_all_ablations(const model::ModelDims& dims, const train::TrainConfig& cfg,
                                               const std::vector<std::string>& vocab,
                                               const train::InstanceSet& train_set,
                                               const train::InstanceSet& val_set,
                                               const train::InstanceSet& test_set, bool ct_tanh = true,
                                               int jobs = 1);

// Rows = variants, per-scenario macro-F1 and per-class P/R columns.
std::string format_ablation_table(const std::vector<AblationOutcome>& outcomes);

}  // namespace disarm::ablation
