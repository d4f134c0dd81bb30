#pragma once

#include <map>
#include <string>
#include <vector>

#include "disarm/metrics.hpp"
#include "disarm/model.hpp"

// Minibatch Adam training with decoupled weight decay, validation-macro-F1
// early stopping, and scenario-keyed evaluation. Fully deterministic for a
// fixed seed: one RNG drives shuffling, batches accumulate in index order.

namespace disarm::train {

struct TrainConfig {
    int batch_size = 16;
    int max_epochs = 30;
    float learning_rate = 1e-4f;
    float weight_decay = 1e-5f;
    int early_stop_patience = 5;
    float threshold = 0.5f;
    uint64_t seed = 0;
    // Adam internals. The epsilon guard sits far below float32 gradient
    // scales; a 1e-8 floor would freeze the 0.02-init fusion cascade whose
    // early gradients are smaller than that.
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float adam_eps = 1e-16f;
};

struct EpochRecord {
    int epoch = 0;
    float train_loss = 0.0f;
    double val_macro_f1 = 0.0;
};

struct TrainHistory {
    double initial_val_macro_f1 = 0.0;  // validation score of the untrained parameters (epoch 0)
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 0 = initial parameters
    double best_val_macro_f1 = 0.0;
    bool stopped_early = false;
};

// Featureized instances ready for the model.
struct InstanceSet {
    std::vector<model::Features> features;
    std::vector<int> labels;
    std::vector<data::TargetInstance> instances;

    size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }
};

// Resolves entity rows against the vocab and runs the encoders once per
// instance. Records are looked up by meme id; relative image paths resolve
// against base_dir.
InstanceSet build_instance_set(const std::vector<data::TargetInstance>& instances,
                               const std::vector<data::MemeRecord>& records,
                               const std::vector<std::string>& vocab, const encoders::EncoderSet& enc,
                               const std::string& base_dir = "");

// Normalized, deduplicated, sorted entity vocabulary of the train instances.
std::vector<std::string> train_vocab(const std::vector<data::TargetInstance>& train_instances);

Vec predict_probs(const model::ModelParams& params, const InstanceSet& set, int jobs = 1);

std::vector<int> predict_labels(const model::ModelParams& params, const InstanceSet& set, int jobs = 1);

double macro_f1_on(const model::ModelParams& params, const InstanceSet& set, int jobs = 1);

struct AdamState {
    model::ModelGrads m;
    model::ModelGrads v;
    long step = 0;
};

AdamState init_adam_state(const model::ModelParams& params);

// One Adam update with decoupled weight decay. Decay applies to dense
// weight matrices only, so embedding rows with zero gradient and all biases
// stay bitwise unchanged.
void adam_step(model::ModelParams& params, const model::ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg);

// Returns the checkpoint with the best validation macro-F1 (initial
// parameters count as epoch 0) and stops after `early_stop_patience` epochs
// without improvement. Non-finite losses abort with the offending batch.
TrainHistory train(model::ModelParams& params, const InstanceSet& train_set, const InstanceSet& val_set,
                   const TrainConfig& cfg);

// One report per scenario present plus a pooled report over all instances.
std::map<std::string, EvalReport> evaluate(const model::ModelParams& params, const InstanceSet& test_set,
                                           int jobs = 1);

std::string history_to_json_string(const TrainHistory& h, uint64_t seed);

}  // namespace disarm::train
