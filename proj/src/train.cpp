#include "disarm/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <set>
#include <thread>
#include <unordered_map>

namespace disarm::train {

using model::Features;
using model::ModelGrads;
using model::ModelParams;

std::vector<std::string> train_vocab(const std::vector<data::TargetInstance>& train_instances) {
    std::set<std::string> uniq;
    for (const auto& t : train_instances) {
        std::string n = normalize_text(t.entity);
        if (!n.empty()) uniq.insert(std::move(n));
    }
    return {uniq.begin(), uniq.end()};
}

InstanceSet build_instance_set(const std::vector<data::TargetInstance>& instances,
                               const std::vector<data::MemeRecord>& records,
                               const std::vector<std::string>& vocab, const encoders::EncoderSet& enc,
                               const std::string& base_dir) {
    std::unordered_map<std::string, const data::MemeRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.id, &r);

    InstanceSet set;
    set.features.reserve(instances.size());
    set.labels.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto it = by_id.find(inst.meme_id);
        if (it == by_id.end()) throw InputError("instance references unknown meme id: " + inst.meme_id);
        const data::MemeRecord& rec = *it->second;
        Features f;
        const std::string norm = normalize_text(inst.entity);
        const auto lb = std::lower_bound(vocab.begin(), vocab.end(), norm);
        f.entity_row = (lb != vocab.end() && *lb == norm) ? static_cast<Index>(lb - vocab.begin())
                                                          : static_cast<Index>(vocab.size());
        const std::string ctx = rec.context ? rec.context->combined_text() : "";
        f.c = encoders::encode_context(*enc.context, ctx);
        f.o_ent = encoders::encode_harm_text(*enc.harm, rec.ocr_text, inst.entity);
        f.c_img = encoders::encode_image(*enc.image, data::resolve_image_ref(rec, base_dir));
        set.features.push_back(std::move(f));
        set.labels.push_back(inst.label);
        set.instances.push_back(inst);
    }
    return set;
}

Vec predict_probs(const ModelParams& params, const InstanceSet& set, int jobs) {
    Vec probs(static_cast<Index>(set.size()));
    auto run = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            probs(static_cast<Index>(i)) = model::variant_forward(params, set.features[i]).prob;
    };
    const size_t n = set.size();
    if (jobs <= 1 || n < 2) {
        run(0, n);
    } else {
        const size_t workers = std::min<size_t>(static_cast<size_t>(jobs), n);
        std::vector<std::thread> pool;
        const size_t chunk = (n + workers - 1) / workers;
        for (size_t w = 0; w < workers; ++w)
            pool.emplace_back(run, w * chunk, std::min(n, (w + 1) * chunk));
        for (auto& t : pool) t.join();
    }
    return probs;
}

std::vector<int> predict_labels(const ModelParams& params, const InstanceSet& set, int jobs) {
    const Vec probs = predict_probs(params, set, jobs);
    std::vector<int> out(set.size());
    for (size_t i = 0; i < set.size(); ++i) out[i] = probs(static_cast<Index>(i)) >= params.threshold ? 1 : 0;
    return out;
}

double macro_f1_on(const ModelParams& params, const InstanceSet& set, int jobs) {
    return compute_metrics(predict_labels(params, set, jobs), set.labels, "validation").macro_f1;
}

AdamState init_adam_state(const ModelParams& params) {
    return {model::zero_like(params), model::zero_like(params), 0};
}

void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state, const TrainConfig& cfg) {
    ++state.step;
    const float b1 = cfg.beta1;
    const float b2 = cfg.beta2;
    const float bc1 = 1.0f - std::pow(b1, static_cast<float>(state.step));
    const float bc2 = 1.0f - std::pow(b2, static_cast<float>(state.step));

    auto p_refs = model::collect_tensors(params);
    auto g_refs = model::collect_tensors(const_cast<ModelGrads&>(grads));
    auto m_refs = model::collect_tensors(state.m);
    auto v_refs = model::collect_tensors(state.v);
    for (size_t k = 0; k < p_refs.size(); ++k) {
        float* p = p_refs[k].data;
        const float* g = g_refs[k].data;
        float* m = m_refs[k].data;
        float* v = v_refs[k].data;
        const Index n = p_refs[k].rows * p_refs[k].cols;
        // Decoupled shrink on dense weights; embedding rows and biases are
        // exempt so untouched rows stay bitwise identical.
        if (p_refs[k].decay && cfg.weight_decay > 0.0f)
            for (Index i = 0; i < n; ++i) p[i] *= 1.0f - cfg.weight_decay;
        for (Index i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

TrainHistory train(ModelParams& params, const InstanceSet& train_set, const InstanceSet& val_set,
                   const TrainConfig& cfg) {
    if (train_set.empty()) throw ContractError("train: no training instances");
    if (val_set.empty()) throw ContractError("train: no validation instances");
    if (cfg.batch_size <= 0 || cfg.max_epochs < 0 || cfg.learning_rate < 0.0f)
        throw ContractError("train: invalid configuration");

    TrainHistory history;
    history.initial_val_macro_f1 = macro_f1_on(params, val_set);
    history.best_epoch = 0;
    history.best_val_macro_f1 = history.initial_val_macro_f1;
    ModelParams best = params;

    AdamState state = init_adam_state(params);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Fisher-Yates with the run RNG; deterministic for a fixed seed.
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        long batch_index = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            const auto batch_n = static_cast<float>(end - start);
            ModelGrads grads = model::zero_like(params);
            Vec probs(static_cast<Index>(end - start));
            Vec labels(static_cast<Index>(end - start));
            for (size_t i = start; i < end; ++i) {
                const size_t idx = order[i];
                const auto a = model::variant_forward(params, train_set.features[idx]);
                const auto y = static_cast<float>(train_set.labels[idx]);
                probs(static_cast<Index>(i - start)) = a.prob;
                labels(static_cast<Index>(i - start)) = y;
                model::variant_backward(params, train_set.features[idx], a, (a.prob - y) / batch_n, grads);
            }
            const float batch_loss = model::bce_loss(probs, labels);
            if (!std::isfinite(batch_loss))
                throw ContractError("train: non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            loss_sum += static_cast<double>(batch_loss) * (end - start);
            adam_step(params, grads, state, cfg);
            ++batch_index;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = static_cast<float>(loss_sum / static_cast<double>(train_set.size()));
        rec.val_macro_f1 = macro_f1_on(params, val_set);
        history.epochs.push_back(rec);

        if (rec.val_macro_f1 > history.best_val_macro_f1) {
            history.best_val_macro_f1 = rec.val_macro_f1;
            history.best_epoch = epoch;
            best = params;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best > cfg.early_stop_patience) {
                history.stopped_early = true;
                break;
            }
        }
    }

    params = best;
    return history;
}

std::map<std::string, EvalReport> evaluate(const ModelParams& params, const InstanceSet& test_set, int jobs) {
    if (test_set.empty()) throw ContractError("evaluate: no instances");
    const std::vector<int> preds = predict_labels(params, test_set, jobs);

    std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> by_scenario;
    for (size_t i = 0; i < test_set.size(); ++i) {
        auto& bucket = by_scenario[test_set.instances[i].scenario];
        bucket.first.push_back(preds[i]);
        bucket.second.push_back(test_set.labels[i]);
    }

    std::map<std::string, EvalReport> reports;
    for (const auto& [scenario, bucket] : by_scenario)
        reports[scenario] = compute_metrics(bucket.first, bucket.second, scenario);
    reports["pooled"] = compute_metrics(preds, test_set.labels, "pooled");

    const bool tagged = by_scenario.count("A") || by_scenario.count("B") || by_scenario.count("C");
    if (tagged)
        for (const char* s : {"A", "B", "C"})
            if (!by_scenario.count(s)) std::cerr << "warning: scenario " << s << ": no instances; omitted\n";
    return reports;
}

std::string history_to_json_string(const TrainHistory& h, uint64_t seed) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : h.epochs)
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_macro_f1", e.val_macro_f1}});
    nlohmann::json j{{"seed", seed},
                     {"initial_val_macro_f1", h.initial_val_macro_f1},
                     {"epochs", epochs},
                     {"best_epoch", h.best_epoch},
                     {"best_val_macro_f1", h.best_val_macro_f1},
                     {"stopped_early", h.stopped_early}};
    return j.dump(2) + "\n";
}

}  // namespace disarm::train
