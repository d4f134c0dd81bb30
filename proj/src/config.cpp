#include "disarm/config.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

namespace disarm::config {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key)) throw ConfigError("config: unknown key '" + where + key + "'");
}

template <class T>
void read_opt(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config " + path + ": expected a JSON object");

    reject_unknown(doc, {"paths", "encoders", "search_client", "model", "train", "validate", "seed", "runs",
                         "top_k", "jobs"},
                   "");

    RunConfig cfg;
    if (doc.contains("paths")) {
        const json& p = doc.at("paths");
        reject_unknown(p, {"manifest", "lexicon", "context_cache", "search_fixture", "build_dir",
                           "checkpoints_dir", "reports_dir"},
                       "paths.");
        read_opt(p, "manifest", cfg.paths.manifest);
        read_opt(p, "lexicon", cfg.paths.lexicon);
        read_opt(p, "context_cache", cfg.paths.context_cache);
        read_opt(p, "search_fixture", cfg.paths.search_fixture);
        read_opt(p, "build_dir", cfg.paths.build_dir);
        read_opt(p, "checkpoints_dir", cfg.paths.checkpoints_dir);
        read_opt(p, "reports_dir", cfg.paths.reports_dir);
    }
    if (doc.contains("encoders")) {
        const json& e = doc.at("encoders");
        reject_unknown(e, {"context", "image", "harm_text"}, "encoders.");
        read_opt(e, "context", cfg.encoder_names.context);
        read_opt(e, "image", cfg.encoder_names.image);
        read_opt(e, "harm_text", cfg.encoder_names.harm_text);
    }
    read_opt(doc, "search_client", cfg.search_client);
    if (doc.contains("model")) {
        const json& m = doc.at("model");
        reject_unknown(m, {"entity_dim", "embed_dim", "harm_dim", "fusion_rank", "head_hidden", "ct_tanh"},
                       "model.");
        read_opt(m, "entity_dim", cfg.dims.entity_dim);
        read_opt(m, "embed_dim", cfg.dims.embed_dim);
        read_opt(m, "harm_dim", cfg.dims.harm_dim);
        read_opt(m, "fusion_rank", cfg.dims.fusion_rank);
        read_opt(m, "head_hidden", cfg.dims.head_hidden);
        read_opt(m, "ct_tanh", cfg.ct_tanh);
        if (cfg.dims.entity_dim <= 0 || cfg.dims.embed_dim <= 0 || cfg.dims.harm_dim <= 0 ||
            cfg.dims.fusion_rank <= 0 || cfg.dims.head_hidden <= 0)
            throw ConfigError("config: model dimensions must be positive");
    }
    if (doc.contains("train")) {
        const json& t = doc.at("train");
        reject_unknown(t, {"batch_size", "max_epochs", "learning_rate", "weight_decay", "early_stop_patience",
                           "threshold"},
                       "train.");
        read_opt(t, "batch_size", cfg.train.batch_size);
        read_opt(t, "max_epochs", cfg.train.max_epochs);
        read_opt(t, "learning_rate", cfg.train.learning_rate);
        read_opt(t, "weight_decay", cfg.train.weight_decay);
        read_opt(t, "early_stop_patience", cfg.train.early_stop_patience);
        read_opt(t, "threshold", cfg.train.threshold);
        if (cfg.train.batch_size <= 0 || cfg.train.max_epochs < 0 || cfg.train.learning_rate < 0.0f ||
            cfg.train.weight_decay < 0.0f || cfg.train.early_stop_patience < 0)
            throw ConfigError("config: train settings must be non-negative (batch size positive)");
    }
    if (doc.contains("validate")) {
        const json& v = doc.at("validate");
        reject_unknown(v, {"require_images"}, "validate.");
        read_opt(v, "require_images", cfg.require_images);
    }
    read_opt(doc, "seed", cfg.seed);
    read_opt(doc, "runs", cfg.runs);
    read_opt(doc, "top_k", cfg.top_k);
    read_opt(doc, "jobs", cfg.jobs);
    if (cfg.runs < 1 || cfg.top_k < 1 || cfg.jobs < 1)
        throw ConfigError("config: runs, top_k and jobs must be at least 1");
    cfg.train.seed = cfg.seed;
    return cfg;
}

void require_path(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("config: missing required path for " + what);
    if (!std::filesystem::exists(path)) throw ConfigError("config: " + what + " path not resolvable: " + path);
}

}  // namespace disarm::config
