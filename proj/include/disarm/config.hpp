#pragma once

#include <string>

#include "disarm/encoders.hpp"
#include "disarm/model.hpp"
#include "disarm/train.hpp"

// Run configuration: one JSON file with explicit keys. Unknown keys are
// rejected; CLI flags override config values.

namespace disarm::config {

struct Paths {
    std::string manifest;
    std::string lexicon;
    std::string context_cache;
    std::string search_fixture;
    std::string build_dir = "build_out";
    std::string checkpoints_dir = "checkpoints";
    std::string reports_dir = "reports";
};

struct RunConfig {
    Paths paths;
    encoders::EncoderNames encoder_names;
    std::string search_client = "none";
    model::ModelDims dims;
    bool ct_tanh = true;
    train::TrainConfig train;
    bool require_images = true;
    uint64_t seed = 1;
    int runs = 1;
    int top_k = 5;
    int jobs = 1;
};

RunConfig load_run_config(const std::string& path);

// ConfigError when a required input path is missing at command start.
void require_path(const std::string& path, const std::string& what);

}  // namespace disarm::config
