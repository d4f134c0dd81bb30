#pragma once

#include <string>

#include "disarm/encoders.hpp"
#include "disarm/model.hpp"

// Checkpoint format: a JSON header (variant, dims, vocab, threshold, seed,
// encoder adapter names, block list) plus one row-major little-endian
// float32 sidecar file per block under "<stem>.params/". Round-trips are
// bit-exact.

namespace disarm::serialize {

struct CheckpointMeta {
    uint64_t seed = 0;
    encoders::EncoderNames encoder_names;
};

void save_checkpoint(const model::ModelParams& params, const CheckpointMeta& meta, const std::string& json_path);

struct LoadedCheckpoint {
    model::ModelParams params;
    CheckpointMeta meta;
};

// Dimension or block mismatches are hard errors naming the block.
LoadedCheckpoint load_checkpoint(const std::string& json_path);

}  // namespace disarm::serialize
