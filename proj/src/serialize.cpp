#include "disarm/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace disarm::serialize {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "disarm-checkpoint-v1";

std::string params_dir_name(const fs::path& json_path) {
    std::string stem = json_path.filename().string();
    if (stem.size() > 5 && stem.ends_with(".json")) stem.resize(stem.size() - 5);
    return stem + ".params";
}

void write_tensor(const fs::path& file, const float* data, Index rows, Index cols) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write tensor file: " + file.string());
    // Eigen storage is column-major; files are row-major.
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            const float v = data[c * rows + r];
            out.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
}

void read_tensor(const fs::path& file, float* data, Index rows, Index cols) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot read tensor file: " + file.string());
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            float v = 0.0f;
            in.read(reinterpret_cast<char*>(&v), sizeof(float));
            if (!in) throw InputError("tensor file truncated: " + file.string());
            data[c * rows + r] = v;
        }
    char extra;
    if (in.read(&extra, 1)) throw InputError("tensor file has trailing bytes: " + file.string());
}

json dims_to_json(const model::ModelDims& d) {
    return json{{"entity_dim", d.entity_dim},
                {"embed_dim", d.embed_dim},
                {"harm_dim", d.harm_dim},
                {"fusion_rank", d.fusion_rank},
                {"head_hidden", d.head_hidden}};
}

model::ModelDims dims_from_json(const json& j) {
    model::ModelDims d;
    d.entity_dim = j.at("entity_dim").get<Index>();
    d.embed_dim = j.at("embed_dim").get<Index>();
    d.harm_dim = j.at("harm_dim").get<Index>();
    d.fusion_rank = j.at("fusion_rank").get<Index>();
    d.head_hidden = j.at("head_hidden").get<Index>();
    return d;
}

}  // namespace

void save_checkpoint(const model::ModelParams& params, const CheckpointMeta& meta, const std::string& json_path) {
    const fs::path header_path(json_path);
    const fs::path dir = header_path.parent_path();
    const std::string pdir = params_dir_name(header_path);
    fs::create_directories(dir.empty() ? fs::path(".") : dir);
    fs::create_directories((dir.empty() ? fs::path(".") : dir) / pdir);

    auto refs = model::collect_tensors(const_cast<model::ModelParams&>(params));
    json blocks = json::array();
    for (const auto& r : refs) {
        const std::string rel = pdir + "/" + r.name + ".f32";
        write_tensor((dir.empty() ? fs::path(".") : dir) / rel, r.data, r.rows, r.cols);
        blocks.push_back(json{{"name", r.name}, {"rows", r.rows}, {"cols", r.cols}, {"file", rel}});
    }

    json header{{"format", kFormat},
                {"variant", model::variant_name(params.variant)},
                {"dims", dims_to_json(params.dims)},
                {"threshold", params.threshold},
                {"ct_tanh", params.ct_tanh},
                {"seed", meta.seed},
                {"encoders",
                 {{"context", meta.encoder_names.context},
                  {"image", meta.encoder_names.image},
                  {"harm_text", meta.encoder_names.harm_text}}},
                {"entity_vocab", params.table.vocab},
                {"blocks", blocks}};
    std::ofstream out(header_path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint header: " + json_path);
    out << header.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw InputError("cannot read checkpoint header: " + json_path);
    json header;
    try {
        in >> header;
    } catch (const json::exception& e) {
        throw InputError("checkpoint header " + json_path + ": " + e.what());
    }
    if (header.value("format", "") != kFormat)
        throw InputError("checkpoint header " + json_path + ": unexpected format tag");

    LoadedCheckpoint loaded;
    const auto variant = model::variant_from_name(header.at("variant").get<std::string>());
    const model::ModelDims dims = dims_from_json(header.at("dims"));
    std::vector<std::string> vocab = header.at("entity_vocab").get<std::vector<std::string>>();
    loaded.params = model::init_model_params(variant, dims, vocab, /*seed=*/0,
                                             header.at("threshold").get<float>(),
                                             header.at("ct_tanh").get<bool>());
    if (loaded.params.table.vocab != vocab && plan_for(variant).entity_stage)
        throw InputError("checkpoint " + json_path + ": entity vocab is not normalized/sorted");
    loaded.meta.seed = header.at("seed").get<uint64_t>();
    const auto& enc = header.at("encoders");
    loaded.meta.encoder_names.context = enc.at("context").get<std::string>();
    loaded.meta.encoder_names.image = enc.at("image").get<std::string>();
    loaded.meta.encoder_names.harm_text = enc.at("harm_text").get<std::string>();

    std::map<std::string, json> block_index;
    for (const auto& b : header.at("blocks")) block_index[b.at("name").get<std::string>()] = b;

    const fs::path dir = fs::path(json_path).parent_path();
    auto refs = model::collect_tensors(loaded.params);
    for (const auto& r : refs) {
        const auto it = block_index.find(r.name);
        if (it == block_index.end())
            throw DimensionError("checkpoint " + json_path + ": missing block '" + r.name + "'");
        const Index rows = it->second.at("rows").get<Index>();
        const Index cols = it->second.at("cols").get<Index>();
        if (rows != r.rows || cols != r.cols)
            throw DimensionError("checkpoint " + json_path + ": block '" + r.name + "' has shape [" +
                                 std::to_string(rows) + "x" + std::to_string(cols) + "], expected [" +
                                 std::to_string(r.rows) + "x" + std::to_string(r.cols) + "]");
        read_tensor((dir.empty() ? fs::path(".") : dir) / it->second.at("file").get<std::string>(), r.data, r.rows,
                    r.cols);
        block_index.erase(it);
    }
    if (!block_index.empty())
        throw DimensionError("checkpoint " + json_path + ": unexpected block '" + block_index.begin()->first + "'");
    return loaded;
}

}  // namespace disarm::serialize
