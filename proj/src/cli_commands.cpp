#include "disarm/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "disarm/ablation.hpp"
#include "disarm/context.hpp"
#include "disarm/serialize.hpp"

namespace disarm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

json report_json(const data::ValidationReport& report) {
    json violations = json::array();
    for (const auto& v : report.violations)
        violations.push_back({{"line", v.line}, {"meme_id", v.meme_id}, {"message", v.message}});
    json splits;
    for (const auto& [name, c] : report.splits)
        splits[name] = {{"memes", c.memes},
                        {"harmful_instances", c.harmful_instances},
                        {"not_harmful_instances", c.not_harmful_instances}};
    json scenarios;
    for (const auto& [name, c] : report.scenarios)
        scenarios[name] = {{"harmful", c.harmful}, {"not_harmful", c.not_harmful}};
    return json{{"violations", violations},
                {"splits", splits},
                {"scenarios", scenarios},
                {"totals",
                 {{"memes", report.total_memes},
                  {"harmful_instances", report.total_harmful},
                  {"not_harmful_instances", report.total_not_harmful}}}};
}

data::EntityLexicon load_lexicon_if_set(const config::RunConfig& cfg) {
    if (cfg.paths.lexicon.empty()) return data::EntityLexicon();
    config::require_path(cfg.paths.lexicon, "lexicon");
    return data::load_lexicon(cfg.paths.lexicon);
}

struct LoadedDataset {
    std::vector<data::MemeRecord> records;
    std::vector<data::TargetInstance> train_instances;
    std::vector<data::TargetInstance> val_instances;
    std::vector<data::TargetInstance> test_instances;
};

LoadedDataset load_built_dataset(const config::RunConfig& cfg, bool need_test) {
    const fs::path dir(cfg.paths.build_dir);
    const std::string manifest = (dir / "manifest.jsonl").string();
    const std::string train_file = (dir / "instances_train.jsonl").string();
    const std::string val_file = (dir / "instances_validation.jsonl").string();
    config::require_path(manifest, "built manifest (run build-dataset first)");
    config::require_path(train_file, "train instances (run build-dataset first)");
    config::require_path(val_file, "validation instances (run build-dataset first)");

    LoadedDataset out;
    const auto load = data::load_manifest(manifest);
    if (!load.parse_violations.empty()) throw InputError("built manifest is malformed: " + manifest);
    out.records = load.records;
    out.train_instances = data::load_instances(train_file);
    out.val_instances = data::load_instances(val_file);
    if (need_test) {
        const std::string test_file = (dir / "instances_test.jsonl").string();
        config::require_path(test_file, "test instances (run build-dataset first)");
        out.test_instances = data::load_instances(test_file);
    }
    return out;
}

encoders::EncoderSet encoders_for(const config::RunConfig& cfg, const encoders::EncoderNames& names,
                                  uint64_t seed) {
    return encoders::make_encoder_set(names, cfg.dims.embed_dim, cfg.dims.embed_dim, cfg.dims.harm_dim,
                                      derive_seed(seed, "encoders"));
}

}  // namespace

int cmd_build_dataset(const config::RunConfig& cfg) {
    config::require_path(cfg.paths.manifest, "manifest");
    const data::EntityLexicon lexicon = load_lexicon_if_set(cfg);

    auto load = data::load_manifest(cfg.paths.manifest);
    const std::string base = fs::path(cfg.paths.manifest).parent_path().string();
    const fs::path out_dir(cfg.paths.build_dir);
    fs::create_directories(out_dir);

    data::ValidationReport input_report =
        data::validate_records(load.records, load.parse_violations, cfg.require_images, base);
    if (!input_report.ok()) {
        write_text(out_dir / "validation_report.json", report_json(input_report).dump(2) + "\n");
        std::cerr << "build-dataset: " << input_report.violations.size() << " violation(s); see "
                  << (out_dir / "validation_report.json").string() << "\n";
        for (const auto& v : input_report.violations)
            std::cerr << "  line " << v.line << " [" << v.meme_id << "]: " << v.message << "\n";
        return 1;
    }

    // Attach cached contexts; rows without one get an empty flagged doc.
    context::ContextCache cache(cfg.paths.context_cache.empty() ? std::string() : cfg.paths.context_cache);
    for (auto& rec : load.records) {
        if (rec.context) continue;
        const std::string query = normalize_text(rec.ocr_text);
        if (auto hit = cache.get(query)) {
            rec.context = *hit;
        } else {
            data::ContextDoc doc;
            doc.query = query;
            doc.failed = true;
            rec.context = doc;
        }
    }

    // Fill absent candidate lists from the lexicon matcher; harmful targets
    // are known references and always belong to the candidate set.
    for (auto& rec : load.records) {
        if (rec.candidates_provided) continue;
        std::set<std::string> cands;
        for (const auto& c : data::extract_candidates(rec, lexicon, {})) cands.insert(c);
        for (const auto& t : rec.harmful_targets) cands.insert(lexicon.canonicalize(t));
        rec.candidates.assign(cands.begin(), cands.end());
        rec.candidates_provided = true;
    }

    std::vector<data::MemeRecord> train_records, val_records, test_records;
    for (const auto& rec : load.records) {
        if (rec.split == "train") train_records.push_back(rec);
        else if (rec.split == "validation") val_records.push_back(rec);
        else test_records.push_back(rec);
    }

    auto train_instances = data::build_training_instances(train_records, lexicon, "train");
    auto val_instances = data::build_training_instances(val_records, lexicon, "validation");
    auto test_instances = data::build_test_instances(test_records, lexicon);
    data::assign_scenario(test_instances, train_instances);

    // The built manifest lives in build_dir; keep image paths relative to it.
    std::vector<data::MemeRecord> rewritten = load.records;
    for (auto& rec : rewritten) {
        fs::path p(rec.image_ref);
        if (p.is_relative())
            rec.image_ref =
                fs::weakly_canonical(fs::path(base) / p).lexically_relative(fs::weakly_canonical(out_dir)).string();
    }
    data::save_manifest((out_dir / "manifest.jsonl").string(), rewritten);
    data::save_instances((out_dir / "instances_train.jsonl").string(), train_instances);
    data::save_instances((out_dir / "instances_validation.jsonl").string(), val_instances);
    data::save_instances((out_dir / "instances_test.jsonl").string(), test_instances);

    data::ValidationReport final_report = data::validate_records(load.records, {}, cfg.require_images, base);
    write_text(out_dir / "validation_report.json", report_json(final_report).dump(2) + "\n");

    std::cout << "build-dataset: " << load.records.size() << " memes; " << train_instances.size()
              << " train / " << val_instances.size() << " validation / " << test_instances.size()
              << " test instances\n";
    return final_report.ok() ? 0 : 1;
}

int cmd_fetch_contexts(const config::RunConfig& cfg) {
    config::require_path(cfg.paths.manifest, "manifest");
    if (cfg.paths.context_cache.empty()) throw ConfigError("fetch-contexts requires paths.context_cache");
    auto client = context::make_search_client(cfg.search_client, cfg.paths.search_fixture);

    const auto load = data::load_manifest(cfg.paths.manifest);
    context::ContextCache cache(cfg.paths.context_cache);
    const context::FetchSummary summary = context::fetch_all(load.records, *client, cache);
    std::cout << "fetch-contexts: fetched=" << summary.fetched << " cached=" << summary.cached
              << " failed=" << summary.failed << "\n";
    return 0;
}

int cmd_train(const config::RunConfig& cfg) {
    const LoadedDataset ds = load_built_dataset(cfg, /*need_test=*/false);
    if (ds.train_instances.empty() || ds.val_instances.empty())
        throw InputError("train: empty train or validation instance file");

    const auto vocab = train::train_vocab(ds.train_instances);
    const auto enc = encoders_for(cfg, cfg.encoder_names, cfg.seed);
    const auto train_set = train::build_instance_set(ds.train_instances, ds.records, vocab, enc, cfg.paths.build_dir);
    const auto val_set = train::build_instance_set(ds.val_instances, ds.records, vocab, enc, cfg.paths.build_dir);

    const fs::path ckpt_dir(cfg.paths.checkpoints_dir);
    fs::create_directories(ckpt_dir);

    struct RunResult {
        train::TrainHistory history;
        model::ModelParams params;
    };
    std::vector<RunResult> results;
    for (int run = 1; run <= cfg.runs; ++run) {
        const uint64_t run_seed = derive_seed(cfg.seed, "run:" + std::to_string(run));
        model::ModelParams params = model::init_model_params(model::Variant::Full, cfg.dims, vocab,
                                                             derive_seed(run_seed, "init"), cfg.train.threshold,
                                                             cfg.ct_tanh);
        train::TrainConfig tc = cfg.train;
        tc.seed = run_seed;
        train::TrainHistory history = train::train(params, train_set, val_set, tc);
        const std::string hist_name = cfg.runs == 1 ? "history.json" : "history_run" + std::to_string(run) + ".json";
        write_text(ckpt_dir / hist_name, train::history_to_json_string(history, run_seed));
        results.push_back({std::move(history), std::move(params)});
    }

    size_t best_run = 0;
    for (size_t r = 1; r < results.size(); ++r)
        if (results[r].history.best_val_macro_f1 > results[best_run].history.best_val_macro_f1) best_run = r;

    serialize::CheckpointMeta meta{cfg.seed, cfg.encoder_names};
    serialize::save_checkpoint(results[best_run].params, meta, (ckpt_dir / "model.json").string());

    if (cfg.runs > 1) {
        std::vector<double> scores;
        for (const auto& r : results) scores.push_back(r.history.best_val_macro_f1);
        double mean = 0.0;
        for (double s : scores) mean += s;
        mean /= static_cast<double>(scores.size());
        double var = 0.0;
        for (double s : scores) var += (s - mean) * (s - mean);
        const double stddev = scores.size() > 1 ? std::sqrt(var / static_cast<double>(scores.size() - 1)) : 0.0;
        json summary{{"runs", cfg.runs}, {"best_val_macro_f1", scores}, {"mean", mean}, {"std", stddev}};
        write_text(ckpt_dir / "runs_summary.json", summary.dump(2) + "\n");
        std::cout << "train: best validation macro-F1 over " << cfg.runs << " runs: mean=" << mean
                  << " std=" << stddev << "\n";
    }
    std::cout << "train: best validation macro-F1 " << results[best_run].history.best_val_macro_f1 << " (epoch "
              << results[best_run].history.best_epoch << ")\n";
    return 0;
}

int cmd_evaluate(const config::RunConfig& cfg, const std::string& checkpoint_override) {
    const std::string ckpt = checkpoint_override.empty()
                                 ? (fs::path(cfg.paths.checkpoints_dir) / "model.json").string()
                                 : checkpoint_override;
    config::require_path(ckpt, "checkpoint");
    const serialize::LoadedCheckpoint loaded = serialize::load_checkpoint(ckpt);

    const LoadedDataset ds = load_built_dataset(cfg, /*need_test=*/true);
    if (ds.test_instances.empty()) throw InputError("evaluate: empty test instance file");

    config::RunConfig enc_cfg = cfg;
    enc_cfg.dims = loaded.params.dims;
    const auto enc = encoders_for(enc_cfg, loaded.meta.encoder_names, loaded.meta.seed);
    const auto test_set = train::build_instance_set(ds.test_instances, ds.records, loaded.params.table.vocab,
                                                    enc, cfg.paths.build_dir);

    const auto reports = train::evaluate(loaded.params, test_set, cfg.jobs);
    std::vector<train::EvalReport> rows;
    for (const auto& [name, rep] : reports)
        if (name != "pooled") rows.push_back(rep);
    rows.push_back(reports.at("pooled"));

    json out = json::array();
    for (const auto& r : rows) out.push_back(json::parse(train::report_to_json_string(r)));
    const fs::path rep_dir(cfg.paths.reports_dir);
    write_text(rep_dir / "evaluation.json", out.dump(2) + "\n");
    const std::string table = train::format_report_table(rows);
    write_text(rep_dir / "evaluation.txt", table);
    std::cout << table;
    return 0;
}

int cmd_ablate(const config::RunConfig& cfg, const std::string& variant_override) {
    const LoadedDataset ds = load_built_dataset(cfg, /*need_test=*/true);
    if (ds.train_instances.empty() || ds.val_instances.empty() || ds.test_instances.empty())
        throw InputError("ablate: empty instance files");

    const auto vocab = train::train_vocab(ds.train_instances);
    const auto enc = encoders_for(cfg, cfg.encoder_names, cfg.seed);
    const auto train_set = train::build_instance_set(ds.train_instances, ds.records, vocab, enc, cfg.paths.build_dir);
    const auto val_set = train::build_instance_set(ds.val_instances, ds.records, vocab, enc, cfg.paths.build_dir);
    const auto test_set = train::build_instance_set(ds.test_instances, ds.records, vocab, enc, cfg.paths.build_dir);

    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;

    std::vector<ablation::AblationOutcome> outcomes;
    if (!variant_override.empty()) {
        outcomes.push_back(ablation::run_ablation(model::variant_from_name(variant_override), cfg.dims, tc,
                                                  vocab, train_set, val_set, test_set, cfg.ct_tanh, cfg.jobs));
    } else {
        outcomes =
            ablation::run_all_ablations(cfg.dims, tc, vocab, train_set, val_set, test_set, cfg.ct_tanh, cfg.jobs);
    }

    json out = json::array();
    for (const auto& o : outcomes) {
        json row{{"variant", model::variant_name(o.variant)}, {"ok", o.ok}};
        if (!o.ok) row["error"] = o.error;
        json reps;
        for (const auto& [name, rep] : o.reports) reps[name] = json::parse(train::report_to_json_string(rep));
        row["reports"] = reps;
        out.push_back(row);
    }
    const fs::path rep_dir(cfg.paths.reports_dir);
    write_text(rep_dir / "ablation.json", out.dump(2) + "\n");
    const std::string table = ablation::format_ablation_table(outcomes);
    write_text(rep_dir / "ablation.txt", table);
    std::cout << table;

    for (const auto& o : outcomes)
        if (!o.ok) {
            std::cerr << "ablate: variant " << model::variant_name(o.variant) << " failed: " << o.error << "\n";
            return 1;
        }
    return 0;
}

int cmd_stats(const config::RunConfig& cfg) {
    config::require_path(cfg.paths.manifest, "manifest");
    const data::EntityLexicon lexicon = load_lexicon_if_set(cfg);
    const auto load = data::load_manifest(cfg.paths.manifest);
    if (load.records.empty()) throw InputError("stats: manifest has no records");

    const data::CorpusStats stats = data::corpus_stats(load.records, lexicon, cfg.top_k);

    json top;
    for (const auto& [cls, per_cat] : stats.top_entities) {
        json cat_json;
        for (const auto& [cat, entities] : per_cat) {
            json list = json::array();
            for (const auto& e : entities) list.push_back({{"entity", e.entity}, {"count", e.count}});
            cat_json[cat] = list;
        }
        top[cls] = cat_json;
    }
    json hist;
    for (const auto& [cls, bins] : stats.length_histograms) hist[cls] = bins;
    json out{{"top_entities", top},
             {"length_histograms", hist},
             {"bin_width", stats.bin_width},
             {"records_per_class", stats.records_per_class}};

    const fs::path rep_dir(cfg.paths.reports_dir);
    write_text(rep_dir / "stats.json", out.dump(2) + "\n");

    std::ostringstream csv;
    csv << "class";
    for (int b = 0; b < stats.num_bins; ++b) {
        const int lo = b * stats.bin_width;
        if (b + 1 == stats.num_bins)
            csv << ",len_" << lo << "_plus";
        else
            csv << ",len_" << lo << "_" << (lo + stats.bin_width - 1);
    }
    csv << "\n";
    for (const auto& [cls, bins] : stats.length_histograms) {
        csv << cls;
        for (long v : bins) csv << "," << v;
        csv << "\n";
    }
    write_text(rep_dir / "stats_hist.csv", csv.str());

    std::ostringstream text;
    for (const auto& [cls, per_cat] : stats.top_entities) {
        text << "== " << cls << " ==\n";
        for (const auto& [cat, entities] : per_cat) {
            text << "  [" << cat << "]\n";
            for (const auto& e : entities) text << "    " << e.entity << " (" << e.count << ")\n";
        }
    }
    write_text(rep_dir / "stats.txt", text.str());
    std::cout << text.str();
    return 0;
}

}  // namespace disarm::cli
