#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "disarm/dataset.hpp"
#include "disarm/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CmdResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        std::string(DISARM_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "disarm_cli_test" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Small corpus covering all three test scenarios:
//   A: "alpha person" (harmful in train), "charlie org" (harmful in train)
//   B: "bravo person" (train negative only)
//   C: "echo community", "foxtrot nobody" (never in train)
void write_fixture(const fs::path& dir) {
    write_file(dir / "lexicon.json", R"([
      {"canonical": "alpha person", "aliases": [], "category": "individual"},
      {"canonical": "bravo person", "aliases": [], "category": "individual"},
      {"canonical": "charlie org", "aliases": [], "category": "organization"},
      {"canonical": "delta org", "aliases": [], "category": "organization"},
      {"canonical": "echo community", "aliases": [], "category": "community"}
    ])");

    std::ostringstream m;
    auto meme = [&](const std::string& id, const std::string& text, const std::string& split,
                    const char* candidates, const char* harmful) {
        write_file(dir / "images" / (id + ".img"), "fakeimage:" + id);
        m << R"({"id":")" << id << R"(","image_ref":"images/)" << id << R"(.img","ocr_text":")" << text
          << R"(","split":")" << split << R"(","candidates":)" << candidates << R"(,"harmful_targets":)"
          << harmful << "}\n";
    };
    meme("t1", "alpha person bad meme", "train", "null", R"(["alpha person"])");
    meme("t2", "charlie org scandal meme", "train", "null", R"(["charlie org"])");
    meme("v1", "delta org mess", "validation", "null", R"(["delta org"])");
    meme("s1", "alpha person versus bravo person", "test", R"(["alpha person","bravo person"])",
         R"(["alpha person"])");
    meme("s2", "echo community and charlie org", "test", R"(["echo community","charlie org"])",
         R"(["echo community"])");
    meme("s3", "somebody új completely different", "test", R"(["foxtrot nobody"])", "[]");
    write_file(dir / "manifest.jsonl", m.str());

    std::ostringstream fx;
    for (const std::string q : {"alpha person bad meme", "charlie org scandal meme", "delta org mess",
                                "alpha person versus bravo person", "echo community and charlie org",
                                "somebody új completely different"})
        fx << json{{"query", q},
                   {"title", "Title for " + q},
                   {"first_paragraph", "Paragraph about " + q},
                   {"source_url", "http://example/" + q.substr(0, 5)}}
                  .dump()
           << "\n";
    write_file(dir / "search_fixture.jsonl", fx.str());

    json cfg{{"paths",
              {{"manifest", (dir / "manifest.jsonl").string()},
               {"lexicon", (dir / "lexicon.json").string()},
               {"context_cache", (dir / "cache.jsonl").string()},
               {"search_fixture", (dir / "search_fixture.jsonl").string()},
               {"build_dir", (dir / "built").string()},
               {"checkpoints_dir", (dir / "ckpt").string()},
               {"reports_dir", (dir / "reports").string()}}},
             {"search_client", "replay"},
             {"model",
              {{"entity_dim", 6}, {"embed_dim", 8}, {"harm_dim", 12}, {"fusion_rank", 4}, {"head_hidden", 4}}},
             {"train",
              {{"batch_size", 8}, {"max_epochs", 3}, {"learning_rate", 0.001}, {"early_stop_patience", 10}}},
             {"seed", 5}};
    write_file(dir / "run.json", cfg.dump(2));
}

std::string config_arg(const fs::path& dir) { return "--config " + (dir / "run.json").string(); }

}  // namespace

TEST_CASE("cli pipeline end to end") {
    const fs::path dir = fresh_dir("pipeline");
    write_fixture(dir);

    // fetch-contexts fills the cache from the replay fixture
    auto fetch = run_cli(dir, "fetch-contexts " + config_arg(dir));
    CHECK(fetch.exit_code == 0);
    CHECK(fetch.out.find("fetched=6 cached=0 failed=0") != std::string::npos);

    // warm cache: zero fetches on re-run
    auto fetch2 = run_cli(dir, "fetch-contexts " + config_arg(dir));
    CHECK(fetch2.exit_code == 0);
    CHECK(fetch2.out.find("fetched=0 cached=6 failed=0") != std::string::npos);

    // no duplicate cache keys after the re-run
    {
        std::ifstream in(dir / "cache.jsonl");
        std::set<std::string> keys;
        std::string line;
        int lines = 0;
        while (std::getline(in, line)) {
            ++lines;
            keys.insert(json::parse(line).at("query").get<std::string>());
        }
        CHECK(lines == 6);
        CHECK(keys.size() == 6);
    }

    auto build = run_cli(dir, "build-dataset " + config_arg(dir));
    CHECK(build.exit_code == 0);
    CHECK(fs::exists(dir / "built" / "instances_train.jsonl"));
    CHECK(fs::exists(dir / "built" / "instances_validation.jsonl"));
    CHECK(fs::exists(dir / "built" / "instances_test.jsonl"));
    CHECK(fs::exists(dir / "built" / "validation_report.json"));

    // scenario assignment on the built instances
    {
        auto test_instances = disarm::data::load_instances((dir / "built" / "instances_test.jsonl").string());
        std::map<std::string, std::string> tag;
        std::map<std::string, int> label;
        for (const auto& t : test_instances) {
            tag[t.entity] = t.scenario;
            label[t.entity] = t.label;
        }
        CHECK(tag.at("alpha person") == "A");
        CHECK(label.at("alpha person") == 1);
        CHECK(tag.at("charlie org") == "A");
        CHECK(tag.at("bravo person") == "B");
        CHECK(tag.at("echo community") == "C");
        CHECK(label.at("echo community") == 1);
        CHECK(tag.at("foxtrot nobody") == "C");

        auto train_instances = disarm::data::load_instances((dir / "built" / "instances_train.jsonl").string());
        long pos = 0, neg = 0;
        for (const auto& t : train_instances) (t.label ? pos : neg)++;
        CHECK(pos == 2);
        CHECK(neg == 4);  // ratio 2 with eligible pools

        // contexts attached from the cache end up in the built manifest
        auto manifest = disarm::data::load_manifest((dir / "built" / "manifest.jsonl").string());
        REQUIRE(manifest.records.size() == 6);
        for (const auto& rec : manifest.records) {
            REQUIRE(rec.context.has_value());
            CHECK(!rec.context->failed);
            CHECK(rec.context->title.rfind("Title for", 0) == 0);
        }
    }

    // rerun produces byte-identical artifacts
    const std::string train_bytes = slurp(dir / "built" / "instances_train.jsonl");
    const std::string manifest_bytes = slurp(dir / "built" / "manifest.jsonl");
    const std::string report_bytes = slurp(dir / "built" / "validation_report.json");
    auto rebuild = run_cli(dir, "build-dataset " + config_arg(dir));
    CHECK(rebuild.exit_code == 0);
    CHECK(slurp(dir / "built" / "instances_train.jsonl") == train_bytes);
    CHECK(slurp(dir / "built" / "manifest.jsonl") == manifest_bytes);
    CHECK(slurp(dir / "built" / "validation_report.json") == report_bytes);

    auto train = run_cli(dir, "train " + config_arg(dir));
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(dir / "ckpt" / "model.json"));
    CHECK(fs::exists(dir / "ckpt" / "history.json"));
    {
        json hist = json::parse(slurp(dir / "ckpt" / "history.json"));
        CHECK(hist.at("epochs").size() <= 3);
    }
    CHECK(train.out.find("best validation macro-F1") != std::string::npos);

    // fixed seed rerun gives identical checkpoint bytes
    const std::string header_bytes = slurp(dir / "ckpt" / "model.json");
    const std::string table_bytes = slurp(dir / "ckpt" / "model.params" / "entity_table.f32");
    auto retrain = run_cli(dir, "train " + config_arg(dir));
    CHECK(retrain.exit_code == 0);
    CHECK(slurp(dir / "ckpt" / "model.json") == header_bytes);
    CHECK(slurp(dir / "ckpt" / "model.params" / "entity_table.f32") == table_bytes);

    auto eval = run_cli(dir, "evaluate " + config_arg(dir));
    CHECK(eval.exit_code == 0);
    CHECK(fs::exists(dir / "reports" / "evaluation.json"));
    CHECK(fs::exists(dir / "reports" / "evaluation.txt"));
    {
        json reports = json::parse(slurp(dir / "reports" / "evaluation.json"));
        std::set<std::string> scenarios;
        for (const auto& r : reports) {
            scenarios.insert(r.at("scenario").get<std::string>());
            // re-parsed reports satisfy the metric identities
            auto rep = disarm::train::report_from_json_string(r.dump());
            CHECK(std::abs(rep.macro_f1 - 0.5 * (rep.not_harmful.f1 + rep.harmful.f1)) < 1e-9);
            CHECK(rep.counts.total() > 0);
        }
        for (const char* s : {"A", "B", "C", "pooled"}) CHECK(scenarios.count(s) == 1);
        // four-decimal cells in the text table
        const std::string table = slurp(dir / "reports" / "evaluation.txt");
        CHECK(table.find(".") != std::string::npos);
        std::istringstream lines(table);
        std::string line;
        std::getline(lines, line);  // header
        int rows = 0;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            ++rows;
            // every numeric cell is 0.xxxx or 1.0000
            for (size_t pos = line.find('.'); pos != std::string::npos; pos = line.find('.', pos + 1))
                CHECK(pos + 4 < line.size());
        }
        CHECK(rows == 4);
    }

    // single-variant ablation
    auto ablate1 = run_cli(dir, "ablate " + config_arg(dir) + " --variant full");
    CHECK(ablate1.exit_code == 0);
    {
        json rows = json::parse(slurp(dir / "reports" / "ablation.json"));
        CHECK(rows.size() == 1);
        CHECK(rows[0].at("variant") == "full");
    }

    // full grid in table order
    auto ablate = run_cli(dir, "ablate " + config_arg(dir));
    CHECK(ablate.exit_code == 0);
    {
        json rows = json::parse(slurp(dir / "reports" / "ablation.json"));
        REQUIRE(rows.size() == 9);
        const std::vector<std::string> expected{"CE",           "EH",           "CI",
                                                "CE+EH",        "CE+CI-concat", "CE+CI-mmlrbp",
                                                "EH+CI-concat", "EH+CI-mmlrbp", "full"};
        for (size_t i = 0; i < 9; ++i) {
            CHECK(rows[i].at("variant") == expected[i]);
            CHECK(rows[i].at("ok") == true);
        }
    }

    // --runs 3: three history files plus a mean/std summary
    auto multi = run_cli(dir, "train " + config_arg(dir) + " --runs 3");
    CHECK(multi.exit_code == 0);
    for (int r = 1; r <= 3; ++r) CHECK(fs::exists(dir / "ckpt" / ("history_run" + std::to_string(r) + ".json")));
    {
        REQUIRE(fs::exists(dir / "ckpt" / "runs_summary.json"));
        json summary = json::parse(slurp(dir / "ckpt" / "runs_summary.json"));
        CHECK(summary.at("runs") == 3);
        CHECK(summary.at("best_val_macro_f1").size() == 3);
        CHECK(summary.contains("mean"));
        CHECK(summary.contains("std"));
    }
    CHECK(multi.out.find("mean=") != std::string::npos);

    auto stats = run_cli(dir, "stats " + config_arg(dir) + " --k 2");
    CHECK(stats.exit_code == 0);
    CHECK(fs::exists(dir / "reports" / "stats.json"));
    {
        // histogram CSV row sums equal class sizes
        json st = json::parse(slurp(dir / "reports" / "stats.json"));
        std::ifstream csv(dir / "reports" / "stats_hist.csv");
        std::string line;
        std::getline(csv, line);  // header
        while (std::getline(csv, line)) {
            std::istringstream cells(line);
            std::string cls;
            std::getline(cells, cls, ',');
            long sum = 0;
            std::string cell;
            while (std::getline(cells, cell, ',')) sum += std::stol(cell);
            CHECK(sum == st.at("records_per_class").at(cls).get<long>());
        }
        // --k respected
        for (const auto& [cls, cats] : st.at("top_entities").items())
            for (const auto& [cat, list] : cats.items()) CHECK(list.size() <= 2);
    }
}

TEST_CASE("cli failure modes") {
    const fs::path dir = fresh_dir("failures");
    write_fixture(dir);

    SUBCASE("dangling harmful target fails the build") {
        std::string manifest = slurp(dir / "manifest.jsonl");
        // break t1: declare a target outside the candidate list
        write_file(dir / "manifest.jsonl",
                   manifest + R"({"id":"bad","image_ref":"images/t1.img","ocr_text":"x","split":"train",)" +
                       R"("candidates":["delta org"],"harmful_targets":["alpha person"]})" + "\n");
        auto build = run_cli(dir, "build-dataset " + config_arg(dir));
        CHECK(build.exit_code == 1);
        CHECK(fs::exists(dir / "built" / "validation_report.json"));
        CHECK(!fs::exists(dir / "built" / "instances_train.jsonl"));
    }

    SUBCASE("unknown config key is a configuration error") {
        json cfg = json::parse(slurp(dir / "run.json"));
        cfg["surprise"] = 1;
        write_file(dir / "run.json", cfg.dump(2));
        auto r = run_cli(dir, "stats " + config_arg(dir));
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("surprise") != std::string::npos);
    }

    SUBCASE("missing fixture for the replay client is a configuration error before any fetch") {
        json cfg = json::parse(slurp(dir / "run.json"));
        cfg["paths"]["search_fixture"] = (dir / "missing.jsonl").string();
        write_file(dir / "run.json", cfg.dump(2));
        auto r = run_cli(dir, "fetch-contexts " + config_arg(dir));
        CHECK(r.exit_code == 2);
        CHECK(!fs::exists(dir / "cache.jsonl"));
    }

    SUBCASE("train without built instances fails") {
        auto r = run_cli(dir, "train " + config_arg(dir));
        CHECK(r.exit_code != 0);
    }

    SUBCASE("evaluate rejects a dimension-mismatched checkpoint naming the block") {
        REQUIRE(run_cli(dir, "build-dataset " + config_arg(dir)).exit_code == 0);
        REQUIRE(run_cli(dir, "train " + config_arg(dir)).exit_code == 0);
        // evaluate against a config whose dims disagree with the checkpoint
        json cfg = json::parse(slurp(dir / "run.json"));
        std::string header = slurp(dir / "ckpt" / "model.json");
        const auto pos = header.find("\"entity_dim\": 6");
        REQUIRE(pos != std::string::npos);
        header.replace(pos, 15, "\"entity_dim\": 7");
        write_file(dir / "ckpt" / "model.json", header);
        auto r = run_cli(dir, "evaluate " + config_arg(dir));
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("entity_table") != std::string::npos);
    }

    SUBCASE("stats on an empty manifest fails") {
        write_file(dir / "manifest.jsonl", "");
        auto r = run_cli(dir, "stats " + config_arg(dir));
        CHECK(r.exit_code == 1);
    }

    SUBCASE("unknown ablation variant is a configuration error") {
        REQUIRE(run_cli(dir, "build-dataset " + config_arg(dir)).exit_code == 0);
        auto r = run_cli(dir, "ablate " + config_arg(dir) + " --variant CE+nothing");
        CHECK(r.exit_code == 2);
    }
}
