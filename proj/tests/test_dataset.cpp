#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "disarm/context.hpp"
#include "disarm/dataset.hpp"

using namespace disarm;
using namespace disarm::data;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
    auto dir = std::filesystem::temp_directory_path() / "disarm_data_test" / leaf;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

EntityLexicon political_lexicon() {
    return EntityLexicon({
        {"joe biden", {"biden", "sleepy joe"}, "individual"},
        {"donald trump", {"trump"}, "individual"},
        {"democratic party", {"democrats", "the democrats"}, "organization"},
        {"cnn", {}, "organization"},
        {"mexicans", {}, "community"},
    });
}

MemeRecord meme(const std::string& id, const std::string& text, std::vector<std::string> harmful,
                std::vector<std::string> candidates, const std::string& split) {
    MemeRecord rec;
    rec.id = id;
    rec.image_ref = id + ".img";
    rec.ocr_text = text;
    rec.harmful_targets = std::move(harmful);
    rec.candidates = std::move(candidates);
    rec.candidates_provided = !rec.candidates.empty();
    rec.split = split;
    return rec;
}

// Brute-force rescoring oracle for negative sampling.
std::vector<std::string> oracle_negatives(const MemeRecord& m, const EntityLexicon& lex) {
    std::vector<std::pair<double, std::string>> scored;
    std::set<std::string> excluded;
    for (const auto& t : m.harmful_targets) excluded.insert(lex.canonicalize(t));
    for (const auto& e : lex.entries()) {
        if (excluded.count(e.canonical)) continue;
        scored.emplace_back(lexical_similarity(m.ocr_text, e.canonical), e.canonical);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (size_t i = 0; i < scored.size() && i < 2; ++i) out.push_back(scored[i].second);
    return out;
}

}  // namespace

TEST_CASE("extract_candidates") {
    const EntityLexicon lex = political_lexicon();

    SUBCASE("alias match finds the canonical entity") {
        MemeRecord m = meme("m1", "Joe Biden said something", {}, {}, "train");
        auto got = extract_candidates(m, lex, {});
        CHECK(got == std::vector<std::string>{"joe biden"});
    }

    SUBCASE("no extractors and no lexicon match give the empty list") {
        MemeRecord m = meme("m2", "nothing relevant here", {}, {}, "train");
        CHECK(extract_candidates(m, lex, {}).empty());
        CHECK(extract_candidates(m, EntityLexicon(), {}).empty());
    }

    SUBCASE("two aliases of one canonical entity collapse to one candidate") {
        MemeRecord m = meme("m3", "sleepy joe and biden in one meme", {}, {}, "train");
        auto got = extract_candidates(m, lex, {});
        CHECK(got == std::vector<std::string>{"joe biden"});
    }

    SUBCASE("extractor outputs are canonicalized and unioned") {
        struct FixedExtractor final : CandidateExtractor {
            std::string name() const override { return "fixed"; }
            std::vector<std::string> extract(const MemeRecord&) const override { return {"Trump", "kamala harris"}; }
        } ex;
        MemeRecord m = meme("m4", "the democrats again", {}, {}, "train");
        auto got = extract_candidates(m, lex, {&ex});
        CHECK(got == std::vector<std::string>{"democratic party", "donald trump", "kamala harris"});
    }

    SUBCASE("word boundaries are respected") {
        MemeRecord m = meme("m5", "cnnx is not a channel", {}, {}, "train");
        CHECK(extract_candidates(m, lex, {}).empty());
    }
}

TEST_CASE("lexical_similarity") {
    CHECK(lexical_similarity("joe biden", "joe biden") == doctest::Approx(1.0));
    CHECK(lexical_similarity("abc def", "xyz") == doctest::Approx(0.0));
    CHECK(lexical_similarity("vote for the democratic party now", "democratic party") ==
          doctest::Approx(2.0 / 6.0));
    // symmetry over token multisets
    CHECK(lexical_similarity("a b b c", "c a") == doctest::Approx(lexical_similarity("c a", "a b b c")));
    // normalization and punctuation stripping
    CHECK(lexical_similarity("Joe  Biden!", "joe biden") == doctest::Approx(1.0));
}

TEST_CASE("sample_negatives") {
    const EntityLexicon lex = political_lexicon();

    SUBCASE("top-2 by similarity, matching the brute-force oracle") {
        MemeRecord m = meme("m1", "joe biden and the democratic party", {"joe biden"}, {}, "train");
        auto got = sample_negatives(m, lex);
        CHECK(got == oracle_negatives(m, lex));
        CHECK(got.size() == 2);
        CHECK(got[0] == "democratic party");
        for (const auto& n : got) CHECK(n != "joe biden");
    }

    SUBCASE("all lexicon entries harmful leaves the pool empty") {
        MemeRecord m = meme("m2", "text", {"joe biden", "donald trump", "democratic party", "cnn", "mexicans"},
                            {}, "train");
        CHECK(sample_negatives(m, lex).empty());
    }

    SUBCASE("ties break lexicographically") {
        // No token overlap with any entity: all scores are 0.
        MemeRecord m = meme("m3", "completely unrelated words", {}, {}, "train");
        auto got = sample_negatives(m, lex);
        REQUIRE(got.size() == 2);
        CHECK(got[0] == "cnn");
        CHECK(got[1] == "democratic party");
        CHECK(got == oracle_negatives(m, lex));
    }

    SUBCASE("random fixtures always agree with the oracle") {
        Rng rng(99);
        const std::vector<std::string> words{"joe",  "biden",   "trump", "party", "cnn",
                                             "news", "mexicans", "vote",  "the",   "now"};
        for (int it = 0; it < 50; ++it) {
            std::string text;
            for (int k = 0; k < 5; ++k) text += words[rng.next_u64() % words.size()] + " ";
            MemeRecord m = meme("r" + std::to_string(it), text, {"donald trump"}, {}, "train");
            CHECK(sample_negatives(m, lex) == oracle_negatives(m, lex));
        }
    }
}

TEST_CASE("build_training_instances") {
    const EntityLexicon lex = political_lexicon();

    SUBCASE("one positive and two negatives per single-target meme") {
        std::vector<MemeRecord> records{meme("m1", "joe biden rant", {"joe biden"}, {}, "train")};
        auto got = build_training_instances(records, lex, "train");
        REQUIRE(got.size() == 3);
        CHECK(got[0].entity == "joe biden");
        CHECK(got[0].label == 1);
        CHECK(got[1].label == 0);
        CHECK(got[2].label == 0);
        for (const auto& t : got) CHECK(t.scenario == "train");
    }

    SUBCASE("two harmful targets give two positives and negatives exclude both") {
        std::vector<MemeRecord> records{
            meme("m1", "biden and trump", {"joe biden", "donald trump"}, {}, "train")};
        auto got = build_training_instances(records, lex, "train");
        int positives = 0;
        for (const auto& t : got) {
            if (t.label == 1)
                ++positives;
            else {
                CHECK(t.entity != "joe biden");
                CHECK(t.entity != "donald trump");
            }
        }
        CHECK(positives == 2);
    }

    SUBCASE("memes without positives contribute nothing; global ratio stays at 2") {
        std::vector<MemeRecord> records{
            meme("m1", "joe biden rant", {"joe biden"}, {}, "train"),
            meme("m2", "benign cat picture", {}, {}, "train"),
            meme("m3", "cnn news", {"cnn"}, {}, "train"),
        };
        auto got = build_training_instances(records, lex, "train");
        long pos = 0, neg = 0;
        for (const auto& t : got) (t.label == 1 ? pos : neg)++;
        CHECK(pos == 2);
        CHECK(neg == 4);
    }
}

TEST_CASE("build_test_instances canonicalizes aliases") {
    const EntityLexicon lex = political_lexicon();
    std::vector<MemeRecord> records{
        meme("s1", "text", {"sleepy joe"}, {"sleepy joe", "trump"}, "test")};
    auto got = build_test_instances(records, lex);
    REQUIRE(got.size() == 2);
    std::map<std::string, int> by_entity;
    for (const auto& t : got) by_entity[t.entity] = t.label;
    CHECK(by_entity.at("joe biden") == 1);
    CHECK(by_entity.at("donald trump") == 0);
}

TEST_CASE("assign_scenario") {
    SUBCASE("empty train set tags everything C") {
        std::vector<TargetInstance> test{{"m1", "alpha", 1, ""}, {"m1", "beta", 0, ""}};
        assign_scenario(test, {});
        for (const auto& t : test) CHECK(t.scenario == "C");
    }

    SUBCASE("three-entity rule fixture") {
        std::vector<TargetInstance> train{
            {"t1", "alpha", 1, "train"},  // harmful in train -> A
            {"t2", "alpha", 0, "train"},
            {"t3", "beta", 0, "train"},  // only negative -> B
        };
        std::vector<TargetInstance> test{
            {"m1", "alpha", 0, ""},
            {"m1", "beta", 1, ""},
            {"m1", "gamma", 1, ""},  // novel -> C
        };
        assign_scenario(test, train);
        CHECK(test[0].scenario == "A");
        CHECK(test[1].scenario == "B");
        CHECK(test[2].scenario == "C");
    }

    SUBCASE("partition and leakage guard on a synthetic corpus") {
        Rng rng(2024);
        std::vector<TargetInstance> train;
        std::vector<std::string> entities;
        for (int i = 0; i < 30; ++i) entities.push_back("entity" + std::to_string(i));
        // entities 0..9 appear harmful in train, 10..19 only as negatives
        for (int i = 0; i < 10; ++i) train.push_back({"t", entities[i], 1, "train"});
        for (int i = 5; i < 20; ++i) train.push_back({"t", entities[i], 0, "train"});
        std::vector<TargetInstance> test;
        for (int i = 0; i < 200; ++i)
            test.push_back({"m" + std::to_string(i), entities[rng.next_u64() % entities.size()],
                            int(rng.next_u64() % 2), ""});
        assign_scenario(test, train);

        std::set<std::string> seen, harmful;
        for (const auto& t : train) {
            seen.insert(t.entity);
            if (t.label == 1) harmful.insert(t.entity);
        }
        std::map<std::string, std::set<std::string>> by_tag;
        for (const auto& t : test) {
            CHECK((t.scenario == "A" || t.scenario == "B" || t.scenario == "C"));
            by_tag[t.scenario].insert(t.entity);
            if (t.scenario == "C") CHECK(!seen.count(t.entity));
            if (t.scenario == "B") CHECK(!harmful.count(t.entity));
        }
        // pairwise disjoint at the entity level
        for (const auto& a : by_tag["A"]) {
            CHECK(!by_tag["B"].count(a));
            CHECK(!by_tag["C"].count(a));
        }
        for (const auto& b : by_tag["B"]) CHECK(!by_tag["C"].count(b));
    }
}

TEST_CASE("fleiss_kappa") {
    SUBCASE("perfect agreement is 1.0") {
        AnnotationMatrix m{{{1, 1, 1}, {0, 0, 0}, {2, 2, 2}}};
        auto r = fleiss_kappa(m);
        CHECK(r.kappa == doctest::Approx(1.0));
        CHECK(!r.degenerate);
    }

    SUBCASE("hand-computed 2x3 fixture") {
        // rows {0,0,1} and {1,1,1}: P1 = 1/3, P2 = 1, Pbar = 2/3,
        // p0 = 1/3, p1 = 2/3, Pe = 5/9, kappa = (2/3 - 5/9)/(4/9) = 1/4.
        AnnotationMatrix m{{{0, 0, 1}, {1, 1, 1}}};
        CHECK(fleiss_kappa(m).kappa == doctest::Approx(0.25).epsilon(1e-9));
    }

    SUBCASE("annotator column permutation leaves the value unchanged") {
        AnnotationMatrix m{{{0, 1, 2, 0}, {1, 1, 0, 2}, {2, 0, 0, 0}, {1, 2, 2, 1}}};
        const double base = fleiss_kappa(m).kappa;
        Rng rng(7);
        for (int it = 0; it < 50; ++it) {
            AnnotationMatrix p = m;
            std::vector<size_t> perm{0, 1, 2, 3};
            for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.next_u64() % i]);
            for (auto& row : p.labels) {
                auto orig = row;
                for (size_t k = 0; k < perm.size(); ++k) row[k] = orig[perm[k]];
            }
            CHECK(fleiss_kappa(p).kappa == doctest::Approx(base).epsilon(1e-12));
        }
    }

    SUBCASE("category relabeling leaves the value unchanged") {
        AnnotationMatrix m{{{0, 1, 2}, {1, 1, 0}, {2, 0, 0}}};
        AnnotationMatrix relabeled{{{5, 9, 7}, {9, 9, 5}, {7, 5, 5}}};
        CHECK(fleiss_kappa(m).kappa == doctest::Approx(fleiss_kappa(relabeled).kappa).epsilon(1e-12));
    }

    SUBCASE("degenerate single-category matrix flags and returns 1.0") {
        AnnotationMatrix m{{{1, 1}, {1, 1}}};
        auto r = fleiss_kappa(m);
        CHECK(r.kappa == 1.0);
        CHECK(r.degenerate);
    }

    SUBCASE("kappa can be negative") {
        AnnotationMatrix m{{{0, 1}, {1, 0}}};
        CHECK(fleiss_kappa(m).kappa < 0.0);
    }

    SUBCASE("contract violations") {
        CHECK_THROWS_AS(fleiss_kappa(AnnotationMatrix{}), ContractError);
        CHECK_THROWS_AS(fleiss_kappa(AnnotationMatrix{{{1}}}), ContractError);
        CHECK_THROWS_AS(fleiss_kappa(AnnotationMatrix{{{1, 0}, {1}}}), ContractError);
    }
}

TEST_CASE("corpus_stats") {
    const EntityLexicon lex = political_lexicon();

    SUBCASE("single meme with one harmful target") {
        std::vector<MemeRecord> records{meme("m1", "joe biden bad", {"joe biden"}, {"joe biden"}, "train")};
        auto stats = corpus_stats(records, lex, 5);
        REQUIRE(stats.top_entities.count("harmful"));
        const auto& ind = stats.top_entities.at("harmful").at("individual");
        REQUIRE(ind.size() == 1);
        CHECK(ind[0].entity == "joe biden");
        CHECK(ind[0].count == 1);
    }

    SUBCASE("histogram bin totals equal record counts per class") {
        std::vector<MemeRecord> records;
        Rng rng(3);
        for (int i = 0; i < 40; ++i) {
            std::string text;
            const int len = 1 + int(rng.next_u64() % 120);
            for (int k = 0; k < len; ++k) text += "w ";
            const bool harmful = (i % 3) == 0;
            records.push_back(meme("m" + std::to_string(i), text,
                                   harmful ? std::vector<std::string>{"cnn"} : std::vector<std::string>{},
                                   {"cnn"}, "train"));
        }
        auto stats = corpus_stats(records, lex, 5);
        for (const auto& [cls, bins] : stats.length_histograms) {
            long total = 0;
            for (long b : bins) total += b;
            CHECK(total == stats.records_per_class.at(cls));
        }
        CHECK(stats.records_per_class.at("harmful") + stats.records_per_class.at("not_harmful") == 40);
    }

    SUBCASE("top-k respects k and sorts by count then name") {
        std::vector<MemeRecord> records;
        for (int i = 0; i < 5; ++i)
            records.push_back(meme("a" + std::to_string(i), "x", {"joe biden"}, {"joe biden"}, "train"));
        for (int i = 0; i < 3; ++i)
            records.push_back(meme("b" + std::to_string(i), "x", {"donald trump"}, {"donald trump"}, "train"));
        auto stats = corpus_stats(records, lex, 1);
        const auto& ind = stats.top_entities.at("harmful").at("individual");
        REQUIRE(ind.size() == 1);
        CHECK(ind[0].entity == "joe biden");
        CHECK(ind[0].count == 5);
    }
}

TEST_CASE("manifest io and validation") {
    const auto dir = temp_dir("manifest");

    SUBCASE("valid two-record fixture has zero violations") {
        std::ofstream img1(dir / "a.img");
        img1 << "x";
        std::ofstream img2(dir / "b.img");
        img2 << "y";
        std::ofstream out(dir / "m.jsonl");
        out << R"({"id":"a","image_ref":"a.img","ocr_text":"joe biden","split":"train","candidates":["joe biden","cnn"],"harmful_targets":["joe biden"]})"
            << "\n";
        out << R"({"id":"b","image_ref":"b.img","ocr_text":"cnn","split":"test","candidates":["cnn"],"harmful_targets":[]})"
            << "\n";
        out.close();
        auto report = validate_manifest((dir / "m.jsonl").string());
        CHECK(report.ok());
        CHECK(report.total_memes == 2);
        CHECK(report.splits.at("train").harmful_instances == 1);
        CHECK(report.splits.at("train").not_harmful_instances == 1);
        // test-split entity "cnn" was seen (not harmful) in train -> B
        CHECK(report.scenarios.at("B").not_harmful == 1);
    }

    SUBCASE("dangling harmful target is one violation at that record") {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"id":"a","image_ref":"x.img","ocr_text":"t","split":"train","candidates":["cnn"],"harmful_targets":["joe biden"]})"
            << "\n";
        out.close();
        auto report = validate_manifest((dir / "bad.jsonl").string(), /*require_images=*/false);
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].meme_id == "a");
        CHECK(report.violations[0].message.find("joe biden") != std::string::npos);
    }

    SUBCASE("malformed rows are reported with line numbers") {
        std::ofstream out(dir / "mangled.jsonl");
        out << R"({"id":"ok","image_ref":"x.img","ocr_text":"t","split":"train"})" << "\n";
        out << "{not json at all\n";
        out.close();
        auto report = validate_manifest((dir / "mangled.jsonl").string(), false);
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].line == 2);
    }

    SUBCASE("duplicate ids and bad splits are violations") {
        std::ofstream out(dir / "dup.jsonl");
        out << R"({"id":"a","image_ref":"x.img","ocr_text":"t","split":"train"})" << "\n";
        out << R"({"id":"a","image_ref":"x.img","ocr_text":"t","split":"weird"})" << "\n";
        out.close();
        auto report = validate_manifest((dir / "dup.jsonl").string(), false);
        CHECK(report.violations.size() == 2);
    }

    SUBCASE("round trip preserves records") {
        std::vector<MemeRecord> records{meme("m1", "text", {"cnn"}, {"cnn", "joe biden"}, "train")};
        records[0].context = ContextDoc{"text", "title", "para", "http://x", "2024-01-01T00:00:00Z", false};
        save_manifest((dir / "rt.jsonl").string(), records);
        auto load = load_manifest((dir / "rt.jsonl").string());
        CHECK(load.parse_violations.empty());
        REQUIRE(load.records.size() == 1);
        CHECK(load.records[0].id == "m1");
        CHECK(load.records[0].context->title == "title");
        CHECK(load.records[0].candidates == records[0].candidates);
    }
}

TEST_CASE("context cache and fetch") {
    const auto dir = temp_dir("context");

    struct CountingClient final : context::SearchClient {
        int calls = 0;
        std::string name() const override { return "counting"; }
        std::optional<context::SearchResult> search(const std::string& q) override {
            ++calls;
            if (q.find("fail") != std::string::npos) return std::nullopt;
            return context::SearchResult{"title:" + q, "para:" + q, "http://example/" + q};
        }
    };

    SUBCASE("cache hit short-circuits the client") {
        context::ContextCache cache((dir / "cache.jsonl").string());
        CountingClient client;
        auto doc1 = context::fetch_context("Some Meme Text", client, cache, [] { return "T0"; });
        CHECK(client.calls == 1);
        CHECK(doc1.title == "title:some meme text");
        auto doc2 = context::fetch_context("some  meme   text", client, cache, [] { return "T1"; });
        CHECK(client.calls == 1);  // normalized query hits the cache
        CHECK(doc2.title == doc1.title);
        CHECK(doc2.fetched_at == "T0");
    }

    SUBCASE("failures are flagged, cached, and never abort") {
        context::ContextCache cache((dir / "cache2.jsonl").string());
        CountingClient client;
        auto doc = context::fetch_context("please fail", client, cache);
        CHECK(doc.failed);
        CHECK(doc.title.empty());
        auto again = context::fetch_context("please fail", client, cache);
        CHECK(client.calls == 1);
        CHECK(again.failed);
    }

    SUBCASE("two memes with identical text trigger a single fetch") {
        context::ContextCache cache((dir / "cache3.jsonl").string());
        CountingClient client;
        std::vector<MemeRecord> records{meme("m1", "same text", {}, {}, "train"),
                                        meme("m2", "same text", {}, {}, "train")};
        auto summary = context::fetch_all(records, client, cache);
        CHECK(client.calls == 1);
        CHECK(summary.fetched == 1);
        CHECK(summary.cached == 0);

        // warm cache: zero client calls on re-run
        CountingClient client2;
        auto summary2 = context::fetch_all(records, client2, cache);
        CHECK(client2.calls == 0);
        CHECK(summary2.cached == 1);
    }

    SUBCASE("cache reload from disk preserves entries and key uniqueness") {
        const std::string path = (dir / "cache4.jsonl").string();
        {
            context::ContextCache cache(path);
            CountingClient client;
            context::fetch_context("query one", client, cache, [] { return "T"; });
            context::fetch_context("query two", client, cache, [] { return "T"; });
        }
        context::ContextCache reloaded(path);
        CHECK(reloaded.size() == 2);
        CHECK(reloaded.get("query one").has_value());
        // keys in the file are unique
        std::ifstream in(path);
        std::set<std::string> keys;
        std::string line;
        int lines = 0;
        while (std::getline(in, line)) {
            ++lines;
            auto pos = line.find("\"query\":\"");
            REQUIRE(pos != std::string::npos);
        }
        CHECK(lines == 2);
    }

    SUBCASE("replay client reads fixture rows verbatim") {
        std::ofstream fx(dir / "fixture.jsonl");
        fx << R"({"query":"biden meme","title":"Biden article","first_paragraph":"Lead paragraph.","source_url":"http://news/1"})"
           << "\n";
        fx.close();
        context::ReplaySearchClient replay((dir / "fixture.jsonl").string());
        auto hit = replay.search("biden meme");
        REQUIRE(hit.has_value());
        CHECK(hit->title == "Biden article");
        CHECK(hit->first_paragraph == "Lead paragraph.");
        CHECK(!replay.search("unknown").has_value());
        CHECK_THROWS_AS(context::make_search_client("replay", ""), ConfigError);
        CHECK_THROWS_AS(context::make_search_client("google", ""), ConfigError);
    }
}

TEST_CASE("lexicon invariants") {
    CHECK_THROWS_AS(EntityLexicon({{"joe biden", {"joe"}, "individual"}, {"donald trump", {"joe"}, "individual"}}),
                    InputError);
    const EntityLexicon lex = political_lexicon();
    CHECK(lex.canonicalize("Sleepy  Joe") == "joe biden");
    CHECK(lex.canonicalize("unknown person") == "unknown person");
    CHECK(lex.category("joe biden") == "individual");
    CHECK(lex.category("nobody") == "uncategorized");
}
