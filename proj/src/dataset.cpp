#include "disarm/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

namespace disarm::data {

using nlohmann::json;

std::string ContextDoc::combined_text() const {
    if (title.empty()) return first_paragraph;
    if (first_paragraph.empty()) return title;
    return title + "\n" + first_paragraph;
}

EntityLexicon::EntityLexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
    for (const auto& e : entries_) {
        const std::string canon = normalize_text(e.canonical);
        if (canon.empty()) throw InputError("lexicon: empty canonical entity name");
        canonical_category_[canon] = e.category.empty() ? "uncategorized" : normalize_text(e.category);
        std::vector<std::string> names = e.aliases;
        names.push_back(e.canonical);
        for (const auto& a : names) {
            const std::string alias = normalize_text(a);
            if (alias.empty()) continue;
            auto [it, inserted] = alias_to_canonical_.emplace(alias, canon);
            if (!inserted && it->second != canon)
                throw InputError("lexicon: alias '" + alias + "' maps to both '" + it->second + "' and '" +
                                 canon + "'");
        }
    }
    for (const auto& [alias, canon] : alias_to_canonical_) alias_tokens_.emplace_back(tokenize(alias), canon);
}

std::string EntityLexicon::canonicalize(std::string_view name) const {
    const std::string n = normalize_text(name);
    const auto it = alias_to_canonical_.find(n);
    return it == alias_to_canonical_.end() ? n : it->second;
}

std::string EntityLexicon::category(std::string_view canonical) const {
    const auto it = canonical_category_.find(normalize_text(canonical));
    return it == canonical_category_.end() ? "uncategorized" : it->second;
}

EntityLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read lexicon file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw InputError("lexicon " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw InputError("lexicon " + path + ": expected a JSON array of entries");
    std::vector<LexiconEntry> entries;
    for (const auto& item : doc) {
        LexiconEntry e;
        e.canonical = item.at("canonical").get<std::string>();
        if (item.contains("aliases"))
            for (const auto& a : item.at("aliases")) e.aliases.push_back(a.get<std::string>());
        if (item.contains("category")) e.category = item.at("category").get<std::string>();
        entries.push_back(std::move(e));
    }
    return EntityLexicon(std::move(entries));
}

namespace {

bool window_match(const std::vector<std::string>& text, const std::vector<std::string>& alias) {
    if (alias.empty() || alias.size() > text.size()) return false;
    for (size_t i = 0; i + alias.size() <= text.size(); ++i) {
        bool ok = true;
        for (size_t j = 0; j < alias.size(); ++j)
            if (text[i + j] != alias[j]) {
                ok = false;
                break;
            }
        if (ok) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> extract_candidates(const MemeRecord& record, const EntityLexicon& lexicon,
                                            const std::vector<const CandidateExtractor*>& extractors) {
    std::set<std::string> found;
    const std::vector<std::string> text_tokens = tokenize(record.ocr_text);
    for (const auto& [alias, canon] : lexicon.alias_tokens())
        if (window_match(text_tokens, alias)) found.insert(canon);
    for (const CandidateExtractor* ex : extractors) {
        if (!ex) continue;
        for (const auto& raw : ex->extract(record)) {
            const std::string canon = lexicon.canonicalize(raw);
            if (!canon.empty()) found.insert(canon);
        }
    }
    return {found.begin(), found.end()};
}

double lexical_similarity(const std::string& meme_text, const std::string& entity) {
    const auto ta = tokenize(meme_text);
    const auto tb = tokenize(entity);
    const std::set<std::string> a(ta.begin(), ta.end());
    const std::set<std::string> b(tb.begin(), tb.end());
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::string> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    const size_t uni = a.size() + b.size() - inter.size();
    return uni == 0 ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

std::vector<std::string> sample_negatives(const MemeRecord& meme, const EntityLexicon& lexicon) {
    std::set<std::string> excluded;
    for (const auto& t : meme.harmful_targets) excluded.insert(lexicon.canonicalize(t));

    struct Scored {
        std::string entity;
        double score;
    };
    std::vector<Scored> pool;
    for (const auto& e : lexicon.entries()) {
        const std::string canon = lexicon.canonicalize(e.canonical);
        if (excluded.count(canon)) continue;
        pool.push_back({canon, lexical_similarity(meme.ocr_text, canon)});
    }
    std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entity < b.entity;
    });
    if (pool.empty())
        std::cerr << "warning: meme " << meme.id << ": no eligible lexicon entities for negative sampling\n";
    std::vector<std::string> out;
    for (size_t i = 0; i < pool.size() && i < 2; ++i) out.push_back(pool[i].entity);
    return out;
}

std::vector<TargetInstance> build_training_instances(const std::vector<MemeRecord>& records,
                                                     const EntityLexicon& lexicon,
                                                     const std::string& scenario_tag) {
    std::vector<TargetInstance> out;
    for (const auto& rec : records) {
        std::set<std::string> positives;
        for (const auto& t : rec.harmful_targets) positives.insert(lexicon.canonicalize(t));
        if (positives.empty()) continue;
        for (const auto& p : positives) out.push_back({rec.id, p, 1, scenario_tag});
        for (const auto& n : sample_negatives(rec, lexicon)) out.push_back({rec.id, n, 0, scenario_tag});
    }
    return out;
}

std::vector<TargetInstance> build_test_instances(const std::vector<MemeRecord>& records,
                                                 const EntityLexicon& lexicon) {
    std::vector<TargetInstance> out;
    for (const auto& rec : records) {
        std::set<std::string> harmful;
        for (const auto& t : rec.harmful_targets) harmful.insert(lexicon.canonicalize(t));
        std::set<std::string> cands;
        for (const auto& c : rec.candidates) cands.insert(lexicon.canonicalize(c));
        for (const auto& c : cands) out.push_back({rec.id, c, harmful.count(c) ? 1 : 0, ""});
    }
    return out;
}

void assign_scenario(std::vector<TargetInstance>& test_instances,
                     const std::vector<TargetInstance>& train_instances) {
    std::set<std::string> seen, seen_harmful;
    for (const auto& t : train_instances) {
        const std::string e = normalize_text(t.entity);
        seen.insert(e);
        if (t.label == 1) seen_harmful.insert(e);
    }
    for (auto& t : test_instances) {
        const std::string e = normalize_text(t.entity);
        if (seen_harmful.count(e))
            t.scenario = "A";
        else if (seen.count(e))
            t.scenario = "B";
        else
            t.scenario = "C";
    }
}

FleissResult fleiss_kappa(const AnnotationMatrix& m) {
    if (m.labels.empty()) throw ContractError("fleiss kappa: no instances");
    const size_t annotators = m.labels.front().size();
    if (annotators < 2) throw ContractError("fleiss kappa: at least two annotators required");
    for (const auto& row : m.labels)
        if (row.size() != annotators) throw ContractError("fleiss kappa: rows are not fully filled");

    std::set<int> categories;
    for (const auto& row : m.labels) categories.insert(row.begin(), row.end());
    if (categories.size() <= 1) return {1.0, true};

    const double n = static_cast<double>(annotators);
    const double rows = static_cast<double>(m.labels.size());
    std::map<int, double> totals;
    double p_bar = 0.0;
    for (const auto& row : m.labels) {
        std::map<int, int> counts;
        for (int v : row) ++counts[v];
        double agree = 0.0;
        for (const auto& [cat, c] : counts) {
            agree += static_cast<double>(c) * (c - 1);
            totals[cat] += c;
        }
        p_bar += agree / (n * (n - 1.0));
    }
    p_bar /= rows;
    double pe = 0.0;
    for (const auto& [cat, total] : totals) {
        const double pj = total / (rows * n);
        pe += pj * pj;
    }
    return {(p_bar - pe) / (1.0 - pe), false};
}

CorpusStats corpus_stats(const std::vector<MemeRecord>& records, const EntityLexicon& lexicon, int top_k) {
    CorpusStats stats;
    // (class, category, entity) -> reference count
    std::map<std::string, std::map<std::string, std::map<std::string, int>>> counts;
    stats.length_histograms["harmful"] = std::vector<long>(stats.num_bins, 0);
    stats.length_histograms["not_harmful"] = std::vector<long>(stats.num_bins, 0);
    stats.records_per_class["harmful"] = 0;
    stats.records_per_class["not_harmful"] = 0;

    for (const auto& rec : records) {
        std::set<std::string> harmful;
        for (const auto& t : rec.harmful_targets) harmful.insert(lexicon.canonicalize(t));
        std::set<std::string> cands;
        for (const auto& c : rec.candidates) cands.insert(lexicon.canonicalize(c));
        cands.insert(harmful.begin(), harmful.end());
        for (const auto& e : cands) {
            const std::string cls = harmful.count(e) ? "harmful" : "not_harmful";
            ++counts[cls][lexicon.category(e)][e];
        }
        const std::string meme_cls = harmful.empty() ? "not_harmful" : "harmful";
        ++stats.records_per_class[meme_cls];
        const auto len = static_cast<long>(tokenize(rec.ocr_text).size());
        auto bin = static_cast<size_t>(len / stats.bin_width);
        if (bin >= static_cast<size_t>(stats.num_bins)) bin = static_cast<size_t>(stats.num_bins) - 1;
        ++stats.length_histograms[meme_cls][bin];
    }

    for (auto& [cls, per_category] : counts)
        for (auto& [cat, per_entity] : per_category) {
            std::vector<EntityCount> ranked;
            for (const auto& [entity, count] : per_entity) ranked.push_back({entity, count});
            std::sort(ranked.begin(), ranked.end(), [](const EntityCount& a, const EntityCount& b) {
                if (a.count != b.count) return a.count > b.count;
                return a.entity < b.entity;
            });
            if (top_k > 0 && ranked.size() > static_cast<size_t>(top_k)) ranked.resize(top_k);
            stats.top_entities[cls][cat] = std::move(ranked);
        }
    return stats;
}

namespace {

json context_to_json(const ContextDoc& c) {
    return json{{"query", c.query},
                {"title", c.title},
                {"first_paragraph", c.first_paragraph},
                {"source_url", c.source_url},
                {"fetched_at", c.fetched_at},
                {"failed", c.failed}};
}

ContextDoc context_from_json(const json& j) {
    ContextDoc c;
    c.query = j.value("query", "");
    c.title = j.value("title", "");
    c.first_paragraph = j.value("first_paragraph", "");
    c.source_url = j.value("source_url", "");
    c.fetched_at = j.value("fetched_at", "");
    c.failed = j.value("failed", false);
    return c;
}

}  // namespace

ManifestLoad load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read manifest file: " + path);
    ManifestLoad out;
    out.base_dir = std::filesystem::path(path).parent_path().string();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            out.parse_violations.push_back({lineno, "", "malformed JSON row"});
            continue;
        }
        try {
            MemeRecord rec;
            rec.id = j.at("id").get<std::string>();
            rec.image_ref = j.value("image_ref", "");
            rec.ocr_text = j.value("ocr_text", "");
            rec.split = j.value("split", "");
            if (j.contains("candidates") && !j.at("candidates").is_null()) {
                rec.candidates_provided = true;
                for (const auto& c : j.at("candidates")) rec.candidates.push_back(c.get<std::string>());
            }
            if (j.contains("harmful_targets") && !j.at("harmful_targets").is_null())
                for (const auto& t : j.at("harmful_targets")) rec.harmful_targets.push_back(t.get<std::string>());
            if (j.contains("context") && !j.at("context").is_null())
                rec.context = context_from_json(j.at("context"));
            out.records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            out.parse_violations.push_back({lineno, j.value("id", ""), std::string("bad record: ") + e.what()});
        }
    }
    return out;
}

std::string resolve_image_ref(const MemeRecord& record, const std::string& base_dir) {
    namespace fs = std::filesystem;
    fs::path p(record.image_ref);
    if (p.is_absolute() || base_dir.empty()) return record.image_ref;
    return (fs::path(base_dir) / p).string();
}

void save_manifest(const std::string& path, const std::vector<MemeRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write manifest file: " + path);
    for (const auto& rec : records) {
        json j{{"id", rec.id},
               {"image_ref", rec.image_ref},
               {"ocr_text", rec.ocr_text},
               {"split", rec.split},
               {"harmful_targets", rec.harmful_targets}};
        if (rec.candidates_provided)
            j["candidates"] = rec.candidates;
        else
            j["candidates"] = nullptr;
        if (rec.context) j["context"] = context_to_json(*rec.context);
        out << j.dump() << "\n";
    }
}

std::vector<TargetInstance> load_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read instance file: " + path);
    std::vector<TargetInstance> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw InputError(path + ":" + std::to_string(lineno) + ": malformed instance row");
        out.push_back({j.at("meme_id").get<std::string>(), j.at("entity").get<std::string>(),
                       j.at("label").get<int>(), j.value("scenario", "")});
    }
    return out;
}

void save_instances(const std::string& path, const std::vector<TargetInstance>& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write instance file: " + path);
    for (const auto& t : instances) {
        json j{{"meme_id", t.meme_id}, {"entity", t.entity}, {"label", t.label}, {"scenario", t.scenario}};
        out << j.dump() << "\n";
    }
}

ValidationReport validate_records(const std::vector<MemeRecord>& records,
                                  const std::vector<Violation>& parse_violations, bool require_images,
                                  const std::string& base_dir) {
    ValidationReport report;
    report.violations = parse_violations;
    std::set<std::string> ids;
    int line = 0;
    for (const auto& rec : records) {
        ++line;
        if (rec.id.empty()) report.violations.push_back({line, rec.id, "empty meme id"});
        if (!ids.insert(rec.id).second) report.violations.push_back({line, rec.id, "duplicate meme id"});
        if (rec.split != "train" && rec.split != "validation" && rec.split != "test")
            report.violations.push_back({line, rec.id, "invalid split '" + rec.split + "'"});
        if (rec.candidates_provided) {
            std::set<std::string> cands;
            for (const auto& c : rec.candidates) cands.insert(normalize_text(c));
            for (const auto& t : rec.harmful_targets)
                if (!cands.count(normalize_text(t)))
                    report.violations.push_back({line, rec.id, "harmful target '" + t + "' not in candidates"});
        }
        if (require_images) {
            namespace fs = std::filesystem;
            fs::path p(rec.image_ref);
            if (p.is_relative()) p = fs::path(base_dir) / p;
            if (rec.image_ref.empty() || !fs::exists(p))
                report.violations.push_back({line, rec.id, "image not resolvable: " + rec.image_ref});
        }

        auto& sc = report.splits[rec.split];
        ++sc.memes;
        ++report.total_memes;
        std::set<std::string> harmful;
        for (const auto& t : rec.harmful_targets) harmful.insert(normalize_text(t));
        sc.harmful_instances += static_cast<long>(harmful.size());
        report.total_harmful += static_cast<long>(harmful.size());
        if (rec.candidates_provided) {
            std::set<std::string> cands;
            for (const auto& c : rec.candidates) cands.insert(normalize_text(c));
            long negatives = 0;
            for (const auto& c : cands)
                if (!harmful.count(c)) ++negatives;
            sc.not_harmful_instances += negatives;
            report.total_not_harmful += negatives;
        }
    }

    // Scenario counts from annotations: train occurrences = annotated
    // references of the train split.
    std::set<std::string> seen, seen_harmful;
    for (const auto& rec : records) {
        if (rec.split != "train") continue;
        for (const auto& t : rec.harmful_targets) {
            seen.insert(normalize_text(t));
            seen_harmful.insert(normalize_text(t));
        }
        for (const auto& c : rec.candidates) seen.insert(normalize_text(c));
    }
    for (const auto& rec : records) {
        if (rec.split != "test") continue;
        std::set<std::string> harmful;
        for (const auto& t : rec.harmful_targets) harmful.insert(normalize_text(t));
        std::set<std::string> cands;
        for (const auto& c : rec.candidates) cands.insert(normalize_text(c));
        cands.insert(harmful.begin(), harmful.end());
        for (const auto& e : cands) {
            std::string tag = seen_harmful.count(e) ? "A" : (seen.count(e) ? "B" : "C");
            if (harmful.count(e))
                ++report.scenarios[tag].harmful;
            else
                ++report.scenarios[tag].not_harmful;
        }
    }
    return report;
}

ValidationReport validate_manifest(const std::string& path, bool require_images) {
    const ManifestLoad load = load_manifest(path);
    const std::string base = std::filesystem::path(path).parent_path().string();
    return validate_records(load.records, load.parse_violations, require_images, base);
}

}  // namespace disarm::data
