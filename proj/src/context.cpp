#include "disarm/context.hpp"

#include <chrono>
#include <fstream>
#include <json.hpp>
#include <set>

namespace disarm::context {

using nlohmann::json;

ReplaySearchClient::ReplaySearchClient(const std::string& fixture_path) {
    std::ifstream in(fixture_path);
    if (!in) throw ConfigError("replay search client: cannot read fixture " + fixture_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw InputError(fixture_path + ":" + std::to_string(lineno) + ": malformed fixture row");
        SearchResult r{j.value("title", ""), j.value("first_paragraph", ""), j.value("source_url", "")};
        results_[normalize_text(j.at("query").get<std::string>())] = std::move(r);
    }
}

std::optional<SearchResult> ReplaySearchClient::search(const std::string& normalized_query) {
    const auto it = results_.find(normalized_query);
    if (it == results_.end()) return std::nullopt;
    return it->second;
}

std::unique_ptr<SearchClient> make_search_client(const std::string& name, const std::string& fixture_path) {
    if (name == "replay") {
        if (fixture_path.empty()) throw ConfigError("search client 'replay' requires paths.search_fixture");
        return std::make_unique<ReplaySearchClient>(fixture_path);
    }
    if (name == "none") return std::make_unique<NullSearchClient>();
    throw ConfigError("unknown search client '" + name + "'");
}

ContextCache::ContextCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // cache created on first put
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw InputError(path_ + ":" + std::to_string(lineno) + ": malformed cache row");
        data::ContextDoc d;
        d.query = j.value("query", "");
        d.title = j.value("title", "");
        d.first_paragraph = j.value("first_paragraph", "");
        d.source_url = j.value("source_url", "");
        d.fetched_at = j.value("fetched_at", "");
        d.failed = j.value("failed", false);
        docs_.emplace(d.query, std::move(d));  // first line wins
    }
}

std::optional<data::ContextDoc> ContextCache::get(const std::string& normalized_query) const {
    const auto it = docs_.find(normalized_query);
    if (it == docs_.end()) return std::nullopt;
    return it->second;
}

void ContextCache::put(const data::ContextDoc& doc) {
    if (!docs_.emplace(doc.query, doc).second) return;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw InputError("cannot append to context cache: " + path_);
    json j{{"query", doc.query},         {"title", doc.title},           {"first_paragraph", doc.first_paragraph},
           {"source_url", doc.source_url}, {"fetched_at", doc.fetched_at}, {"failed", doc.failed}};
    out << j.dump() << "\n";
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

data::ContextDoc fetch_context(const std::string& ocr_text, SearchClient& client, ContextCache& cache,
                               const Clock& now) {
    const std::string query = normalize_text(ocr_text);
    if (auto hit = cache.get(query)) return *hit;
    data::ContextDoc doc;
    doc.query = query;
    doc.fetched_at = now();
    if (auto result = client.search(query)) {
        doc.title = result->title;
        doc.first_paragraph = result->first_paragraph;
        doc.source_url = result->url;
    } else {
        doc.failed = true;
    }
    cache.put(doc);
    return doc;
}

FetchSummary fetch_all(const std::vector<data::MemeRecord>& records, SearchClient& client, ContextCache& cache,
                       const Clock& now) {
    FetchSummary summary;
    std::set<std::string> queries;
    for (const auto& rec : records) queries.insert(normalize_text(rec.ocr_text));
    for (const auto& q : queries) {
        if (cache.get(q)) {
            ++summary.cached;
            continue;
        }
        const data::ContextDoc doc = fetch_context(q, client, cache, now);
        if (doc.failed)
            ++summary.failed;
        else
            ++summary.fetched;
    }
    return summary;
}

}  // namespace disarm::context
