#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "disarm/dataset.hpp"

// Structured-context retrieval: the meme text is the search query; the top
// result's title and first paragraph become the ContextDoc. A JSON Lines
// cache keyed by the normalized query makes builds reproducible offline.

namespace disarm::context {

struct SearchResult {
    std::string title;
    std::string first_paragraph;
    std::string url;
};

class SearchClient {
  public:
    virtual ~SearchClient() = default;
    virtual std::string name() const = 0;
    // nullopt signals retrieval failure; must not throw for ordinary misses.
    virtual std::optional<SearchResult> search(const std::string& normalized_query) = 0;
};

// Replays results recorded in a JSON Lines fixture
// ({"query","title","first_paragraph","source_url"} per line).
class ReplaySearchClient final : public SearchClient {
  public:
    explicit ReplaySearchClient(const std::string& fixture_path);
    std::string name() const override { return "replay"; }
    std::optional<SearchResult> search(const std::string& normalized_query) override;

  private:
    std::map<std::string, SearchResult> results_;
};

// Always fails; every meme gets a failure-flagged empty ContextDoc.
class NullSearchClient final : public SearchClient {
  public:
    std::string name() const override { return "none"; }
    std::optional<SearchResult> search(const std::string&) override { return std::nullopt; }
};

// Known clients: "replay" (requires fixture path), "none".
std::unique_ptr<SearchClient> make_search_client(const std::string& name, const std::string& fixture_path);

// Append-only JSON Lines cache of ContextDocs keyed by normalized query.
class ContextCache {
  public:
    ContextCache() = default;
    explicit ContextCache(std::string path);  // loads existing lines if present

    const std::string& path() const { return path_; }
    std::optional<data::ContextDoc> get(const std::string& normalized_query) const;
    // Inserts and appends one cache line; first writer wins for a key.
    void put(const data::ContextDoc& doc);
    size_t size() const { return docs_.size(); }

  private:
    std::string path_;
    std::map<std::string, data::ContextDoc> docs_;
};

using Clock = std::function<std::string()>;

std::string utc_timestamp();

// Cache hit short-circuits the client; failures produce flagged docs and are
// cached so warm re-runs make zero client calls.
data::ContextDoc fetch_context(const std::string& ocr_text, SearchClient& client, ContextCache& cache,
                               const Clock& now = utc_timestamp);

struct FetchSummary {
    long fetched = 0;  // client calls that succeeded
    long cached = 0;   // served from cache
    long failed = 0;   // client calls that failed
};

FetchSummary fetch_all(const std::vector<data::MemeRecord>& records, SearchClient& client, ContextCache& cache,
                       const Clock& now = utc_timestamp);

}  // namespace disarm::context
