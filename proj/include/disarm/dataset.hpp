#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disarm/common.hpp"

// Dataset construction and validation: candidate-entity extraction,
// lexical-similarity negative sampling, train/validation/test instance
// building, A/B/C scenario assignment, annotation agreement and corpus
// statistics. Manifests and instance files are JSON Lines, UTF-8.

namespace disarm::data {

// Background text retrieved for a meme: the top search result's title and
// first paragraph, keyed by the normalized meme text used as the query.
struct ContextDoc {
    std::string query;
    std::string title;
    std::string first_paragraph;
    std::string source_url;
    std::string fetched_at;
    bool failed = false;

    std::string combined_text() const;
};

struct MemeRecord {
    std::string id;
    std::string image_ref;
    std::string ocr_text;
    std::optional<ContextDoc> context;
    std::vector<std::string> candidates;
    bool candidates_provided = false;  // false when the manifest leaves them for extraction
    std::vector<std::string> harmful_targets;
    std::string split;  // train | validation | test
};

// The classification unit: one (meme, entity) pair.
struct TargetInstance {
    std::string meme_id;
    std::string entity;
    int label = 0;          // harmful = 1, not-harmful = 0
    std::string scenario;   // train | validation | A | B | C
};

struct LexiconEntry {
    std::string canonical;
    std::vector<std::string> aliases;
    std::string category;  // individual | organization | community
};

class EntityLexicon {
  public:
    EntityLexicon() = default;
    explicit EntityLexicon(std::vector<LexiconEntry> entries);

    const std::vector<LexiconEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    // Canonical name for an alias (or canonical) string; normalized input
    // returned unchanged when unknown.
    std::string canonicalize(std::string_view name) const;

    // Category tag for a canonical entity; "uncategorized" when unknown.
    std::string category(std::string_view canonical) const;

    // All (alias tokens, canonical) pairs for matching against meme text.
    const std::vector<std::pair<std::vector<std::string>, std::string>>& alias_tokens() const {
        return alias_tokens_;
    }

  private:
    std::vector<LexiconEntry> entries_;
    std::map<std::string, std::string> alias_to_canonical_;
    std::map<std::string, std::string> canonical_category_;
    std::vector<std::pair<std::vector<std::string>, std::string>> alias_tokens_;
};

EntityLexicon load_lexicon(const std::string& path);

// Adapter interface for external candidate extractors (text NER, person
// identification). The shipped reference implementation is the lexicon
// alias matcher inside extract_candidates.
class CandidateExtractor {
  public:
    virtual ~CandidateExtractor() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> extract(const MemeRecord& record) const = 0;
};

// Union of extractor outputs and lexicon alias matches against the OCR
// text, canonicalized and deduplicated; sorted for reproducible builds.
std::vector<std::string> extract_candidates(const MemeRecord& record, const EntityLexicon& lexicon,
                                            const std::vector<const CandidateExtractor*>& extractors);

// Token-set Jaccard over normalized unigrams, in [0, 1].
double lexical_similarity(const std::string& meme_text, const std::string& entity);

// Top-2 lexicon entities by lexical similarity with the meme text, excluding
// the meme's harmful targets; ties break by ascending canonical name.
std::vector<std::string> sample_negatives(const MemeRecord& meme, const EntityLexicon& lexicon);

// One positive instance per (meme, harmful target) plus sampled negatives.
// Memes without positives contribute nothing, which keeps the global
// negative:positive ratio at most 2.
std::vector<TargetInstance> build_training_instances(const std::vector<MemeRecord>& records,
                                                     const EntityLexicon& lexicon,
                                                     const std::string& scenario_tag);

// Test instances cover every candidate of every test meme, labeled from the
// manual annotations. Entities are canonicalized so scenario assignment
// matches train instances even when the manifest uses aliases.
std::vector<TargetInstance> build_test_instances(const std::vector<MemeRecord>& records,
                                                 const EntityLexicon& lexicon = EntityLexicon());

// Per test entity: A if it occurs in train with a harmful label, B if it
// occurs in train but never as harmful, C if it never occurs in train.
void assign_scenario(std::vector<TargetInstance>& test_instances,
                     const std::vector<TargetInstance>& train_instances);

struct AnnotationMatrix {
    // rows = instances, columns = annotators, cells = categorical labels
    std::vector<std::vector<int>> labels;
};

struct FleissResult {
    double kappa = 0.0;
    bool degenerate = false;  // single category everywhere
};

FleissResult fleiss_kappa(const AnnotationMatrix& m);

struct EntityCount {
    std::string entity;
    int count = 0;
};

struct CorpusStats {
    // class ("harmful" | "not_harmful") -> category -> descending counts
    std::map<std::string, std::map<std::string, std::vector<EntityCount>>> top_entities;
    // class -> token-length histogram (fixed-width bins, last bin overflow)
    std::map<std::string, std::vector<long>> length_histograms;
    int bin_width = 5;
    int num_bins = 21;
    std::map<std::string, long> records_per_class;
};

CorpusStats corpus_stats(const std::vector<MemeRecord>& records, const EntityLexicon& lexicon, int top_k);

struct Violation {
    int line = 0;  // 1-based manifest line; 0 when not line-bound
    std::string meme_id;
    std::string message;
};

struct SplitCounts {
    long memes = 0;
    long harmful_instances = 0;      // sum of |harmful_targets|
    long not_harmful_instances = 0;  // sum of |candidates \ harmful_targets|
};

struct ScenarioCounts {
    long harmful = 0;
    long not_harmful = 0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::map<std::string, SplitCounts> splits;
    long total_memes = 0;
    long total_harmful = 0;
    long total_not_harmful = 0;
    std::map<std::string, ScenarioCounts> scenarios;  // keys A, B, C

    bool ok() const { return violations.empty(); }
};

struct ManifestLoad {
    std::vector<MemeRecord> records;
    std::vector<Violation> parse_violations;  // malformed rows, with line numbers
    std::string base_dir;                     // image_ref paths resolve against this
};

ManifestLoad load_manifest(const std::string& path);

// Relative image_ref resolved against the manifest directory.
std::string resolve_image_ref(const MemeRecord& record, const std::string& base_dir);

void save_manifest(const std::string& path, const std::vector<MemeRecord>& records);

std::vector<TargetInstance> load_instances(const std::string& path);
void save_instances(const std::string& path, const std::vector<TargetInstance>& instances);

// Invariant checks plus counts comparable with the corpus summary tables.
// Counts come from the manifest annotations; image resolvability is checked
// relative to base_dir when require_images is set.
ValidationReport validate_records(const std::vector<MemeRecord>& records,
                                  const std::vector<Violation>& parse_violations, bool require_images,
                                  const std::string& base_dir);

ValidationReport validate_manifest(const std::string& path, bool require_images = true);

}  // namespace disarm::data
