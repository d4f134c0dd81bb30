#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "disarm/linalg.hpp"

// Entity embedding table plus the three contextual encoders: context text
// (512), image (512) and OCR-text-with-entity (768). Production encoders are
// pluggable adapters selected by name; the shipped "stub" adapters are seeded
// hash projections so the whole pipeline runs offline and reproducibly, and
// "zero" returns zero vectors (useful for no-context ablations).

namespace disarm::encoders {

constexpr Index kContextDim = 512;
constexpr Index kImageDim = 512;
constexpr Index kHarmTextDim = 768;
constexpr Index kEntityDim = 300;

// Literal separator between OCR text and entity in the harm-text input.
constexpr const char* kHarmTextSeparator = " [SEP] ";

template <class S>
struct EntityTableT {
    std::vector<std::string> vocab;  // normalized, unique, sorted
    MatT<S> matrix;                  // (vocab.size() + 1) x hidden; last row reserved for OOV

    Index oov_index() const { return static_cast<Index>(vocab.size()); }
    Index hidden_dim() const { return matrix.cols(); }
};

using EntityEmbeddingTable = EntityTableT<float>;

// Vocab is normalized, deduplicated and sorted; one extra trained row is
// reserved for out-of-vocabulary entities so lookup is total.
EntityEmbeddingTable init_entity_table(const std::vector<std::string>& entities, Index hidden, uint64_t seed);

// Row index for an entity; unknown entities resolve to the OOV row.
Index table_lookup(const EntityEmbeddingTable& table, std::string_view entity);

Vec embed_entity(const EntityEmbeddingTable& table, const std::string& entity);

// The 512-d entity representation fed to the contextualized-entity block.
Vec project_entity(const Vec& ent, const Affine& proj);

enum class EncoderKind { ContextText, Image, HarmText };

const char* encoder_kind_name(EncoderKind k);

class Encoder {
  public:
    Encoder(std::string name, EncoderKind kind, Index output_dim, bool deterministic)
        : name_(std::move(name)), kind_(kind), output_dim_(output_dim), deterministic_(deterministic) {}
    virtual ~Encoder() = default;

    const std::string& name() const { return name_; }
    EncoderKind kind() const { return kind_; }
    Index output_dim() const { return output_dim_; }
    bool deterministic() const { return deterministic_; }

    virtual Vec encode_text(const std::string& text) const;
    virtual Vec encode_image(const std::string& image_ref) const;
    virtual Vec encode_pair(const std::string& ocr_text, const std::string& entity) const;

  private:
    std::string name_;
    EncoderKind kind_;
    Index output_dim_;
    bool deterministic_;
};

Vec encode_context(const Encoder& h, const std::string& text);
Vec encode_image(const Encoder& h, const std::string& image_ref);
Vec encode_harm_text(const Encoder& h, const std::string& ocr_text, const std::string& entity);

// Adapter registry. Known adapters: "stub", "zero". Unknown names are a
// configuration error; production adapters plug in here.
std::unique_ptr<Encoder> make_encoder(const std::string& adapter, EncoderKind kind, Index output_dim,
                                      uint64_t seed);

struct EncoderSet {
    std::unique_ptr<Encoder> context;
    std::unique_ptr<Encoder> image;
    std::unique_ptr<Encoder> harm;
};

struct EncoderNames {
    std::string context = "stub";
    std::string image = "stub";
    std::string harm_text = "stub";
};

EncoderSet make_encoder_set(const EncoderNames& names, Index context_dim, Index image_dim, Index harm_dim,
                            uint64_t seed);

}  // namespace disarm::encoders
