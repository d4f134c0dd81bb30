#include "disarm/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace disarm::encoders {

EntityEmbeddingTable init_entity_table(const std::vector<std::string>& entities, Index hidden, uint64_t seed) {
    if (hidden <= 0) throw ContractError("entity table: hidden dimension must be positive");
    std::set<std::string> uniq;
    for (const auto& e : entities) {
        std::string n = normalize_text(e);
        if (!n.empty()) uniq.insert(std::move(n));
    }
    EntityEmbeddingTable table;
    table.vocab.assign(uniq.begin(), uniq.end());
    const Index rows = static_cast<Index>(table.vocab.size()) + 1;  // + OOV row
    table.matrix.resize(rows, hidden);
    Rng rng(derive_seed(seed, "entity-table"));
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < hidden; ++c) table.matrix(r, c) = static_cast<float>(rng.gaussian()) * 0.02f;
    return table;
}

Index table_lookup(const EntityEmbeddingTable& table, std::string_view entity) {
    const std::string n = normalize_text(entity);
    const auto it = std::lower_bound(table.vocab.begin(), table.vocab.end(), n);
    if (it != table.vocab.end() && *it == n) return static_cast<Index>(it - table.vocab.begin());
    return table.oov_index();
}

Vec embed_entity(const EntityEmbeddingTable& table, const std::string& entity) {
    if (table.matrix.size() == 0) throw ContractError("entity table: not initialized");
    return table.matrix.row(table_lookup(table, entity)).transpose();
}

Vec project_entity(const Vec& ent, const Affine& proj) { return affine_apply(proj, ent); }

const char* encoder_kind_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::ContextText: return "context-text";
        case EncoderKind::Image: return "image";
        case EncoderKind::HarmText: return "harm-text";
    }
    return "?";
}

Vec Encoder::encode_text(const std::string&) const {
    throw ContractError("encoder '" + name() + "' (" + encoder_kind_name(kind()) + ") cannot encode text");
}

Vec Encoder::encode_image(const std::string&) const {
    throw ContractError("encoder '" + name() + "' (" + encoder_kind_name(kind()) + ") cannot encode images");
}

Vec Encoder::encode_pair(const std::string&, const std::string&) const {
    throw ContractError("encoder '" + name() + "' (" + encoder_kind_name(kind()) + ") cannot encode text pairs");
}

Vec encode_context(const Encoder& h, const std::string& text) {
    if (h.kind() != EncoderKind::ContextText) throw ContractError("encode_context: handle kind mismatch");
    return h.encode_text(text);
}

Vec encode_image(const Encoder& h, const std::string& image_ref) {
    if (h.kind() != EncoderKind::Image) throw ContractError("encode_image: handle kind mismatch");
    return h.encode_image(image_ref);
}

Vec encode_harm_text(const Encoder& h, const std::string& ocr_text, const std::string& entity) {
    if (h.kind() != EncoderKind::HarmText) throw ContractError("encode_harm_text: handle kind mismatch");
    return h.encode_pair(ocr_text, entity);
}

namespace {

// Unit vector seeded by a content hash. Exact float arithmetic plus IEEE
// sqrt keeps outputs bitwise stable across platforms.
Vec hashed_unit_vector(uint64_t seed, Index dim) {
    Rng rng(seed);
    Vec v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = rng.uniform_signed();
    double sq = 0.0;
    for (Index i = 0; i < dim; ++i) sq += static_cast<double>(v(i)) * static_cast<double>(v(i));
    if (sq == 0.0) return Vec::Zero(dim);
    const auto inv = static_cast<float>(1.0 / std::sqrt(sq));
    for (Index i = 0; i < dim; ++i) v(i) *= inv;
    return v;
}

class StubEncoder final : public Encoder {
  public:
    StubEncoder(EncoderKind kind, Index dim, uint64_t seed)
        : Encoder("stub", kind, dim, /*deterministic=*/true), seed_(seed) {}

    Vec encode_text(const std::string& text) const override {
        if (kind() != EncoderKind::ContextText) return Encoder::encode_text(text);
        const std::string norm = normalize_text(text);
        if (norm.empty()) return Vec::Zero(output_dim());
        return hashed_unit_vector(mix("ctx:" + norm), output_dim());
    }

    Vec encode_image(const std::string& image_ref) const override {
        if (kind() != EncoderKind::Image) return Encoder::encode_image(image_ref);
        std::ifstream in(image_ref, std::ios::binary);
        if (!in) throw InputError("cannot read image file: " + image_ref);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        return hashed_unit_vector(mix("img:" + bytes.str()), output_dim());
    }

    Vec encode_pair(const std::string& ocr_text, const std::string& entity) const override {
        if (kind() != EncoderKind::HarmText) return Encoder::encode_pair(ocr_text, entity);
        const std::string no = normalize_text(ocr_text);
        const std::string ne = normalize_text(entity);
        if (no.empty() && ne.empty()) return Vec::Zero(output_dim());
        return hashed_unit_vector(mix("harm:" + no + kHarmTextSeparator + ne), output_dim());
    }

  private:
    uint64_t mix(const std::string& payload) const { return seed_ ^ fnv1a64(payload); }

    uint64_t seed_;
};

class ZeroEncoder final : public Encoder {
  public:
    ZeroEncoder(EncoderKind kind, Index dim) : Encoder("zero", kind, dim, /*deterministic=*/true) {}

    Vec encode_text(const std::string& text) const override {
        if (kind() != EncoderKind::ContextText) return Encoder::encode_text(text);
        return Vec::Zero(output_dim());
    }
    Vec encode_image(const std::string& image_ref) const override {
        if (kind() != EncoderKind::Image) return Encoder::encode_image(image_ref);
        return Vec::Zero(output_dim());
    }
    Vec encode_pair(const std::string& a, const std::string& b) const override {
        if (kind() != EncoderKind::HarmText) return Encoder::encode_pair(a, b);
        return Vec::Zero(output_dim());
    }
};

}  // namespace

std::unique_ptr<Encoder> make_encoder(const std::string& adapter, EncoderKind kind, Index output_dim,
                                      uint64_t seed) {
    if (adapter == "stub") return std::make_unique<StubEncoder>(kind, output_dim, seed);
    if (adapter == "zero") return std::make_unique<ZeroEncoder>(kind, output_dim);
    throw ConfigError("unknown encoder adapter '" + adapter + "' for kind " + encoder_kind_name(kind));
}

EncoderSet make_encoder_set(const EncoderNames& names, Index context_dim, Index image_dim, Index harm_dim,
                            uint64_t seed) {
    EncoderSet set;
    set.context = make_encoder(names.context, EncoderKind::ContextText, context_dim, derive_seed(seed, "enc:context"));
    set.image = make_encoder(names.image, EncoderKind::Image, image_dim, derive_seed(seed, "enc:image"));
    set.harm = make_encoder(names.harm_text, EncoderKind::HarmText, harm_dim, derive_seed(seed, "enc:harm"));
    return set;
}

}  // namespace disarm::encoders
