#include "disarm/model.hpp"

namespace disarm::model {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::CE: return "CE";
        case Variant::EH: return "EH";
        case Variant::CI: return "CI";
        case Variant::CE_EH: return "CE+EH";
        case Variant::CE_CI_Concat: return "CE+CI-concat";
        case Variant::CE_CI_Mmlrbp: return "CE+CI-mmlrbp";
        case Variant::EH_CI_Concat: return "EH+CI-concat";
        case Variant::EH_CI_Mmlrbp: return "EH+CI-mmlrbp";
        case Variant::Full: return "full";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : kAllVariants)
        if (name == variant_name(v)) return v;
    throw ConfigError("unknown ablation variant '" + name + "'");
}

Plan plan_for(Variant v) {
    switch (v) {
        case Variant::CE: return {true, TextStage::Entity, FuseStage::TextOnly};
        case Variant::EH: return {false, TextStage::Harm, FuseStage::TextOnly};
        case Variant::CI: return {false, TextStage::None, FuseStage::ImageOnly};
        case Variant::CE_EH: return {true, TextStage::ContextText, FuseStage::TextOnly};
        case Variant::CE_CI_Concat: return {true, TextStage::Entity, FuseStage::Concat};
        case Variant::CE_CI_Mmlrbp: return {true, TextStage::Entity, FuseStage::Mmlrbp};
        case Variant::EH_CI_Concat: return {false, TextStage::Harm, FuseStage::Concat};
        case Variant::EH_CI_Mmlrbp: return {false, TextStage::Harm, FuseStage::Mmlrbp};
        case Variant::Full: return {true, TextStage::ContextText, FuseStage::Mmlrbp};
    }
    return {};
}

Index text_stage_dim(Variant v, const ModelDims& dims) {
    switch (plan_for(v).text) {
        case TextStage::None: return 0;
        case TextStage::Entity: return dims.embed_dim;
        case TextStage::Harm: return dims.harm_dim;
        case TextStage::ContextText: return dims.embed_dim;
    }
    return 0;
}

Index rep_dim(Variant v, const ModelDims& dims) {
    switch (plan_for(v).fuse) {
        case FuseStage::TextOnly: return text_stage_dim(v, dims);
        case FuseStage::ImageOnly: return dims.embed_dim;
        case FuseStage::Concat: return dims.embed_dim;
        case FuseStage::Mmlrbp: return dims.embed_dim;
    }
    return 0;
}

Features compute_features(const data::MemeRecord& meme, const std::string& entity, const ModelParams& params,
                          const encoders::EncoderSet& enc) {
    Features f;
    f.entity_row = encoders::table_lookup(params.table, entity);
    const std::string context_text = meme.context ? meme.context->combined_text() : "";
    f.c = encoders::encode_context(*enc.context, context_text);
    f.o_ent = encoders::encode_harm_text(*enc.harm, meme.ocr_text, entity);
    f.c_img = encoders::encode_image(*enc.image, meme.image_ref);
    if (f.c.size() != params.dims.embed_dim || f.c_img.size() != params.dims.embed_dim ||
        f.o_ent.size() != params.dims.harm_dim)
        throw DimensionError("compute_features: encoder output dimensions do not match model dims");
    return f;
}

ForwardTrace forward(const data::MemeRecord& meme, const std::string& entity, const ModelParams& params,
                     const encoders::EncoderSet& enc) {
    if (params.variant != Variant::Full) throw ContractError("forward: ForwardTrace requires the full model");
    const Features f = compute_features(meme, entity, params, enc);
    const Activations a = variant_forward(params, f);
    ForwardTrace t;
    t.e = a.e;
    t.c = f.c;
    t.c_ent = a.c_ent;
    t.o_ent = f.o_ent;
    t.c_txt = a.text;
    t.c_img = f.c_img;
    t.c_mm = a.rep;
    t.logit = a.logit;
    t.prob = a.prob;
    t.decision = a.prob >= params.threshold;
    if (!all_finite(t.e) || !all_finite(t.c_ent) || !all_finite(t.c_txt) || !all_finite(t.c_mm) ||
        !std::isfinite(t.logit) || !std::isfinite(t.prob))
        throw ContractError("forward: non-finite intermediate for meme " + meme.id);
    return t;
}

float bce_loss(const Vec& probs, const Vec& labels) {
    if (probs.size() != labels.size())
        throw DimensionError("bce_loss: " + std::to_string(probs.size()) + " probabilities vs " +
                             std::to_string(labels.size()) + " labels");
    if (probs.size() == 0) throw ContractError("bce_loss: empty input");
    constexpr float kEps = 1e-7f;
    double sum = 0.0;
    for (Index i = 0; i < probs.size(); ++i) {
        const float p = std::min(1.0f - kEps, std::max(kEps, probs(i)));
        const float y = labels(i);
        sum -= static_cast<double>(y) * std::log(static_cast<double>(p)) +
               (1.0 - static_cast<double>(y)) * std::log(1.0 - static_cast<double>(p));
    }
    return static_cast<float>(sum / static_cast<double>(probs.size()));
}

namespace {

Mat gaussian(Index rows, Index cols, uint64_t seed) {
    Rng rng(seed);
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(rng.gaussian()) * 0.02f;
    return m;
}

Affine gaussian_affine(Index out, Index in, uint64_t seed) {
    return {gaussian(out, in, seed), Vec::Zero(out)};
}

}  // namespace

ModelParams init_model_params(Variant variant, const ModelDims& dims, const std::vector<std::string>& vocab,
                              uint64_t seed, float threshold, bool ct_tanh) {
    if (dims.fusion_rank > dims.embed_dim)
        throw ContractError("init_model_params: fusion rank exceeds the low-rank bound");
    const Plan plan = plan_for(variant);
    ModelParams p;
    p.variant = variant;
    p.dims = dims;
    p.ct_tanh = ct_tanh;
    p.threshold = threshold;

    if (plan.entity_stage) {
        p.table = encoders::init_entity_table(vocab, dims.entity_dim, derive_seed(seed, "table"));
        p.entity_proj = gaussian_affine(dims.embed_dim, dims.entity_dim, derive_seed(seed, "entity_proj"));
        p.ce = fusion::init_fusion_params({dims.embed_dim, dims.embed_dim, dims.fusion_rank, dims.embed_dim},
                                          /*with_bias=*/true, derive_seed(seed, "ce"));
    }
    if (plan.text == TextStage::ContextText)
        p.ct = gaussian_affine(dims.embed_dim, dims.concat_dim(), derive_seed(seed, "ct"));

    const Index tdim = text_stage_dim(variant, dims);
    if (plan.fuse == FuseStage::Concat)
        p.concat_fuse = gaussian_affine(dims.embed_dim, tdim + dims.embed_dim, derive_seed(seed, "concat_fuse"));
    if (plan.fuse == FuseStage::Mmlrbp) {
        p.cmm_jp = fusion::init_joint_projection(tdim, dims.embed_dim, dims.embed_dim, derive_seed(seed, "cmm_jp"));
        p.cmm = fusion::init_fusion_params({dims.embed_dim, dims.embed_dim, dims.fusion_rank, dims.embed_dim},
                                           /*with_bias=*/false, derive_seed(seed, "cmm"));
    }
    p.head1 = gaussian_affine(dims.head_hidden, rep_dim(variant, dims), derive_seed(seed, "head1"));
    p.head2 = gaussian_affine(1, dims.head_hidden, derive_seed(seed, "head2"));
    return p;
}

}  // namespace disarm::model
