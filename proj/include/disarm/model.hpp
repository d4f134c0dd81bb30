#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "disarm/dataset.hpp"
#include "disarm/encoders.hpp"
#include "disarm/fusion.hpp"

// The DISARM forward pass: entity embedding -> 512-d projection -> fusion
// with the encoded context (contextualized-entity) -> concatenation with the
// harm-text encoding projected to 512 (contextualized-text) -> joint-space
// fusion with the image encoding (contextualized-multimodal) -> two-layer
// head with a sigmoid output, trained with binary cross-entropy.
//
// Ablation variants reroute the same stages; the full model is one plan in
// the same graph, so every variant shares a single backward implementation.

namespace disarm::model {

using fusion::FusionParamsT;
using fusion::JointProjectionT;

struct ModelDims {
    Index entity_dim = 300;   // embedding table width H
    Index embed_dim = 512;    // e, c, c_ent, c_txt, c_img, c_mm
    Index harm_dim = 768;     // o_ent
    Index fusion_rank = 256;  // d of both fusion blocks
    Index head_hidden = 256;

    Index concat_dim() const { return harm_dim + embed_dim; }
};

enum class Variant {
    CE,
    EH,
    CI,
    CE_EH,
    CE_CI_Concat,
    CE_CI_Mmlrbp,
    EH_CI_Concat,
    EH_CI_Mmlrbp,
    Full,
};

// Table order used everywhere a variant list is reported.
constexpr std::array<Variant, 9> kAllVariants = {
    Variant::CE,           Variant::EH,           Variant::CI,
    Variant::CE_EH,        Variant::CE_CI_Concat, Variant::CE_CI_Mmlrbp,
    Variant::EH_CI_Concat, Variant::EH_CI_Mmlrbp, Variant::Full,
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // ConfigError on unknown

enum class TextStage { None, Entity, Harm, ContextText };
enum class FuseStage { TextOnly, ImageOnly, Concat, Mmlrbp };

struct Plan {
    bool entity_stage = false;  // builds c_ent
    TextStage text = TextStage::None;
    FuseStage fuse = FuseStage::TextOnly;
};

Plan plan_for(Variant v);
Index text_stage_dim(Variant v, const ModelDims& dims);
Index rep_dim(Variant v, const ModelDims& dims);

template <class S>
struct ModelParamsT {
    Variant variant = Variant::Full;
    ModelDims dims;
    encoders::EntityTableT<S> table;
    AffineT<S> entity_proj;          // entity_dim -> embed_dim
    FusionParamsT<S> ce;             // embed x embed, rank, out embed, bias
    AffineT<S> ct;                   // (harm + embed) -> embed
    AffineT<S> concat_fuse;          // concat variants: (text + embed) -> embed
    JointProjectionT<S> cmm_jp;      // text -> joint(embed), embed -> joint(embed)
    FusionParamsT<S> cmm;            // embed x embed, rank, out embed, no bias
    AffineT<S> head1;                // rep -> head_hidden
    AffineT<S> head2;                // head_hidden -> 1
    bool ct_tanh = true;             // strict-equation mode turns the CT tanh off
    float threshold = 0.5f;
};

using ModelParams = ModelParamsT<float>;

// Encoder outputs plus the resolved embedding row for one (meme, entity).
template <class S>
struct FeaturesT {
    Index entity_row = -1;
    VecT<S> c;      // context text encoding
    VecT<S> o_ent;  // harm-text encoding
    VecT<S> c_img;  // image encoding
};

using Features = FeaturesT<float>;

template <class S>
struct ActivationsT {
    VecT<S> ent, e;
    fusion::LrbpCache<S> ce_cache;
    VecT<S> c_ent;
    VecT<S> concat_in;  // [o_ent; c_ent] for the CT stage
    VecT<S> ct_pre;     // before the optional tanh
    VecT<S> text;       // text-stage output
    VecT<S> fuse_in;    // [text; c_img] for concat fusion
    VecT<S> fuse_pre;
    fusion::MmlrbpCache<S> cmm_cache;
    VecT<S> rep;  // head input
    VecT<S> q, hq;
    S logit = S(0);
    S prob = S(0);
};

using Activations = ActivationsT<float>;

// Gradients share the parameter layout, so ModelParamsT doubles as the
// gradient and optimizer-moment container.
template <class S>
using ModelGradsT = ModelParamsT<S>;

using ModelGrads = ModelGradsT<float>;

struct TensorRef {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    float* data = nullptr;  // Eigen storage, column-major
    bool decay = false;     // weight decay applies (dense weights only)
};

template <class S>
struct TensorRefT {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    S* data = nullptr;
    bool decay = false;
};

// Every allocated block, in a fixed order shared by params, grads and
// optimizer state. The embedding table and all biases are decay-exempt.
template <class S>
std::vector<TensorRefT<S>> collect_tensors(ModelParamsT<S>& p) {
    std::vector<TensorRefT<S>> out;
    auto add_mat = [&](const char* name, MatT<S>& m, bool decay) {
        if (m.size() > 0) out.push_back({name, m.rows(), m.cols(), m.data(), decay});
    };
    auto add_vec = [&](const char* name, VecT<S>& v) {
        if (v.size() > 0) out.push_back({name, v.size(), 1, v.data(), false});
    };
    add_mat("entity_table", p.table.matrix, false);
    add_mat("entity_proj_w", p.entity_proj.W, true);
    add_vec("entity_proj_b", p.entity_proj.b);
    add_mat("ce_u", p.ce.U, true);
    add_mat("ce_v", p.ce.V, true);
    add_mat("ce_p", p.ce.P, true);
    if (p.ce.b && p.ce.b->size() > 0) out.push_back({"ce_b", p.ce.b->size(), 1, p.ce.b->data(), false});
    add_mat("ct_w", p.ct.W, true);
    add_vec("ct_b", p.ct.b);
    add_mat("concat_fuse_w", p.concat_fuse.W, true);
    add_vec("concat_fuse_b", p.concat_fuse.b);
    add_mat("cmm_ax", p.cmm_jp.ax, true);
    add_mat("cmm_ay", p.cmm_jp.ay, true);
    add_mat("cmm_u", p.cmm.U, true);
    add_mat("cmm_v", p.cmm.V, true);
    add_mat("cmm_p", p.cmm.P, true);
    add_mat("head1_w", p.head1.W, true);
    add_vec("head1_b", p.head1.b);
    add_mat("head2_w", p.head2.W, true);
    add_vec("head2_b", p.head2.b);
    return out;
}

// Read access to the same refs; the serializer and tests only read through
// these pointers.
template <class S>
std::vector<TensorRefT<S>> collect_tensors(const ModelParamsT<S>& p) {
    return collect_tensors(const_cast<ModelParamsT<S>&>(p));
}

// Same-shape zero copy; used for gradients and Adam moments.
template <class S>
ModelGradsT<S> zero_like(const ModelParamsT<S>& p) {
    ModelGradsT<S> g = p;
    auto refs = collect_tensors(g);
    for (auto& r : refs) std::fill(r.data, r.data + r.rows * r.cols, S(0));
    return g;
}

template <class To, class From>
ModelParamsT<To> cast_model(const ModelParamsT<From>& p) {
    ModelParamsT<To> out;
    out.variant = p.variant;
    out.dims = p.dims;
    out.table.vocab = p.table.vocab;
    out.table.matrix = cast_mat<To>(p.table.matrix);
    out.entity_proj = cast_affine<To>(p.entity_proj);
    out.ce = fusion::cast_fusion<To>(p.ce);
    out.ct = cast_affine<To>(p.ct);
    out.concat_fuse = cast_affine<To>(p.concat_fuse);
    out.cmm_jp = fusion::cast_joint<To>(p.cmm_jp);
    out.cmm = fusion::cast_fusion<To>(p.cmm);
    out.head1 = cast_affine<To>(p.head1);
    out.head2 = cast_affine<To>(p.head2);
    out.ct_tanh = p.ct_tanh;
    out.threshold = p.threshold;
    return out;
}

template <class To, class From>
FeaturesT<To> cast_features(const FeaturesT<From>& f) {
    return {f.entity_row, cast_vec<To>(f.c), cast_vec<To>(f.o_ent), cast_vec<To>(f.c_img)};
}

// Eq-5-style block: P1' tanh(U1' e o V1' c) + b.
template <class S>
VecT<S> contextualized_entity(const VecT<S>& e, const VecT<S>& c, const FusionParamsT<S>& ce_block) {
    return fusion::lrbp(e, c, ce_block);
}

// tanh(W [o_ent; c_ent] + b); the tanh switches off in strict-equation mode.
template <class S>
VecT<S> contextualized_text(const VecT<S>& o_ent, const VecT<S>& c_ent, const AffineT<S>& concat_proj,
                            bool with_tanh = true) {
    if (o_ent.size() + c_ent.size() != concat_proj.W.cols())
        throw DimensionError("contextualized_text: concat length " +
                             std::to_string(o_ent.size() + c_ent.size()) + " does not match projection input " +
                             std::to_string(concat_proj.W.cols()));
    VecT<S> z(o_ent.size() + c_ent.size());
    z << o_ent, c_ent;
    VecT<S> a = affine_apply(concat_proj, z);
    return with_tanh ? VecT<S>(a.array().tanh()) : a;
}

// P2' tanh(U2' (A_x c_txt) o V2' (A_y c_img)); bias-free.
template <class S>
VecT<S> contextualized_multimodal(const VecT<S>& c_txt, const VecT<S>& c_img, const JointProjectionT<S>& jp,
                                  const FusionParamsT<S>& cmm_block) {
    return fusion::mmlrbp(c_txt, c_img, jp, cmm_block);
}

template <class S>
S sigmoid(S z) {
    return S(1) / (S(1) + std::exp(-z));
}

// prob = sigmoid(w2' tanh(W1 c_mm + b1) + b2)
template <class S>
std::pair<S, S> classify(const VecT<S>& rep, const AffineT<S>& head1, const AffineT<S>& head2) {
    const VecT<S> hq = affine_apply(head1, rep).array().tanh();
    const S logit = affine_apply(head2, VecT<S>(hq))(0);
    return {logit, sigmoid(logit)};
}

template <class S>
ActivationsT<S> variant_forward(const ModelParamsT<S>& p, const FeaturesT<S>& f) {
    const Plan plan = plan_for(p.variant);
    ActivationsT<S> a;

    if (plan.entity_stage) {
        if (f.entity_row < 0 || f.entity_row >= p.table.matrix.rows())
            throw ContractError("forward: entity row out of range");
        a.ent = p.table.matrix.row(f.entity_row).transpose();
        a.e = affine_apply(p.entity_proj, a.ent);
        a.c_ent = fusion::lrbp_forward(a.e, f.c, p.ce, &a.ce_cache);
    }

    switch (plan.text) {
        case TextStage::None: break;
        case TextStage::Entity: a.text = a.c_ent; break;
        case TextStage::Harm: a.text = f.o_ent; break;
        case TextStage::ContextText: {
            a.concat_in.resize(f.o_ent.size() + a.c_ent.size());
            a.concat_in << f.o_ent, a.c_ent;
            a.ct_pre = affine_apply(p.ct, a.concat_in);
            a.text = p.ct_tanh ? VecT<S>(a.ct_pre.array().tanh()) : a.ct_pre;
            break;
        }
    }

    switch (plan.fuse) {
        case FuseStage::TextOnly: a.rep = a.text; break;
        case FuseStage::ImageOnly: a.rep = f.c_img; break;
        case FuseStage::Concat: {
            a.fuse_in.resize(a.text.size() + f.c_img.size());
            a.fuse_in << a.text, f.c_img;
            a.fuse_pre = affine_apply(p.concat_fuse, a.fuse_in);
            a.rep = a.fuse_pre.array().tanh();
            break;
        }
        case FuseStage::Mmlrbp:
            a.rep = fusion::mmlrbp_forward(a.text, f.c_img, p.cmm_jp, p.cmm, &a.cmm_cache);
            break;
    }

    a.q = affine_apply(p.head1, a.rep);
    a.hq = a.q.array().tanh();
    a.logit = affine_apply(p.head2, a.hq)(0);
    a.prob = sigmoid(a.logit);
    return a;
}

// Accumulates parameter gradients for one instance given dL/dlogit.
template <class S>
void variant_backward(const ModelParamsT<S>& p, const FeaturesT<S>& f, const ActivationsT<S>& a, S dlogit,
                      ModelGradsT<S>& g) {
    const Plan plan = plan_for(p.variant);

    VecT<S> dl(1);
    dl(0) = dlogit;
    VecT<S> dhq = affine_backward(p.head2, a.hq, dl, g.head2.W, g.head2.b);
    VecT<S> dq = dhq.cwiseProduct(VecT<S>::Ones(a.hq.size()) - a.hq.cwiseProduct(a.hq));
    VecT<S> drep = affine_backward(p.head1, a.rep, dq, g.head1.W, g.head1.b);

    VecT<S> dtext;
    switch (plan.fuse) {
        case FuseStage::TextOnly: dtext = drep; break;
        case FuseStage::ImageOnly: return;  // image features are fixed inputs
        case FuseStage::Concat: {
            const VecT<S> dpre =
                drep.cwiseProduct(VecT<S>::Ones(a.rep.size()) - a.rep.cwiseProduct(a.rep));
            const VecT<S> dfuse_in = affine_backward(p.concat_fuse, a.fuse_in, dpre, g.concat_fuse.W, g.concat_fuse.b);
            dtext = dfuse_in.head(a.text.size());
            break;
        }
        case FuseStage::Mmlrbp: {
            fusion::FusionGrads<S> fg{g.cmm.U, g.cmm.V, g.cmm.P, {}};
            fusion::JointProjectionGrads<S> jg{g.cmm_jp.ax, g.cmm_jp.ay};
            dtext = VecT<S>::Zero(a.text.size());
            fusion::mmlrbp_backward(a.text, f.c_img, p.cmm_jp, p.cmm, a.cmm_cache, drep, fg, jg, &dtext,
                                    static_cast<VecT<S>*>(nullptr));
            g.cmm.U = std::move(fg.dU);
            g.cmm.V = std::move(fg.dV);
            g.cmm.P = std::move(fg.dP);
            g.cmm_jp.ax = std::move(jg.dax);
            g.cmm_jp.ay = std::move(jg.day);
            break;
        }
    }

    VecT<S> dc_ent;
    switch (plan.text) {
        case TextStage::None: return;
        case TextStage::Harm: return;  // o_ent is a fixed input
        case TextStage::Entity: dc_ent = dtext; break;
        case TextStage::ContextText: {
            VecT<S> da =
                p.ct_tanh ? VecT<S>(dtext.cwiseProduct(VecT<S>::Ones(a.text.size()) - a.text.cwiseProduct(a.text)))
                          : dtext;
            const VecT<S> dz = affine_backward(p.ct, a.concat_in, da, g.ct.W, g.ct.b);
            dc_ent = dz.tail(a.c_ent.size());
            break;
        }
    }

    if (!plan.entity_stage) return;
    fusion::FusionGrads<S> ceg{g.ce.U, g.ce.V, g.ce.P, g.ce.b ? *g.ce.b : VecT<S>()};
    VecT<S> de = VecT<S>::Zero(a.e.size());
    fusion::lrbp_backward(a.e, f.c, p.ce, a.ce_cache, dc_ent, ceg, &de, static_cast<VecT<S>*>(nullptr));
    g.ce.U = std::move(ceg.dU);
    g.ce.V = std::move(ceg.dV);
    g.ce.P = std::move(ceg.dP);
    if (g.ce.b) *g.ce.b = std::move(ceg.db);
    const VecT<S> dent = affine_backward(p.entity_proj, a.ent, de, g.entity_proj.W, g.entity_proj.b);
    g.table.matrix.row(f.entity_row) += dent.transpose();
}

// Intermediates of the full composition for one (meme, entity) pair.
struct ForwardTrace {
    Vec e;
    Vec c;
    Vec c_ent;
    Vec o_ent;
    Vec c_txt;
    Vec c_img;
    Vec c_mm;
    float logit = 0.0f;
    float prob = 0.0f;
    bool decision = false;
};

Features compute_features(const data::MemeRecord& meme, const std::string& entity, const ModelParams& params,
                          const encoders::EncoderSet& enc);

ForwardTrace forward(const data::MemeRecord& meme, const std::string& entity, const ModelParams& params,
                     const encoders::EncoderSet& enc);

// Mean of -[y log p + (1-y) log(1-p)] with probabilities clamped at 1e-7.
float bce_loss(const Vec& probs, const Vec& labels);

ModelParams init_model_params(Variant variant, const ModelDims& dims, const std::vector<std::string>& vocab,
                              uint64_t seed, float threshold = 0.5f, bool ct_tanh = true);

}  // namespace disarm::model
