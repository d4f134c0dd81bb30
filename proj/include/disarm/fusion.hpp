#pragma once

#include <optional>
#include <type_traits>
#include <string>

#include "disarm/linalg.hpp"

// Low-rank bilinear scoring and pooling. A bilinear form x' W y with
// W = U V' factors into 1'(U'x o V'y); adding an output projection and a
// tanh around the Hadamard product gives the pooled vector form
//   f = P' tanh(U'x o V'y) [+ b]
// The multimodal variant first maps both inputs into a joint space with
// learned linear projections and is bias-free.

namespace disarm::fusion {

struct FusionDims {
    Index in_x = 0;
    Index in_y = 0;
    Index rank = 0;  // d, bounded by min(in_x, in_y)
    Index out = 0;
};

// One pooling block. Matrices are stored in the [input x rank] / [rank x out]
// orientation and applied transposed, so U'x, V'y and P't conform.
template <class S>
struct FusionParamsT {
    MatT<S> U;                   // in_x x rank
    MatT<S> V;                   // in_y x rank
    MatT<S> P;                   // rank x out
    std::optional<VecT<S>> b;    // out; present only for bias-bearing blocks

    FusionDims dims() const { return {U.rows(), V.rows(), U.cols(), P.cols()}; }
    bool empty() const { return U.size() == 0; }
};

// Joint-space projections applied before the bias-free block: x_mm = A_x' x.
// Linear (no bias): a zero input must map to the zero joint vector.
template <class S>
struct JointProjectionT {
    MatT<S> ax;  // raw_x x joint
    MatT<S> ay;  // raw_y x joint

    Index joint_dim() const { return ax.cols(); }
    bool empty() const { return ax.size() == 0; }
};

using FusionParams = FusionParamsT<float>;
using JointProjection = JointProjectionT<float>;

template <class S>
void validate_fusion_params(const FusionParamsT<S>& p, bool require_bias) {
    const FusionDims d = p.dims();
    if (p.V.cols() != d.rank || p.P.rows() != d.rank)
        throw DimensionError("fusion block: U/V/P rank dimensions disagree");
    if (d.rank > std::min(d.in_x, d.in_y))
        throw ContractError("fusion block: rank " + std::to_string(d.rank) + " exceeds low-rank bound min(" +
                            std::to_string(d.in_x) + ", " + std::to_string(d.in_y) + ")");
    if (require_bias && !p.b)
        throw ContractError("fusion block: bias required but absent");
    if (!require_bias && p.b)
        throw ContractError("fusion block: bias present in a bias-free block");
    if (p.b && p.b->size() != d.out)
        throw DimensionError("fusion block: bias length does not match output dimension");
    if (!all_finite(p.U) || !all_finite(p.V) || !all_finite(p.P) || (p.b && !all_finite(*p.b)))
        throw ContractError("fusion block: non-finite parameter values");
}

// x' W y, the dense reference for the factored forms.
template <class S>
S dense_bilinear_score(const VecT<S>& x, const VecT<S>& y, const MatT<S>& w) {
    if (x.size() != w.rows() || y.size() != w.cols())
        throw DimensionError("dense bilinear: x/y do not conform to W [" + std::to_string(w.rows()) + "x" +
                             std::to_string(w.cols()) + "]");
    return x.dot(w * y);
}

// 1'(U'x o V'y); equals dense_bilinear_score(x, y, U V').
template <class S>
S hadamard_lrb_score(const VecT<S>& x, const VecT<S>& y, const MatT<S>& u, const MatT<S>& v) {
    if (u.rows() != x.size() || v.rows() != y.size())
        throw DimensionError("hadamard lrb: factor rows do not match input lengths");
    if (u.cols() != v.cols()) throw DimensionError("hadamard lrb: U and V rank differ");
    if (u.cols() > std::min(x.size(), y.size()))
        throw ContractError("hadamard lrb: rank exceeds low-rank bound");
    return ((u.transpose() * x).cwiseProduct(v.transpose() * y)).sum();
}

template <class S>
struct LrbpCache {
    VecT<S> ux;  // U'x
    VecT<S> vy;  // V'y
    VecT<S> t;   // tanh(ux o vy)
};

template <class S>
VecT<S> lrbp_forward(const VecT<S>& x, const VecT<S>& y, const FusionParamsT<S>& p,
                     std::type_identity_t<LrbpCache<S>>* cache = nullptr) {
    if (x.size() != p.U.rows() || y.size() != p.V.rows())
        throw DimensionError("lrbp: input lengths do not match U/V rows");
    LrbpCache<S> local;
    LrbpCache<S>& c = cache ? *cache : local;
    c.ux = p.U.transpose() * x;
    c.vy = p.V.transpose() * y;
    c.t = c.ux.cwiseProduct(c.vy).array().tanh();
    VecT<S> out = p.P.transpose() * c.t;
    if (p.b) out += *p.b;
    return out;
}

// P' tanh(U'x o V'y) + b. Bias is part of the contract for this form.
template <class S>
VecT<S> lrbp(const VecT<S>& x, const VecT<S>& y, const FusionParamsT<S>& p) {
    validate_fusion_params(p, /*require_bias=*/true);
    return lrbp_forward(x, y, p, nullptr);
}

template <class S>
struct FusionGrads {
    MatT<S> dU, dV, dP;
    VecT<S> db;  // sized only when the block carries a bias
};

template <class S>
FusionGrads<S> zero_fusion_grads(const FusionParamsT<S>& p) {
    FusionGrads<S> g;
    g.dU = MatT<S>::Zero(p.U.rows(), p.U.cols());
    g.dV = MatT<S>::Zero(p.V.rows(), p.V.cols());
    g.dP = MatT<S>::Zero(p.P.rows(), p.P.cols());
    if (p.b) g.db = VecT<S>::Zero(p.b->size());
    return g;
}

// Gradients of the pooled output wrt parameters and inputs, given the
// upstream gradient dout. dx/dy accumulate when non-null.
template <class S>
void lrbp_backward(const VecT<S>& x, const VecT<S>& y, const FusionParamsT<S>& p, const LrbpCache<S>& cache,
                   const VecT<S>& dout, FusionGrads<S>& g, VecT<S>* dx, VecT<S>* dy) {
    const VecT<S> dt = p.P * dout;
    g.dP.noalias() += cache.t * dout.transpose();
    if (p.b) g.db += dout;
    const VecT<S> dh = dt.cwiseProduct((VecT<S>::Ones(cache.t.size()) - cache.t.cwiseProduct(cache.t)));
    const VecT<S> dux = dh.cwiseProduct(cache.vy);
    const VecT<S> dvy = dh.cwiseProduct(cache.ux);
    g.dU.noalias() += x * dux.transpose();
    g.dV.noalias() += y * dvy.transpose();
    if (dx) *dx += p.U * dux;
    if (dy) *dy += p.V * dvy;
}

template <class S>
struct MmlrbpCache {
    VecT<S> xj;  // A_x' x
    VecT<S> yj;  // A_y' y
    LrbpCache<S> pool;
};

template <class S>
void validate_joint_projection(const JointProjectionT<S>& jp, const FusionParamsT<S>& p) {
    if (jp.ax.cols() != jp.ay.cols()) throw DimensionError("joint projection: output dimensions differ");
    if (jp.ax.cols() != p.U.rows() || jp.ay.cols() != p.V.rows())
        throw DimensionError("joint projection: joint dimension does not match fusion block inputs");
}

template <class S>
VecT<S> mmlrbp_forward(const VecT<S>& x, const VecT<S>& y, const JointProjectionT<S>& jp,
                       const FusionParamsT<S>& p, std::type_identity_t<MmlrbpCache<S>>* cache = nullptr) {
    if (x.size() != jp.ax.rows() || y.size() != jp.ay.rows())
        throw DimensionError("mmlrbp: raw input lengths do not match joint projections");
    validate_joint_projection(jp, p);
    MmlrbpCache<S> local;
    MmlrbpCache<S>& c = cache ? *cache : local;
    c.xj = jp.ax.transpose() * x;
    c.yj = jp.ay.transpose() * y;
    return lrbp_forward(c.xj, c.yj, p, &c.pool);
}

// P' tanh(U'(A_x x) o V'(A_y y)); bias-free by construction.
template <class S>
VecT<S> mmlrbp(const VecT<S>& x, const VecT<S>& y, const JointProjectionT<S>& jp, const FusionParamsT<S>& p) {
    validate_fusion_params(p, /*require_bias=*/false);
    return mmlrbp_forward(x, y, jp, p, nullptr);
}

template <class S>
struct JointProjectionGrads {
    MatT<S> dax, day;
};

template <class S>
JointProjectionGrads<S> zero_joint_grads(const JointProjectionT<S>& jp) {
    return {MatT<S>::Zero(jp.ax.rows(), jp.ax.cols()), MatT<S>::Zero(jp.ay.rows(), jp.ay.cols())};
}

template <class S>
void mmlrbp_backward(const VecT<S>& x, const VecT<S>& y, const JointProjectionT<S>& jp, const FusionParamsT<S>& p,
                     const MmlrbpCache<S>& cache, const VecT<S>& dout, FusionGrads<S>& g,
                     JointProjectionGrads<S>& jg, VecT<S>* dx, VecT<S>* dy) {
    VecT<S> dxj = VecT<S>::Zero(cache.xj.size());
    VecT<S> dyj = VecT<S>::Zero(cache.yj.size());
    lrbp_backward(cache.xj, cache.yj, p, cache.pool, dout, g, &dxj, &dyj);
    jg.dax.noalias() += x * dxj.transpose();
    jg.day.noalias() += y * dyj.transpose();
    if (dx) *dx += jp.ax * dxj;
    if (dy) *dy += jp.ay * dyj;
}

// Weights ~ N(0, 0.02^2), bias (when present) zero; deterministic per seed.
FusionParams init_fusion_params(const FusionDims& dims, bool with_bias, uint64_t seed);

JointProjection init_joint_projection(Index raw_x, Index raw_y, Index joint, uint64_t seed);

template <class To, class From>
FusionParamsT<To> cast_fusion(const FusionParamsT<From>& p) {
    FusionParamsT<To> out;
    out.U = cast_mat<To>(p.U);
    out.V = cast_mat<To>(p.V);
    out.P = cast_mat<To>(p.P);
    if (p.b) out.b = cast_vec<To>(*p.b);
    return out;
}

template <class To, class From>
JointProjectionT<To> cast_joint(const JointProjectionT<From>& jp) {
    return {cast_mat<To>(jp.ax), cast_mat<To>(jp.ay)};
}

}  // namespace disarm::fusion
