#pragma once

#include <Eigen/Dense>
#include <string>

#include "disarm/common.hpp"

namespace disarm {

using Index = Eigen::Index;

template <class S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Mat = MatT<float>;
using Vec = VecT<float>;

// Dense affine map y = W x + b with W stored [out x in].
template <class S>
struct AffineT {
    MatT<S> W;
    VecT<S> b;

    Index in_dim() const { return W.cols(); }
    Index out_dim() const { return W.rows(); }
    bool empty() const { return W.size() == 0; }
};

using Affine = AffineT<float>;

template <class S>
VecT<S> affine_apply(const AffineT<S>& a, const VecT<S>& x) {
    if (x.size() != a.W.cols() || a.b.size() != a.W.rows())
        throw DimensionError("affine: input size " + std::to_string(x.size()) + " does not match weight [" +
                             std::to_string(a.W.rows()) + "x" + std::to_string(a.W.cols()) + "]");
    return a.W * x + a.b;
}

// Accumulates dW, db and returns dx for upstream gradient dy.
template <class S>
VecT<S> affine_backward(const AffineT<S>& a, const VecT<S>& x, const VecT<S>& dy, MatT<S>& dW, VecT<S>& db) {
    dW.noalias() += dy * x.transpose();
    db += dy;
    return a.W.transpose() * dy;
}

template <class S>
bool all_finite(const MatT<S>& m) {
    return m.allFinite();
}

template <class S>
bool all_finite(const VecT<S>& v) {
    return v.allFinite();
}

template <class To, class From>
MatT<To> cast_mat(const MatT<From>& m) {
    return m.template cast<To>();
}

template <class To, class From>
VecT<To> cast_vec(const VecT<From>& v) {
    return v.template cast<To>();
}

template <class To, class From>
AffineT<To> cast_affine(const AffineT<From>& a) {
    return {cast_mat<To>(a.W), cast_vec<To>(a.b)};
}

}  // namespace disarm
