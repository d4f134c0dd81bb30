#include "disarm/fusion.hpp"

namespace disarm::fusion {

namespace {

constexpr float kInitStd = 0.02f;

Mat gaussian_matrix(Index rows, Index cols, Rng& rng) {
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(rng.gaussian()) * kInitStd;
    return m;
}

}  // namespace

FusionParams init_fusion_params(const FusionDims& dims, bool with_bias, uint64_t seed) {
    if (dims.in_x <= 0 || dims.in_y <= 0 || dims.rank <= 0 || dims.out <= 0)
        throw ContractError("init_fusion_params: dimensions must be positive");
    if (dims.rank > std::min(dims.in_x, dims.in_y))
        throw ContractError("init_fusion_params: rank " + std::to_string(dims.rank) +
                            " exceeds low-rank bound min(" + std::to_string(dims.in_x) + ", " +
                            std::to_string(dims.in_y) + ")");
    Rng rng(seed);
    FusionParams p;
    p.U = gaussian_matrix(dims.in_x, dims.rank, rng);
    p.V = gaussian_matrix(dims.in_y, dims.rank, rng);
    p.P = gaussian_matrix(dims.rank, dims.out, rng);
    if (with_bias) p.b = Vec::Zero(dims.out);
    return p;
}

JointProjection init_joint_projection(Index raw_x, Index raw_y, Index joint, uint64_t seed) {
    if (raw_x <= 0 || raw_y <= 0 || joint <= 0)
        throw ContractError("init_joint_projection: dimensions must be positive");
    Rng rng(seed);
    JointProjection jp;
    jp.ax = gaussian_matrix(raw_x, joint, rng);
    jp.ay = gaussian_matrix(raw_y, joint, rng);
    return jp;
}

}  // namespace disarm::fusion
