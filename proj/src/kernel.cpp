#include "qrbf/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qrbf {

namespace {

void check_dim(const Eigen::VectorXd &x, const KernelModel &model) {
    if (static_cast<std::size_t>(x.size()) != model.dim()) {
        throw std::invalid_argument("point has dimension " + std::to_string(x.size()) +
                                    ", model expects " + std::to_string(model.dim()));
    }
}

// Below this exponent exp() rounds to exactly 0, but libm reaches that
// answer through a slow underflow path.
constexpr double kExpZeroBelow = -745.14;

double gaussian(double exponent) {
    return exponent < kExpZeroBelow ? 0.0 : std::exp(exponent);
}

Eigen::VectorXd squared_distances(const Eigen::VectorXd &x, const Eigen::MatrixXd &centers) {
    return (centers.rowwise() - x.transpose()).rowwise().squaredNorm();
}

} // namespace

double sigma_heuristic(const Eigen::MatrixXd &points) {
    const Eigen::Index count = points.rows();
    if (count < 2) {
        throw std::invalid_argument("sigma heuristic needs at least 2 samples");
    }
    double max_sq = 0.0;
    for (Eigen::Index r = 0; r < count; ++r) {
        for (Eigen::Index s = r + 1; s < count; ++s) {
            max_sq = std::max(max_sq, (points.row(r) - points.row(s)).squaredNorm());
        }
    }
    if (max_sq == 0.0) {
        throw std::invalid_argument("all samples coincide; kernel width would be zero");
    }
    return std::sqrt(max_sq) / std::sqrt(2.0 * static_cast<double>(count));
}

double sigma_heuristic(const Dataset &ds) { return sigma_heuristic(ds.points()); }

KernelModel::KernelModel(const Dataset &centers) : KernelModel(centers.points(), sigma_heuristic(centers)) {}

KernelModel::KernelModel(const Dataset &centers, double sigma)
    : KernelModel(centers.points(), sigma) {}

KernelModel::KernelModel(Eigen::MatrixXd centers, double sigma)
    : centers_(std::move(centers)), sigma_(sigma) {
    if (centers_.rows() < 1 || centers_.cols() < 1) {
        throw std::invalid_argument("kernel model needs at least one center");
    }
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) {
        throw std::invalid_argument("kernel width must be positive and finite");
    }
    const Eigen::Index count = centers_.rows();
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma_ * sigma_);
    gram_.resize(count, count);
    // Fill the lower triangle one contiguous column segment at a time, then mirror.
    const Eigen::MatrixXd coords = centers_.transpose();
    for (Eigen::Index t = 0; t < count; ++t) {
        gram_(t, t) = 1.0;
        for (Eigen::Index s = t + 1; s < count; ++s) {
            gram_(s, t) = gaussian(-(coords.col(s) - coords.col(t)).squaredNorm() * inv_two_sigma_sq);
        }
    }
    // Mirror in tiles so both the read and the write side stay in cache.
    constexpr Eigen::Index kTile = 64;
    for (Eigen::Index c0 = 0; c0 < count; c0 += kTile) {
        const Eigen::Index c1 = std::min(count, c0 + kTile);
        for (Eigen::Index r0 = 0; r0 <= c0; r0 += kTile) {
            const Eigen::Index r1 = std::min(count, r0 + kTile);
            for (Eigen::Index c = c0; c < c1; ++c) {
                for (Eigen::Index r = r0; r < std::min(r1, c); ++r) {
                    gram_(r, c) = gram_(c, r);
                }
            }
        }
    }
    // exp(-d^2/sigma^2) is the square of exp(-d^2/(2 sigma^2)).
    row_norms_ = gram_.array().square().colwise().sum().transpose();
}

Eigen::VectorXd feature_vector(const Eigen::VectorXd &x, const KernelModel &model) {
    check_dim(x, model);
    const double inv_two_sigma_sq = 1.0 / (2.0 * model.sigma() * model.sigma());
    return (-squared_distances(x, model.centers()).array() * inv_two_sigma_sq)
        .unaryExpr(&gaussian)
        .matrix();
}

FeatureState feature_state(const Eigen::VectorXd &x, const KernelModel &model) {
    FeatureState out;
    Eigen::VectorXd f = feature_vector(x, model);
    out.norm_sq = f.squaredNorm();
    if (!(out.norm_sq > 0.0)) {
        throw std::domain_error("feature vector underflows to zero; point is too far from every center");
    }
    out.state = f / std::sqrt(out.norm_sq);
    return out;
}

DensityOperator density_operator(const KernelModel &model) {
    return {model.gram() / static_cast<double>(model.size())};
}

Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd &points, const KernelModel &model,
                               bool normalize) {
    if (static_cast<std::size_t>(points.cols()) != model.dim()) {
        throw std::invalid_argument("points have dimension " + std::to_string(points.cols()) +
                                    ", model expects " + std::to_string(model.dim()));
    }
    Eigen::MatrixXd out(points.rows(), static_cast<Eigen::Index>(model.size()));
    for (Eigen::Index t = 0; t < points.rows(); ++t) {
        Eigen::VectorXd x = points.row(t).transpose();
        out.row(t) = normalize ? feature_state(x, model).state.transpose()
                               : feature_vector(x, model).transpose();
    }
    return out;
}

} // namespace qrbf
