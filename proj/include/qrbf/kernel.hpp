#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "qrbf/dataset.hpp"

namespace qrbf {

/// max_{r,s} |x_r - x_s| / sqrt(2M). Throws when all points coincide.
double sigma_heuristic(const Eigen::MatrixXd &points);
double sigma_heuristic(const Dataset &ds);

/**
 * Gaussian RBF model whose centers are a fixed set of points.
 *
 * The Gram matrix uses the feature-map exponent |x_s - x_t|^2 / (2 sigma^2).
 * Row norms use the squared entries, R_t = sum_s exp(-|x_s - x_t|^2 / sigma^2),
 * which is the squared Euclidean norm of the t-th feature vector.
 * Immutable after construction.
 */
class KernelModel {
  public:
    /// Centers are the dataset samples; sigma from `sigma_heuristic`.
    explicit KernelModel(const Dataset &centers);
    KernelModel(const Dataset &centers, double sigma);
    KernelModel(Eigen::MatrixXd centers, double sigma);

    [[nodiscard]] std::size_t size() const noexcept {
        return static_cast<std::size_t>(centers_.rows());
    }
    [[nodiscard]] std::size_t dim() const noexcept {
        return static_cast<std::size_t>(centers_.cols());
    }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] const Eigen::MatrixXd &centers() const noexcept { return centers_; }
    [[nodiscard]] const Eigen::MatrixXd &gram() const noexcept { return gram_; }
    [[nodiscard]] const Eigen::VectorXd &row_norms() const noexcept { return row_norms_; }

  private:
    Eigen::MatrixXd centers_;
    double sigma_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd row_norms_;
};

/// f(x)_t = exp(-|x - c_t|^2 / (2 sigma^2)).
Eigen::VectorXd feature_vector(const Eigen::VectorXd &x, const KernelModel &model);

struct FeatureState {
    Eigen::VectorXd state; ///< f(x) / sqrt(norm_sq), unit length
    double norm_sq = 0.0;  ///< R = sum_t exp(-|x - c_t|^2 / sigma^2)
};

FeatureState feature_state(const Eigen::VectorXd &x, const KernelModel &model);

/// Trace-one kernel density matrix rho = gram / M.
struct DensityOperator {
    Eigen::MatrixXd rho;
};

DensityOperator density_operator(const KernelModel &model);

/**
 * Feature rows for a batch of points: row t is f(points_t), or its unit
 * normalization when `normalize` is set.
 */
Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd &points, const KernelModel &model,
                               bool normalize);

} // namespace qrbf
