#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "qrbf/kernel.hpp"
#include "qrbf/tensor_weights.hpp"

namespace qrbf {

/**
 * How the SVM measures similarity between two points.
 *
 * ExplicitFeatures uses the inner product of Gaussian feature vectors,
 * f(x_s) . f(x_t), which over the training set is gram * gram.
 * KernelTrick uses the Gaussian kernel value itself, i.e. gram.
 */
enum class SvmKernel { ExplicitFeatures, KernelTrick };
std::string_view kernel_name(SvmKernel kernel) noexcept;

/// Pairwise SVM kernel over the model's centers.
Eigen::MatrixXd svm_kernel_matrix(const KernelModel &model, SvmKernel kernel);
/// k(c_t, x) for every center c_t.
Eigen::VectorXd svm_kernel_row(const Eigen::VectorXd &x, const KernelModel &model, SvmKernel kernel);

/// Q(w) = sum_t w_t - 1/2 sum_{s,t} w_s w_t y_s y_t K_st.
double dual_objective(const Eigen::VectorXd &w, const Eigen::MatrixXd &kernel,
                      const Eigen::VectorXd &labels);

struct DualConfig {
    int iters = 5000;
    /// Ascent step; <= 0 picks 1 / lambda_max of the label-signed kernel.
    double step = 0.0;
    double sv_tol = 1e-6;
    double feas_tol = 1e-8;
};

struct DualSolution {
    Eigen::VectorXd w; ///< multipliers, w_t >= 0
    double b = 0.0;
    std::vector<std::size_t> support_indices;
    Eigen::VectorXd labels;
    /// Q after each accepted iterate, starting at w = 0.
    std::vector<double> objective_trace;
    int iterations = 0;
};

/**
 * Projected gradient ascent on Q subject to sum_t w_t y_t = 0 and w >= 0.
 * Each iterate is the Euclidean projection of the ascent step onto that
 * set. The bias averages f(x_t) . v - y_t over the support vectors.
 */
DualSolution solve_dual(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &labels,
                        const DualConfig &cfg = {});
DualSolution solve_dual(const KernelModel &model, const Eigen::VectorXd &labels,
                        SvmKernel kernel = SvmKernel::ExplicitFeatures, const DualConfig &cfg = {});

/// Euclidean projection of y onto {w >= 0, sum_t w_t labels_t = 0}.
Eigen::VectorXd project_dual_feasible(const Eigen::VectorXd &y, const Eigen::VectorXd &labels);

/// sum over support vectors of w_t y_t k_t - b, where k_t = k(x_t, x).
double decision_value(const Eigen::VectorXd &kernel_row, const DualSolution &sol);
/// Same sum over every index.
double decision_value_full(const Eigen::VectorXd &kernel_row, const Eigen::VectorXd &w,
                           const Eigen::VectorXd &labels, double b);

struct TensorSvmConfig {
    double mu = 10.0;  ///< weight of (sum_t w_t y_t)^2
    double nu = 10.0;  ///< weight of sum_t min(0, w_t)^2
    double escalation = 2.0;
    int rounds = 12;
    int iters_per_round = 300;
    double step = 0.1;
    /// Constraint violation below which penalty escalation stops.
    double violation_tol = 1e-3;
    std::uint64_t seed = 1;
    SvmKernel kernel = SvmKernel::KernelTrick;
};

struct TensorSvmSolution {
    TensorWeights theta{std::vector<double>{0.0}};
    Eigen::VectorXd weights; ///< materialized w(theta); not sign constrained
    double b = 0.0;
    double mu = 0.0;
    double nu = 0.0;
    Eigen::VectorXd labels;
    double violation = 0.0;
    int rounds = 0;
    /// Kernel the solution was trained with (copied from the config).
    SvmKernel kernel_mode = SvmKernel::KernelTrick;
};

/// Q(w(theta)) - mu (sum w y)^2 - nu sum min(0, w)^2.
double tensor_svm_objective(const TensorWeights &theta, const Eigen::MatrixXd &kernel,
                            const Eigen::VectorXd &labels, double mu, double nu);

/**
 * Penalty-method ascent over the m tensor angles; penalties escalate until
 * the constraint violation drops below `violation_tol`. The bias minimizes
 * training misclassifications along the b axis.
 */
TensorSvmSolution solve_tensor_svm(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &labels,
                                   const TensorSvmConfig &cfg = {});
TensorSvmSolution solve_tensor_svm(const KernelModel &model, const Eigen::VectorXd &labels,
                                   const TensorSvmConfig &cfg = {});

double decision_value(const Eigen::VectorXd &kernel_row, const TensorSvmSolution &sol);

/// Bias that minimizes sign errors of score_t - b against the labels.
double fit_bias_by_errors(const Eigen::VectorXd &scores, const Eigen::VectorXd &labels);

} // namespace qrbf
