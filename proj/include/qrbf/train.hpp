#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "qrbf/dataset.hpp"
#include "qrbf/kernel.hpp"
#include "qrbf/tensor_weights.hpp"

namespace qrbf {

struct LossConfig {
    /// Unit-norm feature states when set, raw feature vectors otherwise.
    bool normalize_features = true;
    double learning_rate = 1.0;
    int max_iters = 5000;
    double grad_tol = 1e-6;
    /// Initial Levenberg damping for the Newton trainer.
    double damping = 1e-3;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

enum class TrainMethod { Gd, Newton, Lstsq };
std::string_view method_tag(TrainMethod method) noexcept;

struct TrainReport {
    TensorWeights theta{std::vector<double>{0.0}};
    /// Loss of the current iterate, starting with the initial point.
    std::vector<double> loss_trace;
    int iterations = 0;
    double seconds = 0.0;
    bool converged = false;
    TrainMethod method = TrainMethod::Gd;
    double grad_norm = 0.0;
    /// Newton trial steps that increased the loss and were discarded.
    int rejected_steps = 0;
};

/**
 * Squared-error objective of a tensor-weight RBF network,
 *
 *     L(theta) = 1/(2M) sum_t (phi_t . w(theta) - y_t)^2,
 *
 * over a fixed M x 2^m design matrix whose rows are the features phi_t.
 * Derivatives use parameter shifts of theta, so the gradient costs two
 * dense mat-vecs plus m O(2^m) contractions.
 */
class Objective {
  public:
    Objective(Eigen::MatrixXd design, Eigen::VectorXd targets);

    [[nodiscard]] std::size_t num_params() const noexcept { return num_params_; }
    [[nodiscard]] std::size_t num_samples() const noexcept {
        return static_cast<std::size_t>(design_.rows());
    }
    [[nodiscard]] const Eigen::MatrixXd &design() const noexcept { return design_; }
    [[nodiscard]] const Eigen::VectorXd &targets() const noexcept { return targets_; }

    /// Network outputs phi_t . w(theta).
    [[nodiscard]] Eigen::VectorXd predict(const TensorWeights &theta) const;
    [[nodiscard]] double loss(const TensorWeights &theta) const;
    [[nodiscard]] Eigen::VectorXd gradient(const TensorWeights &theta) const;
    [[nodiscard]] Eigen::MatrixXd hessian(const TensorWeights &theta) const;

  private:
    void check(const TensorWeights &theta) const;

    Eigen::MatrixXd design_;
    Eigen::VectorXd targets_;
    std::size_t num_params_;
};

/// Design matrix for `ds` against `model`'s centers (rows normalized per cfg).
Eigen::MatrixXd design_matrix(const KernelModel &model, const Dataset &ds, const LossConfig &cfg);
Objective make_objective(const KernelModel &model, const Dataset &ds, const LossConfig &cfg);

double loss(const TensorWeights &theta, const KernelModel &model, const Dataset &ds,
            const LossConfig &cfg);
Eigen::VectorXd gradient(const TensorWeights &theta, const KernelModel &model, const Dataset &ds,
                         const LossConfig &cfg);
Eigen::MatrixXd hessian(const TensorWeights &theta, const KernelModel &model, const Dataset &ds,
                        const LossConfig &cfg);

/// Full-batch gradient descent theta <- theta - eta * grad L.
TrainReport train_gd(const Objective &objective, const LossConfig &cfg, const TensorWeights &theta0);
TrainReport train_gd(const KernelModel &model, const Dataset &ds, const LossConfig &cfg,
                     const TensorWeights &theta0);

/**
 * Damped Newton: each trial step solves (H + lambda I) delta = -g. Accepted
 * steps (loss decreased) halve lambda; rejected ones multiply it by 4.
 * Throws DivergenceError once lambda exceeds its cap.
 */
TrainReport train_newton(const Objective &objective, const LossConfig &cfg,
                         const TensorWeights &theta0);
TrainReport train_newton(const KernelModel &model, const Dataset &ds, const LossConfig &cfg,
                         const TensorWeights &theta0);

/**
 * Full-weight least squares over a square symmetric Gram matrix K:
 * solves (K^2 + ridge I) w = K y, so that (K w)_t approximates y_t.
 */
Eigen::VectorXd train_full_lstsq(const Eigen::MatrixXd &gram, const Eigen::VectorXd &targets,
                                 double ridge = 1e-10);
Eigen::VectorXd train_full_lstsq(const KernelModel &model, const Dataset &ds, double ridge = 1e-10);

/// sign with sign(0) = +1.
inline int classify(double output) noexcept { return output >= 0.0 ? 1 : -1; }

} // namespace qrbf
