#include "qrbf/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "qrbf/error.hpp"

namespace qrbf {

namespace {

constexpr double kDivergenceLoss = 1e6;
constexpr double kMinDamping = 1e-10;
constexpr double kMaxDamping = 1e12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Evaluation {
    double loss;
    Eigen::VectorXd grad;
};

// Shares one residual between the loss and the gradient.
Evaluation evaluate(const Objective &obj, const TensorWeights &theta) {
    const double inv_m = 1.0 / static_cast<double>(obj.num_samples());
    Eigen::VectorXd residual = obj.predict(theta) - obj.targets();
    Eigen::VectorXd pulled = obj.design().transpose() * residual * inv_m;
    Evaluation ev{0.5 * inv_m * residual.squaredNorm(),
                  Eigen::VectorXd(static_cast<Eigen::Index>(theta.size()))};
    for (std::size_t j = 0; j < theta.size(); ++j) {
        ev.grad[static_cast<Eigen::Index>(j)] = fast_inner(shift_derivative(theta, j), pulled);
    }
    return ev;
}

void check_divergence(double loss, int iteration) {
    if (!std::isfinite(loss) || loss > kDivergenceLoss) {
        throw DivergenceError("loss " + std::to_string(loss) + " at iteration " +
                              std::to_string(iteration) + " exceeds the divergence limit; " +
                              "reduce the learning rate");
    }
}

TensorWeights step(const TensorWeights &theta, const Eigen::VectorXd &delta) {
    std::vector<double> next(theta.angles().begin(), theta.angles().end());
    for (std::size_t j = 0; j < next.size(); ++j) {
        next[j] += delta[static_cast<Eigen::Index>(j)];
    }
    return TensorWeights(std::move(next));
}

bool is_center_set(const KernelModel &model, const Dataset &ds) {
    return ds.size() == model.size() && ds.dim() == model.dim() && ds.points() == model.centers();
}

} // namespace

void LossConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (max_iters < 1) {
        throw std::invalid_argument("max_iters must be at least 1");
    }
    if (!(grad_tol > 0.0)) {
        throw std::invalid_argument("grad_tol must be positive");
    }
    if (!(damping >= 0.0) || !std::isfinite(damping)) {
        throw std::invalid_argument("damping must be non-negative");
    }
}

std::string_view method_tag(TrainMethod method) noexcept {
    switch (method) {
    case TrainMethod::Gd:
        return "gd";
    case TrainMethod::Newton:
        return "newton";
    case TrainMethod::Lstsq:
        return "lstsq";
    }
    return "?";
}

Objective::Objective(Eigen::MatrixXd design, Eigen::VectorXd targets)
    : design_(std::move(design)), targets_(std::move(targets)), num_params_(0) {
    const auto width = static_cast<std::size_t>(design_.cols());
    if (width < 2 || !is_pow2(width)) {
        throw std::invalid_argument("tensor weights need 2^m features with m >= 1, got " +
                                    std::to_string(width));
    }
    num_params_ = log2_exact(width);
    if (num_params_ > kMaxMaterializeQubits) {
        throw std::invalid_argument("too many features for dense tensor weights");
    }
    if (design_.rows() < 1 || design_.rows() != targets_.size()) {
        throw std::invalid_argument("design has " + std::to_string(design_.rows()) +
                                    " rows but there are " + std::to_string(targets_.size()) +
                                    " targets");
    }
}

void Objective::check(const TensorWeights &theta) const {
    if (theta.size() != num_params_) {
        throw std::invalid_argument("expected " + std::to_string(num_params_) + " angles, got " +
                                    std::to_string(theta.size()));
    }
}

Eigen::VectorXd Objective::predict(const TensorWeights &theta) const {
    check(theta);
    return design_ * materialize(theta);
}

double Objective::loss(const TensorWeights &theta) const {
    return 0.5 * (predict(theta) - targets_).squaredNorm() / static_cast<double>(num_samples());
}

Eigen::VectorXd Objective::gradient(const TensorWeights &theta) const {
    return evaluate(*this, theta).grad;
}

Eigen::MatrixXd Objective::hessian(const TensorWeights &theta) const {
    check(theta);
    const auto m = static_cast<Eigen::Index>(num_params_);
    const double inv_m = 1.0 / static_cast<double>(num_samples());
    Eigen::VectorXd residual = predict(theta) - targets_;
    Eigen::VectorXd pulled = design_.transpose() * residual * inv_m;

    Eigen::MatrixXd dw(design_.cols(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
        dw.col(j) = materialize(shift_derivative(theta, static_cast<std::size_t>(j)));
    }
    Eigen::MatrixXd outputs = design_ * dw; // column j: d(phi_t . w)/d theta_j

    Eigen::MatrixXd h = outputs.transpose() * outputs * inv_m;
    for (Eigen::Index j = 0; j < m; ++j) {
        TensorWeights dj = shift_derivative(theta, static_cast<std::size_t>(j));
        for (Eigen::Index k = j; k < m; ++k) {
            const double curvature =
                fast_inner(shift_derivative(dj, static_cast<std::size_t>(k)), pulled);
            h(j, k) += curvature;
            if (k != j) {
                h(k, j) += curvature;
            }
        }
    }
    return 0.5 * (h + h.transpose());
}

Eigen::MatrixXd design_matrix(const KernelModel &model, const Dataset &ds, const LossConfig &cfg) {
    if (ds.dim() != model.dim()) {
        throw std::invalid_argument("dataset dimension " + std::to_string(ds.dim()) +
                                    " does not match model dimension " +
                                    std::to_string(model.dim()));
    }
    if (is_center_set(model, ds)) {
        if (!cfg.normalize_features) {
            return model.gram();
        }
        Eigen::VectorXd inv_norm = model.row_norms().array().rsqrt();
        return inv_norm.asDiagonal() * model.gram();
    }
    return feature_matrix(ds.points(), model, cfg.normalize_features);
}

Objective make_objective(const KernelModel &model, const Dataset &ds, const LossConfig &cfg) {
    return Objective(design_matrix(model, ds, cfg), ds.labels());
}

double loss(const TensorWeights &theta, const KernelModel &model, const Dataset &ds,
            const LossConfig &cfg) {
    return make_objective(model, ds, cfg).loss(theta);
}

Eigen::VectorXd gradient(const TensorWeights &theta, const KernelModel &model, const Dataset &ds,
                         const LossConfig &cfg) {
    return make_objective(model, ds, cfg).gradient(theta);
}

Eigen::MatrixXd hessian(const TensorWeights &theta, const KernelModel &model, const Dataset &ds,
                        const LossConfig &cfg) {
    return make_objective(model, ds, cfg).hessian(theta);
}

TrainReport train_gd(const Objective &objective, const LossConfig &cfg,
                     const TensorWeights &theta0) {
    cfg.validate();
    const auto start = Clock::now();
    TrainReport report;
    report.method = TrainMethod::Gd;
    report.theta = theta0;

    Evaluation ev = evaluate(objective, report.theta);
    check_divergence(ev.loss, 0);
    report.loss_trace.push_back(ev.loss);
    while (report.iterations < cfg.max_iters && ev.grad.norm() > cfg.grad_tol) {
        report.theta = step(report.theta, -cfg.learning_rate * ev.grad);
        ev = evaluate(objective, report.theta);
        ++report.iterations;
        check_divergence(ev.loss, report.iterations);
        report.loss_trace.push_back(ev.loss);
    }
    report.grad_norm = ev.grad.norm();
    report.converged = report.grad_norm <= cfg.grad_tol;
    report.seconds = seconds_since(start);
    return report;
}

TrainReport train_gd(const KernelModel &model, const Dataset &ds, const LossConfig &cfg,
                     const TensorWeights &theta0) {
    return train_gd(make_objective(model, ds, cfg), cfg, theta0);
}

TrainReport train_newton(const Objective &objective, const LossConfig &cfg,
                         const TensorWeights &theta0) {
    cfg.validate();
    const auto start = Clock::now();
    TrainReport report;
    report.method = TrainMethod::Newton;
    report.theta = theta0;

    const auto m = static_cast<Eigen::Index>(objective.num_params());
    double lambda = cfg.damping;
    auto escalate = [&lambda](const char *why) {
        lambda = std::max(4.0 * lambda, kMinDamping);
        if (lambda > kMaxDamping) {
            throw DivergenceError(std::string("damped Newton system stays singular (") + why +
                                  ") after raising damping past " + std::to_string(kMaxDamping));
        }
    };

    Evaluation ev = evaluate(objective, report.theta);
    check_divergence(ev.loss, 0);
    Eigen::MatrixXd hess = objective.hessian(report.theta);
    report.loss_trace.push_back(ev.loss);

    while (report.iterations < cfg.max_iters && ev.grad.norm() > cfg.grad_tol) {
        Eigen::LLT<Eigen::MatrixXd> chol(hess + lambda * Eigen::MatrixXd::Identity(m, m));
        if (chol.info() != Eigen::Success) {
            escalate("not positive definite");
            continue;
        }
        Eigen::VectorXd delta = chol.solve(-ev.grad);
        TensorWeights trial = step(report.theta, delta);
        const double trial_loss = objective.loss(trial);
        ++report.iterations;
        if (std::isfinite(trial_loss) && trial_loss < ev.loss) {
            report.theta = std::move(trial);
            ev = evaluate(objective, report.theta);
            hess = objective.hessian(report.theta);
            lambda *= 0.5;
        } else {
            ++report.rejected_steps;
            escalate("no descent");
        }
        report.loss_trace.push_back(ev.loss);
    }
    report.grad_norm = ev.grad.norm();
    report.converged = report.grad_norm <= cfg.grad_tol;
    report.seconds = seconds_since(start);
    return report;
}

TrainReport train_newton(const KernelModel &model, const Dataset &ds, const LossConfig &cfg,
                         const TensorWeights &theta0) {
    return train_newton(make_objective(model, ds, cfg), cfg, theta0);
}

Eigen::VectorXd train_full_lstsq(const Eigen::MatrixXd &gram, const Eigen::VectorXd &targets,
                                 double ridge) {
    if (gram.rows() != gram.cols() || gram.rows() != targets.size() || gram.rows() == 0) {
        throw std::invalid_argument("least squares needs a square Gram matrix matching the targets");
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
        throw std::invalid_argument("ridge must be non-negative");
    }
    const Eigen::Index count = gram.rows();
    Eigen::MatrixXd normal = gram * gram;
    normal.diagonal().array() += ridge;
    Eigen::VectorXd rhs = gram * targets;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("least-squares normal matrix factorization failed");
    }
    Eigen::VectorXd w = ldlt.solve(rhs);
    const double scale = normal.norm() * w.norm() + rhs.norm();
    if (!w.allFinite() || (normal * w - rhs).norm() > 1e-6 * std::max(scale, 1e-300)) {
        throw std::runtime_error("least-squares system of size " + std::to_string(count) +
                                 " is numerically singular; increase the ridge");
    }
    return w;
}

Eigen::VectorXd train_full_lstsq(const KernelModel &model, const Dataset &ds, double ridge) {
    if (!is_center_set(model, ds)) {
        throw std::invalid_argument("full least squares requires the training samples as centers");
    }
    return train_full_lstsq(model.gram(), ds.labels(), ridge);
}

} // namespace qrbf
