#include "qrbf/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "qrbf/dataset.hpp"
#include "qrbf/error.hpp"

namespace qrbf {

namespace {

constexpr double kDivergenceObjective = 1e6;

void check_labels(const Eigen::VectorXd &labels, Eigen::Index size) {
    if (labels.size() != size) {
        throw std::invalid_argument("expected " + std::to_string(size) + " labels, got " +
                                    std::to_string(labels.size()));
    }
    bool pos = false;
    bool neg = false;
    for (Eigen::Index t = 0; t < labels.size(); ++t) {
        if (labels[t] == 1.0) {
            pos = true;
        } else if (labels[t] == -1.0) {
            neg = true;
        } else {
            throw ValidationError("SVM labels must be +1 or -1");
        }
    }
    if (!pos || !neg) {
        throw std::invalid_argument("SVM needs both classes present");
    }
}

void check_kernel(const Eigen::MatrixXd &kernel) {
    if (kernel.rows() != kernel.cols() || kernel.rows() == 0) {
        throw std::invalid_argument("SVM kernel must be a non-empty square matrix");
    }
}

// Label-signed kernel product (diag(y) K diag(y)) w.
Eigen::VectorXd signed_product(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &labels,
                               const Eigen::VectorXd &w) {
    return labels.cwiseProduct(kernel * labels.cwiseProduct(w));
}

} // namespace

std::string_view kernel_name(SvmKernel kernel) noexcept {
    return kernel == SvmKernel::ExplicitFeatures ? "explicit" : "kernel-trick";
}

Eigen::MatrixXd svm_kernel_matrix(const KernelModel &model, SvmKernel kernel) {
    if (kernel == SvmKernel::KernelTrick) {
        return model.gram();
    }
    return model.gram() * model.gram();
}

Eigen::VectorXd svm_kernel_row(const Eigen::VectorXd &x, const KernelModel &model,
                               SvmKernel kernel) {
    Eigen::VectorXd f = feature_vector(x, model);
    if (kernel == SvmKernel::KernelTrick) {
        return f;
    }
    return model.gram() * f;
}

double dual_objective(const Eigen::VectorXd &w, const Eigen::MatrixXd &kernel,
                      const Eigen::VectorXd &labels) {
    check_kernel(kernel);
    if (w.size() != kernel.rows() || labels.size() != kernel.rows()) {
        throw std::invalid_argument("dual objective shape mismatch");
    }
    return w.sum() - 0.5 * w.dot(signed_product(kernel, labels, w));
}

Eigen::VectorXd project_dual_feasible(const Eigen::VectorXd &y, const Eigen::VectorXd &labels) {
    // w(lambda) = max(0, y - lambda * labels); h(lambda) = sum labels * w is non-increasing.
    auto project = [&](double lambda) {
        return (y - lambda * labels).cwiseMax(0.0).eval();
    };
    const double span = y.cwiseAbs().maxCoeff() + 1.0;
    double lo = -span;
    double hi = span;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) {
            break;
        }
        if (project(mid).dot(labels) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Eigen::VectorXd w = project(0.5 * (lo + hi));
    // Remove the bisection residue by shrinking the heavier class.
    double pos = 0.0;
    double neg = 0.0;
    for (Eigen::Index t = 0; t < w.size(); ++t) {
        (labels[t] > 0 ? pos : neg) += w[t];
    }
    if (pos > neg && pos > 0.0) {
        for (Eigen::Index t = 0; t < w.size(); ++t) {
            if (labels[t] > 0) {
                w[t] *= neg / pos;
            }
        }
    } else if (neg > pos && neg > 0.0) {
        for (Eigen::Index t = 0; t < w.size(); ++t) {
            if (labels[t] < 0) {
                w[t] *= pos / neg;
            }
        }
    }
    return w;
}

DualSolution solve_dual(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &labels,
                        const DualConfig &cfg) {
    check_kernel(kernel);
    check_labels(labels, kernel.rows());
    if (cfg.iters < 1) {
        throw std::invalid_argument("dual solver needs at least one iteration");
    }
    const Eigen::Index count = kernel.rows();
    double step = cfg.step;
    if (!(step > 0.0)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel, Eigen::EigenvaluesOnly);
        const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
        step = top > 0.0 ? 1.0 / top : 1.0;
    }

    DualSolution sol;
    sol.labels = labels;
    sol.w = Eigen::VectorXd::Zero(count);
    double q = 0.0;
    sol.objective_trace.push_back(q);
    for (int it = 0; it < cfg.iters; ++it) {
        const Eigen::VectorXd grad =
            Eigen::VectorXd::Ones(count) - signed_product(kernel, labels, sol.w);
        Eigen::VectorXd next;
        double next_q = 0.0;
        double trial_step = step;
        for (;;) {
            next = project_dual_feasible(sol.w + trial_step * grad, labels);
            next_q = dual_objective(next, kernel, labels);
            if (next_q >= q - 1e-12 * std::max(1.0, std::abs(q)) || trial_step < 1e-14) {
                break;
            }
            trial_step *= 0.5;
        }
        ++sol.iterations;
        const double change = (next - sol.w).norm();
        if (next_q >= q) {
            sol.w = std::move(next);
            q = next_q;
        }
        sol.objective_trace.push_back(q);
        if (change <= 1e-15 * (1.0 + sol.w.norm())) {
            break;
        }
    }

    const Eigen::VectorXd margins = kernel * labels.cwiseProduct(sol.w); // f(x_t) . v
    double bias_sum = 0.0;
    for (Eigen::Index t = 0; t < count; ++t) {
        if (sol.w[t] > cfg.sv_tol) {
            sol.support_indices.push_back(static_cast<std::size_t>(t));
            bias_sum += margins[t] - labels[t];
        }
    }
    if (sol.support_indices.empty()) {
        throw std::runtime_error("dual solver found no support vectors");
    }
    sol.b = bias_sum / static_cast<double>(sol.support_indices.size());
    return sol;
}

DualSolution solve_dual(const KernelModel &model, const Eigen::VectorXd &labels, SvmKernel kernel,
                        const DualConfig &cfg) {
    return solve_dual(svm_kernel_matrix(model, kernel), labels, cfg);
}

double decision_value(const Eigen::VectorXd &kernel_row, const DualSolution &sol) {
    if (kernel_row.size() != sol.w.size()) {
        throw std::invalid_argument("kernel row does not match the solution size");
    }
    double total = 0.0;
    for (std::size_t t : sol.support_indices) {
        const auto i = static_cast<Eigen::Index>(t);
        total += sol.w[i] * sol.labels[i] * kernel_row[i];
    }
    return total - sol.b;
}

double decision_value_full(const Eigen::VectorXd &kernel_row, const Eigen::VectorXd &w,
                           const Eigen::VectorXd &labels, double b) {
    if (kernel_row.size() != w.size() || labels.size() != w.size()) {
        throw std::invalid_argument("kernel row does not match the solution size");
    }
    return w.cwiseProduct(labels).dot(kernel_row) - b;
}

double tensor_svm_objective(const TensorWeights &theta, const Eigen::MatrixXd &kernel,
                            const Eigen::VectorXd &labels, double mu, double nu) {
    const Eigen::VectorXd w = materialize(theta);
    const double imbalance = w.dot(labels);
    return dual_objective(w, kernel, labels) - mu * imbalance * imbalance -
           nu * w.cwiseMin(0.0).squaredNorm();
}

double fit_bias_by_errors(const Eigen::VectorXd &scores, const Eigen::VectorXd &labels) {
    const auto count = static_cast<std::size_t>(scores.size());
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[static_cast<Eigen::Index>(a)] < scores[static_cast<Eigen::Index>(b)];
    });
    auto score = [&](std::size_t k) { return scores[static_cast<Eigen::Index>(order[k])]; };
    auto label = [&](std::size_t k) { return labels[static_cast<Eigen::Index>(order[k])]; };

    // Threshold before sorted position i: indices >= i are predicted +1.
    std::size_t neg_total = 0;
    for (std::size_t k = 0; k < count; ++k) {
        neg_total += label(k) < 0 ? 1 : 0;
    }
    std::size_t pos_below = 0;
    std::size_t neg_below = 0;
    std::size_t best_errors = std::numeric_limits<std::size_t>::max();
    double best_gap = -1.0;
    double best_b = 0.0;
    for (std::size_t i = 0; i <= count; ++i) {
        if (i > 0) {
            (label(i - 1) > 0 ? pos_below : neg_below) += 1;
        }
        if (i > 0 && i < count && score(i - 1) == score(i)) {
            continue;
        }
        const std::size_t errors = pos_below + (neg_total - neg_below);
        double b = 0.0;
        double gap = 0.0;
        if (i == 0) {
            b = score(0) - 1.0;
        } else if (i == count) {
            b = score(count - 1) + 1.0;
        } else {
            b = 0.5 * (score(i - 1) + score(i));
            gap = score(i) - score(i - 1);
        }
        if (errors < best_errors || (errors == best_errors && gap > best_gap)) {
            best_errors = errors;
            best_gap = gap;
            best_b = b;
        }
    }
    return best_b;
}

TensorSvmSolution solve_tensor_svm(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &labels,
                                   const TensorSvmConfig &cfg) {
    check_kernel(kernel);
    check_labels(labels, kernel.rows());
    const auto count = static_cast<std::size_t>(kernel.rows());
    if (count < 2 || !is_pow2(count)) {
        throw std::invalid_argument("tensor SVM needs 2^m samples with m >= 1");
    }
    if (cfg.rounds < 1 || cfg.iters_per_round < 1 || !(cfg.step > 0.0) ||
        !(cfg.escalation >= 1.0) || !(cfg.mu >= 0.0) || !(cfg.nu >= 0.0)) {
        throw std::invalid_argument("invalid tensor SVM configuration");
    }
    const std::size_t m = log2_exact(count);

    TensorSvmSolution sol;
    sol.labels = labels;
    sol.theta = random_theta(m, cfg.seed);
    sol.mu = cfg.mu;
    sol.nu = cfg.nu;
    sol.kernel_mode = cfg.kernel;

    auto guard = [](double value) {
        if (!std::isfinite(value) || std::abs(value) > kDivergenceObjective) {
            throw DivergenceError("tensor SVM objective " + std::to_string(value) +
                                  " left the safe range");
        }
    };
    auto violation_of = [&](const Eigen::VectorXd &w) {
        return std::max(std::abs(w.dot(labels)), w.cwiseMin(0.0).norm());
    };

    double step = cfg.step;
    for (int round = 0; round < cfg.rounds; ++round) {
        sol.rounds = round + 1;
        double value = tensor_svm_objective(sol.theta, kernel, labels, sol.mu, sol.nu);
        guard(value);
        for (int it = 0; it < cfg.iters_per_round; ++it) {
            const Eigen::VectorXd w = materialize(sol.theta);
            const Eigen::VectorXd grad_w = Eigen::VectorXd::Ones(kernel.rows()) -
                                           signed_product(kernel, labels, w) -
                                           2.0 * sol.mu * w.dot(labels) * labels -
                                           2.0 * sol.nu * w.cwiseMin(0.0);
            std::vector<double> grad(m);
            double grad_sq = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                grad[j] = fast_inner(shift_derivative(sol.theta, j), grad_w);
                grad_sq += grad[j] * grad[j];
            }
            if (std::sqrt(grad_sq) < 1e-10) {
                break;
            }
            // Backtracking ascent: grow the step after success, halve on failure.
            bool moved = false;
            while (step > 1e-14) {
                std::vector<double> next(sol.theta.angles().begin(), sol.theta.angles().end());
                for (std::size_t j = 0; j < m; ++j) {
                    next[j] += step * grad[j];
                }
                TensorWeights trial(std::move(next));
                const double trial_value =
                    tensor_svm_objective(trial, kernel, labels, sol.mu, sol.nu);
                if (std::isfinite(trial_value) && trial_value >= value) {
                    sol.theta = std::move(trial);
                    value = trial_value;
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            guard(value);
            if (!moved) {
                step = cfg.step;
                break;
            }
        }
        sol.violation = violation_of(materialize(sol.theta));
        if (sol.violation <= cfg.violation_tol) {
            break;
        }
        if (round + 1 < cfg.rounds) {
            sol.mu *= cfg.escalation;
            sol.nu *= cfg.escalation;
        }
    }

    sol.weights = materialize(sol.theta);
    const Eigen::VectorXd scores = kernel * labels.cwiseProduct(sol.weights);
    sol.b = fit_bias_by_errors(scores, labels);
    return sol;
}

TensorSvmSolution solve_tensor_svm(const KernelModel &model, const Eigen::VectorXd &labels,
                                   const TensorSvmConfig &cfg) {
    return solve_tensor_svm(svm_kernel_matrix(model, cfg.kernel), labels, cfg);
}

double decision_value(const Eigen::VectorXd &kernel_row, const TensorSvmSolution &sol) {
    return decision_value_full(kernel_row, sol.weights, sol.labels, sol.b);
}

} // namespace qrbf
