#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "qrbf/dataset.hpp"
#include "qrbf/kernel.hpp"
#include "qrbf/svm.hpp"
#include "qrbf/tensor_weights.hpp"
#include "qrbf/train.hpp"

namespace qrbf {

enum class Method { TensorGd, TensorNewton, FullLstsq, SvmDual, SvmTensor };

/// "tensor-gd", "tensor-newton", "full-lstsq", "svm-dual", "svm-tensor".
std::string_view method_name(Method method) noexcept;
Method parse_method(std::string_view name);
std::vector<Method> all_methods();
/// True for methods whose weights are the tensor product w(theta).
bool uses_angles(Method method) noexcept;

/// Fraction of correct signs, 1 - (1/4M) sum_t (sign(out_t) - y_t)^2 with sign(0) = +1.
double rcp(const Eigen::VectorXd &outputs, const Eigen::VectorXd &labels);
/// (1/2M) sum_t (out_t - y_t)^2.
double mse(const Eigen::VectorXd &outputs, const Eigen::VectorXd &labels);

struct Metrics {
    double rcp = 0.0;     ///< training data
    double mse = 0.0;     ///< training data
    double inf = 0.0;     ///< RCP on a fresh sample set
    double seconds = 0.0; ///< fit time; never written to reproducible files
};

struct ExperimentConfig {
    PatternSpec pattern;
    Method method = Method::TensorGd;
    LossConfig loss;
    DualConfig dual;
    TensorSvmConfig tensor_svm;
    SvmKernel dual_kernel = SvmKernel::ExplicitFeatures;
    double ridge = 1e-10;
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path output_dir = ".";

    /// Throws std::invalid_argument for an empty seed list or bad sub-configs.
    void validate() const;
};

/// Seeds for the independent test set and the initial angles of a run.
std::uint64_t test_seed(std::uint64_t seed) noexcept;
std::uint64_t init_seed(std::uint64_t seed) noexcept;

/**
 * A trained classifier of any method. Centers are the training samples.
 * Every method reduces to decision(x) = phi(x) . c - b, where phi is the
 * raw or normalized feature vector; the sign is the predicted label.
 */
class FittedModel {
  public:
    FittedModel(Method method, KernelModel model, bool normalize);

    [[nodiscard]] Method method() const noexcept { return method_; }
    [[nodiscard]] const KernelModel &kernel() const noexcept { return model_; }
    [[nodiscard]] double decision(const Eigen::VectorXd &x) const;
    [[nodiscard]] Eigen::VectorXd decisions(const Eigen::MatrixXd &points) const;
    /// Angles for tensor methods, empty otherwise.
    [[nodiscard]] const std::optional<TensorWeights> &theta() const noexcept { return theta_; }

    void set_tensor(TensorWeights theta);
    void set_full(Eigen::VectorXd weights);
    void set_dual(DualSolution sol, SvmKernel kernel);
    void set_tensor_svm(TensorSvmSolution sol);

  private:
    Method method_;
    KernelModel model_;
    bool normalize_;
    std::optional<TensorWeights> theta_;
    Eigen::VectorXd coeffs_;
    double bias_ = 0.0;
};

struct FitResult {
    FittedModel model;
    std::vector<double> loss_trace;
    int iterations = 0;
    bool converged = true;
    double seconds = 0.0;
    /// Decisions on the training samples.
    Eigen::VectorXd train_outputs;
};

/// Trains `cfg.method` on `train`, whose order is used as given.
FitResult fit(const ExperimentConfig &cfg, const Dataset &train, std::uint64_t seed);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Metrics metrics;
    int iterations = 0;
    bool converged = false;
    std::vector<double> loss_trace;
    std::vector<double> theta;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<SeedResult> runs;
    /// Mean over successful runs; all zero when none succeeded.
    Metrics mean;
    std::size_t failures = 0;
};

/**
 * For every seed: draw the training set with that seed, a fresh test set of
 * the same size, fit, and measure. Trainer errors are recorded in the run
 * and the remaining seeds still execute.
 */
ExperimentReport run_experiment(const ExperimentConfig &cfg);

struct SweepRow {
    std::size_t m = 0;
    std::size_t samples = 0;
    Metrics mean;
    std::size_t failures = 0;
};

/// One averaged row per m with M = 2^m samples.
std::vector<SweepRow> sweep_m(const ExperimentConfig &cfg, std::size_t m_min, std::size_t m_max);
std::string sweep_csv(const std::vector<SweepRow> &rows);

struct GridBounds {
    double x_min = -1.0;
    double x_max = 1.0;
    double y_min = -1.0;
    double y_max = 1.0;
};

/// Header `x1,x2,decision` then resolution^2 rows, x1 varying fastest.
std::string export_decision_grid(const std::function<double(const Eigen::VectorXd &)> &decision,
                                 const GridBounds &bounds, std::size_t resolution);

/// Key-value text without timings, stable across runs.
std::string report_text(const ExperimentReport &report);
std::string metrics_csv(const ExperimentReport &report);
std::string loss_trace_csv(const ExperimentReport &report);
/// One line per successful seed: the seed followed by its angles.
std::string theta_text(const ExperimentReport &report);
std::string timing_csv(const ExperimentReport &report);

/// Writes report.txt, metrics.csv, loss_trace.csv, timing.csv and, for
/// tensor methods, theta.txt into `dir`.
void write_report_files(const ExperimentReport &report, const std::filesystem::path &dir);

void write_text(const std::filesystem::path &path, std::string_view text);

} // namespace qrbf
