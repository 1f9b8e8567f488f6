#include "qrbf/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qrbf {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kTestSalt = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kInitSalt = 0xD1B54A32D192ED03ULL;

std::string join(const std::vector<double> &values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += format_double(values[i]);
    }
    return out;
}

Metrics average(const std::vector<Metrics> &items) {
    Metrics mean;
    if (items.empty()) {
        return mean;
    }
    for (const Metrics &m : items) {
        mean.rcp += m.rcp;
        mean.mse += m.mse;
        mean.inf += m.inf;
        mean.seconds += m.seconds;
    }
    const auto n = static_cast<double>(items.size());
    mean.rcp /= n;
    mean.mse /= n;
    mean.inf /= n;
    mean.seconds /= n;
    return mean;
}

} // namespace

std::string_view method_name(Method method) noexcept {
    switch (method) {
    case Method::TensorGd:
        return "tensor-gd";
    case Method::TensorNewton:
        return "tensor-newton";
    case Method::FullLstsq:
        return "full-lstsq";
    case Method::SvmDual:
        return "svm-dual";
    case Method::SvmTensor:
        return "svm-tensor";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (Method m : all_methods()) {
        if (method_name(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown method '" + std::string(name) +
                                "' (expected tensor-gd, tensor-newton, full-lstsq, svm-dual "
                                "or svm-tensor)");
}

std::vector<Method> all_methods() {
    return {Method::TensorGd, Method::TensorNewton, Method::FullLstsq, Method::SvmDual,
            Method::SvmTensor};
}

bool uses_angles(Method method) noexcept {
    return method == Method::TensorGd || method == Method::TensorNewton ||
           method == Method::SvmTensor;
}

double rcp(const Eigen::VectorXd &outputs, const Eigen::VectorXd &labels) {
    if (outputs.size() != labels.size() || outputs.size() == 0) {
        throw std::invalid_argument("rcp needs equally sized, non-empty outputs and labels");
    }
    double total = 0.0;
    for (Eigen::Index t = 0; t < outputs.size(); ++t) {
        const double diff = classify(outputs[t]) - labels[t];
        total += diff * diff;
    }
    return 1.0 - total / (4.0 * static_cast<double>(outputs.size()));
}

double mse(const Eigen::VectorXd &outputs, const Eigen::VectorXd &labels) {
    if (outputs.size() != labels.size() || outputs.size() == 0) {
        throw std::invalid_argument("mse needs equally sized, non-empty outputs and labels");
    }
    return 0.5 * (outputs - labels).squaredNorm() / static_cast<double>(outputs.size());
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) {
        throw std::invalid_argument("at least one seed is required");
    }
    loss.validate();
    if (!(ridge >= 0.0)) {
        throw std::invalid_argument("ridge must be non-negative");
    }
    if (dual.iters < 1) {
        throw std::invalid_argument("dual iterations must be at least 1");
    }
}

std::uint64_t test_seed(std::uint64_t seed) noexcept { return seed + kTestSalt; }
std::uint64_t init_seed(std::uint64_t seed) noexcept { return seed ^ kInitSalt; }

FittedModel::FittedModel(Method method, KernelModel model, bool normalize)
    : method_(method), model_(std::move(model)), normalize_(normalize),
      coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model_.size()))) {}

void FittedModel::set_tensor(TensorWeights theta) {
    coeffs_ = materialize(theta);
    bias_ = 0.0;
    theta_ = std::move(theta);
}

void FittedModel::set_full(Eigen::VectorXd weights) {
    coeffs_ = std::move(weights);
    bias_ = 0.0;
    theta_.reset();
}

void FittedModel::set_dual(DualSolution sol, SvmKernel kernel) {
    Eigen::VectorXd active = Eigen::VectorXd::Zero(sol.w.size());
    for (std::size_t t : sol.support_indices) {
        const auto i = static_cast<Eigen::Index>(t);
        active[i] = sol.w[i] * sol.labels[i];
    }
    coeffs_ = kernel == SvmKernel::ExplicitFeatures ? Eigen::VectorXd(model_.gram() * active)
                                                    : active;
    bias_ = sol.b;
    theta_.reset();
}

void FittedModel::set_tensor_svm(TensorSvmSolution sol) {
    Eigen::VectorXd signed_w = sol.weights.cwiseProduct(sol.labels);
    coeffs_ = sol.kernel_mode == SvmKernel::ExplicitFeatures
                  ? Eigen::VectorXd(model_.gram() * signed_w)
                  : signed_w;
    bias_ = sol.b;
    theta_ = std::move(sol.theta);
}

double FittedModel::decision(const Eigen::VectorXd &x) const {
    const Eigen::VectorXd phi =
        normalize_ ? feature_state(x, model_).state : feature_vector(x, model_);
    return phi.dot(coeffs_) - bias_;
}

Eigen::VectorXd FittedModel::decisions(const Eigen::MatrixXd &points) const {
    return feature_matrix(points, model_, normalize_) * coeffs_ -
           Eigen::VectorXd::Constant(points.rows(), bias_);
}

FitResult fit(const ExperimentConfig &cfg, const Dataset &train, std::uint64_t seed) {
    const auto start = Clock::now();
    KernelModel model(train);
    const Eigen::VectorXd labels = train.labels();
    const bool tensor = cfg.method == Method::TensorGd || cfg.method == Method::TensorNewton;
    FitResult result{FittedModel(cfg.method, model, tensor && cfg.loss.normalize_features), {},
                     0, true, 0.0, {}};

    switch (cfg.method) {
    case Method::TensorGd:
    case Method::TensorNewton: {
        const Objective objective = make_objective(model, train, cfg.loss);
        const TensorWeights theta0 = random_theta(objective.num_params(), init_seed(seed));
        TrainReport report = cfg.method == Method::TensorGd
                                 ? train_gd(objective, cfg.loss, theta0)
                                 : train_newton(objective, cfg.loss, theta0);
        result.train_outputs = objective.predict(report.theta);
        result.loss_trace = std::move(report.loss_trace);
        result.iterations = report.iterations;
        result.converged = report.converged;
        result.model.set_tensor(std::move(report.theta));
        break;
    }
    case Method::FullLstsq: {
        Eigen::VectorXd w = train_full_lstsq(model.gram(), labels, cfg.ridge);
        result.train_outputs = model.gram() * w;
        result.loss_trace.push_back(mse(result.train_outputs, labels));
        result.model.set_full(std::move(w));
        break;
    }
    case Method::SvmDual: {
        const Eigen::MatrixXd kernel = svm_kernel_matrix(model, cfg.dual_kernel);
        DualSolution sol = solve_dual(kernel, labels, cfg.dual);
        Eigen::VectorXd active = Eigen::VectorXd::Zero(sol.w.size());
        for (std::size_t t : sol.support_indices) {
            const auto i = static_cast<Eigen::Index>(t);
            active[i] = sol.w[i] * labels[i];
        }
        result.train_outputs = kernel * active - Eigen::VectorXd::Constant(active.size(), sol.b);
        result.loss_trace = sol.objective_trace;
        result.iterations = sol.iterations;
        result.model.set_dual(std::move(sol), cfg.dual_kernel);
        break;
    }
    case Method::SvmTensor: {
        TensorSvmConfig svm_cfg = cfg.tensor_svm;
        svm_cfg.seed = init_seed(seed);
        const Eigen::MatrixXd kernel = svm_kernel_matrix(model, svm_cfg.kernel);
        TensorSvmSolution sol = solve_tensor_svm(kernel, labels, svm_cfg);
        result.train_outputs = kernel * sol.weights.cwiseProduct(labels) -
                               Eigen::VectorXd::Constant(labels.size(), sol.b);
        result.iterations = sol.rounds;
        result.converged = sol.violation <= svm_cfg.violation_tol;
        result.model.set_tensor_svm(std::move(sol));
        break;
    }
    }
    result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

ExperimentReport run_experiment(const ExperimentConfig &cfg) {
    cfg.validate();
    ExperimentReport report;
    report.config = cfg;
    std::vector<Metrics> ok;
    for (std::uint64_t seed : cfg.seeds) {
        SeedResult run;
        run.seed = seed;
        try {
            PatternSpec spec = cfg.pattern;
            spec.seed = seed;
            const Dataset train = arrange_by_label(generate(spec));
            spec.seed = test_seed(seed);
            const Dataset test = generate(spec);

            FitResult fitted = fit(cfg, train, seed);
            const Eigen::VectorXd labels = train.labels();
            run.metrics.rcp = rcp(fitted.train_outputs, labels);
            run.metrics.mse = mse(fitted.train_outputs, labels);
            run.metrics.inf = rcp(fitted.model.decisions(test.points()), test.labels());
            run.metrics.seconds = fitted.seconds;
            run.iterations = fitted.iterations;
            run.converged = fitted.converged;
            run.loss_trace = std::move(fitted.loss_trace);
            if (const auto &theta = fitted.model.theta()) {
                run.theta.assign(theta->angles().begin(), theta->angles().end());
            }
            run.ok = true;
            ok.push_back(run.metrics);
        } catch (const std::exception &e) {
            run.error = e.what();
            ++report.failures;
        }
        report.runs.push_back(std::move(run));
    }
    report.mean = average(ok);
    return report;
}

std::vector<SweepRow> sweep_m(const ExperimentConfig &cfg, std::size_t m_min, std::size_t m_max) {
    if (m_min < 1 || m_min > m_max || m_max > kMaxMaterializeQubits) {
        throw std::invalid_argument("m range must satisfy 1 <= m_min <= m_max <= " +
                                    std::to_string(kMaxMaterializeQubits));
    }
    std::vector<SweepRow> rows;
    for (std::size_t m = m_min; m <= m_max; ++m) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.pattern.samples = std::size_t{1} << m;
        const ExperimentReport report = run_experiment(run_cfg);
        rows.push_back({m, run_cfg.pattern.samples, report.mean, report.failures});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow> &rows) {
    std::string out = "m,samples,rcp,mse,inf,failures\n";
    for (const SweepRow &row : rows) {
        out += std::to_string(row.m) + ',' + std::to_string(row.samples) + ',' +
               format_double(row.mean.rcp) + ',' + format_double(row.mean.mse) + ',' +
               format_double(row.mean.inf) + ',' + std::to_string(row.failures) + '\n';
    }
    return out;
}

std::string export_decision_grid(const std::function<double(const Eigen::VectorXd &)> &decision,
                                 const GridBounds &bounds, std::size_t resolution) {
    if (resolution < 2) {
        throw std::invalid_argument("grid resolution must be at least 2");
    }
    if (!std::isfinite(bounds.x_min) || !std::isfinite(bounds.x_max) ||
        !std::isfinite(bounds.y_min) || !std::isfinite(bounds.y_max) ||
        !(bounds.x_min < bounds.x_max) || !(bounds.y_min < bounds.y_max)) {
        throw std::invalid_argument("grid bounds must be finite with min < max on both axes");
    }
    const double steps = static_cast<double>(resolution - 1);
    std::string out = "x1,x2,decision\n";
    Eigen::VectorXd x(2);
    for (std::size_t i = 0; i < resolution; ++i) {
        x[1] = bounds.y_min + (bounds.y_max - bounds.y_min) * static_cast<double>(i) / steps;
        for (std::size_t j = 0; j < resolution; ++j) {
            x[0] = bounds.x_min + (bounds.x_max - bounds.x_min) * static_cast<double>(j) / steps;
            out += format_double(x[0]) + ',' + format_double(x[1]) + ',' +
                   format_double(decision(x)) + '\n';
        }
    }
    return out;
}

std::string report_text(const ExperimentReport &report) {
    const ExperimentConfig &cfg = report.config;
    std::ostringstream out;
    out << "method = " << method_name(cfg.method) << '\n'
        << "pattern = " << family_name(cfg.pattern.family) << '\n'
        << "samples = " << next_pow2(std::max<std::size_t>(cfg.pattern.samples, 2)) << '\n'
        << "requested_samples = " << cfg.pattern.samples << '\n'
        << "noise = " << format_double(cfg.pattern.noise) << '\n'
        << "normalize_features = " << (cfg.loss.normalize_features ? "true" : "false") << '\n'
        << "learning_rate = " << format_double(cfg.loss.learning_rate) << '\n'
        << "max_iters = " << cfg.loss.max_iters << '\n'
        << "grad_tol = " << format_double(cfg.loss.grad_tol) << '\n'
        << "damping = " << format_double(cfg.loss.damping) << '\n'
        << "ridge = " << format_double(cfg.ridge) << '\n'
        << "svm_kernel = " << kernel_name(cfg.dual_kernel) << '\n'
        << "tensor_svm_kernel = " << kernel_name(cfg.tensor_svm.kernel) << '\n'
        << "seeds =";
    for (std::uint64_t seed : cfg.seeds) {
        out << ' ' << seed;
    }
    out << "\n\n";
    for (const SeedResult &run : report.runs) {
        out << "[seed " << run.seed << "]\n";
        if (!run.ok) {
            out << "status = error\nerror = " << run.error << "\n\n";
            continue;
        }
        out << "status = ok\n"
            << "rcp = " << format_double(run.metrics.rcp) << '\n'
            << "mse = " << format_double(run.metrics.mse) << '\n'
            << "inf = " << format_double(run.metrics.inf) << '\n'
            << "iterations = " << run.iterations << '\n'
            << "converged = " << (run.converged ? "true" : "false") << '\n';
        if (!run.theta.empty()) {
            out << "theta = " << join(run.theta, ' ') << '\n';
        }
        out << '\n';
    }
    out << "[mean]\n"
        << "runs = " << report.runs.size() - report.failures << '\n'
        << "failures = " << report.failures << '\n'
        << "rcp = " << format_double(report.mean.rcp) << '\n'
        << "mse = " << format_double(report.mean.mse) << '\n'
        << "inf = " << format_double(report.mean.inf) << '\n';
    return out.str();
}

std::string metrics_csv(const ExperimentReport &report) {
    std::string out = "seed,status,rcp,mse,inf,iterations,converged\n";
    for (const SeedResult &run : report.runs) {
        out += std::to_string(run.seed) + ',';
        if (!run.ok) {
            out += "error,,,,,\n";
            continue;
        }
        out += "ok," + format_double(run.metrics.rcp) + ',' + format_double(run.metrics.mse) +
               ',' + format_double(run.metrics.inf) + ',' + std::to_string(run.iterations) + ',' +
               (run.converged ? "true" : "false") + '\n';
    }
    return out;
}

std::string loss_trace_csv(const ExperimentReport &report) {
    std::string out = "seed,iteration,value\n";
    for (const SeedResult &run : report.runs) {
        for (std::size_t i = 0; i < run.loss_trace.size(); ++i) {
            out += std::to_string(run.seed) + ',' + std::to_string(i) + ',' +
                   format_double(run.loss_trace[i]) + '\n';
        }
    }
    return out;
}

std::string theta_text(const ExperimentReport &report) {
    std::string out;
    for (const SeedResult &run : report.runs) {
        if (run.ok && !run.theta.empty()) {
            out += std::to_string(run.seed) + ' ' + join(run.theta, ' ') + '\n';
        }
    }
    return out;
}

std::string timing_csv(const ExperimentReport &report) {
    std::string out = "seed,seconds\n";
    for (const SeedResult &run : report.runs) {
        if (run.ok) {
            out += std::to_string(run.seed) + ',' + format_double(run.metrics.seconds) + '\n';
        }
    }
    return out;
}

void write_text(const std::filesystem::path &path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

void write_report_files(const ExperimentReport &report, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.txt", report_text(report));
    write_text(dir / "metrics.csv", metrics_csv(report));
    write_text(dir / "loss_trace.csv", loss_trace_csv(report));
    write_text(dir / "timing.csv", timing_csv(report));
    if (uses_angles(report.config.method)) {
        write_text(dir / "theta.txt", theta_text(report));
    }
}

} // namespace qrbf
