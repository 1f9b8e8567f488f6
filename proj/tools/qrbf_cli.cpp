// Command-line front end: dataset generation, training runs, evaluation,
// m sweeps, decision grids and method comparisons.

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrbf/dataset.hpp"
#include "qrbf/error.hpp"
#include "qrbf/experiment.hpp"
#include "qrbf/kernel.hpp"
#include "qrbf/svm.hpp"
#include "qrbf/train.hpp"

namespace fs = std::filesystem;
using namespace qrbf;

namespace {

std::string trim(const std::string &s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string &text) {
    std::vector<std::string> items;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            items.push_back(item);
        }
    }
    return items;
}

std::uint64_t parse_u64(const std::string &text) {
    std::uint64_t value = 0;
    const char *end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw std::invalid_argument("invalid seed '" + text + "'");
    }
    return value;
}

// "1,2,5" or "1-10" or a mix such as "1-3,7".
std::vector<std::uint64_t> parse_seeds(const std::string &text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(parse_u64(item));
            continue;
        }
        const std::uint64_t lo = parse_u64(trim(item.substr(0, dash)));
        const std::uint64_t hi = parse_u64(trim(item.substr(dash + 1)));
        if (hi < lo || hi - lo > 100000) {
            throw std::invalid_argument("invalid seed range '" + item + "'");
        }
        for (std::uint64_t s = lo; s <= hi; ++s) {
            seeds.push_back(s);
        }
    }
    if (seeds.empty()) {
        throw std::invalid_argument("seed list is empty");
    }
    return seeds;
}

SvmKernel parse_kernel(const std::string &name) {
    if (name == "explicit") {
        return SvmKernel::ExplicitFeatures;
    }
    if (name == "kernel-trick") {
        return SvmKernel::KernelTrick;
    }
    throw std::invalid_argument("unknown SVM kernel '" + name +
                                "' (expected explicit or kernel-trick)");
}

// Lines `key = value` become `--key=value`; '#' starts a comment.
std::vector<std::string> read_config_tokens(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path.string());
    }
    std::vector<std::string> tokens;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(number, "expected key = value in " + path.string());
        }
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) {
            key.erase(0, 2);
        }
        if (key.empty() || key == "config") {
            throw ParseError(number, "invalid key in " + path.string());
        }
        tokens.push_back("--" + key + "=" + value);
    }
    return tokens;
}

struct ExperimentOptions {
    std::string pattern = "blobs";
    std::size_t samples = 256;
    double noise = 0.1;
    std::string seeds = "1";
    std::string method = "tensor-gd";
    bool normalize = true;
    double learning_rate = 1.0;
    int max_iters = 5000;
    double grad_tol = 1e-6;
    double damping = 1e-3;
    double ridge = 1e-10;
    int svm_iters = 5000;
    std::string svm_kernel = "explicit";
    std::string tensor_svm_kernel = "kernel-trick";
    double mu = 10.0;
    double nu = 10.0;
    int rounds = 12;
    std::string out = ".";

    void add_to(CLI::App &app, bool with_method) {
        app.add_option("--pattern", pattern,
                       "blobs, annulus, xor-quadrants or checkerboard")
            ->capture_default_str();
        app.add_option("--samples", samples, "training samples (rounded up to 2^m)")
            ->capture_default_str();
        app.add_option("--noise", noise, "pattern noise parameter")->capture_default_str();
        app.add_option("--seeds,--seed", seeds, "seed list, e.g. 1-10 or 1,4,9")
            ->capture_default_str();
        if (with_method) {
            app.add_option("--method", method,
                           "tensor-gd, tensor-newton, full-lstsq, svm-dual or svm-tensor")
                ->capture_default_str();
        }
        app.add_option("--normalize", normalize, "unit-norm feature states (tensor methods)")
            ->capture_default_str();
        app.add_option("--learning-rate", learning_rate)->capture_default_str();
        app.add_option("--max-iters", max_iters)->capture_default_str();
        app.add_option("--grad-tol", grad_tol)->capture_default_str();
        app.add_option("--damping", damping, "initial Newton damping")->capture_default_str();
        app.add_option("--ridge", ridge, "least-squares ridge")->capture_default_str();
        app.add_option("--svm-iters", svm_iters, "dual SVM iterations")->capture_default_str();
        app.add_option("--svm-kernel", svm_kernel, "dual SVM kernel: explicit or kernel-trick")
            ->capture_default_str();
        app.add_option("--tensor-svm-kernel", tensor_svm_kernel,
                       "tensor SVM kernel: explicit or kernel-trick")
            ->capture_default_str();
        app.add_option("--mu", mu, "tensor SVM balance penalty")->capture_default_str();
        app.add_option("--nu", nu, "tensor SVM sign penalty")->capture_default_str();
        app.add_option("--rounds", rounds, "tensor SVM penalty rounds")->capture_default_str();
        app.add_option("--out", out, "output directory")->capture_default_str();
    }

    [[nodiscard]] ExperimentConfig config() const {
        ExperimentConfig cfg;
        cfg.pattern.family = parse_family(pattern);
        cfg.pattern.samples = samples;
        cfg.pattern.noise = noise;
        cfg.method = parse_method(method);
        cfg.loss.normalize_features = normalize;
        cfg.loss.learning_rate = learning_rate;
        cfg.loss.max_iters = max_iters;
        cfg.loss.grad_tol = grad_tol;
        cfg.loss.damping = damping;
        cfg.ridge = ridge;
        cfg.dual.iters = svm_iters;
        cfg.dual_kernel = parse_kernel(svm_kernel);
        cfg.tensor_svm.kernel = parse_kernel(tensor_svm_kernel);
        cfg.tensor_svm.mu = mu;
        cfg.tensor_svm.nu = nu;
        cfg.tensor_svm.rounds = rounds;
        cfg.seeds = parse_seeds(seeds);
        cfg.output_dir = out;
        cfg.validate();
        return cfg;
    }
};

void print_summary(const ExperimentReport &report) {
    std::cout << method_name(report.config.method) << ": rcp=" << format_double(report.mean.rcp)
              << " mse=" << format_double(report.mean.mse)
              << " inf=" << format_double(report.mean.inf)
              << " mean_seconds=" << format_double(report.mean.seconds)
              << " failures=" << report.failures << '\n';
    for (const SeedResult &run : report.runs) {
        if (!run.ok) {
            std::cerr << "seed " << run.seed << " failed: " << run.error << '\n';
        }
    }
}

int finish(const ExperimentReport &report) {
    return report.failures == report.runs.size() ? 2 : 0;
}

// Reads the angle line for `seed` (or the first line) from a theta file.
TensorWeights read_theta(const fs::path &path, std::optional<std::uint64_t> seed) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open theta file " + path.string());
    }
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream fields(line);
        std::string first;
        if (!(fields >> first)) {
            continue;
        }
        if (seed && parse_u64(first) != *seed) {
            continue;
        }
        std::vector<double> angles;
        std::string token;
        while (fields >> token) {
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
            if (ec != std::errc{} || ptr != token.data() + token.size()) {
                throw ParseError(number, "invalid angle '" + token + "'");
            }
            angles.push_back(value);
        }
        return TensorWeights(std::move(angles));
    }
    throw std::runtime_error("no angles found in " + path.string());
}

int run_gen(const PatternSpec &spec, const std::string &out) {
    const Dataset ds = generate(spec);
    if (out.empty() || out == "-") {
        std::cout << to_csv(ds);
    } else {
        save_csv(ds, out);
        std::cerr << "wrote " << ds.size() << " samples to " << out << '\n';
    }
    return 0;
}

int run_train(const ExperimentOptions &opts) {
    const ExperimentConfig cfg = opts.config();
    const ExperimentReport report = run_experiment(cfg);
    write_report_files(report, cfg.output_dir);
    print_summary(report);
    return finish(report);
}

struct EvalOptions {
    std::string data;
    std::string test;
    std::string theta;
    std::optional<std::uint64_t> seed;
    bool normalize = true;
};

int run_eval(const EvalOptions &opts) {
    const Dataset train = arrange_by_label(load_csv(opts.data));
    const KernelModel model(train);
    LossConfig loss_cfg;
    loss_cfg.normalize_features = opts.normalize;
    FittedModel fitted(Method::TensorGd, model, opts.normalize);
    const TensorWeights theta = read_theta(opts.theta, opts.seed);
    const Objective objective = make_objective(model, train, loss_cfg);
    if (theta.size() != objective.num_params()) {
        throw std::invalid_argument("theta has " + std::to_string(theta.size()) +
                                    " angles but the training set needs " +
                                    std::to_string(objective.num_params()));
    }
    const Eigen::VectorXd outputs = objective.predict(theta);
    fitted.set_tensor(theta);
    std::cout << "rcp=" << format_double(rcp(outputs, train.labels()))
              << " mse=" << format_double(mse(outputs, train.labels()));
    if (!opts.test.empty()) {
        const Dataset test = load_csv(opts.test);
        std::cout << " inf=" << format_double(rcp(fitted.decisions(test.points()), test.labels()));
    }
    std::cout << '\n';
    return 0;
}

int run_sweep(const ExperimentOptions &opts, std::size_t m_min, std::size_t m_max) {
    const ExperimentConfig cfg = opts.config();
    const std::vector<SweepRow> rows = sweep_m(cfg, m_min, m_max);
    const std::string csv = sweep_csv(rows);
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "sweep.csv", csv);
    std::cout << csv;
    return 0;
}

int run_grid(const ExperimentOptions &opts, std::size_t resolution, const std::vector<double> &box) {
    ExperimentConfig cfg = opts.config();
    if (box.size() != 4) {
        throw std::invalid_argument("--bounds needs xmin,xmax,ymin,ymax");
    }
    const std::uint64_t seed = cfg.seeds.front();
    PatternSpec spec = cfg.pattern;
    spec.seed = seed;
    const Dataset train = arrange_by_label(generate(spec));
    const FitResult fitted = fit(cfg, train, seed);
    const GridBounds bounds{box[0], box[1], box[2], box[3]};
    const std::string csv = export_decision_grid(
        [&](const Eigen::VectorXd &x) { return fitted.model.decision(x); }, bounds, resolution);
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "grid.csv", csv);
    std::cout << "wrote " << resolution * resolution << " grid points to "
              << (cfg.output_dir / "grid.csv").string() << '\n';
    return 0;
}

int run_compare(const ExperimentOptions &opts, const std::vector<std::string> &methods) {
    const ExperimentConfig base = opts.config();
    std::string csv = "method,samples,rcp,mse,inf,failures\n";
    std::ostringstream table;
    table << "method          rcp         mse           inf         seconds\n";
    bool any_ok = false;
    for (const std::string &name : methods) {
        ExperimentConfig cfg = base;
        cfg.method = parse_method(name);
        const ExperimentReport report = run_experiment(cfg);
        write_report_files(report, base.output_dir / std::string(method_name(cfg.method)));
        any_ok = any_ok || report.failures < report.runs.size();
        csv += std::string(method_name(cfg.method)) + ',' +
               std::to_string(next_pow2(cfg.pattern.samples)) + ',' +
               format_double(report.mean.rcp) + ',' + format_double(report.mean.mse) + ',' +
               format_double(report.mean.inf) + ',' + std::to_string(report.failures) + '\n';
        char line[160];
        std::snprintf(line, sizeof(line), "%-15s %-11.6f %-13.6g %-11.6f %.4f\n",
                      std::string(method_name(cfg.method)).c_str(), report.mean.rcp,
                      report.mean.mse, report.mean.inf, report.mean.seconds);
        table << line;
        for (const SeedResult &run : report.runs) {
            if (!run.ok) {
                std::cerr << name << " seed " << run.seed << " failed: " << run.error << '\n';
            }
        }
    }
    write_text(base.output_dir / "compare.csv", csv);
    std::cout << table.str();
    return any_ok ? 0 : 2;
}

} // namespace

int main(int argc, char **argv) {
    std::vector<std::string> args(argv, argv + argc);
    try {
        for (std::size_t i = 1; i < args.size(); ++i) {
            std::optional<std::string> path;
            if (args[i] == "--config" && i + 1 < args.size()) {
                path = args[i + 1];
            } else if (args[i].rfind("--config=", 0) == 0) {
                path = args[i].substr(9);
            }
            if (path) {
                // Appended last so that, with TakeLast, file values win over flags.
                for (std::string &token : read_config_tokens(*path)) {
                    args.push_back(std::move(token));
                }
                break;
            }
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    CLI::App app{"Tensor-product-weight RBF classifiers and their circuit emulation"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "key = value file overriding flags");

    auto *gen = app.add_subcommand("gen", "generate a labeled pattern as CSV");
    std::string gen_pattern = "blobs";
    PatternSpec gen_spec;
    std::string gen_out;
    gen->add_option("--pattern", gen_pattern)->capture_default_str();
    gen->add_option("--samples", gen_spec.samples)->capture_default_str();
    gen->add_option("--noise", gen_spec.noise)->capture_default_str();
    gen->add_option("--seed", gen_spec.seed)->capture_default_str();
    gen->add_option("--out", gen_out, "CSV path (stdout when omitted)");
    gen->add_option("--config", config_path);

    auto *train = app.add_subcommand("train", "train over seeds and write report files");
    ExperimentOptions train_opts;
    train_opts.add_to(*train, true);
    train->add_option("--config", config_path);

    auto *eval = app.add_subcommand("eval", "score saved angles on a CSV dataset");
    EvalOptions eval_opts;
    std::uint64_t eval_seed = 0;
    eval->add_option("--data", eval_opts.data, "training CSV the angles were fitted on")
        ->required();
    eval->add_option("--theta", eval_opts.theta, "theta.txt from a train run")->required();
    eval->add_option("--test", eval_opts.test, "held-out CSV");
    auto *eval_seed_opt =
        eval->add_option("--seed", eval_seed, "which line of theta.txt (default: first)");
    eval->add_option("--normalize", eval_opts.normalize)->capture_default_str();
    eval->add_option("--config", config_path);

    auto *sweep = app.add_subcommand("sweep", "average metrics over m = log2 M");
    ExperimentOptions sweep_opts;
    std::size_t m_min = 4;
    std::size_t m_max = 10;
    sweep_opts.add_to(*sweep, true);
    sweep->add_option("--m-min", m_min)->capture_default_str();
    sweep->add_option("--m-max", m_max)->capture_default_str();
    sweep->add_option("--config", config_path);

    auto *grid = app.add_subcommand("grid", "export decision values on a uniform grid");
    ExperimentOptions grid_opts;
    grid_opts.method = "svm-dual";
    std::size_t resolution = 50;
    std::string box = "-1,1,-1,1";
    grid_opts.add_to(*grid, true);
    grid->add_option("--resolution", resolution)->capture_default_str();
    grid->add_option("--bounds", box, "xmin,xmax,ymin,ymax")->capture_default_str();
    grid->add_option("--config", config_path);

    auto *compare = app.add_subcommand("compare", "run several methods on the same data");
    ExperimentOptions compare_opts;
    std::string methods = "tensor-gd,tensor-newton,full-lstsq,svm-dual,svm-tensor";
    compare_opts.add_to(*compare, false);
    compare->add_option("--methods", methods, "comma-separated method list")
        ->capture_default_str();
    compare->add_option("--config", config_path);

    std::vector<const char *> raw;
    raw.reserve(args.size());
    for (const std::string &a : args) {
        raw.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (*gen) {
            gen_spec.family = parse_family(gen_pattern);
            return run_gen(gen_spec, gen_out);
        }
        if (*train) {
            return run_train(train_opts);
        }
        if (*eval) {
            if (eval_seed_opt->count() > 0) {
                eval_opts.seed = eval_seed;
            }
            return run_eval(eval_opts);
        }
        if (*sweep) {
            return run_sweep(sweep_opts, m_min, m_max);
        }
        if (*grid) {
            std::vector<double> bounds;
            for (const std::string &item : split_list(box)) {
                double value = 0.0;
                auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
                if (ec != std::errc{} || ptr != item.data() + item.size()) {
                    throw std::invalid_argument("invalid bound '" + item + "'");
                }
                bounds.push_back(value);
            }
            return run_grid(grid_opts, resolution, bounds);
        }
        if (*compare) {
            return run_compare(compare_opts, split_list(methods));
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
