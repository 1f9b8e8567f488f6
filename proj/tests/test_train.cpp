#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qrbf/dataset.hpp"
#include "qrbf/error.hpp"
#include "qrbf/kernel.hpp"
#include "qrbf/train.hpp"

using namespace qrbf;

namespace {

Dataset blobs(std::size_t samples, std::uint64_t seed, double noise = 0.2) {
    PatternSpec spec;
    spec.samples = samples;
    spec.seed = seed;
    spec.noise = noise;
    return generate(spec);
}

// Loss of the oracle features at the oracle Kronecker weights.
double oracle_loss(const Eigen::MatrixXd &phi, const std::vector<double> &theta,
                   const Eigen::VectorXd &y) {
    return oracle::scalar_loss(phi, oracle::kron_weights(theta), y);
}

Eigen::VectorXd fd_gradient(const Eigen::MatrixXd &phi, const std::vector<double> &theta,
                            const Eigen::VectorXd &y, double h) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t j = 0; j < theta.size(); ++j) {
        std::vector<double> plus = theta;
        std::vector<double> minus = theta;
        plus[j] += h;
        minus[j] -= h;
        g[static_cast<Eigen::Index>(j)] =
            (oracle_loss(phi, plus, y) - oracle_loss(phi, minus, y)) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hessian(const Eigen::MatrixXd &phi, const std::vector<double> &theta,
                           const Eigen::VectorXd &y, double h) {
    const auto m = static_cast<Eigen::Index>(theta.size());
    Eigen::MatrixXd hess(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = 0; k < m; ++k) {
            auto at = [&](double dj, double dk) {
                std::vector<double> b = theta;
                b[static_cast<std::size_t>(j)] += dj;
                b[static_cast<std::size_t>(k)] += dk;
                return oracle_loss(phi, b, y);
            };
            hess(j, k) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        }
    }
    return hess;
}

struct Instance {
    Eigen::MatrixXd phi;
    Eigen::VectorXd y;
    std::vector<double> theta;
};

Instance random_instance(oracle::Gen &gen, std::size_t m, std::size_t samples, bool normalize) {
    const std::size_t count = std::size_t{1} << m;
    const Eigen::MatrixXd centers = gen.points(count, 2);
    const Eigen::MatrixXd pts = gen.points(samples, 2);
    const double sigma = oracle::brute_sigma(centers);
    return {oracle::features(pts, centers, sigma, normalize), gen.labels(samples), gen.angles(m)};
}

} // namespace

TEST_CASE("config validation") {
    LossConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.grad_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.damping = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(method_tag(TrainMethod::Newton) == "newton");
}

TEST_CASE("objective shape checks") {
    CHECK_THROWS_AS(Objective(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(Objective(Eigen::MatrixXd::Ones(4, 6), Eigen::VectorXd::Ones(4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(Objective(Eigen::MatrixXd::Ones(4, 4), Eigen::VectorXd::Ones(3)),
                    std::invalid_argument);
    const Objective obj(Eigen::MatrixXd::Ones(4, 4), Eigen::VectorXd::Ones(4));
    CHECK_THROWS_AS((void)obj.loss(TensorWeights({0.1})), std::invalid_argument);

    const Dataset ds = blobs(8, 1);
    const KernelModel model(ds);
    Dataset wrong_dim;
    wrong_dim.samples.push_back({Eigen::VectorXd::Zero(3), 1});
    CHECK_THROWS_AS(design_matrix(model, wrong_dim, {}), std::invalid_argument);
}

TEST_CASE("loss matches the scalar oracle") {
    oracle::Gen gen(20);
    for (bool normalize : {false, true}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Dataset ds = blobs(8, static_cast<std::uint64_t>(trial + 1));
            const KernelModel model(ds);
            LossConfig cfg;
            cfg.normalize_features = normalize;
            const std::vector<double> a = gen.angles(3);
            const Eigen::MatrixXd phi =
                oracle::features(ds.points(), ds.points(), model.sigma(), normalize);
            CHECK(oracle::rel_err(loss(TensorWeights(a), model, ds, cfg),
                                  oracle::scalar_loss(phi, oracle::kron_weights(a), ds.labels())) <=
                  1e-13);
        }
    }
}

TEST_CASE("center fast path agrees with the general design") {
    const Dataset ds = blobs(16, 3);
    const KernelModel model(ds);
    for (bool normalize : {false, true}) {
        LossConfig cfg;
        cfg.normalize_features = normalize;
        const Eigen::MatrixXd fast = design_matrix(model, ds, cfg);
        const Eigen::MatrixXd slow = feature_matrix(ds.points(), model, normalize);
        CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("constructed minimum: zero loss and zero gradient") {
    oracle::Gen gen(21);
    const Instance inst = random_instance(gen, 4, 16, true);
    const TensorWeights theta(inst.theta);
    const Eigen::VectorXd fitted = inst.phi * oracle::kron_weights(inst.theta);
    const Objective obj(inst.phi, fitted);
    CHECK(obj.loss(theta) <= 1e-30);
    CHECK(obj.gradient(theta).cwiseAbs().maxCoeff() <= 1e-12);

    LossConfig cfg;
    const TrainReport report = train_gd(obj, cfg, theta);
    CHECK(report.iterations == 0);
    CHECK(report.converged);
    CHECK(report.loss_trace.size() == 1);
}

TEST_CASE("one-parameter hand instance") {
    // L = 1/4 sum_t (a_t cos x + b_t sin x - y_t)^2, dL/dx = 1/2 sum_t r_t (b_t cos x - a_t sin x)
    Eigen::MatrixXd phi(2, 2);
    phi << 0.9, 0.3, 0.2, 0.7;
    const Eigen::VectorXd y = Eigen::Vector2d(1.0, -1.0);
    const Objective obj(phi, y);
    for (double x : {-2.0, -0.3, 0.0, 0.8, 2.5}) {
        double grad = 0.0;
        double second = 0.0;
        for (int t = 0; t < 2; ++t) {
            const double a = phi(t, 0);
            const double b = phi(t, 1);
            const double r = a * std::cos(x) + b * std::sin(x) - y[t];
            const double dr = b * std::cos(x) - a * std::sin(x);
            const double ddr = -a * std::cos(x) - b * std::sin(x);
            grad += 0.5 * r * dr;
            second += 0.5 * (dr * dr + r * ddr);
        }
        const TensorWeights theta({x});
        CHECK(std::abs(obj.gradient(theta)[0] - grad) <= 1e-15);
        CHECK(std::abs(obj.hessian(theta)(0, 0) - second) <= 1e-15);
    }
}

TEST_CASE("gradient matches central differences") {
    oracle::Gen gen(22);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = static_cast<std::size_t>(gen.integer(1, 6));
        const auto samples = static_cast<std::size_t>(gen.integer(2, 64));
        const bool normalize = trial % 2 == 0;
        const Instance inst = random_instance(gen, m, samples, normalize);
        const Objective obj(inst.phi, inst.y);
        const Eigen::VectorXd g = obj.gradient(TensorWeights(inst.theta));
        const Eigen::VectorXd fd = fd_gradient(inst.phi, inst.theta, inst.y, 1e-5);
        for (Eigen::Index j = 0; j < g.size(); ++j) {
            CHECK(oracle::rel_err(g[j], fd[j], 1e-8) <= 1e-6);
        }
    }
}

TEST_CASE("Hessian is symmetric and matches second differences") {
    oracle::Gen gen(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = static_cast<std::size_t>(gen.integer(1, 6));
        const Instance inst = random_instance(gen, m, std::size_t{1} << m, trial % 2 == 1);
        const Objective obj(inst.phi, inst.y);
        const Eigen::MatrixXd h = obj.hessian(TensorWeights(inst.theta));
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        const Eigen::MatrixXd fd = fd_hessian(inst.phi, inst.theta, inst.y, 1e-4);
        for (Eigen::Index j = 0; j < h.rows(); ++j) {
            for (Eigen::Index k = 0; k < h.cols(); ++k) {
                CHECK(oracle::rel_err(h(j, k), fd(j, k), 1e-6) <= 1e-4);
            }
        }
    }
}

TEST_CASE("loss is invariant under sample permutation") {
    oracle::Gen gen(24);
    const Instance inst = random_instance(gen, 4, 16, true);
    std::vector<Eigen::Index> order(16);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen.eng);
    Eigen::MatrixXd phi(16, 16);
    Eigen::VectorXd y(16);
    for (Eigen::Index r = 0; r < 16; ++r) {
        phi.row(r) = inst.phi.row(order[static_cast<std::size_t>(r)]);
        y[r] = inst.y[order[static_cast<std::size_t>(r)]];
    }
    const TensorWeights theta(inst.theta);
    CHECK(oracle::rel_err(Objective(phi, y).loss(theta), Objective(inst.phi, inst.y).loss(theta)) <=
          1e-14);
}

TEST_CASE("gradient descent") {
    const Dataset ds = blobs(16, 5);
    const KernelModel model(ds);
    LossConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.max_iters = 500;
    const TensorWeights theta0 = random_theta(4, 9);

    const TrainReport a = train_gd(model, ds, cfg, theta0);
    CHECK(a.loss_trace.back() < a.loss_trace.front());
    CHECK(a.method == TrainMethod::Gd);
    CHECK(a.loss_trace.size() == static_cast<std::size_t>(a.iterations) + 1);
    for (std::size_t i = 1; i < a.loss_trace.size(); ++i) {
        CHECK(a.loss_trace[i] <= a.loss_trace[i - 1] + 1e-15);
    }
    const TrainReport b = train_gd(model, ds, cfg, theta0);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.theta == b.theta);
}

TEST_CASE("divergence is reported") {
    const Objective obj(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Constant(4, 2000.0));
    CHECK_THROWS_AS(train_gd(obj, {}, TensorWeights({0.1, 0.2})), DivergenceError);
    CHECK_THROWS_AS(train_newton(obj, {}, TensorWeights({0.1, 0.2})), DivergenceError);
}

TEST_CASE("Newton converges quickly near a minimum") {
    oracle::Gen gen(25);
    const Dataset ds = blobs(64, 6);
    const KernelModel model(ds);
    LossConfig cfg;
    cfg.grad_tol = 1e-8;
    const Eigen::MatrixXd design = design_matrix(model, ds, cfg);
    const std::vector<double> star = gen.angles(6);
    const Objective obj(design, design * oracle::kron_weights(star));
    std::vector<double> start = star;
    for (double &t : start) {
        t += gen.uniform(-0.05, 0.05);
    }
    const TrainReport newton = train_newton(obj, cfg, TensorWeights(start));
    const TrainReport gd = train_gd(obj, cfg, TensorWeights(start));
    CHECK(newton.converged);
    CHECK(newton.iterations <= 10);
    CHECK(gd.iterations >= 100);
    for (std::size_t i = 1; i < newton.loss_trace.size(); ++i) {
        CHECK(newton.loss_trace[i] <= newton.loss_trace[i - 1]);
    }
}

TEST_CASE("Newton on blobs reaches the gradient tolerance") {
    const Dataset ds = blobs(64, 7);
    const KernelModel model(ds);
    LossConfig cfg;
    const TrainReport report = train_newton(model, ds, cfg, random_theta(6, 3));
    CHECK(report.converged);
    CHECK(report.grad_norm <= cfg.grad_tol);
    CHECK(report.method == TrainMethod::Newton);
}

TEST_CASE("uphill Newton trials are rejected") {
    // Undamped steps from random starts overshoot on some instances; every
    // recorded loss must still be non-increasing.
    oracle::Gen gen(26);
    LossConfig cfg;
    cfg.damping = 0.0;
    cfg.max_iters = 200;
    int rejected_runs = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const Instance inst = random_instance(gen, 3, 8, true);
        const Objective obj(inst.phi, inst.y);
        const TrainReport report = train_newton(obj, cfg, TensorWeights(inst.theta));
        rejected_runs += report.rejected_steps > 0 ? 1 : 0;
        for (std::size_t i = 1; i < report.loss_trace.size(); ++i) {
            CHECK(report.loss_trace[i] <= report.loss_trace[i - 1]);
        }
    }
    CHECK(rejected_runs > 0);
}

TEST_CASE("full least squares") {
    SUBCASE("identity Gram returns the targets") {
        const Eigen::VectorXd y = Eigen::Vector4d(1, -1, 1, -1);
        const Eigen::VectorXd w = train_full_lstsq(Eigen::MatrixXd::Identity(4, 4), y, 0.0);
        CHECK((w - y).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SUBCASE("blobs interpolate to tiny MSE") {
        const Dataset ds = blobs(256, 8);
        const KernelModel model(ds);
        const Eigen::VectorXd w = train_full_lstsq(model, ds);
        const Eigen::VectorXd out = model.gram() * w;
        const double mse = 0.5 * (out - ds.labels()).squaredNorm() / 256.0;
        CHECK(mse <= 1e-6);
    }
    SUBCASE("normal-equation identity") {
        oracle::Gen gen(27);
        const Eigen::MatrixXd pts = gen.points(32, 2);
        const KernelModel model(pts, 0.5);
        const Eigen::VectorXd y = gen.labels(32);
        const double ridge = 1e-6;
        const Eigen::VectorXd w = train_full_lstsq(model.gram(), y, ridge);
        const Eigen::VectorXd lhs = model.gram().transpose() * (model.gram() * w - y);
        CHECK((lhs + ridge * w).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS(train_full_lstsq(Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Ones(2)),
                        std::invalid_argument);
        CHECK_THROWS_AS(train_full_lstsq(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2),
                                         -1.0),
                        std::invalid_argument);
        Eigen::MatrixXd broken = Eigen::MatrixXd::Identity(2, 2);
        broken(0, 1) = broken(1, 0) = NAN;
        CHECK_THROWS_AS(train_full_lstsq(broken, Eigen::VectorXd::Ones(2)), std::runtime_error);
        const Dataset ds = blobs(8, 1);
        const KernelModel other(blobs(8, 2));
        CHECK_THROWS_AS(train_full_lstsq(other, ds), std::invalid_argument);
    }
}

TEST_CASE("classification threshold") {
    CHECK(classify(0.0) == 1);
    CHECK(classify(-0.0) == 1);
    CHECK(classify(1e-300) == 1);
    CHECK(classify(-1e-300) == -1);
}
