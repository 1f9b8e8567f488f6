#include <doctest.h>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "qrbf/dataset.hpp"
#include "qrbf/kernel.hpp"
#include "qrbf/qsim.hpp"
#include "qrbf/train.hpp"

using namespace qrbf;

namespace {

QubitState random_state(oracle::Gen &gen, std::size_t qubits) {
    std::vector<std::complex<double>> amps(std::size_t{1} << qubits);
    double norm = 0.0;
    for (auto &a : amps) {
        a = {gen.uniform(-1, 1), gen.uniform(-1, 1)};
        norm += std::norm(a);
    }
    for (auto &a : amps) {
        a /= std::sqrt(norm);
    }
    return QubitState(amps);
}

Dataset random_dataset(oracle::Gen &gen, std::size_t count, std::size_t dim) {
    Dataset ds;
    for (std::size_t t = 0; t < count; ++t) {
        ds.samples.push_back({gen.vec(dim), t < count / 2 ? 1 : -1});
    }
    return ds;
}

} // namespace

TEST_CASE("qubit states validate their input") {
    CHECK_THROWS_AS(QubitState({1.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(QubitState({1.0, 1.0}), std::invalid_argument);
    const QubitState b = QubitState::basis(3, 5);
    CHECK(b.num_qubits() == 3);
    CHECK(b[5] == std::complex<double>(1.0, 0.0));
    CHECK_THROWS_AS(QubitState::basis(3, 8), std::out_of_range);
    CHECK_THROWS_AS(apply_weight_unitary(TensorWeights({0.1, 0.2}), b), std::invalid_argument);
}

TEST_CASE("weight unitary") {
    oracle::Gen gen(30);
    SUBCASE("zero angles act as the identity") {
        const QubitState s = random_state(gen, 4);
        const QubitState out = apply_weight_unitary(TensorWeights(std::vector<double>(4, 0.0)), s);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(std::abs(out[i] - s[i]) == 0.0);
        }
    }
    SUBCASE("maps w(theta) to the all-zero basis state") {
        const std::vector<double> a = gen.angles(5);
        const QubitState w = QubitState::from_real(oracle::kron_weights(a));
        const QubitState out = apply_weight_unitary(TensorWeights(a), w);
        CHECK(std::abs(out[0] - 1.0) <= 1e-13);
    }
    SUBCASE("first amplitude is the tensor inner product") {
        for (int trial = 0; trial < 20; ++trial) {
            const std::vector<double> a = gen.angles(6);
            const Eigen::VectorXd v = gen.vec(64).normalized();
            const QubitState out = apply_weight_unitary(TensorWeights(a), QubitState::from_real(v));
            CHECK(std::abs(out[0].real() - fast_inner(TensorWeights(a), v)) <= 1e-12);
            CHECK(std::abs(out[0].real() - oracle::kron_weights(a).dot(v)) <= 1e-12);
        }
    }
    SUBCASE("adjoint prepares w(theta) and undoes the forward map") {
        for (int trial = 0; trial < 10; ++trial) {
            const std::vector<double> a = gen.angles(5);
            const QubitState prepared =
                apply_weight_unitary_adjoint(TensorWeights(a), QubitState::basis(5, 0));
            const Eigen::VectorXd w = oracle::kron_weights(a);
            for (std::size_t i = 0; i < prepared.size(); ++i) {
                CHECK(std::abs(prepared[i] - w[static_cast<Eigen::Index>(i)]) <= 1e-13);
            }
            const QubitState s = random_state(gen, 5);
            const QubitState back = apply_weight_unitary_adjoint(
                TensorWeights(a), apply_weight_unitary(TensorWeights(a), s));
            for (std::size_t i = 0; i < s.size(); ++i) {
                CHECK(std::abs(back[i] - s[i]) <= 1e-13);
            }
            CHECK(std::abs(back.norm() - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("coherent truncation") {
    SUBCASE("vacuum") {
        const TruncatedCoherentState s = coherent_truncate(0.0, 1.0, 1e-8);
        CHECK(s.cutoff == 1);
        CHECK(s.amplitudes[0] == 1.0);
    }
    SUBCASE("unit ratio picks N = 12 for eps = 1e-8") {
        const TruncatedCoherentState s = coherent_truncate(1.0, 1.0, 1e-8);
        CHECK(s.cutoff == 12);
        CHECK(oracle::tail_sum(1.0, 12) <= 1e-8 / std::exp(1.0));
        double fact = 1.0;
        for (int k = 2; k <= 11; ++k) {
            fact *= k;
        }
        CHECK(std::exp(1.0) / fact > 1e-8);
        CHECK(std::exp(1.0) / (fact * 12.0) <= 1e-8);
    }
    SUBCASE("normalized amplitudes proportional to u^k / sqrt(k!)") {
        const TruncatedCoherentState s = coherent_state(-0.7, 0.5, 9);
        CHECK(std::abs(s.amplitudes.norm() - 1.0) <= 1e-15);
        const double u = -1.4;
        for (Eigen::Index k = 1; k < 9; ++k) {
            const double ratio = s.amplitudes[k] / s.amplitudes[k - 1];
            CHECK(std::abs(ratio - u / std::sqrt(static_cast<double>(k))) <= 1e-13);
        }
    }
    SUBCASE("direct tail sum is within eps") {
        for (double u : {0.3, 0.5, 1.0, 2.0, 3.0}) {
            for (double eps : {1e-4, 1e-8, 1e-12}) {
                const TruncatedCoherentState s = coherent_truncate(u, 1.0, eps);
                CHECK(oracle::tail_sum(u, s.cutoff) <= eps);
                CHECK(oracle::rel_err(coherent_tail_mass(u, s.cutoff),
                                      oracle::tail_sum(u, s.cutoff)) <= 1e-10);
            }
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(coherent_truncate(1.0, 0.0, 1e-8), std::invalid_argument);
        CHECK_THROWS_AS(coherent_truncate(1.0, 1.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(coherent_truncate(1.0, 1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(coherent_truncate(20.0, 1.0, 1e-12), std::invalid_argument);
        CHECK_THROWS_AS(coherent_state(1.0, 1.0, 0), std::invalid_argument);
    }
}

TEST_CASE("coherent overlaps approach the Gaussian kernel") {
    const TruncatedCoherentState self = coherent_truncate(0.8, 1.0, 1e-10);
    CHECK(std::abs(coherent_overlap(self, self) - 1.0) <= 1e-12);

    const TruncatedCoherentState vac = coherent_state(0.0, 1.0, 40);
    const TruncatedCoherentState one = coherent_state(1.0, 1.0, 40);
    CHECK(std::abs(coherent_overlap(vac, one) - std::exp(-0.5)) <= 1e-10);

    oracle::Gen gen(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd x = gen.vec(2);
        const Eigen::VectorXd y = gen.vec(2);
        const double sigma = gen.uniform(0.3, 1.0);
        const auto a = coherent_vector_state(x, sigma, 1e-10);
        const auto b = coherent_vector_state(y, sigma, 1e-10);
        const double want = std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
        // Each point keeps its own cutoff, so the error envelope is sqrt(eps).
        CHECK(std::abs(coherent_overlap(a, b) - want) <= std::sqrt(1e-10));
    }
    CHECK_THROWS_AS(coherent_overlap(coherent_state(1, 1.0, 4), coherent_state(1, 2.0, 4)),
                    std::invalid_argument);
}

TEST_CASE("overlap error does not grow with the cutoff") {
    for (double u : {0.5, 1.0, 2.0}) {
        double previous = INFINITY;
        for (std::size_t n = 1; n <= 40; ++n) {
            const double err = std::abs(
                coherent_overlap(coherent_state(0.0, 1.0, n), coherent_state(u, 1.0, n)) -
                std::exp(-0.5 * u * u));
            CHECK(err <= previous + 1e-15);
            previous = err;
        }
    }
}

TEST_CASE("density matrix from coherent states") {
    SUBCASE("duplicate samples") {
        Dataset ds;
        const Eigen::Vector2d x(0.3, -0.2);
        ds.samples = {{x, 1}, {x, -1}};
        const Eigen::MatrixXd rho = build_rho_from_coherent(ds, 0.5, 1e-10).rho;
        CHECK((rho.array() - 0.5).abs().maxCoeff() <= 1e-10);
    }
    SUBCASE("matches the kernel density operator") {
        oracle::Gen gen(32);
        for (std::size_t count : {2U, 4U, 8U, 16U}) {
            const Dataset ds = random_dataset(gen, count, 2);
            const KernelModel model(ds);
            const Eigen::MatrixXd rho = build_rho_from_coherent(ds, model.sigma(), 1e-10).rho;
            CHECK(std::abs(rho.trace() - 1.0) <= 1e-12);
            CHECK((rho - density_operator(model).rho).cwiseAbs().maxCoeff() <= 1e-6);
        }
    }
    SUBCASE("size guards") {
        oracle::Gen gen(33);
        CHECK_THROWS_AS(build_rho_from_coherent(random_dataset(gen, 6, 2), 1.0, 1e-6),
                        std::invalid_argument);
        CHECK_THROWS_AS(build_rho_from_coherent(random_dataset(gen, 4, 8), 1.0, 1e-12),
                        std::invalid_argument);
    }
}

TEST_CASE("interference readout") {
    oracle::Gen gen(34);
    SUBCASE("exact probabilities invert to the inner product") {
        for (int trial = 0; trial < 30; ++trial) {
            const auto m = static_cast<std::size_t>(gen.integer(1, 6));
            const Eigen::MatrixXd centers = gen.points(std::size_t{1} << m, 2);
            const KernelModel model(centers, oracle::brute_sigma(centers));
            const std::vector<double> a = gen.angles(m);
            const Eigen::VectorXd x = gen.vec(2);
            const ReadoutResult res = hadamard_test_readout(TensorWeights(a), x, model);

            Eigen::MatrixXd as_row(1, 2);
            as_row.row(0) = x.transpose();
            const Eigen::VectorXd f = oracle::features(as_row, centers, model.sigma(), true).row(0);
            const double amp = oracle::kron_weights(a).dot(f);
            const double r = res.norm_sq;
            CHECK(std::abs(res.estimate - amp) <= 1e-10);
            CHECK(std::abs(res.p_plus - std::pow(std::sqrt(r) * amp - 1.0, 2) / (2 * (r + 1))) <=
                  1e-12);
            CHECK(std::abs(res.p_minus - std::pow(std::sqrt(r) * amp + 1.0, 2) / (2 * (r + 1))) <=
                  1e-12);
            CHECK(std::abs(res.p_plus + res.p_minus - (r * amp * amp + 1.0) / (r + 1.0)) <= 1e-12);
            CHECK(res.p_plus + res.p_minus <= 1.0 + 1e-12);
            CHECK_FALSE(res.shots.has_value());
        }
    }
    SUBCASE("shot noise shrinks like one over root shots") {
        const Eigen::MatrixXd centers = gen.points(8, 2);
        const KernelModel model(centers, oracle::brute_sigma(centers));
        const TensorWeights theta(gen.angles(3));
        const Eigen::VectorXd x = gen.vec(2);
        const double exact = hadamard_test_readout(theta, x, model).estimate;
        auto rms = [&](std::uint64_t shots) {
            double total = 0.0;
            for (std::uint64_t trial = 0; trial < 50; ++trial) {
                const double e = hadamard_test_readout(theta, x, model, shots, trial).estimate;
                total += (e - exact) * (e - exact);
            }
            return std::sqrt(total / 50.0);
        };
        const double ratio = rms(10000) / rms(1000000);
        CHECK(ratio > 5.0);
        CHECK(ratio < 20.0);
    }
    SUBCASE("shot mode is seeded") {
        const Eigen::MatrixXd centers = gen.points(4, 2);
        const KernelModel model(centers, 0.5);
        const TensorWeights theta({0.3, 1.1});
        const Eigen::VectorXd x = gen.vec(2);
        const ReadoutResult a = hadamard_test_readout(theta, x, model, 1000, 7);
        const ReadoutResult b = hadamard_test_readout(theta, x, model, 1000, 7);
        CHECK(a.estimate == b.estimate);
        CHECK(a.shots == std::optional<std::uint64_t>(1000));
        CHECK(a.p_plus >= 0.0);
        CHECK(a.p_plus + a.p_minus <= 1.0);
        CHECK_THROWS_AS(hadamard_test_readout(theta, x, model, 0), std::invalid_argument);
    }
}

TEST_CASE("gradient quantities") {
    oracle::Gen gen(35);
    for (int trial = 0; trial < 10; ++trial) {
        const Dataset ds = random_dataset(gen, 32, 2);
        const KernelModel model(ds);
        const TensorWeights theta(gen.angles(5));
        LossConfig cfg;
        const Eigen::VectorXd grad = gradient(theta, model, ds, cfg);
        for (std::size_t j = 0; j < 5; ++j) {
            const GradQuantities q = grad_quantities(theta, j, model, ds);
            CHECK(oracle::rel_err(q.q1 - q.q2, 32.0 * grad[static_cast<Eigen::Index>(j)], 1e-12) <=
                  1e-10);
        }
    }
    SUBCASE("zero labels give q2 = 0") {
        const Dataset ds = random_dataset(gen, 8, 2);
        const KernelModel model(ds);
        const GradQuantities q =
            grad_quantities(TensorWeights(gen.angles(3)), 1, model, Eigen::VectorXd::Zero(8));
        CHECK(q.q2 == 0.0);
    }
    SUBCASE("stationary point balances both terms") {
        const Dataset ds = random_dataset(gen, 16, 2);
        const KernelModel model(ds);
        LossConfig cfg;
        const std::vector<double> a = gen.angles(4);
        const Eigen::VectorXd targets = design_matrix(model, ds, cfg) * oracle::kron_weights(a);
        for (std::size_t j = 0; j < 4; ++j) {
            const GradQuantities q = grad_quantities(TensorWeights(a), j, model, targets);
            CHECK(std::abs(q.q1 - q.q2) <= 1e-12 * std::max(1.0, std::abs(q.q1)));
        }
    }
}
