#include "qrbf/qsim.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace qrbf {

namespace {

using Amplitude = QubitState::Amplitude;

std::size_t qubits_for(std::size_t length) {
    if (!is_pow2(length)) {
        throw std::invalid_argument("state length " + std::to_string(length) +
                                    " is not a power of two");
    }
    const std::size_t q = log2_exact(length);
    if (q > kMaxQubits) {
        throw std::invalid_argument("state exceeds the " + std::to_string(kMaxQubits) +
                                    "-qubit emulator cap");
    }
    return q;
}

double squared_norm(std::span<const Amplitude> amps) {
    double total = 0.0;
    for (const auto &a : amps) {
        total += std::norm(a);
    }
    return total;
}

// Applies the per-qubit rotations of U(theta) (or its adjoint) to the first
// 2^m amplitudes of `amps`.
void rotate(std::span<Amplitude> amps, const TensorWeights &theta, bool adjoint) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double c = std::cos(theta[j]);
        const double s = adjoint ? -std::sin(theta[j]) : std::sin(theta[j]);
        const std::size_t stride = std::size_t{1} << j;
        for (std::size_t i = 0; i < amps.size(); ++i) {
            if ((i & stride) != 0) {
                continue;
            }
            const Amplitude a0 = amps[i];
            const Amplitude a1 = amps[i | stride];
            amps[i] = c * a0 + s * a1;
            amps[i | stride] = -s * a0 + c * a1;
        }
    }
}

void check_register(const TensorWeights &theta, const QubitState &state) {
    if (state.num_qubits() != theta.size()) {
        throw std::invalid_argument("U(theta) acts on " + std::to_string(theta.size()) +
                                    " qubits, state has " + std::to_string(state.num_qubits()));
    }
}

void check_model_register(const TensorWeights &theta, const KernelModel &model) {
    if (model.size() != theta.dimension()) {
        throw std::invalid_argument("model has " + std::to_string(model.size()) +
                                    " centers, tensor weights span " +
                                    std::to_string(theta.dimension()));
    }
}

Eigen::VectorXd real_part(const QubitState &state) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = state[i].real();
    }
    return out;
}

void check_sigma_eps(double sigma, double eps) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("sigma must be positive");
    }
    if (!(eps > 0.0 && eps < 1.0)) {
        throw std::invalid_argument("truncation eps must lie in (0, 1)");
    }
}

} // namespace

QubitState::QubitState(std::vector<Amplitude> amplitudes, std::size_t qubits)
    : amps_(std::move(amplitudes)), qubits_(qubits) {}

QubitState::QubitState(std::vector<Amplitude> amplitudes)
    : amps_(std::move(amplitudes)), qubits_(qubits_for(amps_.size())) {
    if (std::abs(std::sqrt(squared_norm(amps_)) - 1.0) > 1e-10) {
        throw std::invalid_argument("state is not normalized");
    }
}

QubitState QubitState::from_real(const Eigen::VectorXd &amplitudes) {
    return QubitState(std::vector<Amplitude>(amplitudes.data(), amplitudes.data() + amplitudes.size()));
}

QubitState QubitState::basis(std::size_t qubits, std::size_t index) {
    if (qubits > kMaxQubits) {
        throw std::invalid_argument("register exceeds the emulator cap");
    }
    const std::size_t length = std::size_t{1} << qubits;
    if (index >= length) {
        throw std::out_of_range("basis index outside the register");
    }
    std::vector<Amplitude> amps(length);
    amps[index] = 1.0;
    return QubitState(std::move(amps), qubits);
}

double QubitState::norm() const { return std::sqrt(squared_norm(amps_)); }

QubitState apply_weight_unitary(const TensorWeights &theta, const QubitState &state) {
    check_register(theta, state);
    std::vector<Amplitude> amps = state.amps_;
    rotate(amps, theta, false);
    return QubitState(std::move(amps), state.qubits_);
}

QubitState apply_weight_unitary_adjoint(const TensorWeights &theta, const QubitState &state) {
    check_register(theta, state);
    std::vector<Amplitude> amps = state.amps_;
    rotate(amps, theta, true);
    return QubitState(std::move(amps), state.qubits_);
}

TruncatedCoherentState coherent_state(double r, double sigma, std::size_t cutoff) {
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(r)) {
        throw std::invalid_argument("coherent state needs finite r and positive sigma");
    }
    if (cutoff < 1) {
        throw std::invalid_argument("Fock cutoff must be at least 1");
    }
    TruncatedCoherentState out{r, sigma, cutoff, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cutoff))};
    const double u = r / sigma;
    if (u == 0.0) {
        out.amplitudes[0] = 1.0;
        return out;
    }
    // log|u^k / sqrt(k!)|, shifted by its maximum before exponentiating.
    const double log_u = std::log(std::abs(u));
    Eigen::VectorXd logs(static_cast<Eigen::Index>(cutoff));
    for (std::size_t k = 0; k < cutoff; ++k) {
        logs[static_cast<Eigen::Index>(k)] =
            static_cast<double>(k) * log_u - 0.5 * std::lgamma(static_cast<double>(k) + 1.0);
    }
    const double peak = logs.maxCoeff();
    for (std::size_t k = 0; k < cutoff; ++k) {
        const double mag = std::exp(logs[static_cast<Eigen::Index>(k)] - peak);
        out.amplitudes[static_cast<Eigen::Index>(k)] = (u < 0 && (k % 2 == 1)) ? -mag : mag;
    }
    out.amplitudes.normalize();
    return out;
}

TruncatedCoherentState coherent_truncate(double r, double sigma, double eps, std::size_t cap) {
    check_sigma_eps(sigma, eps);
    if (!std::isfinite(r)) {
        throw std::invalid_argument("coordinate is not finite");
    }
    const double u = r / sigma;
    if (u == 0.0) {
        return coherent_state(r, sigma, 1);
    }
    const double log_eps = std::log(eps);
    const double log_u2 = std::log(u * u);
    for (std::size_t n = 1; n <= cap; ++n) {
        const double dn = static_cast<double>(n);
        const double log_bound = dn * log_u2 - std::lgamma(dn + 1.0) + u * u;
        if (log_bound <= log_eps) {
            return coherent_state(r, sigma, n);
        }
    }
    throw std::invalid_argument("coherent-state cutoff for r/sigma = " + std::to_string(u) +
                                " and eps = " + std::to_string(eps) + " exceeds " +
                                std::to_string(cap) + " Fock levels");
}

double coherent_tail_mass(double r_over_sigma, std::size_t cutoff) {
    if (r_over_sigma == 0.0) {
        return cutoff == 0 ? 1.0 : 0.0;
    }
    const double log_u2 = std::log(r_over_sigma * r_over_sigma);
    const double u2 = r_over_sigma * r_over_sigma;
    double total = 0.0;
    for (std::size_t k = cutoff;; ++k) {
        const double dk = static_cast<double>(k);
        const double term = std::exp(dk * log_u2 - std::lgamma(dk + 1.0));
        total += term;
        if (dk > u2 && term <= total * 1e-18) {
            break;
        }
        if (k > cutoff + 100000) {
            break;
        }
    }
    return total;
}

double coherent_overlap(const TruncatedCoherentState &a, const TruncatedCoherentState &b) {
    if (std::abs(a.sigma - b.sigma) > 1e-12 * std::max(a.sigma, b.sigma)) {
        throw std::invalid_argument("coherent states use different sigma");
    }
    const Eigen::Index common = std::min(a.amplitudes.size(), b.amplitudes.size());
    return a.amplitudes.head(common).dot(b.amplitudes.head(common));
}

double coherent_overlap(std::span<const TruncatedCoherentState> a,
                        std::span<const TruncatedCoherentState> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("vector coherent states have different dimensions");
    }
    double product = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        product *= coherent_overlap(a[i], b[i]);
    }
    return product;
}

std::vector<TruncatedCoherentState> coherent_vector_state(const Eigen::VectorXd &x, double sigma,
                                                          double eps, std::size_t cap) {
    std::vector<TruncatedCoherentState> out;
    out.reserve(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out.push_back(coherent_truncate(x[i], sigma, eps, cap));
    }
    return out;
}

DensityOperator build_rho_from_coherent(const Dataset &ds, double sigma, double eps) {
    check_sigma_eps(sigma, eps);
    const std::size_t count = ds.size();
    if (!is_pow2(count)) {
        throw std::invalid_argument("coherent superposition needs 2^m samples, got " +
                                    std::to_string(count));
    }
    const std::size_t modes = ds.dim();
    std::vector<std::vector<TruncatedCoherentState>> states;
    states.reserve(count);
    std::vector<std::size_t> cutoff(modes, 1);
    for (const auto &s : ds.samples) {
        states.push_back(coherent_vector_state(s.x, sigma, eps));
        for (std::size_t i = 0; i < modes; ++i) {
            cutoff[i] = std::max(cutoff[i], states.back()[i].cutoff);
        }
    }
    std::size_t fock_dim = 1;
    for (std::size_t n : cutoff) {
        if (fock_dim > kMaxFockEntries / n) {
            fock_dim = kMaxFockEntries + 1;
            break;
        }
        fock_dim *= n;
    }
    if (fock_dim > kMaxFockEntries / count) {
        throw std::invalid_argument("index (x) Fock register would hold more than 2^26 amplitudes; "
                                    "use a larger eps");
    }

    // Row t is the Fock-register wavefunction of |t>|psi_{x_t}>, mode 0 fastest.
    const double amp = 1.0 / std::sqrt(static_cast<double>(count));
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count),
                                                static_cast<Eigen::Index>(fock_dim));
    for (std::size_t t = 0; t < count; ++t) {
        std::vector<double> row{amp};
        std::size_t stride = 1;
        for (std::size_t i = 0; i < modes; ++i) {
            const Eigen::VectorXd &mode = states[t][i].amplitudes;
            std::vector<double> next(stride * cutoff[i], 0.0);
            for (Eigen::Index k = 0; k < mode.size(); ++k) {
                for (std::size_t p = 0; p < stride; ++p) {
                    next[static_cast<std::size_t>(k) * stride + p] = mode[k] * row[p];
                }
            }
            row = std::move(next);
            stride *= cutoff[i];
        }
        psi.row(static_cast<Eigen::Index>(t)) =
            Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
    }
    // Tr_2 |Psi><Psi| contracts the Fock index.
    return {psi * psi.transpose()};
}

ReadoutResult hadamard_test_readout(const TensorWeights &theta, const Eigen::VectorXd &x,
                                    const KernelModel &model, std::optional<std::uint64_t> shots,
                                    std::uint64_t seed) {
    check_model_register(theta, model);
    if (shots && *shots < 1) {
        throw std::invalid_argument("shots must be at least 1");
    }
    const std::size_t m = theta.size();
    if (m + 1 > kMaxQubits) {
        throw std::invalid_argument("readout register exceeds the emulator cap");
    }
    const FeatureState fs = feature_state(x, model);
    const double norm_sq = fs.norm_sq;
    const std::size_t half = theta.dimension();

    std::vector<Amplitude> amps(2 * half);
    const double scale = 1.0 / std::sqrt(norm_sq + 1.0);
    for (std::size_t t = 0; t < half; ++t) {
        amps[t] = std::sqrt(norm_sq) * fs.state[static_cast<Eigen::Index>(t)] * scale;
    }
    amps[half] = -scale;

    // U(theta) on the data register, conditioned on ancilla |0>.
    rotate(std::span<Amplitude>(amps.data(), half), theta, false);
    // p_minus - p_plus = -2 Re(b0 conj(b1)) from the pre-Hadamard branches;
    // subtracting the two probabilities instead cancels badly when R is tiny.
    const double interference = -2.0 * std::real(amps[0] * std::conj(amps[half]));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < half; ++i) {
        const Amplitude a0 = amps[i];
        const Amplitude a1 = amps[i + half];
        amps[i] = (a0 + a1) * inv_sqrt2;
        amps[i + half] = (a0 - a1) * inv_sqrt2;
    }

    ReadoutResult out;
    out.norm_sq = norm_sq;
    out.p_plus = std::norm(amps[0]);
    out.p_minus = std::norm(amps[half]);
    double difference = interference;
    if (shots) {
        std::mt19937_64 rng(seed);
        std::binomial_distribution<std::uint64_t> first(*shots, std::min(out.p_plus, 1.0));
        const std::uint64_t n_plus = first(rng);
        const double rest = 1.0 - out.p_plus;
        const double cond = rest > 0.0 ? std::clamp(out.p_minus / rest, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> second(*shots - n_plus, cond);
        const std::uint64_t n_minus = second(rng);
        out.p_plus = static_cast<double>(n_plus) / static_cast<double>(*shots);
        out.p_minus = static_cast<double>(n_minus) / static_cast<double>(*shots);
        out.shots = shots;
        difference = out.p_minus - out.p_plus;
    }
    out.estimate = difference * (norm_sq + 1.0) / (2.0 * std::sqrt(norm_sq));
    return out;
}

GradQuantities grad_quantities(const TensorWeights &theta, std::size_t j, const KernelModel &model,
                               const Eigen::VectorXd &targets) {
    check_model_register(theta, model);
    if (static_cast<std::size_t>(targets.size()) != model.size()) {
        throw std::invalid_argument("one target per center required");
    }
    const std::size_t m = theta.size();
    const double count = static_cast<double>(model.size());
    const Eigen::MatrixXd rho = density_operator(model).rho;
    const Eigen::VectorXd &norms = model.row_norms();

    const QubitState zero = QubitState::basis(m, 0);
    const Eigen::VectorXd w = real_part(apply_weight_unitary_adjoint(theta, zero));
    const Eigen::VectorXd dw =
        real_part(apply_weight_unitary_adjoint(shift_derivative(theta, j), zero));

    const Eigen::VectorXd weights = (count * count) / norms.array();
    const Eigen::VectorXd source = (count * targets.array()) / norms.array().sqrt();

    GradQuantities out;
    out.q1 = w.dot(rho * weights.asDiagonal() * (rho * dw));
    out.q2 = dw.dot(rho * source);
    return out;
}

GradQuantities grad_quantities(const TensorWeights &theta, std::size_t j, const KernelModel &model,
                               const Dataset &ds) {
    return grad_quantities(theta, j, model, ds.labels());
}

} // namespace qrbf
