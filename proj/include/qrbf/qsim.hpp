#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "qrbf/dataset.hpp"
#include "qrbf/kernel.hpp"
#include "qrbf/tensor_weights.hpp"

namespace qrbf {

/// Largest register the dense emulator will allocate.
inline constexpr std::size_t kMaxQubits = 21;

/**
 * Dense state vector over q qubits. Basis index bit j is qubit j, which
 * matches the tensor-weight bit convention (qubit j carries angle theta_j).
 */
class QubitState {
  public:
    using Amplitude = std::complex<double>;

    /// Validates power-of-two length and unit norm (to 1e-10).
    explicit QubitState(std::vector<Amplitude> amplitudes);
    /// Real amplitudes, validated the same way.
    static QubitState from_real(const Eigen::VectorXd &amplitudes);
    /// Computational basis state |index> on `qubits` qubits.
    static QubitState basis(std::size_t qubits, std::size_t index);

    [[nodiscard]] std::size_t num_qubits() const noexcept { return qubits_; }
    [[nodiscard]] std::size_t size() const noexcept { return amps_.size(); }
    [[nodiscard]] const std::vector<Amplitude> &amplitudes() const noexcept { return amps_; }
    [[nodiscard]] Amplitude operator[](std::size_t i) const { return amps_.at(i); }
    [[nodiscard]] double norm() const;

  private:
    QubitState(std::vector<Amplitude> amplitudes, std::size_t qubits);
    friend QubitState apply_weight_unitary(const TensorWeights &, const QubitState &);
    friend QubitState apply_weight_unitary_adjoint(const TensorWeights &, const QubitState &);

    std::vector<Amplitude> amps_;
    std::size_t qubits_;
};

/// U(theta) = (x)_j [[cos t_j, sin t_j], [-sin t_j, cos t_j]] on an m-qubit state.
QubitState apply_weight_unitary(const TensorWeights &theta, const QubitState &state);
/// U(theta)^dagger; maps |0...0> to w(theta).
QubitState apply_weight_unitary_adjoint(const TensorWeights &theta, const QubitState &state);

/**
 * Normalized Taylor truncation of the coherent state of a real coordinate r,
 * amplitudes proportional to (r/sigma)^k / sqrt(k!) for k < cutoff.
 */
struct TruncatedCoherentState {
    double r = 0.0;
    double sigma = 1.0;
    std::size_t cutoff = 1;
    Eigen::VectorXd amplitudes;

    [[nodiscard]] double r_over_sigma() const noexcept { return r / sigma; }
};

inline constexpr std::size_t kDefaultFockCap = 200;

/// State with an explicit cutoff N >= 1.
TruncatedCoherentState coherent_state(double r, double sigma, std::size_t cutoff);

/**
 * Picks the smallest N with (r/sigma)^{2N} / N! * exp((r/sigma)^2) <= eps,
 * evaluated directly in log space, and builds the truncated state.
 * Throws when N would exceed `cap`.
 */
TruncatedCoherentState coherent_truncate(double r, double sigma, double eps,
                                         std::size_t cap = kDefaultFockCap);

/// Unnormalized tail mass sum_{k >= N} (r/sigma)^{2k} / k! at the state's cutoff.
double coherent_tail_mass(double r_over_sigma, std::size_t cutoff);

/// Overlap of two single-mode states (shorter one padded with zeros).
double coherent_overlap(const TruncatedCoherentState &a, const TruncatedCoherentState &b);
/// Product of per-coordinate overlaps of two vector coherent states.
double coherent_overlap(std::span<const TruncatedCoherentState> a,
                        std::span<const TruncatedCoherentState> b);

/// Per-coordinate truncated states of a point.
std::vector<TruncatedCoherentState> coherent_vector_state(const Eigen::VectorXd &x, double sigma,
                                                          double eps,
                                                          std::size_t cap = kDefaultFockCap);

/// Entry limit of the |index> (x) Fock register wavefunction.
inline constexpr std::size_t kMaxFockEntries = std::size_t{1} << 26;

/**
 * Forms (1/sqrt M) sum_t |t>|psi_{x_t}> with a common Fock cutoff per mode,
 * then traces out the Fock register. Result approaches gram / M as eps -> 0.
 */
DensityOperator build_rho_from_coherent(const Dataset &ds, double sigma, double eps);

/**
 * Outcome of the ancilla interference readout. `p_plus` is the probability
 * of |0>|0...0> and `p_minus` that of |1>|0...0> (ancilla written first).
 */
struct ReadoutResult {
    double p_plus = 0.0;
    double p_minus = 0.0;
    /// Recovered w(theta) . f(x)/|f(x)|.
    double estimate = 0.0;
    /// Norm factor R of the input point.
    double norm_sq = 0.0;
    /// Number of samples, empty for exact probabilities.
    std::optional<std::uint64_t> shots;
};

/**
 * Emulates the readout circuit on m + 1 qubits (ancilla = qubit m):
 * prepare (sqrt(R)|0>|f(x)> - |1>|0...0>) / sqrt(R+1), apply U(theta) to
 * the data register when the ancilla is |0>, then a Hadamard on the
 * ancilla. Then p_plus = (sqrt(R) a - 1)^2 / (2(R+1)),
 * p_minus = (sqrt(R) a + 1)^2 / (2(R+1)) and
 * a = (p_minus - p_plus)(R+1) / (2 sqrt R). Without `shots` the
 * difference p_minus - p_plus is taken from the interference term, which
 * stays accurate for tiny R. With `shots`, the two probabilities are
 * replaced by sampled frequencies.
 */
ReadoutResult hadamard_test_readout(const TensorWeights &theta, const Eigen::VectorXd &x,
                                    const KernelModel &model,
                                    std::optional<std::uint64_t> shots = std::nullopt,
                                    std::uint64_t seed = 0);

struct GradQuantities {
    double q1 = 0.0; ///< <0|U rho diag(M^2/R_t) rho U_j^dagger|0>
    double q2 = 0.0; ///< <0|U_j rho sum_t (M y_t / sqrt R_t)|t>
};

/**
 * The two terms of the j-th gradient component, each evaluated as a
 * circuit-style sandwich with rho applied as an explicit (non-unitary)
 * matrix. q1 - q2 equals M times the normalized-feature gradient.
 */
GradQuantities grad_quantities(const TensorWeights &theta, std::size_t j, const KernelModel &model,
                               const Eigen::VectorXd &targets);
GradQuantities grad_quantities(const TensorWeights &theta, std::size_t j, const KernelModel &model,
                               const Dataset &ds);

} // namespace qrbf
