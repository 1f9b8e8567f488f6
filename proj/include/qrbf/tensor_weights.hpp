#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace qrbf {

/**
 * Angles theta_0..theta_{m-1} of the unit weight vector
 *
 *     w(theta) = (cos theta_{m-1}, sin theta_{m-1}) (x) ... (x) (cos theta_0, sin theta_0)
 *
 * Bit convention: factor j pairs with bit j of the weight index, so
 * t = t_0 + 2 t_1 + ... + 2^{m-1} t_{m-1} and factor 0 is the least
 * significant bit. Every routine in the library uses this order.
 */
class TensorWeights {
  public:
    explicit TensorWeights(std::vector<double> theta);

    [[nodiscard]] std::size_t size() const noexcept { return theta_.size(); }
    /// Length 2^m of the induced weight vector.
    [[nodiscard]] std::size_t dimension() const noexcept { return std::size_t{1} << theta_.size(); }
    [[nodiscard]] std::span<const double> angles() const noexcept { return theta_; }
    [[nodiscard]] double operator[](std::size_t j) const { return theta_.at(j); }

    friend bool operator==(const TensorWeights &, const TensorWeights &) = default;

  private:
    std::vector<double> theta_;
};

/// Largest m accepted by `materialize`.
inline constexpr std::size_t kMaxMaterializeQubits = 20;

/// w_t = prod_j cos(theta_j - t_j pi/2).
double weight_entry(const TensorWeights &theta, std::uint64_t t);

/// Dense w(theta); m <= kMaxMaterializeQubits.
Eigen::VectorXd materialize(const TensorWeights &theta);

/// w(theta) . v in O(2^m), folding one tensor factor per pass.
double fast_inner(const TensorWeights &theta, std::span<const double> v);
double fast_inner(const TensorWeights &theta, const Eigen::VectorXd &v);

/**
 * theta with theta_j advanced by pi/2. Its weight vector is the partial
 * derivative of w(theta) with respect to theta_j; applying it twice gives
 * second derivatives (j == k shifts by pi).
 */
TensorWeights shift_derivative(const TensorWeights &theta, std::size_t j);

/// Uniform angles in [0, 2 pi).
TensorWeights random_theta(std::size_t m, std::uint64_t seed);

} // namespace qrbf
