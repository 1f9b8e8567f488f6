#include "qrbf/tensor_weights.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace qrbf {

TensorWeights::TensorWeights(std::vector<double> theta) : theta_(std::move(theta)) {
    if (theta_.empty()) {
        throw std::invalid_argument("tensor weights need at least one angle");
    }
    if (theta_.size() >= 63) {
        throw std::invalid_argument("too many tensor factors");
    }
    for (double a : theta_) {
        if (!std::isfinite(a)) {
            throw std::invalid_argument("tensor weight angle is not finite");
        }
    }
}

double weight_entry(const TensorWeights &theta, std::uint64_t t) {
    if (t >= theta.dimension()) {
        throw std::out_of_range("weight index " + std::to_string(t) + " outside [0, " +
                                std::to_string(theta.dimension()) + ")");
    }
    double w = 1.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        w *= ((t >> j) & 1U) != 0 ? std::sin(theta[j]) : std::cos(theta[j]);
    }
    return w;
}

Eigen::VectorXd materialize(const TensorWeights &theta) {
    if (theta.size() > kMaxMaterializeQubits) {
        throw std::invalid_argument("refusing to materialize 2^" + std::to_string(theta.size()) +
                                    " weights");
    }
    // Build by doubling: after factor j, out holds the 2^{j+1} entries over bits 0..j.
    Eigen::VectorXd out(static_cast<Eigen::Index>(theta.dimension()));
    out[0] = 1.0;
    Eigen::Index len = 1;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double c = std::cos(theta[j]);
        const double s = std::sin(theta[j]);
        for (Eigen::Index k = 0; k < len; ++k) {
            out[len + k] = s * out[k];
            out[k] *= c;
        }
        len *= 2;
    }
    return out;
}

double fast_inner(const TensorWeights &theta, std::span<const double> v) {
    if (v.size() != theta.dimension()) {
        throw std::invalid_argument("vector length " + std::to_string(v.size()) +
                                    " does not match 2^" + std::to_string(theta.size()));
    }
    std::vector<double> buf(v.begin(), v.end());
    std::size_t len = buf.size();
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double c = std::cos(theta[j]);
        const double s = std::sin(theta[j]);
        len /= 2;
        for (std::size_t k = 0; k < len; ++k) {
            buf[k] = c * buf[2 * k] + s * buf[2 * k + 1];
        }
    }
    return buf[0];
}

double fast_inner(const TensorWeights &theta, const Eigen::VectorXd &v) {
    return fast_inner(theta, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

TensorWeights shift_derivative(const TensorWeights &theta, std::size_t j) {
    if (j >= theta.size()) {
        throw std::out_of_range("angle index " + std::to_string(j) + " outside [0, " +
                                std::to_string(theta.size()) + ")");
    }
    std::vector<double> shifted(theta.angles().begin(), theta.angles().end());
    shifted[j] += std::numbers::pi / 2;
    return TensorWeights(std::move(shifted));
}

TensorWeights random_theta(std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    std::vector<double> theta(m);
    for (auto &a : theta) {
        a = angle(rng);
    }
    return TensorWeights(std::move(theta));
}

} // namespace qrbf
