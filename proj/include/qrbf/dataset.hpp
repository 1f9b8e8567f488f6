#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace qrbf {

/// One labeled point. `label` is always +1 or -1.
struct Sample {
    Eigen::VectorXd x;
    int label = 1;
};

/**
 * Ordered collection of labeled samples sharing one dimension.
 *
 * Sample order is significant: a tensor-product weight vector assigns the
 * t-th weight to the t-th sample, so the index of a sample is part of the
 * model. `requested` keeps the sample count asked for before power-of-two
 * rounding (0 when the dataset was not generated).
 */
struct Dataset {
    std::vector<Sample> samples;
    std::uint64_t seed = 0;
    std::size_t requested = 0;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    /// Dimension of the samples, 0 for an empty dataset.
    [[nodiscard]] std::size_t dim() const noexcept {
        return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().x.size());
    }
    /// Samples as rows of an M x n matrix.
    [[nodiscard]] Eigen::MatrixXd points() const;
    /// Labels as a real vector of +1/-1.
    [[nodiscard]] Eigen::VectorXd labels() const;
    [[nodiscard]] std::size_t count(int label) const;
};

enum class PatternFamily { Blobs, Annulus, XorQuadrants, Checkerboard };

/// Parses "blobs", "annulus", "xor-quadrants" (or "xor") and "checkerboard".
PatternFamily parse_family(std::string_view name);
std::string_view family_name(PatternFamily family) noexcept;
/// All families in order of increasing difficulty.
std::vector<PatternFamily> all_families();

/**
 * Synthetic 2-D pattern request.
 *
 * `noise` is family specific:
 *   blobs          standard deviation of the Gaussian scatter around each center
 *   annulus        radial gap between the inner disk and the ring
 *   xor-quadrants  width of the empty band along both axes
 *   checkerboard   width of the empty band along interior cell edges
 * For the three banded families it must be below 0.4.
 */
struct PatternSpec {
    PatternFamily family = PatternFamily::Blobs;
    std::size_t samples = 256;
    double noise = 0.1;
    std::uint64_t seed = 1;
};

/// Smallest power of two >= n (n >= 1).
std::size_t next_pow2(std::size_t n);
bool is_pow2(std::size_t n) noexcept;
/// log2 of a power of two.
unsigned log2_exact(std::size_t n);

/**
 * Draws a balanced, class-blocked dataset in [-1,1]^2.
 *
 * The sample count is rounded up to the next power of two. The first half of
 * the samples carries label +1 and the second half -1. Output is a pure
 * function of `spec`.
 */
Dataset generate(const PatternSpec &spec);

/// Reads header-less rows `x1,...,xn,label`.
Dataset load_csv(const std::filesystem::path &path);
/// Parses CSV text in the same format as `load_csv`.
Dataset parse_csv(std::string_view text);
void save_csv(const Dataset &ds, const std::filesystem::path &path);
std::string to_csv(const Dataset &ds);

/**
 * Random disjoint partition. The training part receives floor(ratio * M)
 * samples, clamped so that both parts are non-empty. Both parts keep the
 * relative order of `ds`.
 */
std::pair<Dataset, Dataset> split(const Dataset &ds, double ratio, std::uint64_t seed);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

/// Stable reordering with all +1 samples first, then all -1 samples.
Dataset arrange_by_label(const Dataset &ds);

} // namespace qrbf
