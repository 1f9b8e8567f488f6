#include "qrbf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qrbf/error.hpp"

namespace qrbf {

namespace {

constexpr double kAnnulusInner = 0.45;
constexpr double kAnnulusOuter = 0.95;
constexpr double kBlobCenter = 0.5;
constexpr double kCheckerCell = 0.5;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

double parse_field(std::string_view field, std::size_t line) {
    field = trim(field);
    if (field.empty()) {
        throw ParseError(line, "empty field");
    }
    if (field.front() == '+') {
        field.remove_prefix(1);
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ParseError(line, "not a number: '" + std::string(field) + "'");
    }
    return value;
}

// Distance from v to the nearest interior grid line of a cell lattice over [-1,1].
double distance_to_interior_lines(double v, double cell) {
    double best = 2.0;
    for (double line = -1.0 + cell; line < 1.0 - 1e-12; line += cell) {
        best = std::min(best, std::abs(v - line));
    }
    return best;
}

// Rejection sampler: draws uniform points in the box until `classify` accepts
// one for `want` (classify returns 0 for points inside an exclusion band).
template <class Classify>
Eigen::VectorXd draw_uniform(std::mt19937_64 &rng, int want, Classify classify) {
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    for (;;) {
        Eigen::VectorXd p(2);
        p[0] = coord(rng);
        p[1] = coord(rng);
        if (classify(p) == want) {
            return p;
        }
    }
}

Eigen::VectorXd draw_point(PatternFamily family, double noise, int want, std::mt19937_64 &rng) {
    switch (family) {
    case PatternFamily::Blobs: {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::VectorXd p(2);
        for (int k = 0; k < 2; ++k) {
            double v = want * kBlobCenter + noise * gauss(rng);
            p[k] = std::clamp(v, -1.0, 1.0);
        }
        return p;
    }
    case PatternFamily::Annulus:
        return draw_uniform(rng, want, [noise](const Eigen::VectorXd &p) {
            double r = p.norm();
            if (r < kAnnulusInner) {
                return 1;
            }
            if (r >= kAnnulusInner + noise && r <= kAnnulusOuter) {
                return -1;
            }
            return 0;
        });
    case PatternFamily::XorQuadrants:
        return draw_uniform(rng, want, [noise](const Eigen::VectorXd &p) {
            if (std::abs(p[0]) < noise / 2 || std::abs(p[1]) < noise / 2 || p[0] == 0.0 ||
                p[1] == 0.0) {
                return 0;
            }
            return (p[0] > 0) == (p[1] > 0) ? 1 : -1;
        });
    case PatternFamily::Checkerboard:
        return draw_uniform(rng, want, [noise](const Eigen::VectorXd &p) {
            if (distance_to_interior_lines(p[0], kCheckerCell) < noise / 2 ||
                distance_to_interior_lines(p[1], kCheckerCell) < noise / 2) {
                return 0;
            }
            auto i = static_cast<int>(std::floor((p[0] + 1.0) / kCheckerCell));
            auto j = static_cast<int>(std::floor((p[1] + 1.0) / kCheckerCell));
            return (i + j) % 2 == 0 ? 1 : -1;
        });
    }
    throw std::invalid_argument("unknown pattern family");
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    if (ec != std::errc{}) {
        throw std::runtime_error("failed to format number");
    }
    return std::string(buf, ptr);
}

Eigen::MatrixXd Dataset::points() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
    for (std::size_t t = 0; t < size(); ++t) {
        out.row(static_cast<Eigen::Index>(t)) = samples[t].x.transpose();
    }
    return out;
}

Eigen::VectorXd Dataset::labels() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    for (std::size_t t = 0; t < size(); ++t) {
        out[static_cast<Eigen::Index>(t)] = samples[t].label;
    }
    return out;
}

std::size_t Dataset::count(int label) const {
    return static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(), [label](const Sample &s) { return s.label == label; }));
}

PatternFamily parse_family(std::string_view name) {
    if (name == "blobs") {
        return PatternFamily::Blobs;
    }
    if (name == "annulus") {
        return PatternFamily::Annulus;
    }
    if (name == "xor-quadrants" || name == "xor") {
        return PatternFamily::XorQuadrants;
    }
    if (name == "checkerboard") {
        return PatternFamily::Checkerboard;
    }
    throw std::invalid_argument("unknown pattern family '" + std::string(name) + "'");
}

std::string_view family_name(PatternFamily family) noexcept {
    switch (family) {
    case PatternFamily::Blobs:
        return "blobs";
    case PatternFamily::Annulus:
        return "annulus";
    case PatternFamily::XorQuadrants:
        return "xor-quadrants";
    case PatternFamily::Checkerboard:
        return "checkerboard";
    }
    return "?";
}

std::vector<PatternFamily> all_families() {
    return {PatternFamily::Blobs, PatternFamily::Annulus, PatternFamily::XorQuadrants,
            PatternFamily::Checkerboard};
}

std::size_t next_pow2(std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("next_pow2 of zero");
    }
    std::size_t p = 1;
    while (p < n) {
        p <<= 1U;
    }
    return p;
}

bool is_pow2(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

unsigned log2_exact(std::size_t n) {
    if (!is_pow2(n)) {
        throw std::invalid_argument(std::to_string(n) + " is not a power of two");
    }
    unsigned m = 0;
    while ((std::size_t{1} << m) < n) {
        ++m;
    }
    return m;
}

Dataset generate(const PatternSpec &spec) {
    if (spec.samples < 2) {
        throw std::invalid_argument("pattern needs at least 2 samples");
    }
    if (!std::isfinite(spec.noise) || spec.noise < 0.0) {
        throw std::invalid_argument("noise must be finite and non-negative");
    }
    if (spec.family != PatternFamily::Blobs && spec.noise >= 0.4) {
        throw std::invalid_argument(std::string(family_name(spec.family)) +
                                    " requires noise < 0.4");
    }
    const std::size_t total = next_pow2(spec.samples);
    Dataset ds;
    ds.seed = spec.seed;
    ds.requested = spec.samples;
    ds.samples.reserve(total);

    std::mt19937_64 rng(spec.seed);
    for (int want : {1, -1}) {
        for (std::size_t k = 0; k < total / 2; ++k) {
            ds.samples.push_back({draw_point(spec.family, spec.noise, want, rng), want});
        }
    }
    return ds;
}

Dataset parse_csv(std::string_view text) {
    Dataset ds;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) {
            continue;
        }
        std::vector<double> fields;
        std::size_t start = 0;
        for (;;) {
            auto comma = line.find(',', start);
            fields.push_back(parse_field(line.substr(start, comma - start), line_no));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (fields.size() < 2) {
            throw ParseError(line_no, "expected at least one coordinate and a label");
        }
        const double label = fields.back();
        if (label != 1.0 && label != -1.0) {
            throw ValidationError("line " + std::to_string(line_no) + ": label must be 1 or -1");
        }
        fields.pop_back();
        if (dim == 0) {
            dim = fields.size();
        } else if (fields.size() != dim) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim) + " coordinates, found " +
                                  std::to_string(fields.size()));
        }
        Sample s;
        s.x = Eigen::Map<const Eigen::VectorXd>(fields.data(), static_cast<Eigen::Index>(dim));
        if (!s.x.allFinite()) {
            throw ValidationError("line " + std::to_string(line_no) + ": non-finite coordinate");
        }
        s.label = label > 0 ? 1 : -1;
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) {
        throw ValidationError("no samples");
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

std::string to_csv(const Dataset &ds) {
    std::string out;
    for (const auto &s : ds.samples) {
        for (Eigen::Index k = 0; k < s.x.size(); ++k) {
            out += format_double(s.x[k]);
            out += ',';
        }
        out += s.label > 0 ? "1\n" : "-1\n";
    }
    return out;
}

void save_csv(const Dataset &ds, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_csv(ds);
}

std::pair<Dataset, Dataset> split(const Dataset &ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("split ratio must lie in (0, 1)");
    }
    const std::size_t total = ds.size();
    if (total < 2) {
        throw std::invalid_argument("split needs at least 2 samples");
    }
    auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total)));
    n_train = std::clamp<std::size_t>(n_train, 1, total - 1);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> in_train(total, false);
    for (std::size_t k = 0; k < n_train; ++k) {
        in_train[order[k]] = true;
    }

    Dataset train;
    Dataset test;
    train.seed = test.seed = ds.seed;
    for (std::size_t t = 0; t < total; ++t) {
        (in_train[t] ? train : test).samples.push_back(ds.samples[t]);
    }
    return {std::move(train), std::move(test)};
}

Dataset arrange_by_label(const Dataset &ds) {
    Dataset out = ds;
    std::stable_partition(out.samples.begin(), out.samples.end(),
                          [](const Sample &s) { return s.label > 0; });
    return out;
}

} // namespace qrbf
