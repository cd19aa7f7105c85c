#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stepfb/errors.hpp"
#include "stepfb/fileio.hpp"

namespace stepfb {

struct CodebookMeta {
    std::size_t n_t = 0;          // antenna count the training runs used (0 = synthetic)
    double zeta = 0.0;            // threshold the training runs used (0 = synthetic)
    std::uint64_t sample_count = 0;
    double distortion = 0.0;      // final empirical MSE on the training set
};

// b-bit Lloyd-Max scalar quantizer for the step-size feedback. Immutable
// after design; thresholds[i] is the midpoint of levels[i] and levels[i+1].
struct StepCodebook {
    std::vector<double> levels;      // 2^bits reproduction values, strictly increasing
    std::vector<double> thresholds;  // 2^bits - 1 decision boundaries
    unsigned bits = 0;
    CodebookMeta meta;

    std::size_t size() const { return levels.size(); }
};

// Cell index for mu: nearest reproduction level, values exactly on a
// threshold map to the lower index. Out-of-range mu saturates.
inline unsigned encode(const StepCodebook& cb, double mu) {
    if (!std::isfinite(mu)) throw ParameterError("encode: mu must be finite");
    const auto it = std::lower_bound(cb.thresholds.begin(), cb.thresholds.end(), mu);
    return static_cast<unsigned>(it - cb.thresholds.begin());
}

inline double decode(const StepCodebook& cb, unsigned index) {
    if (index >= cb.levels.size()) throw ParameterError("decode: index out of range");
    return cb.levels[index];
}

namespace detail {

inline void validate_codebook(const StepCodebook& cb) {
    const std::size_t m = std::size_t{1} << cb.bits;
    if (cb.bits < 1 || cb.bits > 16) throw ParameterError("codebook: bits must be in 1..16");
    if (cb.levels.size() != m || cb.thresholds.size() != m - 1)
        throw ParameterError("codebook: level/threshold counts do not match bits");
    for (std::size_t i = 0; i + 1 < m; ++i) {
        if (!(cb.levels[i] < cb.thresholds[i] && cb.thresholds[i] < cb.levels[i + 1]))
            throw ParameterError("codebook: levels and thresholds must strictly interleave");
    }
}

}  // namespace detail

// Lloyd design: alternate nearest-neighbor partition and centroid update
// until the relative distortion change drops below tol or max_rounds is hit.
// Levels start at the equiprobable empirical quantiles; an empty cell is
// repaired by splitting the highest-distortion cell (levels perturbed by
// +/- 1e-6 * sample std). distortion_history, when given, receives the MSE
// of the codebook at the start of each round.
inline StepCodebook design_codebook(const std::vector<double>& samples, unsigned bits,
                                    double tol = 1e-8, unsigned max_rounds = 500,
                                    std::vector<double>* distortion_history = nullptr) {
    if (bits < 1 || bits > 16) throw ParameterError("design_codebook: bits must be in 1..16");
    const std::size_t m = std::size_t{1} << bits;
    if (samples.size() < m)
        throw ParameterError("design_codebook: need at least 2^bits samples");
    if (!(tol > 0.0) || max_rounds < 1)
        throw ParameterError("design_codebook: bad tol or max_rounds");
    for (double s : samples)
        if (!std::isfinite(s)) throw ParameterError("design_codebook: samples must be finite");

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    // prefix sums for O(1) cell means and distortions
    std::vector<double> ps(n + 1, 0.0), ps2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        ps[i + 1] = ps[i] + sorted[i];
        ps2[i + 1] = ps2[i] + sorted[i] * sorted[i];
    }
    const double mean_all = ps[n] / static_cast<double>(n);
    const double var_all = std::max(0.0, ps2[n] / static_cast<double>(n) - mean_all * mean_all);
    const double split_delta = 1e-6 * std::sqrt(var_all);

    std::vector<double> levels(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto q = static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                                static_cast<double>(n) / static_cast<double>(m));
        levels[i] = sorted[std::min(q, n - 1)];
    }

    // partition sorted samples against the midpoint thresholds of `lv`;
    // cell i holds samples in (t[i-1], t[i]], ties map low
    std::vector<std::size_t> bounds(m + 1);
    auto partition = [&](const std::vector<double>& lv) {
        bounds[0] = 0;
        bounds[m] = n;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double t = 0.5 * (lv[i] + lv[i + 1]);
            bounds[i + 1] = static_cast<std::size_t>(
                std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
        }
    };
    auto cell_mean = [&](std::size_t i) {
        return (ps[bounds[i + 1]] - ps[bounds[i]]) /
               static_cast<double>(bounds[i + 1] - bounds[i]);
    };

    double prev_dist = -1.0;
    double dist = 0.0;
    for (unsigned round = 0; round < max_rounds; ++round) {
        partition(levels);

        dist = 0.0;
        std::size_t worst_cell = 0;
        double worst_contrib = -1.0;
        std::size_t n_empty = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t lo = bounds[i], hi = bounds[i + 1];
            if (hi == lo) {
                ++n_empty;
                continue;
            }
            const double sum = ps[hi] - ps[lo];
            const double sum2 = ps2[hi] - ps2[lo];
            const double contrib =
                sum2 - 2.0 * levels[i] * sum + static_cast<double>(hi - lo) * levels[i] * levels[i];
            dist += contrib;
            if (contrib > worst_contrib) {
                worst_contrib = contrib;
                worst_cell = i;
            }
        }
        dist /= static_cast<double>(n);
        if (distortion_history) distortion_history->push_back(dist);

        if (prev_dist >= 0.0 && n_empty == 0) {
            const double denom = std::max(prev_dist, 1e-300);
            if (std::abs(prev_dist - dist) / denom < tol) break;
        }
        prev_dist = dist;

        // centroid update
        std::vector<double> next;
        next.reserve(m);
        for (std::size_t i = 0; i < m; ++i)
            if (bounds[i + 1] > bounds[i]) next.push_back(cell_mean(i));

        if (n_empty > 0) {
            // respawn the missing levels by splitting the highest-distortion
            // cell: replace its centroid with a fan of +/- delta offsets
            const double c = cell_mean(worst_cell);
            next.erase(std::find(next.begin(), next.end(), c));
            const double delta = split_delta > 0.0 ? split_delta : 1e-12;
            next.push_back(c);
            for (std::size_t e = 1; next.size() < m; ++e) {
                next.push_back(c - delta * static_cast<double>(e));
                if (next.size() < m) next.push_back(c + delta * static_cast<double>(e));
            }
        }
        std::sort(next.begin(), next.end());
        levels = std::move(next);
    }

    StepCodebook cb;
    cb.bits = bits;
    cb.levels = std::move(levels);
    cb.thresholds.resize(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i)
        cb.thresholds[i] = 0.5 * (cb.levels[i] + cb.levels[i + 1]);
    cb.meta.sample_count = n;

    // final empirical distortion of the codebook actually returned
    partition(cb.levels);
    double final_dist = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t lo = bounds[i], hi = bounds[i + 1];
        if (hi == lo) continue;
        final_dist += (ps2[hi] - ps2[lo]) - 2.0 * cb.levels[i] * (ps[hi] - ps[lo]) +
                      static_cast<double>(hi - lo) * cb.levels[i] * cb.levels[i];
    }
    cb.meta.distortion = final_dist / static_cast<double>(n);
    detail::validate_codebook(cb);
    return cb;
}

// --- text format -----------------------------------------------------------
//
//   bits=<b>
//   <2^b levels, space separated, full precision>
//   <2^b - 1 thresholds>
//   n_t=<n> zeta=<z> samples=<count> distortion=<d>

inline std::string codebook_to_text(const StepCodebook& cb) {
    std::ostringstream out;
    out << "bits=" << cb.bits << "\n";
    for (std::size_t i = 0; i < cb.levels.size(); ++i)
        out << (i ? " " : "") << fmt_g17(cb.levels[i]);
    out << "\n";
    for (std::size_t i = 0; i < cb.thresholds.size(); ++i)
        out << (i ? " " : "") << fmt_g17(cb.thresholds[i]);
    out << "\n";
    out << "n_t=" << cb.meta.n_t << " zeta=" << fmt_g17(cb.meta.zeta)
        << " samples=" << cb.meta.sample_count << " distortion=" << fmt_g17(cb.meta.distortion)
        << "\n";
    return out.str();
}

inline StepCodebook codebook_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    StepCodebook cb;

    if (!std::getline(in, line) || line.rfind("bits=", 0) != 0)
        throw ParameterError("codebook: expected 'bits=<b>' on line 1");
    cb.bits = static_cast<unsigned>(parse_u64(line.substr(5)));
    const std::size_t m = std::size_t{1} << cb.bits;

    auto parse_row = [](const std::string& row, std::size_t expect, const char* what) {
        std::istringstream rs(row);
        std::vector<double> vals;
        std::string tok;
        while (rs >> tok) vals.push_back(parse_double(tok));
        if (vals.size() != expect)
            throw ParameterError(std::string("codebook: wrong number of ") + what);
        return vals;
    };
    if (!std::getline(in, line)) throw ParameterError("codebook: missing levels line");
    cb.levels = parse_row(line, m, "levels");
    if (!std::getline(in, line)) throw ParameterError("codebook: missing thresholds line");
    cb.thresholds = parse_row(line, m - 1, "thresholds");

    if (!std::getline(in, line)) throw ParameterError("codebook: missing metadata line");
    std::istringstream ms(line);
    std::string tok;
    while (ms >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ParameterError("codebook: bad metadata token " + tok);
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "n_t")
            cb.meta.n_t = parse_u64(val);
        else if (key == "zeta")
            cb.meta.zeta = parse_double(val);
        else if (key == "samples")
            cb.meta.sample_count = parse_u64(val);
        else if (key == "distortion")
            cb.meta.distortion = parse_double(val);
        else
            throw ParameterError("codebook: unknown metadata key " + key);
    }
    detail::validate_codebook(cb);
    return cb;
}

inline void save_codebook(const StepCodebook& cb, const std::string& path) {
    atomic_write_file(path, codebook_to_text(cb));
}

inline StepCodebook load_codebook(const std::string& path) {
    return codebook_from_text(read_file(path));
}

}  // namespace stepfb
