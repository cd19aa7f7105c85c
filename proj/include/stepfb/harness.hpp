#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stepfb/beamformer.hpp"
#include "stepfb/channel.hpp"
#include "stepfb/complex_vec.hpp"
#include "stepfb/errors.hpp"
#include "stepfb/estimator.hpp"
#include "stepfb/quantizer.hpp"
#include "stepfb/rng.hpp"

namespace stepfb {

enum class HInitMode { Zero, PreviousEpoch };

struct SimConfig {
    std::size_t n_t = 2;
    std::size_t n_r = 1;
    Modulation modulation{};
    std::vector<double> zeta_list{0.1, 0.3, 0.5};
    std::vector<double> tnr_grid_db{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
    std::uint64_t trials_per_point = 1000;
    std::uint32_t max_iters = 500;
    unsigned quantizer_bits = 3;
    std::uint64_t master_seed = 1;
    bool interrupt_mode = true;  // stop data transmission during estimation

    std::size_t block_symbols = 100;   // data symbols per (TNR, scheme) per realization
    std::size_t training_factor = 64;  // training length = factor * n_t
    HInitMode h0_init = HInitMode::Zero;
    TrainingKind training_kind = TrainingKind::GaussianWhite;
    unsigned threads = 0;  // 0 = all hardware threads

    std::size_t training_length() const { return training_factor * n_t; }

    void validate() const {
        if (n_t < 1 || n_r < 1) throw ParameterError("config: n_t and n_r must be >= 1");
        if (trials_per_point < 1) throw ParameterError("config: trials_per_point must be >= 1");
        if (max_iters < 1 || max_iters > 0xffff)
            throw ParameterError("config: max_iters must be in 1..65535");
        if (block_symbols < 1) throw ParameterError("config: block_symbols must be >= 1");
        if (training_factor < 1) throw ParameterError("config: training_factor must be >= 1");
        if (quantizer_bits < 1 || quantizer_bits > 16)
            throw ParameterError("config: quantizer_bits must be in 1..16");
        if (!(modulation.symbol_power > 0.0))
            throw ParameterError("config: symbol_power must be positive");
        for (double z : zeta_list)
            if (!(z > 0.0) || !std::isfinite(z))
                throw ParameterError("config: zeta values must be positive");
        for (std::size_t i = 0; i < tnr_grid_db.size(); ++i) {
            if (!std::isfinite(tnr_grid_db[i])) throw ParameterError("config: TNR must be finite");
            if (i > 0 && !(tnr_grid_db[i] > tnr_grid_db[i - 1]))
                throw ParameterError("config: TNR grid must be strictly ascending");
        }
    }
};

struct WilsonInterval {
    double lo = 0.0, hi = 1.0;
};

// 95% score interval; robust at the low error counts typical of BER tails.
inline WilsonInterval wilson_interval(std::uint64_t errors, std::uint64_t total,
                                      double z = 1.959963984540054) {
    if (total == 0) return {0.0, 1.0};
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double hw = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // clamp to [0,1] and force containment of the point estimate, which
    // rounding at the k=0 / k=n edges could otherwise break by one ulp
    return {std::min(std::max(0.0, center - hw), p), std::max(std::min(1.0, center + hw), p)};
}

// Closed-form average BER of coherent BPSK with L-branch maximal-ratio
// combining over i.i.d. unit-power Rayleigh branches. Transmit beamforming
// along H/||H|| gives the selfsame post-combining SNR, so this doubles as
// the analytic reference for the optimal beamforming curves. Gray QPSK is
// the same formula with half the per-branch SNR (power splits over two
// dimensions).
inline double mrc_ber_oracle(double tnr_linear, std::size_t n_t, const Modulation& mod) {
    if (!(tnr_linear > 0.0)) throw ParameterError("mrc_ber_oracle: TNR must be positive");
    if (n_t < 1) throw ParameterError("mrc_ber_oracle: n_t must be >= 1");
    const double gbar = mod.scheme == ModScheme::Bpsk ? tnr_linear : 0.5 * tnr_linear;
    const double mu = std::sqrt(gbar / (1.0 + gbar));
    const double pm = 0.5 * (1.0 - mu);
    const double pp = 0.5 * (1.0 + mu);
    double sum = 0.0, coef = 1.0, ppk = 1.0;
    for (std::size_t k = 0; k < n_t; ++k) {
        sum += coef * ppk;
        coef *= static_cast<double>(n_t + k) / static_cast<double>(k + 1);  // C(L-1+k, k)
        ppk *= pp;
    }
    return std::pow(pm, static_cast<double>(n_t)) * sum;
}

using ProgressFn = std::function<void(std::uint64_t done, std::uint64_t total)>;

namespace detail {

// Dynamic dispatch over [0, total); results must be accumulated either into
// per-unit slots or into commutative integer counters so the outcome is
// independent of the thread count. The callback may run concurrently.
inline void parallel_for_units(std::uint64_t total, unsigned threads,
                               const std::function<void(std::uint64_t)>& fn,
                               const ProgressFn& progress = {}) {
    unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    if (total < t) t = static_cast<unsigned>(total);
    if (t <= 1) {
        for (std::uint64_t i = 0; i < total; ++i) {
            fn(i);
            if (progress) progress(i + 1, total);
        }
        return;
    }
    std::atomic<std::uint64_t> next{0}, done{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (unsigned w = 0; w < t; ++w) {
        pool.emplace_back([&] {
            std::uint64_t i;
            while ((i = next.fetch_add(1)) < total && !failed.load(std::memory_order_relaxed)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
                const std::uint64_t d = done.fetch_add(1) + 1;
                if (progress) progress(d, total);
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline ChannelVector unit_basis_vector(std::size_t n) {
    ChannelVector e(n, {0.0, 0.0});
    e[0] = {1.0, 0.0};
    return e;
}

constexpr std::uint64_t kSaltSweep = 1;
constexpr std::uint64_t kSaltCollect = 2;
constexpr std::uint64_t kSaltConvergence = 3;

}  // namespace detail

struct BerCell {
    double tnr_db = 0.0;
    std::string scheme;  // "OBS" or "SOBS"
    double zeta = std::numeric_limits<double>::quiet_NaN();  // NaN for OBS
    std::size_t n_t = 0;
    ModScheme mod = ModScheme::Bpsk;
    std::uint64_t bits_sent = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

using BerTable = std::vector<BerCell>;

// Monte-Carlo BER-vs-TNR sweep: one OBS curve plus one SOBS curve per zeta.
// Per trial a fresh block-fading channel is drawn; SOBS first runs an
// estimation session (cold-started per h0_init) until the error is inside
// zeta, then sends a data block beamformed along the estimate. codebooks
// holds one entry per zeta (nullptr = ideal feedback). Bitwise reproducible
// for a fixed master_seed regardless of the thread count.
inline BerTable run_ber_sweep(const SimConfig& config,
                              const std::vector<const StepCodebook*>& codebooks,
                              const ProgressFn& progress = {}) {
    config.validate();
    if (config.n_r != 1) throw ParameterError("run_ber_sweep: MISO only (n_r = 1)");
    if (codebooks.size() != config.zeta_list.size())
        throw ParameterError("run_ber_sweep: need one codebook entry per zeta");
    for (const StepCodebook* cb : codebooks)
        if (cb && cb->bits != config.quantizer_bits)
            throw ParameterError("run_ber_sweep: codebook bits do not match config");

    const std::size_t n_points = config.tnr_grid_db.size();
    const std::size_t n_schemes = 1 + config.zeta_list.size();
    const unsigned bps = bits_per_symbol(config.modulation.scheme);
    const double power = config.modulation.symbol_power;

    std::vector<std::atomic<std::uint64_t>> err_acc(n_points * n_schemes);
    std::vector<std::atomic<std::uint64_t>> bit_acc(n_points * n_schemes);

    RngStream root(config.master_seed);
    const RngStream sweep_root = root.derive(detail::kSaltSweep);

    // one scheme of one trial: estimation (if SOBS), then the data block
    auto run_scheme = [&](std::size_t point, std::uint64_t trial, std::size_t scheme_idx,
                          const ChannelVector& h, const ChannelVector& h0_in,
                          ChannelVector* h_final_out) {
        const double tnr_lin = std::pow(10.0, config.tnr_grid_db[point] / 10.0);
        const NoiseModel noise{power / tnr_lin};
        RngStream srng = sweep_root.derive(point).derive(trial).derive(1 + scheme_idx);

        ChannelVector h_ref = h;  // OBS
        SessionTrace trace;
        TrainingSequence training;
        bool ran_session = false;
        if (scheme_idx > 0) {
            const double zeta = config.zeta_list[scheme_idx - 1];
            const StepCodebook* cb = codebooks[scheme_idx - 1];
            RngStream train_rng = srng.derive(0);
            training = make_training(train_rng, config.training_length(), config.n_t,
                                     config.training_kind);
            if (estimate_stale(h, h0_in, zeta)) {
                trace = run_session(h, h0_in, training, cb, zeta, config.max_iters);
                h_ref = trace.h_final;
                ran_session = true;
            } else {
                h_ref = h0_in;
            }
            if (h_final_out) *h_final_out = h_ref;
            if (!(norm_sq(h_ref) > 0.0)) h_ref = detail::unit_basis_vector(config.n_t);
        }

        RngStream data_rng = srng.derive(1);
        RngStream noise_rng = srng.derive(2);

        ChannelVector w = make_beamformer(h_ref);
        ComplexSample g = inner_product(h, w);

        // no-interrupt mode: symbols sent while the recursion is still
        // running are beamformed along the evolving estimate H_k
        ChannelVector h_live;
        std::size_t live_steps = 0;
        if (scheme_idx > 0 && !config.interrupt_mode && ran_session) {
            h_live = h0_in;
            live_steps = trace.records.size();
        }

        std::uint64_t errors = 0, nbits = 0;
        for (std::size_t j = 0; j < config.block_symbols; ++j) {
            ComplexSample g_j = g;
            if (j < live_steps) {
                axpy(h_live, trace.records[j].mu_sent, training.at_iteration(trace.records[j].k));
                g_j = norm_sq(h_live) > 0.0
                          ? inner_product(h, make_beamformer(h_live))
                          : inner_product(h, detail::unit_basis_vector(config.n_t));
            }
            const unsigned b0 = data_rng.bit();
            const unsigned b1 = bps == 2 ? data_rng.bit() : 0;
            const ComplexSample s = map_symbol(b0, b1, config.modulation);
            ComplexSample d = g_j * s;
            if (noise.sigma_v_sq > 0.0) d += noise_rng.complex_normal(noise.sigma_v_sq);
            const DetectedBits det = detect(d, g_j, config.modulation);
            errors += det.bits[0] != b0;
            ++nbits;
            if (bps == 2) {
                errors += det.bits[1] != b1;
                ++nbits;
            }
        }
        err_acc[point * n_schemes + scheme_idx].fetch_add(errors, std::memory_order_relaxed);
        bit_acc[point * n_schemes + scheme_idx].fetch_add(nbits, std::memory_order_relaxed);
    };

    if (config.h0_init == HInitMode::Zero) {
        const std::uint64_t total = static_cast<std::uint64_t>(n_points) * config.trials_per_point;
        detail::parallel_for_units(
            total, config.threads,
            [&](std::uint64_t unit) {
                const std::size_t point = static_cast<std::size_t>(unit / config.trials_per_point);
                const std::uint64_t trial = unit % config.trials_per_point;
                RngStream chan_rng = sweep_root.derive(point).derive(trial).derive(0);
                const ChannelVector h = draw_complex_gaussian(chan_rng, config.n_t, 1.0);
                const ChannelVector h0(config.n_t, {0.0, 0.0});
                for (std::size_t s = 0; s < n_schemes; ++s)
                    run_scheme(point, trial, s, h, h0, nullptr);
            },
            progress);
    } else {
        // previous-epoch initialization chains trials, so trials run
        // sequentially within a point and points are the parallel units
        detail::parallel_for_units(
            n_points, config.threads,
            [&](std::uint64_t point) {
                std::vector<ChannelVector> h_prev(n_schemes,
                                                  ChannelVector(config.n_t, {0.0, 0.0}));
                for (std::uint64_t trial = 0; trial < config.trials_per_point; ++trial) {
                    RngStream chan_rng = sweep_root.derive(point).derive(trial).derive(0);
                    const ChannelVector h = draw_complex_gaussian(chan_rng, config.n_t, 1.0);
                    for (std::size_t s = 0; s < n_schemes; ++s) {
                        ChannelVector h_final = h_prev[s];
                        run_scheme(point, trial, s, h, h_prev[s], &h_final);
                        h_prev[s] = h_final;
                    }
                }
            },
            progress);
    }

    BerTable table;
    table.reserve(n_points * n_schemes);
    for (std::size_t p = 0; p < n_points; ++p) {
        for (std::size_t s = 0; s < n_schemes; ++s) {
            BerCell cell;
            cell.tnr_db = config.tnr_grid_db[p];
            cell.scheme = s == 0 ? "OBS" : "SOBS";
            if (s > 0) cell.zeta = config.zeta_list[s - 1];
            cell.n_t = config.n_t;
            cell.mod = config.modulation.scheme;
            cell.bit_errors = err_acc[p * n_schemes + s].load();
            cell.bits_sent = bit_acc[p * n_schemes + s].load();
            cell.ber = cell.bits_sent
                           ? static_cast<double>(cell.bit_errors) / static_cast<double>(cell.bits_sent)
                           : 0.0;
            const WilsonInterval ci = wilson_interval(cell.bit_errors, cell.bits_sent);
            cell.ci_lo = ci.lo;
            cell.ci_hi = ci.hi;
            table.push_back(std::move(cell));
        }
    }
    return table;
}

// Spec-shaped overload: a single codebook (or none) shared by every zeta.
inline BerTable run_ber_sweep(const SimConfig& config, const StepCodebook* codebook,
                              const ProgressFn& progress = {}) {
    return run_ber_sweep(config,
                         std::vector<const StepCodebook*>(config.zeta_list.size(), codebook),
                         progress);
}

// Pilot runs with ideal feedback: every mu_opt encountered across `trials`
// cold-started sessions at zeta_list.front(). This is both the codebook
// training population and the step-size histogram population.
inline std::vector<double> collect_step_samples(const SimConfig& config, std::uint64_t trials) {
    config.validate();
    if (config.n_r != 1) throw ParameterError("collect_step_samples: MISO only (n_r = 1)");
    if (config.zeta_list.empty())
        throw ParameterError("collect_step_samples: zeta_list must not be empty");
    if (trials < 1) throw ParameterError("collect_step_samples: trials must be >= 1");
    const double zeta = config.zeta_list.front();

    RngStream root(config.master_seed);
    const RngStream collect_root = root.derive(detail::kSaltCollect);

    std::vector<std::vector<double>> per_trial(trials);
    detail::parallel_for_units(trials, config.threads, [&](std::uint64_t i) {
        RngStream s = collect_root.derive(i);
        RngStream chan_rng = s.derive(0);
        RngStream train_rng = s.derive(1);
        const ChannelVector h = draw_complex_gaussian(chan_rng, config.n_t, 1.0);
        const ChannelVector h0(config.n_t, {0.0, 0.0});
        const TrainingSequence training =
            make_training(train_rng, config.training_length(), config.n_t, config.training_kind);
        const SessionTrace trace =
            run_session(h, h0, training, nullptr, zeta, config.max_iters);
        per_trial[i].reserve(trace.records.size());
        for (const auto& rec : trace.records) per_trial[i].push_back(rec.mu_opt);
    });

    std::vector<double> all;
    for (const auto& v : per_trial) all.insert(all.end(), v.begin(), v.end());
    return all;
}

struct Histogram {
    std::vector<double> edges;        // bins + 1 edges
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    double sample_mean = 0.0;  // raw moments (also fix the bin span)
    double sample_std = 0.0;
    double skewness = 0.0;     // g1 of the displayed population, i.e. clamped to the span
};

// Bin the pilot step-size population: `bins` uniform bins spanning
// mean +/- 5 std; outliers land in the first/last bin so counts conserve.
//
// The symmetry statistic is computed on the span-clamped values. The raw
// step sizes have a polynomial tail (rare near-zero-norm training draws),
// so raw third moments fluctuate without bound; the displayed population
// has compact support and its g1 concentrates.
inline Histogram run_histogram(const SimConfig& config, std::uint64_t sessions,
                               std::size_t bins = 101) {
    if (bins < 1) throw ParameterError("run_histogram: bins must be >= 1");
    const std::vector<double> samples = collect_step_samples(config, sessions);

    Histogram h;
    h.total = samples.size();
    if (samples.empty()) throw ParameterError("run_histogram: no step samples collected");

    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    var /= static_cast<double>(samples.size());
    h.sample_mean = mean;
    h.sample_std = std::sqrt(var);

    const double span = h.sample_std > 0.0 ? 5.0 * h.sample_std : 0.5;
    const double lo = mean - span, hi = mean + span;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double x : samples) {
        double pos = (x - lo) / (hi - lo) * static_cast<double>(bins);
        auto idx = static_cast<std::int64_t>(std::floor(pos));
        idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(bins) - 1);
        ++h.counts[static_cast<std::size_t>(idx)];
    }

    double cmean = 0.0;
    for (double x : samples) cmean += std::clamp(x, lo, hi);
    cmean /= static_cast<double>(samples.size());
    double m2 = 0.0, m3 = 0.0;
    for (double x : samples) {
        const double d = std::clamp(x, lo, hi) - cmean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(samples.size());
    m3 /= static_cast<double>(samples.size());
    h.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    return h;
}

struct ConvergenceStats {
    double zeta = 0.0;
    std::size_t n_t = 0;
    bool quantized = false;
    std::uint64_t sessions = 0;
    double median_iters = 0.0;
    double mean_iters = 0.0;
    double frac_converged = 0.0;
    double feedback_bits_mean = 0.0;
};

// Session-length statistics per zeta. codebooks: one entry per zeta
// (nullptr = ideal feedback). n_r > 1 runs lockstep MIMO sessions.
inline std::vector<ConvergenceStats> convergence_stats(
    const SimConfig& config, const std::vector<const StepCodebook*>& codebooks,
    std::uint64_t sessions) {
    config.validate();
    if (codebooks.size() != config.zeta_list.size())
        throw ParameterError("convergence_stats: need one codebook entry per zeta");
    if (sessions < 1) throw ParameterError("convergence_stats: sessions must be >= 1");

    RngStream root(config.master_seed);
    const RngStream conv_root = root.derive(detail::kSaltConvergence);

    std::vector<ConvergenceStats> out;
    for (std::size_t zi = 0; zi < config.zeta_list.size(); ++zi) {
        const double zeta = config.zeta_list[zi];
        const StepCodebook* cb = codebooks[zi];

        std::vector<std::uint32_t> iters(sessions);
        std::vector<std::uint8_t> conv(sessions);
        std::vector<std::uint64_t> fb_bits(sessions);
        detail::parallel_for_units(sessions, config.threads, [&](std::uint64_t i) {
            RngStream s = conv_root.derive(zi).derive(i);
            RngStream chan_rng = s.derive(0);
            RngStream train_rng = s.derive(1);
            const TrainingSequence training = make_training(
                train_rng, config.training_length(), config.n_t, config.training_kind);
            SessionTrace trace;
            if (config.n_r == 1) {
                const ChannelVector h = draw_complex_gaussian(chan_rng, config.n_t, 1.0);
                const ChannelVector h0(config.n_t, {0.0, 0.0});
                trace = run_session(h, h0, training, cb, zeta, config.max_iters);
            } else {
                std::vector<ChannelVector> rows(config.n_r), inits(config.n_r);
                for (auto& row : rows) row = draw_complex_gaussian(chan_rng, config.n_t, 1.0);
                for (auto& row : inits) row = ChannelVector(config.n_t, {0.0, 0.0});
                trace = run_session_mimo(rows, inits, training, cb, zeta,
                                         config.max_iters).front();
            }
            iters[i] = trace.iterations_run();
            conv[i] = trace.converged ? 1 : 0;
            fb_bits[i] = trace.feedback_payload_bits;
        });

        ConvergenceStats st;
        st.zeta = zeta;
        st.n_t = config.n_t;
        st.quantized = cb != nullptr;
        st.sessions = sessions;
        std::vector<std::uint32_t> sorted(iters);
        std::sort(sorted.begin(), sorted.end());
        st.median_iters = sessions % 2 == 1
                              ? sorted[sessions / 2]
                              : 0.5 * (static_cast<double>(sorted[sessions / 2 - 1]) +
                                       static_cast<double>(sorted[sessions / 2]));
        double sum_it = 0.0, sum_conv = 0.0, sum_fb = 0.0;
        for (std::uint64_t i = 0; i < sessions; ++i) {
            sum_it += iters[i];
            sum_conv += conv[i];
            sum_fb += static_cast<double>(fb_bits[i]);
        }
        st.mean_iters = sum_it / static_cast<double>(sessions);
        st.frac_converged = sum_conv / static_cast<double>(sessions);
        st.feedback_bits_mean = sum_fb / static_cast<double>(sessions);
        out.push_back(st);
    }
    return out;
}

inline std::vector<ConvergenceStats> convergence_stats(const SimConfig& config,
                                                       const StepCodebook* codebook,
                                                       std::uint64_t sessions) {
    return convergence_stats(
        config, std::vector<const StepCodebook*>(config.zeta_list.size(), codebook), sessions);
}

}  // namespace stepfb
