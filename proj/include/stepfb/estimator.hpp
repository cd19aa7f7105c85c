#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "stepfb/complex_vec.hpp"
#include "stepfb/errors.hpp"
#include "stepfb/feedback.hpp"
#include "stepfb/quantizer.hpp"
#include "stepfb/rng.hpp"

namespace stepfb {

enum class SessionPhase { Idle, Estimating, Ended };

// One half of the recursion H_k = H_{k-1} + mu_k X_k. The transmitter owns
// one of these; the receiver keeps a bit-identical mirror by applying the
// same dequantized step.
struct EstimatorState {
    ChannelVector h_est;
    std::uint32_t k = 0;
    SessionPhase phase = SessionPhase::Idle;
};

// Training vectors X_k, known identically at both ends (same seed). Reused
// cyclically if a session outlives it.
struct TrainingSequence {
    std::vector<ChannelVector> vectors;

    const ChannelVector& at_iteration(std::uint32_t k) const {
        return vectors[(k - 1) % vectors.size()];
    }
};

enum class TrainingKind { GaussianWhite, PnSequence };

// GaussianWhite draws i.i.d. CN(0,1) entries; PnSequence draws unit-modulus
// entries from {+1, -1, +i, -i}. Real-only alphabets would leave the
// imaginary error components untouched (the step sizes are real), so the PN
// alphabet must be complex.
inline TrainingSequence make_training(RngStream& rng, std::size_t count, std::size_t n_t,
                                      TrainingKind kind = TrainingKind::GaussianWhite) {
    if (count < 1 || n_t < 1) throw ParameterError("make_training: count and n_t must be >= 1");
    static constexpr ComplexSample pn_alphabet[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    TrainingSequence ts;
    ts.vectors.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (kind == TrainingKind::GaussianWhite) {
            ts.vectors.push_back(draw_complex_gaussian(rng, n_t, 1.0));
        } else {
            ChannelVector v(n_t);
            for (auto& z : v) z = pn_alphabet[rng.bits() >> 62];
            ts.vectors.push_back(std::move(v));
        }
    }
    return ts;
}

struct StepResult {
    double mu_opt = 0.0;             // unquantized optimal step size
    double predicted_error_sq = 0.0; // post-step ||H - H_k||^2 if mu_opt is applied exactly
};

// Receiver side: optimal step size for the residual H - H_{k-1} against
// training vector x_k, and the squared error the exact step would leave.
// mu_opt may be negative; the admissible interval flips around 0 then but
// the formula is unchanged.
inline StepResult optimal_step(const ChannelVector& h_true, const ChannelVector& h_est,
                               const ChannelVector& x_k) {
    require_same_length(h_true, h_est);
    require_same_length(h_true, x_k);
    double nx = 0.0, err = 0.0, r = 0.0;
    for (std::size_t i = 0; i < x_k.size(); ++i) {
        const ComplexSample e = h_true[i] - h_est[i];
        nx += std::norm(x_k[i]);
        err += std::norm(e);
        r += x_k[i].real() * e.real() + x_k[i].imag() * e.imag();  // Re(x^H e)
    }
    if (!(nx > 0.0)) throw ParameterError("optimal_step: training vector has zero norm");
    StepResult res;
    res.mu_opt = r / nx;
    res.predicted_error_sq = std::max(0.0, err - r * r / nx);
    return res;
}

// Open interval of step sizes that strictly decrease ||H - H_k||:
// (0, 2*mu_opt) for positive mu_opt, (2*mu_opt, 0) for negative,
// empty (0, 0) when the residual is orthogonal to x_k.
inline std::pair<double, double> admissible_interval(const ChannelVector& h_true,
                                                     const ChannelVector& h_est,
                                                     const ChannelVector& x_k) {
    const double mu = optimal_step(h_true, h_est, x_k).mu_opt;
    if (mu > 0.0) return {0.0, 2.0 * mu};
    if (mu < 0.0) return {2.0 * mu, 0.0};
    return {0.0, 0.0};
}

// H_k = H_{k-1} + mu * X_k. Used identically by the transmitter and by the
// receiver's mirror of the transmitter state.
inline void apply_step(EstimatorState& state, const ChannelVector& x_k, double mu) {
    if (state.phase != SessionPhase::Estimating)
        throw ProtocolError("apply_step: session is not in the Estimating phase");
    if (!std::isfinite(mu)) throw ParameterError("apply_step: mu must be finite");
    axpy(state.h_est, mu, x_k);
    ++state.k;
}

struct IterationRecord {
    std::uint32_t k = 0;
    double mu_opt = 0.0;   // receiver's unquantized optimal step
    double mu_sent = 0.0;  // value the transmitter actually applied
    double err_sq = 0.0;   // ||H - H_k||^2 after the step
};

struct SessionTrace {
    std::size_t n_t = 0;
    double zeta = 0.0;
    double initial_err_sq = 0.0;
    std::vector<IterationRecord> records;
    bool converged = false;
    std::uint32_t n = 0;  // terminating iteration; valid when converged
    ChannelVector h_final;
    std::vector<FeedbackMessage> messages;
    std::uint64_t feedback_payload_bits = 0;  // n_R * b per Step frame (quantized only)

    std::uint32_t iterations_run() const { return static_cast<std::uint32_t>(records.size()); }
};

namespace detail {

inline void validate_session_args(const std::vector<ChannelVector>& h_true_rows,
                                  const std::vector<ChannelVector>& h_init_rows,
                                  const TrainingSequence& training, double zeta,
                                  std::uint32_t max_iters) {
    if (!(zeta > 0.0) || !std::isfinite(zeta))
        throw ParameterError("run_session: zeta must be positive");
    if (max_iters < 1 || max_iters > 0xffff)
        throw ParameterError("run_session: max_iters must be in 1..65535");
    if (training.vectors.empty()) throw ParameterError("run_session: empty training sequence");
    if (h_true_rows.empty() || h_true_rows.size() != h_init_rows.size())
        throw DimensionError("run_session: row count mismatch");
    const std::size_t n_t = h_true_rows.front().size();
    if (n_t < 1) throw DimensionError("run_session: n_t must be >= 1");
    for (const auto& row : h_true_rows)
        if (row.size() != n_t) throw DimensionError("run_session: ragged h_true rows");
    for (const auto& row : h_init_rows)
        if (row.size() != n_t) throw DimensionError("run_session: ragged h_init rows");
    for (const auto& x : training.vectors) {
        if (x.size() != n_t) throw DimensionError("run_session: training vector length mismatch");
        if (!(norm_sq(x) > 0.0))
            throw ParameterError("run_session: training vector has zero norm");
    }
}

}  // namespace detail

// One estimation session over the reverse link, generalized to n_R receive
// antennas: n_R recursions advance in lockstep on the shared training
// sequence, and each iteration's Step frame carries n_R quantized indices.
// The receiver computes each row's mu_opt from its mirror state, quantizes
// it (when a codebook is given), and the frame actually crosses the wire:
// the transmitter advances from the decoded indices, the receiver from its
// own copy of the quantized values, so the two sides stay bit-identical.
//
// codebook == nullptr means ideal (unquantized) feedback; Step frames then
// carry no indices and the step values are taken out-of-band.
//
// The session ends when every row satisfies ||H - H_n|| <= zeta at the same
// iteration n. Non-convergence within max_iters is reported in the traces,
// never thrown.
inline std::vector<SessionTrace> run_session_mimo(const std::vector<ChannelVector>& h_true_rows,
                                                  const std::vector<ChannelVector>& h_init_rows,
                                                  const TrainingSequence& training,
                                                  const StepCodebook* codebook, double zeta,
                                                  std::uint32_t max_iters) {
    detail::validate_session_args(h_true_rows, h_init_rows, training, zeta, max_iters);
    const std::size_t n_r = h_true_rows.size();
    const std::size_t n_t = h_true_rows.front().size();
    const unsigned b = codebook ? codebook->bits : 0;

    std::vector<SessionTrace> traces(n_r);
    std::vector<EstimatorState> tx(n_r), rx(n_r);
    std::vector<double> err_sq(n_r);

    for (std::size_t r = 0; r < n_r; ++r) {
        traces[r].n_t = n_t;
        traces[r].zeta = zeta;
        tx[r] = {h_init_rows[r], 0, SessionPhase::Estimating};
        rx[r] = {h_init_rows[r], 0, SessionPhase::Estimating};
        err_sq[r] = error_norm_sq(h_true_rows[r], rx[r].h_est);
        traces[r].initial_err_sq = err_sq[r];
        traces[r].messages.push_back(start_message());
    }

    auto all_within = [&] {
        for (double e : err_sq)
            if (std::sqrt(e) > zeta) return false;
        return true;
    };
    auto finish = [&](bool converged, std::uint32_t n) {
        for (std::size_t r = 0; r < n_r; ++r) {
            if (converged) {
                traces[r].converged = true;
                traces[r].n = n;
                traces[r].messages.push_back(end_message(static_cast<std::uint16_t>(n)));
            }
            tx[r].phase = rx[r].phase = SessionPhase::Ended;
            traces[r].h_final = tx[r].h_est;
        }
    };

    if (all_within()) {
        finish(true, 0);
        return traces;
    }

    for (std::uint32_t k = 1; k <= max_iters; ++k) {
        const ChannelVector& x = training.at_iteration(k);

        std::vector<double> mu_opt(n_r), mu_rx(n_r), mu_tx(n_r);
        FeedbackMessage msg;
        if (codebook) {
            std::vector<std::uint32_t> indices(n_r);
            for (std::size_t r = 0; r < n_r; ++r) {
                mu_opt[r] = optimal_step(h_true_rows[r], rx[r].h_est, x).mu_opt;
                indices[r] = encode(*codebook, mu_opt[r]);
                mu_rx[r] = decode(*codebook, indices[r]);
            }
            msg = step_message(static_cast<std::uint16_t>(k), indices);
            const auto frame = encode_message(msg, b);
            const FeedbackMessage off_wire = decode_message(frame, b);
            for (std::size_t r = 0; r < n_r; ++r)
                mu_tx[r] = decode(*codebook, off_wire.indices[r]);
        } else {
            for (std::size_t r = 0; r < n_r; ++r) {
                mu_opt[r] = optimal_step(h_true_rows[r], rx[r].h_est, x).mu_opt;
                mu_rx[r] = mu_tx[r] = mu_opt[r];
            }
            msg = step_message(static_cast<std::uint16_t>(k), {});
        }

        for (std::size_t r = 0; r < n_r; ++r) {
            apply_step(tx[r], x, mu_tx[r]);
            apply_step(rx[r], x, mu_rx[r]);
            err_sq[r] = error_norm_sq(h_true_rows[r], rx[r].h_est);
            traces[r].records.push_back({k, mu_opt[r], mu_rx[r], err_sq[r]});
            if (codebook)
                traces[r].feedback_payload_bits += static_cast<std::uint64_t>(n_r) * b;
            traces[r].messages.push_back(msg);
        }

        if (all_within()) {
            finish(true, k);
            return traces;
        }
    }
    finish(false, 0);
    return traces;
}

// MISO special case: single receive antenna, one step-size value per frame.
inline SessionTrace run_session(const ChannelVector& h_true, const ChannelVector& h_init,
                                const TrainingSequence& training, const StepCodebook* codebook,
                                double zeta, std::uint32_t max_iters) {
    detail::validate_session_args({h_true}, {h_init}, training, zeta, max_iters);

    SessionTrace trace;
    trace.n_t = h_true.size();
    trace.zeta = zeta;

    EstimatorState tx{h_init, 0, SessionPhase::Estimating};
    EstimatorState rx{h_init, 0, SessionPhase::Estimating};
    trace.messages.push_back(start_message());

    double err_sq = error_norm_sq(h_true, rx.h_est);
    trace.initial_err_sq = err_sq;

    auto finish = [&](bool converged, std::uint32_t n) {
        if (converged) {
            trace.converged = true;
            trace.n = n;
            trace.messages.push_back(end_message(static_cast<std::uint16_t>(n)));
        }
        tx.phase = rx.phase = SessionPhase::Ended;
        trace.h_final = tx.h_est;
    };

    if (std::sqrt(err_sq) <= zeta) {
        finish(true, 0);
        return trace;
    }

    const unsigned b = codebook ? codebook->bits : 0;
    for (std::uint32_t k = 1; k <= max_iters; ++k) {
        const ChannelVector& x = training.at_iteration(k);
        const StepResult sr = optimal_step(h_true, rx.h_est, x);

        double mu_applied;
        if (codebook) {
            const unsigned idx = encode(*codebook, sr.mu_opt);
            FeedbackMessage msg = step_message(static_cast<std::uint16_t>(k), {idx});
            const auto frame = encode_message(msg, b);
            const FeedbackMessage off_wire = decode_message(frame, b);
            const double mu_tx = decode(*codebook, off_wire.indices.front());
            mu_applied = decode(*codebook, idx);
            apply_step(tx, x, mu_tx);
            apply_step(rx, x, mu_applied);
            trace.feedback_payload_bits += b;
            trace.messages.push_back(std::move(msg));
        } else {
            mu_applied = sr.mu_opt;
            apply_step(tx, x, mu_applied);
            apply_step(rx, x, mu_applied);
            trace.messages.push_back(step_message(static_cast<std::uint16_t>(k), {}));
        }

        err_sq = error_norm_sq(h_true, rx.h_est);
        trace.records.push_back({k, sr.mu_opt, mu_applied, err_sq});

        if (std::sqrt(err_sq) <= zeta) {
            finish(true, k);
            return trace;
        }
    }
    finish(false, 0);
    return trace;
}

}  // namespace stepfb
