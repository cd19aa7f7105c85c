#pragma once

#include <cmath>
#include <cstdint>

#include "stepfb/complex_vec.hpp"
#include "stepfb/rng.hpp"

namespace stepfb {

// Block-fading realization: h is constant within an epoch, redrawn i.i.d.
// CN(0,1) per entry at each epoch boundary.
struct ChannelRealization {
    ChannelVector h;
    std::uint64_t epoch = 0;
};

struct NoiseModel {
    double sigma_v_sq = 1.0;  // noise variance, linear
};

inline ChannelRealization new_epoch(RngStream& rng, std::size_t n_t) {
    return {draw_complex_gaussian(rng, n_t, 1.0), 0};
}

inline void next_epoch(ChannelRealization& ch, RngStream& rng) {
    ch.h = draw_complex_gaussian(rng, ch.h.size(), 1.0);
    ++ch.epoch;
}

// Forward link: d = h^H t + v with v ~ CN(0, sigma_v_sq). t is the already
// beamformed transmit vector. sigma_v_sq = 0 is the noiseless limit.
inline ComplexSample receive(const ChannelVector& h, const ChannelVector& t,
                             const NoiseModel& noise, RngStream& rng) {
    require_same_length(h, t);
    if (!(noise.sigma_v_sq >= 0.0) || !std::isfinite(noise.sigma_v_sq))
        throw ParameterError("receive: sigma_v_sq must be finite and non-negative");
    ComplexSample d = inner_product(h, t);
    if (noise.sigma_v_sq > 0.0) d += rng.complex_normal(noise.sigma_v_sq);
    return d;
}

// True when ||h - h_hat|| > zeta, i.e. the current estimate no longer gives
// satisfactory performance and an estimation session should start. Equality
// counts as still satisfactory.
inline bool estimate_stale(const ChannelVector& h, const ChannelVector& h_hat, double zeta) {
    if (!(zeta > 0.0) || !std::isfinite(zeta))
        throw ParameterError("estimate_stale: zeta must be positive");
    return std::sqrt(error_norm_sq(h, h_hat)) > zeta;
}

}  // namespace stepfb
