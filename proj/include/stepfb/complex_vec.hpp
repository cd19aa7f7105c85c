#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "stepfb/errors.hpp"

namespace stepfb {

using ComplexSample = std::complex<double>;

// Channel vector H: one fading coefficient per transmit antenna. Also used
// for the estimates H_k, the training vectors X_k and beamformer weights.
using ChannelVector = std::vector<ComplexSample>;

inline void require_same_length(const ChannelVector& a, const ChannelVector& b) {
    if (a.size() != b.size())
        throw DimensionError("vector length mismatch: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
}

// a^H b, conjugation on the first argument.
inline ComplexSample inner_product(const ChannelVector& a, const ChannelVector& b) {
    require_same_length(a, b);
    ComplexSample acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

// Squared Euclidean norm, sum |a_i|^2.
inline double norm_sq(const ChannelVector& a) {
    double acc = 0.0;
    for (const auto& z : a) acc += std::norm(z);
    return acc;
}

inline double norm(const ChannelVector& a) { return std::sqrt(norm_sq(a)); }

inline ChannelVector add(const ChannelVector& a, const ChannelVector& b) {
    require_same_length(a, b);
    ChannelVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline ChannelVector sub(const ChannelVector& a, const ChannelVector& b) {
    require_same_length(a, b);
    ChannelVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline ChannelVector scaled(const ChannelVector& a, double s) {
    ChannelVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

// y += alpha * x
inline void axpy(ChannelVector& y, double alpha, const ChannelVector& x) {
    require_same_length(y, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline double error_norm_sq(const ChannelVector& a, const ChannelVector& b) {
    require_same_length(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::norm(a[i] - b[i]);
    return acc;
}

inline bool all_finite(const ChannelVector& a) {
    for (const auto& z : a)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

}  // namespace stepfb
