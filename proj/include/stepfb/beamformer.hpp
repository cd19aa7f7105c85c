#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stepfb/complex_vec.hpp"
#include "stepfb/errors.hpp"

namespace stepfb {

enum class ModScheme { Bpsk, QpskGray };

struct Modulation {
    ModScheme scheme = ModScheme::Bpsk;
    double symbol_power = 1.0;  // |s|^2 = P for every constellation point
};

inline unsigned bits_per_symbol(ModScheme scheme) { return scheme == ModScheme::Bpsk ? 1 : 2; }

inline const char* scheme_name(ModScheme scheme) {
    return scheme == ModScheme::Bpsk ? "bpsk" : "qpsk";
}

// Gray-coded QPSK: bit pairs walk the circle so adjacent points differ in
// exactly one bit. 00 -> pi/4, 01 -> 3pi/4, 11 -> 5pi/4, 10 -> 7pi/4.
inline ComplexSample map_symbol(unsigned b0, unsigned b1, const Modulation& mod) {
    const double amp = std::sqrt(mod.symbol_power);
    if (mod.scheme == ModScheme::Bpsk) return {b0 ? -amp : amp, 0.0};
    static constexpr std::array<unsigned, 4> gray_pos = {0, 1, 3, 2};  // 00,01,11,10 order
    const double angle = M_PI * (0.25 + 0.5 * static_cast<double>(gray_pos[(b0 << 1) | b1]));
    return {amp * std::cos(angle), amp * std::sin(angle)};
}

inline std::vector<ComplexSample> modulate(const std::vector<std::uint8_t>& bits,
                                           const Modulation& mod) {
    if (!(mod.symbol_power > 0.0)) throw ParameterError("modulate: symbol power must be positive");
    if (mod.scheme == ModScheme::Bpsk) {
        std::vector<ComplexSample> out;
        out.reserve(bits.size());
        for (auto b : bits) out.push_back(map_symbol(b, 0, mod));
        return out;
    }
    if (bits.size() % 2 != 0) throw ParameterError("modulate: QPSK needs an even bit count");
    std::vector<ComplexSample> out;
    out.reserve(bits.size() / 2);
    for (std::size_t i = 0; i < bits.size(); i += 2) out.push_back(map_symbol(bits[i], bits[i + 1], mod));
    return out;
}

// Unit-norm transmit weights w = h_ref / ||h_ref||; the transmit vector for
// symbol s is t = s * w, so ||t||^2 = |s|^2. With h_ref = H the noiseless
// received signal is s * ||H|| (optimal beamforming); substituting the
// estimate for H gives the suboptimal scheme.
inline ChannelVector make_beamformer(const ChannelVector& h_ref) {
    const double n = norm(h_ref);
    if (!(n > 0.0)) throw ParameterError("make_beamformer: zero reference channel");
    return scaled(h_ref, 1.0 / n);
}

struct DetectedBits {
    std::array<std::uint8_t, 2> bits{};
    unsigned count = 0;
};

// Coherent detection: derotate by the composite gain g = h^H w (known at the
// receiver, which knows both H and the estimate), then minimum-distance
// decision. PSK decision regions are angular, so the derotated sign /
// quadrant is exact minimum distance regardless of |g|.
inline DetectedBits detect(ComplexSample d, ComplexSample composite_gain, const Modulation& mod) {
    const double g_abs = std::abs(composite_gain);
    if (!(g_abs > 0.0)) throw ParameterError("detect: zero composite gain");
    const ComplexSample y = d * std::conj(composite_gain) / g_abs;

    DetectedBits out;
    if (mod.scheme == ModScheme::Bpsk) {
        out.bits[0] = y.real() >= 0.0 ? 0 : 1;
        out.count = 1;
        return out;
    }
    // Gray demap by quadrant: (+,+)->00 (-,+)->01 (-,-)->11 (+,-)->10,
    // so the first bit reads the imaginary sign and the second the real sign
    out.bits[0] = y.imag() < 0.0 ? 1 : 0;
    out.bits[1] = y.real() < 0.0 ? 1 : 0;
    out.count = 2;
    return out;
}

}  // namespace stepfb
