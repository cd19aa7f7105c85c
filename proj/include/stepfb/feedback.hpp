#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stepfb/errors.hpp"

namespace stepfb {

// Reverse-link control messages. StartEstimation tells the transmitter to
// stop data transmission and enter the training procedure; Step carries the
// quantized step-size indices (one per receive antenna); EndEstimation is the
// procedure ending signal.
enum class MsgKind : std::uint8_t {
    StartEstimation = 0x01,
    Step = 0x02,
    EndEstimation = 0x03,
};

struct FeedbackMessage {
    MsgKind kind = MsgKind::StartEstimation;
    std::uint16_t iteration = 0;
    std::vector<std::uint32_t> indices;  // Step only; empty in ideal-feedback traces

    bool operator==(const FeedbackMessage&) const = default;
};

inline FeedbackMessage start_message() { return {MsgKind::StartEstimation, 0, {}}; }

inline FeedbackMessage step_message(std::uint16_t iteration, std::vector<std::uint32_t> indices) {
    return {MsgKind::Step, iteration, std::move(indices)};
}

inline FeedbackMessage end_message(std::uint16_t iteration) {
    return {MsgKind::EndEstimation, iteration, {}};
}

// Wire layout: byte 0 kind; bytes 1-2 iteration, big-endian. Step frames
// append byte 3 = n_R followed by the indices packed MSB-first, b bits each,
// zero-padded to a byte boundary. Frame length is a pure function of
// (kind, n_R, b): 3 bytes for control, 4 + ceil(n_R*b/8) for Step.
inline std::vector<std::uint8_t> encode_message(const FeedbackMessage& msg,
                                                unsigned bits_per_index) {
    if (bits_per_index < 1 || bits_per_index > 16)
        throw FrameError("encode: bits_per_index must be in 1..16");
    if (msg.kind != MsgKind::StartEstimation && msg.kind != MsgKind::Step &&
        msg.kind != MsgKind::EndEstimation)
        throw FrameError("encode: unknown message kind");
    if (msg.kind != MsgKind::Step && !msg.indices.empty())
        throw FrameError("encode: control messages carry no indices");
    if (msg.kind == MsgKind::StartEstimation && msg.iteration != 0)
        throw FrameError("encode: StartEstimation must have iteration 0");

    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(msg.kind));
    out.push_back(static_cast<std::uint8_t>(msg.iteration >> 8));
    out.push_back(static_cast<std::uint8_t>(msg.iteration & 0xff));
    if (msg.kind != MsgKind::Step) return out;

    if (msg.indices.size() > 255) throw FrameError("encode: more than 255 indices");
    out.push_back(static_cast<std::uint8_t>(msg.indices.size()));

    std::uint32_t acc = 0;
    unsigned nbits = 0;
    for (std::uint32_t idx : msg.indices) {
        if (idx >= (1u << bits_per_index)) throw FrameError("encode: index exceeds 2^b - 1");
        acc = (acc << bits_per_index) | idx;
        nbits += bits_per_index;
        while (nbits >= 8) {
            out.push_back(static_cast<std::uint8_t>((acc >> (nbits - 8)) & 0xff));
            nbits -= 8;
        }
    }
    if (nbits > 0) out.push_back(static_cast<std::uint8_t>((acc << (8 - nbits)) & 0xff));
    return out;
}

inline FeedbackMessage decode_message(const std::vector<std::uint8_t>& bytes,
                                      unsigned bits_per_index) {
    if (bits_per_index < 1 || bits_per_index > 16)
        throw FrameError("decode: bits_per_index must be in 1..16");
    if (bytes.size() < 3) throw FrameError("decode: truncated frame");

    FeedbackMessage msg;
    switch (bytes[0]) {
        case 0x01: msg.kind = MsgKind::StartEstimation; break;
        case 0x02: msg.kind = MsgKind::Step; break;
        case 0x03: msg.kind = MsgKind::EndEstimation; break;
        default: throw FrameError("decode: unknown message kind");
    }
    msg.iteration = static_cast<std::uint16_t>((bytes[1] << 8) | bytes[2]);

    if (msg.kind != MsgKind::Step) {
        if (bytes.size() != 3) throw FrameError("decode: trailing bytes on control frame");
        if (msg.kind == MsgKind::StartEstimation && msg.iteration != 0)
            throw FrameError("decode: StartEstimation must have iteration 0");
        return msg;
    }

    if (bytes.size() < 4) throw FrameError("decode: truncated frame");
    const std::size_t n_r = bytes[3];
    const std::size_t payload = (n_r * bits_per_index + 7) / 8;
    if (bytes.size() < 4 + payload) throw FrameError("decode: truncated frame");
    if (bytes.size() > 4 + payload) throw FrameError("decode: trailing bytes on Step frame");

    std::uint32_t acc = 0;
    unsigned nbits = 0;
    std::size_t pos = 4;
    msg.indices.reserve(n_r);
    for (std::size_t i = 0; i < n_r; ++i) {
        while (nbits < bits_per_index) {
            acc = (acc << 8) | bytes[pos++];
            nbits += 8;
        }
        msg.indices.push_back((acc >> (nbits - bits_per_index)) & ((1u << bits_per_index) - 1));
        nbits -= bits_per_index;
    }
    if ((acc & ((1u << nbits) - 1)) != 0) throw FrameError("decode: nonzero padding bits");
    return msg;
}

inline std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) throw FrameError("from_hex: odd-length string");
    auto nibble = [](char c) -> unsigned {
        if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
        throw FrameError("from_hex: bad hex digit");
    };
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    return out;
}

}  // namespace stepfb
