#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <variant>
#include <vector>

#include "autolap/bytes.hpp"

// Frame layout: magic "FRLP", version u8 (=1), msg_type u8, payload_len u32
// LE, payload, crc32 u32 LE over the payload only. Empty HELLO is exactly 14
// bytes with crc 0.

namespace autolap {

enum class MsgType : uint8_t {
    Hello = 0,
    TransitionBatch = 1,
    ParamUpdate = 2,
    Ack = 3,
    Heartbeat = 4,
};

inline constexpr uint8_t kWireVersion = 1;
inline constexpr uint32_t kMaxPayload = 16u << 20;

struct Frame {
    MsgType type = MsgType::Hello;
    std::vector<uint8_t> payload;

    bool operator==(const Frame&) const = default;
};

enum class DecodeError { BadMagic, BadCrc, UnknownType, Truncated };

std::vector<uint8_t> encode_frame(const Frame& f);

// One-shot decode of a complete byte buffer holding exactly one frame.
std::variant<Frame, DecodeError> decode_frame(const std::vector<uint8_t>& bytes);

// Incremental decoder for byte streams. Malformed headers resync by
// scanning forward one byte at a time; an oversize payload_len counts as
// BadMagic (malformed header). Corrupt frames are counted, never delivered.
class FrameDecoder {
public:
    void feed(const uint8_t* data, size_t n);
    void feed(const std::vector<uint8_t>& b) { feed(b.data(), b.size()); }
    std::optional<Frame> next();

    uint64_t errors(DecodeError e) const { return counts_[(size_t)e]; }
    uint64_t total_errors() const {
        return counts_[0] + counts_[1] + counts_[2] + counts_[3];
    }

private:
    std::deque<uint8_t> buf_;
    std::array<uint64_t, 4> counts_{};
};

struct TransitionRecord {
    std::vector<float> features;       // frozen-encoder features (or raw pixels
                                       // in dataset files; fixed length per stream)
    std::array<float, 9> proprio{};    // body v (3), omega (3), accel (3), 2D-padded
    std::array<float, 3> goal{};       // unit dir x, y, distance (raw meters)
    std::array<float, 2> prev_action{};  // normalized
    std::array<float, 2> action{};       // normalized
    float reward = 0.0f;
    uint8_t done = 0;
    uint64_t step = 0;

    bool operator==(const TransitionRecord&) const = default;
};

inline size_t transition_record_size(size_t feature_len) {
    return feature_len * 4 + 9 * 4 + 3 * 4 + 2 * 4 + 2 * 4 + 4 + 1 + 8;
}

// Batch payload is just count * fixed-size records; both sides know the
// feature length from the run config.
std::vector<uint8_t> encode_transition_batch(const std::vector<TransitionRecord>& recs,
                                             size_t feature_len);
std::optional<std::vector<TransitionRecord>> decode_transition_batch(
    const std::vector<uint8_t>& payload, size_t feature_len);

}  // namespace autolap
