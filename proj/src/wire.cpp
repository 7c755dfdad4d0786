#include "autolap/wire.hpp"

namespace autolap {

static constexpr char kMagic[4] = {'F', 'R', 'L', 'P'};

std::vector<uint8_t> encode_frame(const Frame& f) {
    std::vector<uint8_t> b;
    b.reserve(14 + f.payload.size());
    put_bytes(b, kMagic, 4);
    put_u8(b, kWireVersion);
    put_u8(b, (uint8_t)f.type);
    put_u32(b, (uint32_t)f.payload.size());
    put_bytes(b, f.payload.data(), f.payload.size());
    put_u32(b, crc32(f.payload));
    return b;
}

std::variant<Frame, DecodeError> decode_frame(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 14) return DecodeError::Truncated;
    if (std::memcmp(bytes.data(), kMagic, 4) != 0 || bytes[4] != kWireVersion)
        return DecodeError::BadMagic;
    ByteReader r(bytes.data() + 5, bytes.size() - 5);
    uint8_t type;
    uint32_t len;
    r.u8(type);
    r.u32(len);
    if (len > kMaxPayload) return DecodeError::BadMagic;
    if (r.remaining() < (size_t)len + 4) return DecodeError::Truncated;
    Frame f;
    f.payload.resize(len);
    r.bytes(f.payload.data(), len);
    uint32_t want;
    r.u32(want);
    if (crc32(f.payload) != want) return DecodeError::BadCrc;
    if (type > 4) return DecodeError::UnknownType;
    f.type = (MsgType)type;
    return f;
}

void FrameDecoder::feed(const uint8_t* data, size_t n) {
    buf_.insert(buf_.end(), data, data + n);
}

std::optional<Frame> FrameDecoder::next() {
    while (buf_.size() >= 14) {
        bool magic_ok = true;
        for (int i = 0; i < 4; ++i)
            if (buf_[i] != (uint8_t)kMagic[i]) magic_ok = false;
        if (buf_[4] != kWireVersion) magic_ok = false;

        uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len |= (uint32_t)buf_[6 + i] << (8 * i);
        if (magic_ok && len > kMaxPayload) magic_ok = false;

        if (!magic_ok) {
            ++counts_[(size_t)DecodeError::BadMagic];
            buf_.pop_front();  // resync one byte at a time
            continue;
        }
        const size_t total = 14 + (size_t)len;
        if (buf_.size() < total) return std::nullopt;  // wait for more bytes

        std::vector<uint8_t> whole(buf_.begin(), buf_.begin() + total);
        auto res = decode_frame(whole);
        buf_.erase(buf_.begin(), buf_.begin() + total);
        if (std::holds_alternative<Frame>(res)) return std::get<Frame>(std::move(res));
        ++counts_[(size_t)std::get<DecodeError>(res)];
        // corrupt frame consumed whole; keep scanning
    }
    return std::nullopt;
}

std::vector<uint8_t> encode_transition_batch(const std::vector<TransitionRecord>& recs,
                                             size_t feature_len) {
    std::vector<uint8_t> b;
    b.reserve(recs.size() * transition_record_size(feature_len));
    for (const auto& t : recs) {
        for (size_t i = 0; i < feature_len; ++i)
            put_f32(b, i < t.features.size() ? t.features[i] : 0.0f);
        for (float v : t.proprio) put_f32(b, v);
        for (float v : t.goal) put_f32(b, v);
        for (float v : t.prev_action) put_f32(b, v);
        for (float v : t.action) put_f32(b, v);
        put_f32(b, t.reward);
        put_u8(b, t.done);
        put_u64(b, t.step);
    }
    return b;
}

std::optional<std::vector<TransitionRecord>> decode_transition_batch(
    const std::vector<uint8_t>& payload, size_t feature_len) {
    const size_t rec = transition_record_size(feature_len);
    if (rec == 0 || payload.size() % rec != 0) return std::nullopt;
    std::vector<TransitionRecord> out(payload.size() / rec);
    ByteReader r(payload);
    for (auto& t : out) {
        t.features.resize(feature_len);
        for (auto& v : t.features) r.f32(v);
        for (auto& v : t.proprio) r.f32(v);
        for (auto& v : t.goal) r.f32(v);
        for (auto& v : t.prev_action) r.f32(v);
        for (auto& v : t.action) r.f32(v);
        r.f32(t.reward);
        r.u8(t.done);
        r.u64(t.step);
    }
    return out;
}

}  // namespace autolap
