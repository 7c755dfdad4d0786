#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

// Little-endian byte packing plus CRC32 (reflected 0xEDB88320, the zlib one).

namespace autolap {

inline uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = ~seed;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

inline uint32_t crc32(const std::vector<uint8_t>& v, uint32_t seed = 0) {
    return crc32(v.data(), v.size(), seed);
}

inline void put_u8(std::vector<uint8_t>& b, uint8_t v) { b.push_back(v); }
inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(uint8_t(v)); b.push_back(uint8_t(v >> 8));
}
inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(uint8_t(v >> (8 * i)));
}
inline void put_u64(std::vector<uint8_t>& b, uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(uint8_t(v >> (8 * i)));
}
inline void put_f32(std::vector<uint8_t>& b, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(b, u);
}
inline void put_f64(std::vector<uint8_t>& b, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(b, u);
}
inline void put_bytes(std::vector<uint8_t>& b, const void* p, size_t n) {
    const uint8_t* s = static_cast<const uint8_t*>(p);
    b.insert(b.end(), s, s + n);
}
inline void put_str(std::vector<uint8_t>& b, const std::string& s) {
    put_u16(b, (uint16_t)s.size());
    put_bytes(b, s.data(), s.size());
}

// Bounds-checked sequential reader; every getter reports truncation.
struct ByteReader {
    const uint8_t* p = nullptr;
    size_t n = 0;
    size_t off = 0;

    ByteReader(const uint8_t* data, size_t size) : p(data), n(size) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : p(v.data()), n(v.size()) {}

    size_t remaining() const { return n - off; }
    bool bytes(void* out, size_t len) {
        if (remaining() < len) return false;
        std::memcpy(out, p + off, len);
        off += len;
        return true;
    }
    bool u8(uint8_t& v) { return bytes(&v, 1); }
    bool u16(uint16_t& v) {
        uint8_t b[2];
        if (!bytes(b, 2)) return false;
        v = uint16_t(b[0]) | uint16_t(b[1]) << 8;
        return true;
    }
    bool u32(uint32_t& v) {
        uint8_t b[4];
        if (!bytes(b, 4)) return false;
        v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
        return true;
    }
    bool u64(uint64_t& v) {
        uint8_t b[8];
        if (!bytes(b, 8)) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
        return true;
    }
    bool f32(float& v) {
        uint32_t u;
        if (!u32(u)) return false;
        std::memcpy(&v, &u, 4);
        return true;
    }
    bool f64(double& v) {
        uint64_t u;
        if (!u64(u)) return false;
        std::memcpy(&v, &u, 8);
        return true;
    }
    bool str(std::string& s) {
        uint16_t len;
        if (!u16(len)) return false;
        if (remaining() < len) return false;
        s.assign(reinterpret_cast<const char*>(p + off), len);
        off += len;
        return true;
    }
};

}  // namespace autolap
