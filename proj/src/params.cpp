#include "autolap/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "autolap/bytes.hpp"

namespace autolap {

static constexpr char kMagic[4] = {'F', 'L', 'P', 'W'};

ParamSet ParamSet::subset(const std::string& prefix) const {
    ParamSet out;
    out.version = version;
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i].rfind(prefix, 0) == 0) out.add(names[i], tensors[i]);
    return out;
}

void ParamSet::absorb(const ParamSet& src) {
    for (size_t i = 0; i < src.names.size(); ++i) add(src.names[i], src.tensors[i]);
}

std::vector<uint8_t> serialize_params(const ParamSet& ps) {
    std::vector<uint8_t> b;
    put_bytes(b, kMagic, 4);
    put_u32(b, ps.version);
    put_u32(b, (uint32_t)ps.count());
    for (size_t i = 0; i < ps.count(); ++i) {
        put_str(b, ps.names[i]);
        const Tensor& t = ps.tensors[i];
        put_u8(b, (uint8_t)t.shape.size());
        for (int d : t.shape) put_u32(b, (uint32_t)d);
        for (float v : t.data) put_f32(b, v);
    }
    put_u32(b, crc32(b.data() + 4, b.size() - 4));
    return b;
}

ParamSet parse_params(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("param blob: bad magic");
    const size_t body = bytes.size() - 8;
    uint32_t want = 0;
    for (int i = 0; i < 4; ++i) want |= uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
    if (crc32(bytes.data() + 4, body) != want)
        throw std::runtime_error("param blob: crc mismatch");

    ByteReader r(bytes.data() + 4, body);
    ParamSet ps;
    uint32_t count = 0;
    if (!r.u32(ps.version) || !r.u32(count))
        throw std::runtime_error("param blob: truncated header");
    for (uint32_t i = 0; i < count; ++i) {
        std::string name;
        uint8_t rank;
        if (!r.str(name) || !r.u8(rank)) throw std::runtime_error("param blob: truncated");
        std::vector<int> shape(rank);
        size_t n = 1;
        for (int d = 0; d < rank; ++d) {
            uint32_t v;
            if (!r.u32(v)) throw std::runtime_error("param blob: truncated");
            shape[d] = (int)v;
            n *= v;
        }
        if (r.remaining() < n * 4) throw std::runtime_error("param blob: truncated");
        Tensor t(shape);
        for (size_t k = 0; k < n; ++k) r.f32(t.data[k]);
        ps.add(name, std::move(t));
    }
    return ps;
}

void save_params(const std::string& path, const ParamSet& ps) {
    const auto b = serialize_params(ps);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(reinterpret_cast<const char*>(b.data()), (std::streamsize)b.size());
}

ParamSet load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<uint8_t> b((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    return parse_params(b);
}

Tensor init_dense(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const float bound = 1.0f / std::sqrt((float)fan_in);
    for (float& v : t.data) v = (float)rng.uniform(-bound, bound);
    return t;
}

void Adam::step(ParamSet& ps, const std::vector<const Tensor*>& grads) {
    if (m_.empty()) {
        m_.resize(ps.count());
        v_.resize(ps.count());
        for (size_t i = 0; i < ps.count(); ++i) {
            m_[i].assign(ps.tensors[i].data.size(), 0.0f);
            v_[i].assign(ps.tensors[i].data.size(), 0.0f);
        }
    }
    ++t_;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, (float)t_);
    const float bc2 = 1.0f - std::pow(cfg_.beta2, (float)t_);
    for (size_t i = 0; i < ps.count(); ++i) {
        if (!grads[i]) continue;
        auto& p = ps.tensors[i].data;
        const auto& g = grads[i]->data;
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0f - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0f - cfg_.beta2) * g[k] * g[k];
            const float mh = m[k] / bc1;
            const float vh = v[k] / bc2;
            p[k] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

void polyak_update(ParamSet& target, const ParamSet& online, float tau) {
    for (size_t i = 0; i < target.count(); ++i) {
        auto& t = target.tensors[i].data;
        const auto& o = online.at(target.names[i]).data;
        for (size_t k = 0; k < t.size(); ++k) t[k] = (1.0f - tau) * t[k] + tau * o[k];
    }
}

}  // namespace autolap
