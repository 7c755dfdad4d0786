#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "autolap/rng.hpp"
#include "autolap/tensor.hpp"

// Named flat parameter container plus Adam. One ParamSet holds every tensor
// of one network (or a bundle of networks, names are free-form). Serialized
// form: magic FLPW, version u32, tensor count u32, then per tensor
// (name u16-len + bytes, rank u8, dims u32 each, f32 payload), then CRC32
// of every byte after the magic.

namespace autolap {

struct ParamSet {
    uint32_t version = 0;
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    int find(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return (int)i;
        return -1;
    }
    Tensor& at(const std::string& name) {
        int i = find(name);
        if (i < 0) throw std::runtime_error("param not found: " + name);
        return tensors[i];
    }
    const Tensor& at(const std::string& name) const {
        return const_cast<ParamSet*>(this)->at(name);
    }
    bool has(const std::string& name) const { return find(name) >= 0; }
    Tensor& add(const std::string& name, Tensor t) {
        if (find(name) >= 0) throw std::runtime_error("duplicate param: " + name);
        names.push_back(name);
        tensors.push_back(std::move(t));
        return tensors.back();
    }
    size_t count() const { return tensors.size(); }
    size_t total_scalars() const {
        size_t n = 0;
        for (const auto& t : tensors) n += t.data.size();
        return n;
    }
    // Prefixed view copy: every tensor whose name starts with prefix.
    ParamSet subset(const std::string& prefix) const;
    // Merge src tensors under their own names; rejects duplicates.
    void absorb(const ParamSet& src);
};

std::vector<uint8_t> serialize_params(const ParamSet& ps);
// Throws std::runtime_error on bad magic, truncation, or CRC mismatch.
ParamSet parse_params(const std::vector<uint8_t>& bytes);
void save_params(const std::string& path, const ParamSet& ps);
ParamSet load_params(const std::string& path);

// Fan-in scaled uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_dense(std::vector<int> shape, int fan_in, Rng& rng);

struct AdamConfig {
    float lr = 3e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Moments are keyed by position, so the ParamSet layout must not change
// between steps.
class Adam {
public:
    Adam() = default;
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
    // grads[i] pairs with ps.tensors[i]; null entries are skipped (frozen).
    void step(ParamSet& ps, const std::vector<const Tensor*>& grads);
    int64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

// In-place polyak average: target = (1 - tau) * target + tau * online.
void polyak_update(ParamSet& target, const ParamSet& online, float tau);

}  // namespace autolap
