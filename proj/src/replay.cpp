#include "autolap/replay.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "autolap/bytes.hpp"

namespace autolap {

namespace {

Transition stitch(const TransitionRecord& a, const TransitionRecord& b, size_t flen) {
    Transition t;
    t.s_feat = a.features;
    t.s_feat.resize(flen, 0.0f);
    t.s_prop = a.proprio;
    t.s_goal = a.goal;
    t.s_prev = a.prev_action;
    t.action = a.action;
    t.reward = a.reward;
    t.done = a.done;
    if (a.done) {
        t.s2_feat.assign(flen, 0.0f);
    } else {
        t.s2_feat = b.features;
        t.s2_feat.resize(flen, 0.0f);
        t.s2_prop = b.proprio;
        t.s2_goal = b.goal;
        t.s2_prev = b.prev_action;
    }
    return t;
}

}  // namespace

std::vector<Transition> TransitionStitcher::push(const TransitionRecord& rec) {
    std::vector<Transition> out;
    if (any_ && rec.step <= last_step_) {
        ++duplicates_;
        return out;
    }
    if (last_ && rec.step == last_step_ + 1)
        out.push_back(stitch(*last_, rec, feature_len_));
    if (rec.done) {
        // Terminal: s' is never bootstrapped, emit with zeros right away.
        out.push_back(stitch(rec, rec, feature_len_));
        last_.reset();
    } else {
        last_ = rec;
    }
    last_step_ = rec.step;
    any_ = true;
    return out;
}

void ReplayBuffer::add(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[cursor_] = std::move(t);
        cursor_ = (cursor_ + 1) % capacity_;
    }
}

std::vector<const Transition*> sample_mixed_batch(const ReplayBuffer& online,
                                                  const ReplayBuffer& demo,
                                                  int batch_size, bool demo_mixing,
                                                  Rng& rng) {
    std::vector<const Transition*> batch;
    batch.reserve((size_t)batch_size);
    int n_demo = demo_mixing ? (batch_size + 1) / 2 : 0;
    if (demo.size() == 0) n_demo = 0;
    int n_online = batch_size - n_demo;
    if (online.size() == 0) {
        n_demo = batch_size;
        n_online = 0;
    }
    for (int i = 0; i < n_demo; ++i) batch.push_back(&demo.sample(rng));
    for (int i = 0; i < n_online; ++i) batch.push_back(&online.sample(rng));
    return batch;
}

static constexpr char kTransMagic[4] = {'F', 'L', 'T', 'R'};

void save_transitions(const std::string& path, const std::vector<TransitionRecord>& recs,
                      size_t feature_len) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kTransMagic, kTransMagic + 4);
    put_u32(buf, 1);
    put_u32(buf, (uint32_t)feature_len);
    put_u64(buf, recs.size());
    std::vector<uint8_t> body = encode_transition_batch(recs, feature_len);
    buf.insert(buf.end(), body.begin(), body.end());
    put_u32(buf, crc32(buf.data() + 4, buf.size() - 4));
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    size_t n = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (n != buf.size()) throw std::runtime_error("short write: " + path);
}

std::vector<TransitionRecord> load_transitions(const std::string& path,
                                               size_t* feature_len_out) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::fseek(f, 0, SEEK_END);
    long sz = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> buf((size_t)std::max(0L, sz));
    size_t n = std::fread(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (n != buf.size() || buf.size() < 24) throw std::runtime_error("truncated transition file");
    if (std::memcmp(buf.data(), kTransMagic, 4) != 0)
        throw std::runtime_error("bad transition file magic");
    ByteReader r(buf.data() + 4, buf.size() - 8);
    uint32_t version = 0, flen = 0;
    uint64_t count = 0;
    if (!r.u32(version) || version != 1 || !r.u32(flen) || !r.u64(count))
        throw std::runtime_error("bad transition file header");
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (crc32(buf.data() + 4, buf.size() - 8) != stored_crc)
        throw std::runtime_error("transition file crc mismatch");
    size_t body_off = 4 + r.off;
    std::vector<uint8_t> body(buf.begin() + (long)body_off, buf.end() - 4);
    auto recs = decode_transition_batch(body, flen);
    if (!recs || recs->size() != count)
        throw std::runtime_error("transition file body mismatch");
    if (feature_len_out) *feature_len_out = flen;
    return std::move(*recs);
}

}  // namespace autolap
