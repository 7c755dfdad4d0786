#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "autolap/rng.hpp"
#include "autolap/wire.hpp"

namespace autolap {

// Stitched (s, a, r, s', done) sample. Wire records carry one observation
// each; consecutive step indices pair into transitions.
struct Transition {
    std::vector<float> s_feat, s2_feat;
    std::array<float, 9> s_prop{}, s2_prop{};
    std::array<float, 3> s_goal{}, s2_goal{};
    std::array<float, 2> s_prev{}, s2_prev{};
    std::array<float, 2> action{};
    float reward = 0.0f;
    uint8_t done = 0;
};

// Reconstructs transitions from the record stream. Duplicates (step index
// not beyond the last seen) are dropped and counted. done=1 records emit a
// terminal transition immediately with a zeroed s'. Gaps in step indices
// (recovery periods, dropped batches) never stitch across.
class TransitionStitcher {
public:
    explicit TransitionStitcher(size_t feature_len) : feature_len_(feature_len) {}

    // Returns the transitions completed by this record (0 or 1).
    std::vector<Transition> push(const TransitionRecord& rec);
    uint64_t duplicates() const { return duplicates_; }
    void reset() { last_.reset(); }

private:
    size_t feature_len_;
    std::optional<TransitionRecord> last_;
    uint64_t last_step_ = 0;
    bool any_ = false;
    uint64_t duplicates_ = 0;
};

// FIFO-overwrite ring with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity = 1000000) : capacity_(capacity) {}

    void add(Transition t);
    size_t size() const { return data_.size(); }
    const Transition& at(size_t i) const { return data_[i]; }
    const Transition& sample(Rng& rng) const {
        return data_[(size_t)rng.uniform_int(0, (int64_t)data_.size() - 1)];
    }

private:
    size_t capacity_;
    size_t cursor_ = 0;
    std::vector<Transition> data_;
};

// ceil(n/2) demo records then floor(n/2) online records, uniform within each.
// With demo mixing disabled the batch is all-online.
std::vector<const Transition*> sample_mixed_batch(const ReplayBuffer& online,
                                                  const ReplayBuffer& demo,
                                                  int batch_size, bool demo_mixing,
                                                  Rng& rng);

// Transition file io: a flat sequence of TransitionRecords with a small
// header carrying the feature length. Used for demo laps and prior datasets.
void save_transitions(const std::string& path, const std::vector<TransitionRecord>& recs,
                      size_t feature_len);
std::vector<TransitionRecord> load_transitions(const std::string& path,
                                               size_t* feature_len_out = nullptr);

}  // namespace autolap
