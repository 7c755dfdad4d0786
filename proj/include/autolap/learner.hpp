#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "autolap/nets.hpp"
#include "autolap/replay.hpp"

namespace autolap {

struct LearnerConfig {
    float gamma = 0.99f;
    float lr = 3e-4f;  // actor, critic, and temperature
    int n_critics = 10;
    int m_subset = 2;  // target min taken over a random subset of this size
    float polyak = 0.005f;
    int utd = 8;  // gradient updates per ingested transition
    int batch_size = 256;
    float target_entropy_init = -3.0f;
    float entropy_decay = 1e-5f;  // linear decrease per update, floored
    int publish_every = 50;       // updates between parameter snapshots
    bool demo_mixing = true;      // off: all-online batches (ablation)
    bool train_encoder = false;   // on: records carry pixels, encoder learns online
    size_t replay_capacity = 1000000;
    size_t min_online = 1;  // idle until the online buffer has this many

    float target_entropy_floor(int action_dim) const { return -2.0f * (float)action_dim; }
    float target_entropy(uint64_t update_idx, int action_dim) const {
        double h = (double)target_entropy_init - (double)entropy_decay * (double)update_idx;
        return std::max((float)h, target_entropy_floor(action_dim));
    }
    // Width of the feature block in stored records: raw pixels when the
    // encoder trains online, encoder/state features otherwise.
    int record_feature_len(const NetConfig& ncfg) const {
        if (train_encoder) return ncfg.frames * ncfg.raster_h * ncfg.raster_w;
        return ncfg.feature_len();
    }
};

// Columnar batch ready for graph building. `s_feat` holds frozen-encoder
// features, or raw stacked raster pixels when the encoder trains online.
struct BatchTensors {
    Tensor s_feat, s2_feat;  // [B, F]
    Tensor s_aux, s2_aux;    // [B, proprio+goal+prev_action]
    Tensor action;           // [B, adim], normalized
    Tensor s_prev, s2_prev;  // [B, adim] squash centers
    Tensor reward, mask;     // [B, 1]; mask = gamma * (1 - done)
};
BatchTensors assemble_batch(const std::vector<const Transition*>& batch,
                            const NetConfig& ncfg, float gamma, int feat_width);

// Ensemble SAC with subset-min targets, mixed demo/online batches, and a
// dual-controlled temperature on a decaying entropy target.
class SacLearner {
public:
    SacLearner(const NetConfig& ncfg, const LearnerConfig& lcfg, ParamSet encoder,
               uint64_t seed);

    void add_demo(const std::vector<TransitionRecord>& recs);
    // Returns stitched transitions added; accrues utd updates per transition.
    size_t ingest(const TransitionRecord& rec);
    size_t ingest_batch(const std::vector<TransitionRecord>& recs);

    uint64_t pending_updates() const { return pending_; }
    bool can_update() const;
    int run_pending(int max_updates = 1 << 30);
    bool update_once();  // one gradient step; false when idle

    bool publish_due() const {
        return update_count_ > 0 && update_count_ - last_publish_ >= (uint64_t)lcfg_.publish_every;
    }
    // Actor (+ encoder when it trains online) snapshot with a bumped version.
    ParamSet make_snapshot();

    void save_checkpoint(const std::string& dir) const;
    void load_checkpoint(const std::string& dir);

    struct Stats {
        uint64_t updates = 0;
        float critic_loss = 0, actor_loss = 0, alpha = 1, target_entropy = -3;
        float mean_logp = 0;
        uint64_t duplicates = 0;
        size_t online_size = 0, demo_size = 0;
        uint64_t publish_version = 0;
    };
    Stats stats() const;

    const NetConfig& net_config() const { return ncfg_; }
    const LearnerConfig& config() const { return lcfg_; }
    const ParamSet& encoder_params() const { return encoder_; }
    const ParamSet& actor_params() const { return actor_; }
    const ParamSet& critic_params(int k) const { return critics_[(size_t)k]; }
    const ParamSet& target_params(int k) const { return targets_[(size_t)k]; }
    float alpha() const { return std::exp(log_alpha_); }
    uint64_t update_count() const { return update_count_; }
    ReplayBuffer& online_buffer() { return online_; }
    const ReplayBuffer& demo_buffer() const { return demo_; }
    bool encoder_optimizer_exists() const { return (bool)enc_opt_; }

    // The target y values of the last critic update (exposed for tests).
    const std::vector<float>& last_targets() const { return last_y_; }

private:
    void critic_update(const BatchTensors& bt);
    void actor_and_alpha_update(const BatchTensors& bt);
    std::vector<int> pick_subset();

    NetConfig ncfg_;
    LearnerConfig lcfg_;
    ParamSet encoder_, actor_;
    std::vector<ParamSet> critics_, targets_;
    float log_alpha_ = 0.0f;

    Adam actor_opt_;
    std::vector<Adam> critic_opts_;
    std::unique_ptr<Adam> enc_opt_;  // only exists when the encoder trains
    // scalar Adam state for log alpha
    float alpha_m_ = 0, alpha_v_ = 0;
    int64_t alpha_t_ = 0;

    ReplayBuffer online_, demo_;
    TransitionStitcher stitcher_, demo_stitcher_;
    Rng rng_;

    uint64_t update_count_ = 0, pending_ = 0, last_publish_ = 0, publish_version_ = 0;
    float last_critic_loss_ = 0, last_actor_loss_ = 0, last_mean_logp_ = 0;
    std::vector<float> last_y_;
};

// Ensemble critic evaluation used by diagnostics: features [B,F], aux [B,
// critic_aux_in] already containing the action. Returns [B] per-ensemble
// mean (or min).
std::vector<float> eval_critics(const NetConfig& ncfg,
                                const std::vector<const ParamSet*>& critics,
                                const Tensor& features, const Tensor& aux_sa,
                                bool take_min);

}  // namespace autolap
