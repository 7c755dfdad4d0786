#pragma once

#include <string>
#include <vector>

#include "autolap/fsm.hpp"
#include "autolap/learner.hpp"
#include "autolap/nets.hpp"

namespace autolap {

// One recorded navigator step: raw pixels plus the pose needed for goal
// relabeling. Actions are stored normalized.
struct PriorStep {
    std::vector<float> pixels;  // flattened raster stack
    std::array<float, 9> proprio{};
    std::array<float, 2> prev_action{}, action{};
    Vec2 position;
    double heading = 0.0;
    double speed = 0.0;
    double lateral_accel = 0.0;
};

struct PriorTrajectory {
    uint64_t map_seed = 0;
    std::string map_id;
    std::vector<PriorStep> steps;
};

struct PriorDataset {
    std::vector<PriorTrajectory> trajectories;
    std::vector<WorldMap> maps;  // aligned with trajectories
    size_t total_steps() const {
        size_t n = 0;
        for (const auto& t : trajectories) n += t.steps.size();
        return n;
    }
};

// Low-speed scripted navigator over procedurally scattered maps. Map seeds
// derive from `seed`; evaluation courses use a different id namespace so the
// two can never collide.
PriorDataset generate_prior_dataset(uint64_t seed, int n_maps, int steps_per_map,
                                    const NetConfig& ncfg, const RasterParams& rp,
                                    const DynamicsParams& dp);

void save_prior_dataset(const std::string& dir, const PriorDataset& ds);
PriorDataset load_prior_dataset(const std::string& dir, const NetConfig& ncfg,
                                const RasterParams& rp);

// Pose sidecar (positions, headings, speeds, lateral accels) for a stored
// trajectory; shared by the prior dataset and the demo-lap bundle.
void save_poses(const std::string& path, const PriorTrajectory& traj);
void load_poses(const std::string& path, PriorTrajectory& traj);

struct RelabeledGoal {
    std::array<float, 3> goal_s{}, goal_s2{};  // body-frame unit dir + distance
    float reward = 0.0f;
    bool future_branch = false;
};

// Half the time the goal is a pose from the trajectory's own future
// (offset uniform in {1..100}, clipped to the end), otherwise a uniform
// random free-space point on the same map. Reward is recomputed at the
// arrival state against the relabeled goal.
RelabeledGoal relabel_goal(const PriorTrajectory& traj, const WorldMap& map, size_t idx,
                           const RewardParams& rp, int offset_max, Rng& rng);

struct IqlConfig {
    float gamma = 0.99f;
    float expectile = 0.7f;
    float beta = 3.0f;        // advantage-weighted regression temperature
    float weight_clip = 100.0f;
    float lr = 3e-4f;
    float polyak = 0.005f;
    int batch_size = 256;
    int offset_max = 100;
};

// Goal-conditioned IQL: two critics with target copies, one value head, an
// AWR actor. The encoder learns through the critic loss; value and actor
// heads consume detached features. Only the encoder survives pretraining.
class IqlTrainer {
public:
    IqlTrainer(const NetConfig& ncfg, const IqlConfig& icfg, uint64_t seed);

    void update(const PriorDataset& ds, const RewardParams& rp);

    const ParamSet& encoder_params() const { return encoder_; }
    const ParamSet& value_params() const { return value_; }
    const ParamSet& critic_params(int k) const { return critics_[(size_t)k]; }
    uint64_t update_count() const { return update_count_; }

    struct Stats {
        float value_loss = 0, critic_loss = 0, actor_loss = 0, mean_q = 0;
    };
    const Stats& stats() const { return stats_; }

    // Marks pretraining done: returns the encoder ParamSet, version-stamped.
    ParamSet freeze_encoder() const;

private:
    NetConfig ncfg_;
    IqlConfig icfg_;
    ParamSet encoder_, value_, actor_;
    std::vector<ParamSet> critics_, targets_;
    Adam enc_opt_, value_opt_, actor_opt_;
    std::vector<Adam> critic_opts_;
    Rng rng_;
    uint64_t update_count_ = 0;
    Stats stats_;
};

}  // namespace autolap
