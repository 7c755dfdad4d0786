#include "autolap/iql.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "autolap/bytes.hpp"
#include "autolap/replay.hpp"

namespace autolap {

namespace {

Vec2 sample_free_point(const WorldMap& map, Rng& rng, const Vec2& away_from,
                       double min_dist) {
    for (int i = 0; i < 200; ++i) {
        Vec2 p{rng.uniform(map.bounds.lo.x + 0.5, map.bounds.hi.x - 0.5),
               rng.uniform(map.bounds.lo.y + 0.5, map.bounds.hi.y - 0.5)};
        if (!map.in_free_space(p)) continue;
        if ((p - away_from).norm() < min_dist) continue;
        return p;
    }
    return {0.0, 0.0};  // center is clear by construction
}

}  // namespace

PriorDataset generate_prior_dataset(uint64_t seed, int n_maps, int steps_per_map,
                                    const NetConfig& ncfg, const RasterParams& rp,
                                    const DynamicsParams& dp) {
    (void)ncfg;
    PriorDataset ds;
    Rng seeder = Rng::substream(seed, "prior-maps");
    const ActionRanges ranges;
    for (int m = 0; m < n_maps; ++m) {
        WorldMap map;
        uint64_t mseed = 0;
        for (int tries = 0;; ++tries) {
            mseed = seeder.next_u64() >> 1;  // prior maps stay in the low id space
            map = generate_scatter_map(mseed);
            Rng probe = Rng::substream(mseed, "probe");
            Vec2 far = sample_free_point(map, probe, {0, 0}, 8.0);
            if (path_exists(map, {0, 0}, far)) break;
            if (tries >= 20) throw std::runtime_error("no navigable prior map found");
        }

        PriorTrajectory traj;
        traj.map_seed = mseed;
        traj.map_id = "prior-" + std::to_string(map.map_id);
        Rng ctrl = Rng::substream(seed, "prior-nav", (uint64_t)m);
        CarState car;
        EgoRaster raster = initial_raster(car, map, rp);
        Vec2 goal = sample_free_point(map, ctrl, car.position, 3.0);
        std::array<float, 2> prev{-1.0f, 0.0f};
        int steps_since_goal = 0;

        while ((int)traj.steps.size() < steps_per_map) {
            RelativeGoal rg = relative_goal(car, goal);
            const double ang = std::atan2(rg.unit_dir.y, rg.unit_dir.x);
            Action act;
            act.steering = std::clamp(1.5 * ang, -ranges.steer_max, ranges.steer_max);
            act.velocity_target = std::abs(ang) > 1.2 ? 0.6 : 1.4;  // stays under 1.5
            const auto norm = normalize_action(act, ranges);

            PriorStep stp;
            stp.pixels = raster.frames;
            stp.proprio = make_proprio(car);
            stp.prev_action = prev;
            stp.action = norm;
            stp.position = car.position;
            stp.heading = car.heading;
            stp.speed = car.speed;
            stp.lateral_accel = car.lateral_accel;
            traj.steps.push_back(std::move(stp));

            StepResult res = step_dynamics(car, act, map, dp);
            car = res.state;
            push_frame(raster, render_frame(car, map, rp));
            prev = norm;
            ++steps_since_goal;

            if (res.collided) {
                // privileged untangle, not recorded: reverse with held steering
                const double held = ctrl.uniform(-ranges.steer_max, ranges.steer_max);
                for (int r = 0; r < 10; ++r) {
                    car = step_dynamics(car, Action{kRecoverySpeed, held}, map, dp).state;
                    push_frame(raster, render_frame(car, map, rp));
                }
                goal = sample_free_point(map, ctrl, car.position, 3.0);
                steps_since_goal = 0;
            } else if ((goal - car.position).norm() < 1.0 || steps_since_goal > 150) {
                goal = sample_free_point(map, ctrl, car.position, 3.0);
                steps_since_goal = 0;
            }
        }
        ds.trajectories.push_back(std::move(traj));
        ds.maps.push_back(std::move(map));
    }
    return ds;
}

static constexpr char kPoseMagic[4] = {'F', 'L', 'P', 'S'};

void save_poses(const std::string& path, const PriorTrajectory& traj) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kPoseMagic, kPoseMagic + 4);
    put_u32(buf, 1);
    put_u32(buf, (uint32_t)traj.steps.size());
    for (const auto& s : traj.steps) {
        put_f32(buf, (float)s.position.x);
        put_f32(buf, (float)s.position.y);
        put_f32(buf, (float)s.heading);
        put_f32(buf, (float)s.speed);
        put_f32(buf, (float)s.lateral_accel);
    }
    put_u32(buf, crc32(buf.data() + 4, buf.size() - 4));
    std::ofstream out(path, std::ios::binary);
    out.write((const char*)buf.data(), (std::streamsize)buf.size());
    if (!out) throw std::runtime_error("short write: " + path);
}

void load_poses(const std::string& path, PriorTrajectory& traj) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kPoseMagic, 4) != 0)
        throw std::runtime_error("bad pose file: " + path);
    uint32_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
    if (crc32(buf.data() + 4, buf.size() - 8) != stored)
        throw std::runtime_error("pose file crc mismatch: " + path);
    ByteReader r(buf.data() + 4, buf.size() - 8);
    uint32_t version = 0, count = 0;
    if (!r.u32(version) || version != 1 || !r.u32(count) || count != traj.steps.size())
        throw std::runtime_error("pose file header mismatch: " + path);
    for (auto& s : traj.steps) {
        float x, y, h, v, la;
        if (!r.f32(x) || !r.f32(y) || !r.f32(h) || !r.f32(v) || !r.f32(la))
            throw std::runtime_error("pose file truncated: " + path);
        s.position = {x, y};
        s.heading = h;
        s.speed = v;
        s.lateral_accel = la;
    }
}

void save_prior_dataset(const std::string& dir, const PriorDataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["trajectories"] = nlohmann::json::array();
    for (size_t i = 0; i < ds.trajectories.size(); ++i) {
        const auto& traj = ds.trajectories[i];
        const std::string base = "traj" + std::to_string(i);
        std::vector<TransitionRecord> recs;
        recs.reserve(traj.steps.size());
        size_t flen = traj.steps.empty() ? 0 : traj.steps[0].pixels.size();
        for (size_t k = 0; k < traj.steps.size(); ++k) {
            const auto& s = traj.steps[k];
            TransitionRecord t;
            t.features = s.pixels;
            t.proprio = s.proprio;
            t.prev_action = s.prev_action;
            t.action = s.action;
            t.step = k;
            recs.push_back(std::move(t));
        }
        save_transitions(dir + "/" + base + ".bin", recs, flen);
        save_poses(dir + "/" + base + ".pose", traj);
        manifest["trajectories"].push_back(
            {{"file", base}, {"map_seed", traj.map_seed}, {"map_id", traj.map_id},
             {"steps", traj.steps.size()}, {"feature_len", flen}});
    }
    std::ofstream(dir + "/manifest.json") << manifest.dump(2) << "\n";
}

PriorDataset load_prior_dataset(const std::string& dir, const NetConfig& ncfg,
                                const RasterParams& rp) {
    (void)ncfg;
    (void)rp;
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw std::runtime_error("missing manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    PriorDataset ds;
    for (const auto& e : manifest["trajectories"]) {
        PriorTrajectory traj;
        traj.map_seed = e["map_seed"];
        traj.map_id = e["map_id"];
        size_t flen = 0;
        auto recs = load_transitions(dir + "/" + std::string(e["file"]) + ".bin", &flen);
        traj.steps.resize(recs.size());
        for (size_t k = 0; k < recs.size(); ++k) {
            traj.steps[k].pixels = std::move(recs[k].features);
            traj.steps[k].proprio = recs[k].proprio;
            traj.steps[k].prev_action = recs[k].prev_action;
            traj.steps[k].action = recs[k].action;
        }
        load_poses(dir + "/" + std::string(e["file"]) + ".pose", traj);
        ds.maps.push_back(generate_scatter_map(traj.map_seed));
        ds.trajectories.push_back(std::move(traj));
    }
    return ds;
}

RelabeledGoal relabel_goal(const PriorTrajectory& traj, const WorldMap& map, size_t idx,
                           const RewardParams& rp, int offset_max, Rng& rng) {
    RelabeledGoal out;
    Vec2 gpos;
    if (rng.uniform01() < 0.5) {
        out.future_branch = true;
        const size_t off = (size_t)rng.uniform_int(1, offset_max);
        const size_t g = std::min(traj.steps.size() - 1, idx + off);
        gpos = traj.steps[g].position;
    } else {
        Rng local(rng.next_u64());
        gpos = sample_free_point(map, local, {1e18, 1e18}, 0.0);
    }
    const PriorStep& s = traj.steps[idx];
    const PriorStep& s2 = traj.steps[idx + 1];
    CarState cs;
    cs.position = s.position;
    cs.heading = s.heading;
    const RelativeGoal rg = relative_goal(cs, gpos);
    out.goal_s = {(float)rg.unit_dir.x, (float)rg.unit_dir.y, (float)rg.distance};
    CarState cs2;
    cs2.position = s2.position;
    cs2.heading = s2.heading;
    const RelativeGoal rg2 = relative_goal(cs2, gpos);
    out.goal_s2 = {(float)rg2.unit_dir.x, (float)rg2.unit_dir.y, (float)rg2.distance};
    // reward at the arrival state against the relabeled goal; prior data has
    // no stuck detector, so only the collision indicator can fire
    const Vec2 vel = Vec2{std::cos(s2.heading), std::sin(s2.heading)} * s2.speed;
    const Vec2 dir_world = rg2.unit_dir.rotated(s2.heading);
    out.reward = (float)compute_reward(vel, dir_world, s2.lateral_accel, false, rp);
    return out;
}

IqlTrainer::IqlTrainer(const NetConfig& ncfg, const IqlConfig& icfg, uint64_t seed)
    : ncfg_(ncfg), icfg_(icfg), rng_(Rng::substream(seed, "iql")) {
    Rng init = Rng::substream(seed, "iql-init");
    encoder_ = make_encoder_params(ncfg_, init);
    value_ = make_value_params(ncfg_, init);
    actor_ = make_actor_params(ncfg_, init);
    const AdamConfig ac{icfg_.lr, 0.9f, 0.999f, 1e-8f};
    enc_opt_ = Adam(ac);
    value_opt_ = Adam(ac);
    actor_opt_ = Adam(ac);
    for (int k = 0; k < 2; ++k) {
        critics_.push_back(make_critic_params(ncfg_, k, init));
        targets_.push_back(critics_.back());
        critic_opts_.emplace_back(ac);
    }
}

void IqlTrainer::update(const PriorDataset& ds, const RewardParams& rp) {
    const int B = icfg_.batch_size;
    const int F = ncfg_.feature_len();
    const int AUX = ncfg_.actor_aux_in();
    const int A = ncfg_.action_dim;
    const size_t pixel_len = (size_t)ncfg_.frames * ncfg_.raster_h * ncfg_.raster_w;

    Tensor px_s = Tensor::zeros({B, (int)pixel_len});
    Tensor px_s2 = Tensor::zeros({B, (int)pixel_len});
    Tensor aux_s = Tensor::zeros({B, AUX});
    Tensor aux_s2 = Tensor::zeros({B, AUX});
    Tensor act = Tensor::zeros({B, A});
    Tensor aprev = Tensor::zeros({B, A});
    Tensor rew = Tensor::zeros({B, 1});

    for (int i = 0; i < B; ++i) {
        const size_t tj = (size_t)rng_.uniform_int(0, (int64_t)ds.trajectories.size() - 1);
        const PriorTrajectory& traj = ds.trajectories[tj];
        const size_t idx = (size_t)rng_.uniform_int(0, (int64_t)traj.steps.size() - 2);
        const RelabeledGoal rl =
            relabel_goal(traj, ds.maps[tj], idx, rp, icfg_.offset_max, rng_);
        const PriorStep& s = traj.steps[idx];
        const PriorStep& s2 = traj.steps[idx + 1];
        std::copy_n(s.pixels.begin(), pixel_len, px_s.data.begin() + (size_t)i * pixel_len);
        std::copy_n(s2.pixels.begin(), pixel_len,
                    px_s2.data.begin() + (size_t)i * pixel_len);
        float* a1 = aux_s.data.data() + (size_t)i * AUX;
        float* a2 = aux_s2.data.data() + (size_t)i * AUX;
        std::copy_n(s.proprio.begin(), 9, a1);
        std::copy_n(rl.goal_s.begin(), 3, a1 + 9);
        std::copy_n(s.prev_action.begin(), 2, a1 + 12);
        std::copy_n(s2.proprio.begin(), 9, a2);
        std::copy_n(rl.goal_s2.begin(), 3, a2 + 9);
        std::copy_n(s2.prev_action.begin(), 2, a2 + 12);
        for (int j = 0; j < A; ++j) {
            act.data[(size_t)(i * A + j)] = s.action[(size_t)j];
            aprev.data[(size_t)(i * A + j)] = s.prev_action[(size_t)j];
        }
        rew.data[(size_t)i] = rl.reward;
    }

    // Forward pass: target Q-bar(s,a), V(s'), and detached features of s.
    Tensor qbar, feat_s_val;
    Tensor y = Tensor::zeros({B, 1});
    {
        Graph g;
        auto enc_b = bind_net(g, encoder_, false);
        int rast_s = g.reshape(g.constant(px_s),
                               {B, ncfg_.frames, ncfg_.raster_h, ncfg_.raster_w});
        int rast_s2 = g.reshape(g.constant(px_s2),
                                {B, ncfg_.frames, ncfg_.raster_h, ncfg_.raster_w});
        int feat_s = encoder_forward(g, enc_b, rast_s, ncfg_);
        int feat_s2 = encoder_forward(g, enc_b, rast_s2, ncfg_);
        int caux = g.concat_cols({g.constant(aux_s), g.constant(act)});
        int q0 = -1, q1 = -1;
        {
            auto t0 = bind_net(g, targets_[0], false);
            auto t1 = bind_net(g, targets_[1], false);
            q0 = head_forward(g, t0, "critic0", feat_s, caux, ncfg_);
            q1 = head_forward(g, t1, "critic1", feat_s, caux, ncfg_);
        }
        int qb = g.minimum(q0, q1);
        auto vb = bind_net(g, value_, false);
        int v2 = head_forward(g, vb, "value", feat_s2, g.constant(aux_s2), ncfg_);
        qbar = g.val(qb);
        feat_s_val = g.val(feat_s);
        const Tensor& v2v = g.val(v2);
        // prior trajectories are reset-free: no terminal mask
        for (int i = 0; i < B; ++i)
            y.data[(size_t)i] = rew.data[(size_t)i] + icfg_.gamma * v2v.data[(size_t)i];
        float mq = 0;
        for (float v : qbar.data) mq += v;
        stats_.mean_q = mq / (float)B;
    }

    // Critic loss trains the encoder end-to-end; both members regress to y.
    {
        Graph g;
        auto enc_b = bind_net(g, encoder_, true);
        int rast_s = g.reshape(g.constant(px_s),
                               {B, ncfg_.frames, ncfg_.raster_h, ncfg_.raster_w});
        int feat_s = encoder_forward(g, enc_b, rast_s, ncfg_);
        int caux = g.concat_cols({g.constant(aux_s), g.constant(act)});
        auto c0 = bind_net(g, critics_[0], true);
        auto c1 = bind_net(g, critics_[1], true);
        int q0 = head_forward(g, c0, "critic0", feat_s, caux, ncfg_);
        int q1 = head_forward(g, c1, "critic1", feat_s, caux, ncfg_);
        int yc = g.constant(y);
        int loss = g.mul_scalar(g.add(g.mean_all(g.square(g.sub(q0, yc))),
                                      g.mean_all(g.square(g.sub(q1, yc)))),
                                0.5f);
        g.backward(loss);
        stats_.critic_loss = g.val(loss).data[0];
        auto g0 = collect_grads(g, c0);
        auto g1 = collect_grads(g, c1);
        auto ge = collect_grads(g, enc_b);
        critic_opts_[0].step(critics_[0], grad_ptrs(g0));
        critic_opts_[1].step(critics_[1], grad_ptrs(g1));
        enc_opt_.step(encoder_, grad_ptrs(ge));
    }

    // Expectile value regression toward Q-bar on detached features.
    Tensor v_val;
    {
        Graph g;
        int feat = g.constant(feat_s_val);
        auto vb = bind_net(g, value_, true);
        int v = head_forward(g, vb, "value", feat, g.constant(aux_s), ncfg_);
        int u = g.sub(g.constant(qbar), v);
        int loss = g.mean_all(g.expectile_sq(u, icfg_.expectile));
        g.backward(loss);
        stats_.value_loss = g.val(loss).data[0];
        v_val = g.val(v);
        auto gv = collect_grads(g, vb);
        value_opt_.step(value_, grad_ptrs(gv));
    }

    // Advantage-weighted regression actor on detached features.
    {
        Tensor w = Tensor::zeros({B, 1});
        for (int i = 0; i < B; ++i) {
            const double adv = (double)qbar.data[(size_t)i] - (double)v_val.data[(size_t)i];
            w.data[(size_t)i] =
                (float)std::min((double)icfg_.weight_clip, std::exp((double)icfg_.beta * adv));
        }
        Graph g;
        int feat = g.constant(feat_s_val);
        auto ab = bind_net(g, actor_, true);
        auto dist = actor_forward(g, ab, feat, g.constant(aux_s), ncfg_);
        int logp = logp_of_action(g, dist, act, aprev, ncfg_.squash_delta);
        int loss = g.mean_all(g.mul(g.constant(w), g.neg(logp)));
        g.backward(loss);
        stats_.actor_loss = g.val(loss).data[0];
        auto ga = collect_grads(g, ab);
        actor_opt_.step(actor_, grad_ptrs(ga));
    }

    polyak_update(targets_[0], critics_[0], icfg_.polyak);
    polyak_update(targets_[1], critics_[1], icfg_.polyak);
    ++update_count_;
    (void)F;
}

ParamSet IqlTrainer::freeze_encoder() const {
    ParamSet out = encoder_;
    out.version = (uint32_t)update_count_;
    return out;
}

}  // namespace autolap
