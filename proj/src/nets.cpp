#include "autolap/nets.hpp"

#include <algorithm>

namespace autolap {

ParamSet make_encoder_params(const NetConfig& cfg, Rng& rng) {
    ParamSet ps;
    int cin = cfg.frames;
    for (int i = 0; i < cfg.enc_layers; ++i) {
        const std::string p = "enc/conv" + std::to_string(i) + "/";
        const int fan_in = cin * 3 * 3;
        ps.add(p + "w", init_dense({cfg.enc_channels, cin, 3, 3}, fan_in, rng));
        ps.add(p + "b", init_dense({cfg.enc_channels}, fan_in, rng));
        cin = cfg.enc_channels;
    }
    return ps;
}

ParamSet make_head_params(const NetConfig& cfg, const std::string& prefix, int aux_in,
                          int out_dim, Rng& rng) {
    ParamSet ps;
    ps.add(prefix + "/aux/w", init_dense({cfg.aux_dim, aux_in}, aux_in, rng));
    ps.add(prefix + "/aux/b", init_dense({cfg.aux_dim}, aux_in, rng));
    int in = cfg.feature_len() + cfg.aux_dim;
    for (int i = 0; i < cfg.trunk_layers; ++i) {
        const std::string p = prefix + "/trunk" + std::to_string(i) + "/";
        ps.add(p + "w", init_dense({cfg.trunk_hidden, in}, in, rng));
        ps.add(p + "b", init_dense({cfg.trunk_hidden}, in, rng));
        in = cfg.trunk_hidden;
    }
    ps.add(prefix + "/head/w", init_dense({out_dim, in}, in, rng));
    ps.add(prefix + "/head/b", init_dense({out_dim}, in, rng));
    return ps;
}

ParamSet make_actor_params(const NetConfig& cfg, Rng& rng) {
    return make_head_params(cfg, "actor", cfg.actor_aux_in(), 2 * cfg.action_dim, rng);
}

ParamSet make_critic_params(const NetConfig& cfg, int index, Rng& rng) {
    return make_head_params(cfg, "critic" + std::to_string(index), cfg.critic_aux_in(), 1,
                            rng);
}

ParamSet make_value_params(const NetConfig& cfg, Rng& rng) {
    return make_head_params(cfg, "value", cfg.actor_aux_in(), 1, rng);
}

std::array<float, 2> normalize_action(const Action& a, const ActionRanges& r) {
    const double v = 2.0 * (a.velocity_target - r.v_min) / (r.v_max - r.v_min) - 1.0;
    const double s = a.steering / r.steer_max;
    return {(float)std::clamp(v, -1.0, 1.0), (float)std::clamp(s, -1.0, 1.0)};
}

Action denormalize_action(const std::array<float, 2>& n, const ActionRanges& r) {
    Action a;
    const double v = std::clamp((double)n[0], -1.0, 1.0);
    const double s = std::clamp((double)n[1], -1.0, 1.0);
    a.velocity_target = r.v_min + (v + 1.0) / 2.0 * (r.v_max - r.v_min);
    a.steering = s * r.steer_max;
    return a;
}

double squash_scalar(double x, double a_prev, double delta) {
    return std::tanh((x - a_prev) / delta) * delta + a_prev;
}

Tensor raster_batch(const std::vector<const EgoRaster*>& rasters) {
    const int B = (int)rasters.size();
    const int H = rasters[0]->height, W = rasters[0]->width;
    Tensor t({B, 3, H, W});
    float* dst = t.data.data();
    for (int b = 0; b < B; ++b) {
        std::copy(rasters[b]->frames.begin(), rasters[b]->frames.end(),
                  dst + (size_t)b * 3 * H * W);
    }
    return t;
}

std::vector<float> encode_features(const ParamSet& enc, const EgoRaster& raster,
                                   const NetConfig& cfg) {
    Graph g;
    auto bound = bind_net(g, enc, false);
    const int in = g.constant(raster_batch({&raster}));
    const int feat = encoder_forward(g, bound, in, cfg);
    return g.val(feat).data;
}

std::array<float, 9> make_proprio(const CarState& s) {
    // body velocity is purely longitudinal in the kinematic model
    return {(float)s.speed, 0.0f, 0.0f,
            0.0f,           0.0f, (float)s.yaw_rate,
            (float)s.linear_accel.x, (float)s.linear_accel.y, 0.0f};
}

std::vector<float> flatten_raster(const EgoRaster& r) { return r.frames; }

std::array<float, 2> policy_act(const ParamSet& actor, const NetConfig& cfg,
                                const std::vector<float>& features,
                                const std::array<float, 9>& proprio,
                                const std::array<float, 3>& goal,
                                const std::array<float, 2>& prev_action,
                                bool stochastic, Rng* rng) {
    Graph g;
    auto bound = bind_net(g, actor, false);
    Tensor feat({1, (int)features.size()});
    feat.data = features;
    Tensor aux({1, cfg.actor_aux_in()});
    std::copy(proprio.begin(), proprio.end(), aux.data.begin());
    std::copy(goal.begin(), goal.end(), aux.data.begin() + 9);
    std::copy(prev_action.begin(), prev_action.end(), aux.data.begin() + 12);
    const auto dist = actor_forward(g, bound, g.constant(feat), g.constant(aux), cfg);
    const Tensor& mean = g.val(dist.mean);
    const Tensor& logstd = g.val(dist.logstd);

    std::array<float, 2> out{};
    for (int i = 0; i < cfg.action_dim; ++i) {
        double x = mean.data[(size_t)i];
        if (stochastic)
            x += std::exp((double)logstd.data[(size_t)i]) * rng->normal();
        const double a = squash_scalar(x, prev_action[(size_t)i], cfg.squash_delta);
        out[(size_t)i] = (float)std::clamp(a, -1.0, 1.0);
    }
    return out;
}

std::vector<float> state_features(const CarState& s, const WorldMap& map) {
    const double hw = std::max(1.0, map.bounds.width() / 2.0);
    const double hh = std::max(1.0, map.bounds.height() / 2.0);
    const Vec2 c{(map.bounds.lo.x + map.bounds.hi.x) / 2.0,
                 (map.bounds.lo.y + map.bounds.hi.y) / 2.0};
    return {(float)((s.position.x - c.x) / hw), (float)((s.position.y - c.y) / hh),
            (float)std::cos(s.heading), (float)std::sin(s.heading)};
}

}  // namespace autolap
