#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "autolap/graph.hpp"
#include "autolap/params.hpp"
#include "autolap/world.hpp"

// Network definitions: conv encoder, actor/critic/value heads, the shifted
// tanh action squash, and the binding helpers that connect ParamSets to
// graphs. Everything that builds graph nodes is templated on the scalar so
// the finite-difference suite can run the exact training losses in double.

namespace autolap {

struct NetConfig {
    int raster_w = 64, raster_h = 64;
    int frames = 3;
    int enc_layers = 4;    // 3x3 stride-2 pad-1 convs
    int enc_channels = 32;
    int aux_dim = 64;      // proprio-goal-action dense layer width
    int trunk_hidden = 256;
    int trunk_layers = 2;
    int proprio_dim = 9;
    int goal_dim = 3;
    int action_dim = 2;
    int n_critics = 10;
    float logstd_min = -10.0f, logstd_max = 2.0f;
    double squash_delta = 0.2;  // in normalized action units
    bool state_based = false;   // privileged pose features instead of raster
    int state_feature_dim = 4;  // x, y (normalized), cos h, sin h

    int conv_out_side() const {
        int s = raster_w;
        for (int i = 0; i < enc_layers; ++i) s = (s + 2 - 3) / 2 + 1;
        return s;
    }
    int feature_len() const {
        if (state_based) return state_feature_dim;
        return conv_out_side() * conv_out_side() * enc_channels;
    }
    // aux input: proprio + goal + prev_action (+ evaluated action for critics)
    int actor_aux_in() const { return proprio_dim + goal_dim + action_dim; }
    int critic_aux_in() const { return actor_aux_in() + action_dim; }
};

// Parameter construction, fan-in scaled uniform init. Names are stable and
// ordered; binding consumes them in ParamSet order.
ParamSet make_encoder_params(const NetConfig& cfg, Rng& rng);  // enc/conv{i}/{w,b}
// prefix like "actor", "critic3", "value"; out_dim 1 for values, 2*action_dim
// for the actor head
ParamSet make_head_params(const NetConfig& cfg, const std::string& prefix, int aux_in,
                          int out_dim, Rng& rng);
ParamSet make_actor_params(const NetConfig& cfg, Rng& rng);
ParamSet make_critic_params(const NetConfig& cfg, int index, Rng& rng);
ParamSet make_value_params(const NetConfig& cfg, Rng& rng);

template <class S>
struct BoundNet {
    const ParamSet* ps = nullptr;
    std::vector<int> ids;  // aligned with ps->tensors
    int id(const std::string& name) const { return ids[(size_t)ps->find(name)]; }
};

template <class S>
BoundNet<S> bind_net(GraphT<S>& g, const ParamSet& ps, bool trainable) {
    BoundNet<S> b;
    b.ps = &ps;
    b.ids.reserve(ps.count());
    for (const auto& t : ps.tensors) b.ids.push_back(g.input(t.template cast<S>(), trainable));
    return b;
}

// Gradients aligned with ps.tensors, cast back to float for Adam.
template <class S>
std::vector<Tensor> collect_grads(const GraphT<S>& g, const BoundNet<S>& net) {
    std::vector<Tensor> out;
    out.reserve(net.ids.size());
    for (int id : net.ids) out.push_back(g.grad(id).template cast<float>());
    return out;
}

inline std::vector<const Tensor*> grad_ptrs(const std::vector<Tensor>& grads) {
    std::vector<const Tensor*> p;
    p.reserve(grads.size());
    for (const auto& t : grads) p.push_back(&t);
    return p;
}

// raster [B, frames, H, W] -> flat features [B, F]
template <class S>
int encoder_forward(GraphT<S>& g, const BoundNet<S>& enc, int raster,
                    const NetConfig& cfg) {
    int x = raster;
    for (int i = 0; i < cfg.enc_layers; ++i) {
        const std::string p = "enc/conv" + std::to_string(i) + "/";
        x = g.relu(g.conv2d(x, enc.id(p + "w"), enc.id(p + "b"), 2, 1));
    }
    const int B = g.val(raster).shape[0];
    return g.reshape(x, {B, cfg.feature_len()});
}

// aux dense -> relu -> concat(features) -> trunk relu MLP -> linear head
template <class S>
int head_forward(GraphT<S>& g, const BoundNet<S>& net, const std::string& prefix,
                 int features, int aux, const NetConfig& cfg) {
    const int a = g.relu(g.linear(aux, net.id(prefix + "/aux/w"), net.id(prefix + "/aux/b")));
    int x = g.concat_cols({features, a});
    for (int i = 0; i < cfg.trunk_layers; ++i) {
        const std::string p = prefix + "/trunk" + std::to_string(i) + "/";
        x = g.relu(g.linear(x, net.id(p + "w"), net.id(p + "b")));
    }
    return g.linear(x, net.id(prefix + "/head/w"), net.id(prefix + "/head/b"));
}

template <class S>
struct ActorDist {
    int mean;    // [B, adim]
    int logstd;  // [B, adim], clamped
};

template <class S>
ActorDist<S> actor_forward(GraphT<S>& g, const BoundNet<S>& actor, int features, int aux,
                           const NetConfig& cfg) {
    const int head = head_forward(g, actor, "actor", features, aux, cfg);
    ActorDist<S> d;
    d.mean = g.slice_cols(head, 0, cfg.action_dim);
    d.logstd = g.clamp_(g.slice_cols(head, cfg.action_dim, 2 * cfg.action_dim),
                        (S)cfg.logstd_min, (S)cfg.logstd_max);
    return d;
}

// log N(x; mean, std) summed over action dims -> [B,1]
template <class S>
int gaussian_logp(GraphT<S>& g, const ActorDist<S>& d, int x) {
    constexpr double kLog2Pi = 1.8378770664093453;
    const int std = g.exp_(d.logstd);
    const int z = g.div(g.sub(x, d.mean), std);
    const int per_dim = g.sub(g.mul_scalar(g.square(z), S(-0.5)),
                              g.add_scalar(d.logstd, S(0.5 * kLog2Pi)));
    return g.row_sum(per_dim);
}

// sum over dims of log f'(x) for f(x) = tanh((x - a_prev)/delta)*delta + a_prev,
// f'(x) = sech^2((x - a_prev)/delta); stable form
// log(1 - tanh^2 u) = 2*(log 2 - u - softplus(-2u))
template <class S>
int squash_log_det(GraphT<S>& g, int x, int a_prev, double delta) {
    const int u = g.mul_scalar(g.sub(x, a_prev), S(1.0 / delta));
    const int per_dim = g.mul_scalar(
        g.sub(g.add_scalar(g.neg(u), S(std::log(2.0))), g.softplus(g.mul_scalar(u, S(-2)))),
        S(2));
    return g.row_sum(per_dim);
}

template <class S>
int squash_apply(GraphT<S>& g, int x, int a_prev, double delta) {
    const int u = g.mul_scalar(g.sub(x, a_prev), S(1.0 / delta));
    return g.add(g.mul_scalar(g.tanh_(u), S(delta)), a_prev);
}

template <class S>
struct SampledAction {
    int action;   // squashed, clipped to [-1, 1], [B, adim]
    int logp;     // [B, 1], exact change-of-variables for the scaled tanh
};

// Reparameterized sample: x = mean + std * eps with eps a constant node.
template <class S>
SampledAction<S> sample_squashed(GraphT<S>& g, const ActorDist<S>& d, int eps,
                                 int a_prev, double delta) {
    const int x = g.add(d.mean, g.mul(g.exp_(d.logstd), eps));
    SampledAction<S> out;
    out.action = g.clamp_(squash_apply(g, x, a_prev, delta), S(-1), S(1));
    out.logp = g.sub(gaussian_logp(g, d, x), squash_log_det(g, x, a_prev, delta));
    return out;
}

// log prob of a given squashed action (AWR path); the preimage
// x = a_prev + delta * atanh((a - a_prev)/delta) is computed outside the graph.
template <class S>
int logp_of_action(GraphT<S>& g, const ActorDist<S>& d, const TensorT<S>& action,
                   const TensorT<S>& a_prev, double delta) {
    TensorT<S> pre(action.shape);
    for (size_t i = 0; i < action.data.size(); ++i) {
        double r = ((double)action.data[i] - (double)a_prev.data[i]) / delta;
        r = std::clamp(r, -0.999999, 0.999999);
        pre.data[i] = (S)((double)a_prev.data[i] + delta * std::atanh(r));
    }
    const int x = g.constant(pre);
    const int ap = g.constant(a_prev);
    return g.sub(gaussian_logp(g, d, x), squash_log_det(g, x, ap, delta));
}

// ---- plain (graph-free) scalar helpers used by the control loop ----

// Normalized action in [-1,1]^2 from env units and back.
std::array<float, 2> normalize_action(const Action& a, const ActionRanges& r);
Action denormalize_action(const std::array<float, 2>& n, const ActionRanges& r);

// Body-frame proprio block, 3D-padded: v (vx, vy, 0), omega (0, 0, wz),
// accel (ax, ay, 0).
std::array<float, 9> make_proprio(const CarState& s);

// Flattened oldest-first raster stack: the raw-pixels feature layout.
std::vector<float> flatten_raster(const EgoRaster& r);

// Scalar squash used on the robot side when acting (same formula as the
// graph version).
double squash_scalar(double x, double a_prev, double delta);

// Raster batch tensor [B, 3, H, W] from stacked frames.
Tensor raster_batch(const std::vector<const EgoRaster*>& rasters);

// Frozen-encoder featurization of a single raster (batch of 1).
std::vector<float> encode_features(const ParamSet& enc, const EgoRaster& raster,
                                   const NetConfig& cfg);

// Privileged pose features for the state_based ablation.
std::vector<float> state_features(const CarState& s, const WorldMap& map);

// Batch-1 actor query for the control loop. Stochastic draws a
// reparameterized sample; otherwise the squashed mean. The ParamSet may be a
// published snapshot carrying encoder tensors alongside the actor head.
std::array<float, 2> policy_act(const ParamSet& actor, const NetConfig& cfg,
                                const std::vector<float>& features,
                                const std::array<float, 9>& proprio,
                                const std::array<float, 3>& goal,
                                const std::array<float, 2>& prev_action,
                                bool stochastic, Rng* rng);

}  // namespace autolap
