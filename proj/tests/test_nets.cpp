#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "autolap/nets.hpp"

using namespace autolap;

static NetConfig tiny_cfg() {
    NetConfig cfg;
    cfg.raster_w = cfg.raster_h = 16;
    cfg.enc_layers = 4;
    cfg.enc_channels = 8;
    cfg.aux_dim = 6;
    cfg.trunk_hidden = 10;
    return cfg;
}

TEST_CASE("feature length follows the stride-2 chain") {
    NetConfig cfg;
    CHECK(cfg.conv_out_side() == 4);   // 64 -> 32 -> 16 -> 8 -> 4
    CHECK(cfg.feature_len() == 512);   // 4*4*32

    NetConfig small = tiny_cfg();
    CHECK(small.conv_out_side() == 1);  // 16 -> 8 -> 4 -> 2 -> 1
    CHECK(small.feature_len() == 8);

    NetConfig sb;
    sb.state_based = true;
    CHECK(sb.feature_len() == 4);
}

TEST_CASE("zero-weight critic outputs zero") {
    NetConfig cfg = tiny_cfg();
    Rng rng(1);
    ParamSet critic = make_critic_params(cfg, 0, rng);
    for (auto& t : critic.tensors)
        for (auto& v : t.data) v = 0.0f;

    Graph g;
    auto net = bind_net(g, critic, false);
    Rng xr(2);
    Tensor feat({3, cfg.feature_len()}), aux({3, cfg.critic_aux_in()});
    for (auto& v : feat.data) v = xr.normal_f();
    for (auto& v : aux.data) v = xr.normal_f();
    const int q = head_forward(g, net, "critic0", g.constant(feat), g.constant(aux), cfg);
    for (float v : g.val(q).data) CHECK(v == 0.0f);
}

TEST_CASE("critic forward is deterministic and matches a naive reimplementation") {
    NetConfig cfg = tiny_cfg();
    Rng rng(7);
    ParamSet critic = make_critic_params(cfg, 2, rng);

    const int B = 4;
    Rng xr(8);
    Tensor feat({B, cfg.feature_len()}), aux({B, cfg.critic_aux_in()});
    for (auto& v : feat.data) v = xr.normal_f();
    for (auto& v : aux.data) v = xr.normal_f();

    auto run = [&] {
        Graph g;
        auto net = bind_net(g, critic, false);
        const int q =
            head_forward(g, net, "critic2", g.constant(feat), g.constant(aux), cfg);
        return g.val(q).data;
    };
    auto q1 = run(), q2 = run();
    CHECK(q1 == q2);

    // plain-loop forward straight off the named tensors
    auto dense = [&](const std::vector<float>& x, int in, const std::string& w,
                     const std::string& b, bool relu) {
        const Tensor& W = critic.at(w);
        const Tensor& bias = critic.at(b);
        const int out = W.rows();
        std::vector<float> y(out);
        for (int o = 0; o < out; ++o) {
            float acc = bias.data[o];
            for (int i = 0; i < in; ++i) acc += W.data[(size_t)o * in + i] * x[i];
            y[o] = relu && acc < 0 ? 0.0f : acc;
        }
        return y;
    };
    for (int b = 0; b < B; ++b) {
        std::vector<float> ax(aux.data.begin() + (size_t)b * cfg.critic_aux_in(),
                              aux.data.begin() + (size_t)(b + 1) * cfg.critic_aux_in());
        auto a = dense(ax, cfg.critic_aux_in(), "critic2/aux/w", "critic2/aux/b", true);
        std::vector<float> x(feat.data.begin() + (size_t)b * cfg.feature_len(),
                             feat.data.begin() + (size_t)(b + 1) * cfg.feature_len());
        x.insert(x.end(), a.begin(), a.end());
        x = dense(x, (int)x.size(), "critic2/trunk0/w", "critic2/trunk0/b", true);
        x = dense(x, cfg.trunk_hidden, "critic2/trunk1/w", "critic2/trunk1/b", true);
        x = dense(x, cfg.trunk_hidden, "critic2/head/w", "critic2/head/b", false);
        CHECK(q1[b] == doctest::Approx(x[0]).epsilon(1e-6));
    }
}

TEST_CASE("ensemble members are independent parameterizations") {
    NetConfig cfg = tiny_cfg();
    Rng rng(3);
    ParamSet c0 = make_critic_params(cfg, 0, rng);
    ParamSet c1 = make_critic_params(cfg, 1, rng);
    CHECK(c0.at("critic0/head/w").data != c1.at("critic1/head/w").data);
}

TEST_CASE("encoder forward: shape, determinism, featurize helper agreement") {
    NetConfig cfg = tiny_cfg();
    Rng rng(4);
    ParamSet enc = make_encoder_params(cfg, rng);

    EgoRaster r;
    r.width = r.height = cfg.raster_w;
    r.frames.resize(3 * r.frame_len());
    Rng fr(5);
    for (auto& v : r.frames) v = (float)fr.uniform01();

    auto f1 = encode_features(enc, r, cfg);
    auto f2 = encode_features(enc, r, cfg);
    CHECK(f1.size() == (size_t)cfg.feature_len());
    CHECK(f1 == f2);

    Graph g;
    auto net = bind_net(g, enc, false);
    const int feat = encoder_forward(g, net, g.constant(raster_batch({&r})), cfg);
    CHECK(g.val(feat).data == f1);
}

TEST_CASE("shifted tanh squash identities") {
    const double delta = 0.2;
    SUBCASE("x = a_prev maps to a_prev exactly") {
        CHECK(squash_scalar(0.37, 0.37, delta) == doctest::Approx(0.37).epsilon(1e-15));
        CHECK(squash_scalar(-0.8, -0.8, delta) == -0.8);
    }
    SUBCASE("saturation approaches a_prev + delta") {
        CHECK(squash_scalar(1e9, 0.0, delta) == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(squash_scalar(-1e9, 0.0, delta) == doctest::Approx(-0.2).epsilon(1e-12));
    }
    SUBCASE("x = delta from zero gives delta * tanh(1)") {
        const double v = squash_scalar(0.2, 0.0, delta);
        CHECK(v == doctest::Approx(0.2 * std::tanh(1.0)).epsilon(1e-15));
        CHECK(v == doctest::Approx(0.15231883119115298).epsilon(1e-12));
    }
    SUBCASE("first-order identity: f'(a_prev) = 1") {
        const double h = 1e-6;
        const double fd =
            (squash_scalar(0.1 + h, 0.1, delta) - squash_scalar(0.1 - h, 0.1, delta)) /
            (2 * h);
        CHECK(fd == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("strictly monotonic") {
        double prev = squash_scalar(-1.0, 0.0, delta);
        for (double x = -0.95; x < 1.0; x += 0.05) {
            const double v = squash_scalar(x, 0.0, delta);
            CHECK(v > prev);
            prev = v;
        }
    }
}

TEST_CASE("squash log-det matches log(1 - tanh^2)") {
    GraphD g;
    TensorD x({2, 2}), ap({2, 2});
    x.data = {0.3, -0.1, 0.05, 0.6};
    ap.data = {0.1, 0.0, 0.0, 0.4};
    const double delta = 0.2;
    const int ld = squash_log_det(g, g.constant(x), g.constant(ap), delta);
    for (int b = 0; b < 2; ++b) {
        double want = 0;
        for (int j = 0; j < 2; ++j) {
            const double u = (x.data[b * 2 + j] - ap.data[b * 2 + j]) / delta;
            const double t = std::tanh(u);
            want += std::log(1.0 - t * t);
        }
        CHECK(g.val(ld).data[b] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("squashed density integrates to 1 over its support") {
    // 1D check of the exact change of variables: integrate exp(logp) da
    NetConfig cfg = tiny_cfg();
    cfg.action_dim = 1;
    const double delta = 0.2, a_prev = 0.1, mu = 0.05, logstd = -1.2;

    const int n = 4000;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a = a_prev - delta + (2.0 * delta) * (i + 0.5) / n;
        GraphD g;
        ActorDist<double> d;
        TensorD m({1, 1}), ls({1, 1}), at({1, 1}), ap({1, 1});
        m.data[0] = mu;
        ls.data[0] = logstd;
        at.data[0] = a;
        ap.data[0] = a_prev;
        d.mean = g.constant(m);
        d.logstd = g.constant(ls);
        const int lp = logp_of_action(g, d, at, ap, delta);
        integral += std::exp(g.val(lp).data[0]) * (2.0 * delta / n);
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("sampled actions stay in [-1,1] and near a_prev") {
    NetConfig cfg = tiny_cfg();
    Rng rng(9);
    ParamSet actor = make_actor_params(cfg, rng);

    const int B = 64;
    Graph g;
    auto net = bind_net(g, actor, false);
    Tensor feat({B, cfg.feature_len()}), aux({B, cfg.actor_aux_in()}), eps({B, 2}),
        aprev({B, 2});
    Rng xr(10);
    for (auto& v : feat.data) v = xr.normal_f();
    for (auto& v : aux.data) v = xr.normal_f();
    for (auto& v : eps.data) v = xr.normal_f();
    for (auto& v : aprev.data) v = (float)xr.uniform(-1, 1);

    auto dist = actor_forward(g, net, g.constant(feat), g.constant(aux), cfg);
    auto s = sample_squashed(g, dist, g.constant(eps), g.constant(aprev), cfg.squash_delta);
    const auto& a = g.val(s.action).data;
    for (int i = 0; i < B * 2; ++i) {
        CHECK(a[i] >= -1.0f);
        CHECK(a[i] <= 1.0f);
        CHECK(std::abs(a[i] - aprev.data[i]) <= (float)cfg.squash_delta + 1e-6f);
    }
    // logstd respects the clamp
    for (float v : g.val(dist.logstd).data) {
        CHECK(v >= cfg.logstd_min);
        CHECK(v <= cfg.logstd_max);
    }
}

TEST_CASE("action normalization roundtrip and range mapping") {
    ActionRanges r;
    CHECK(normalize_action({0.5, 0.0}, r)[0] == doctest::Approx(-1.0));
    CHECK(normalize_action({3.5, 0.0}, r)[0] == doctest::Approx(1.0));
    CHECK(normalize_action({2.0, 0.25}, r)[1] == doctest::Approx(0.5));

    const Action a = denormalize_action({0.0f, -1.0f}, r);
    CHECK(a.velocity_target == doctest::Approx(2.0));
    CHECK(a.steering == doctest::Approx(-0.5));

    for (double v = 0.5; v <= 3.5; v += 0.37) {
        const Action orig{v, std::fmod(v, 0.5) - 0.25};
        const Action back = denormalize_action(normalize_action(orig, r), r);
        CHECK(back.velocity_target == doctest::Approx(orig.velocity_target).epsilon(1e-6));
        CHECK(back.steering == doctest::Approx(orig.steering).epsilon(1e-6));
    }
}

TEST_CASE("state features are bounded and carry heading") {
    WorldMap m;
    m.bounds = {{-20, -20}, {20, 20}};
    CarState s;
    s.position = {10, -5};
    s.heading = 1.0;
    auto f = state_features(s, m);
    REQUIRE(f.size() == 4);
    CHECK(f[0] == doctest::Approx(0.5));
    CHECK(f[1] == doctest::Approx(-0.25));
    CHECK(f[2] == doctest::Approx(std::cos(1.0)));
    CHECK(f[3] == doctest::Approx(std::sin(1.0)));
}
