#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "autolap/learner.hpp"

using namespace autolap;

namespace {

NetConfig tiny_net() {
    NetConfig c;
    c.state_based = true;  // 4 pose features, no conv stack in the hot path
    c.aux_dim = 8;
    c.trunk_hidden = 16;
    c.n_critics = 3;
    return c;
}

LearnerConfig tiny_learn() {
    LearnerConfig c;
    c.n_critics = 3;
    c.m_subset = 2;
    c.batch_size = 8;
    c.utd = 8;
    c.publish_every = 5;
    return c;
}

TransitionRecord rec(uint64_t step, Rng& rng, uint8_t done = 0) {
    TransitionRecord t;
    t.features = {(float)rng.normal(), (float)rng.normal(), (float)rng.normal(),
                  (float)rng.normal()};
    for (auto& v : t.proprio) v = (float)(0.1 * rng.normal());
    t.goal = {1.0f, 0.0f, 3.0f};
    for (auto& v : t.prev_action) v = (float)rng.uniform(-0.5, 0.5);
    for (auto& v : t.action) v = (float)rng.uniform(-0.5, 0.5);
    t.reward = (float)rng.normal();
    t.done = done;
    t.step = step;
    return t;
}

SacLearner make_learner(const NetConfig& nc, const LearnerConfig& lc, uint64_t seed = 3) {
    Rng er = Rng::substream(seed, "enc-init");
    return SacLearner(nc, lc, make_encoder_params(nc, er), seed);
}

}  // namespace

TEST_CASE("learner: idles with an empty online buffer") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    auto L = make_learner(nc, lc);
    CHECK(!L.can_update());
    CHECK(!L.update_once());
    CHECK(L.run_pending() == 0);
}

TEST_CASE("learner: utd accounting is exact") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    auto L = make_learner(nc, lc);
    Rng rng = Rng::substream(1, "utd");
    // 11 consecutive records stitch into 10 transitions
    std::vector<TransitionRecord> recs;
    for (uint64_t i = 0; i < 11; ++i) recs.push_back(rec(i, rng));
    CHECK(L.ingest_batch(recs) == 10);
    CHECK(L.pending_updates() == 80);
    CHECK(L.run_pending() == 80);
    CHECK(L.pending_updates() == 0);
    CHECK(L.stats().updates == 80);
    // no new data, no updates
    CHECK(L.run_pending() == 0);
}

TEST_CASE("learner: terminal mask makes y equal r exactly") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    lc.demo_mixing = false;
    auto L = make_learner(nc, lc);
    Rng rng = Rng::substream(2, "terminal");
    for (uint64_t i = 0; i < 20; ++i) L.ingest(rec(3 * i, rng, 1));  // all terminal
    REQUIRE(L.can_update());
    REQUIRE(L.update_once());
    const auto& y = L.last_targets();
    REQUIRE(y.size() == 8);
    // every sampled transition is terminal, so each target is its reward
    for (float v : y) {
        bool matches = false;
        for (size_t i = 0; i < L.online_buffer().size(); ++i)
            if (L.online_buffer().at(i).reward == v) matches = true;
        CHECK(matches);
    }
}

TEST_CASE("learner: polyak moves targets toward critics") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    lc.demo_mixing = false;
    auto L = make_learner(nc, lc);
    Rng rng = Rng::substream(3, "polyak");
    for (uint64_t i = 0; i < 12; ++i) L.ingest(rec(i, rng));
    const Tensor before_t = L.target_params(0).tensors[0];
    const Tensor before_c = L.critic_params(0).tensors[0];
    REQUIRE(L.update_once());
    const Tensor& after_t = L.target_params(0).tensors[0];
    const Tensor& after_c = L.critic_params(0).tensors[0];
    // target = (1 - tau) * old_target + tau * new_critic
    for (size_t i = 0; i < after_t.data.size(); ++i) {
        float want = (1.0f - lc.polyak) * before_t.data[i] + lc.polyak * after_c.data[i];
        CHECK(after_t.data[i] == doctest::Approx(want).epsilon(1e-5));
    }
    // and the critic itself moved
    bool moved = false;
    for (size_t i = 0; i < after_c.data.size(); ++i)
        if (after_c.data[i] != before_c.data[i]) moved = true;
    CHECK(moved);
}

TEST_CASE("learner: publish cadence and version monotonicity") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    lc.demo_mixing = false;
    auto L = make_learner(nc, lc);
    Rng rng = Rng::substream(4, "publish");
    for (uint64_t i = 0; i < 12; ++i) L.ingest(rec(i, rng));
    CHECK(!L.publish_due());
    for (int i = 0; i < 5; ++i) L.update_once();
    CHECK(L.publish_due());
    ParamSet s1 = L.make_snapshot();
    CHECK(s1.version == 1);
    CHECK(!L.publish_due());
    CHECK(s1.has("actor/head/w"));
    CHECK(!s1.has("enc/conv0/w"));  // frozen-encoder mode publishes the actor only
    for (int i = 0; i < 5; ++i) L.update_once();
    ParamSet s2 = L.make_snapshot();
    CHECK(s2.version == 2);
}

TEST_CASE("learner: frozen encoder has no optimizer and never changes") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    lc.demo_mixing = false;
    auto L = make_learner(nc, lc);
    CHECK(!L.encoder_optimizer_exists());
    auto before = serialize_params(L.encoder_params());
    Rng rng = Rng::substream(5, "frozen");
    for (uint64_t i = 0; i < 12; ++i) L.ingest(rec(i, rng));
    for (int i = 0; i < 10; ++i) L.update_once();
    CHECK(serialize_params(L.encoder_params()) == before);
}

TEST_CASE("learner: entropy target decays linearly to the floor") {
    LearnerConfig lc;
    CHECK(lc.target_entropy(0, 2) == -3.0f);
    CHECK(lc.target_entropy(50000, 2) == doctest::Approx(-3.5).epsilon(1e-6));
    CHECK(lc.target_entropy(100000, 2) == doctest::Approx(-4.0).epsilon(1e-6));
    CHECK(lc.target_entropy(200000, 2) == -4.0f);  // floored at -(action dim) * 2
}

TEST_CASE("learner: temperature moves opposite the entropy surplus") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    lc.demo_mixing = false;
    auto L = make_learner(nc, lc);
    Rng rng = Rng::substream(6, "alpha");
    for (uint64_t i = 0; i < 12; ++i) L.ingest(rec(i, rng));
    const float a0 = L.alpha();
    REQUIRE(L.update_once());
    auto st = L.stats();
    const float surplus = -st.mean_logp - st.target_entropy;  // entropy - target
    if (surplus > 0)
        CHECK(L.alpha() < a0);
    else if (surplus < 0)
        CHECK(L.alpha() > a0);
}

TEST_CASE("learner: checkpoint restores version continuity and parameters") {
    auto nc = tiny_net();
    auto lc = tiny_learn();
    lc.demo_mixing = false;
    auto L = make_learner(nc, lc, 7);
    Rng rng = Rng::substream(7, "ckpt");
    for (uint64_t i = 0; i < 12; ++i) L.ingest(rec(i, rng));
    for (int i = 0; i < 6; ++i) L.update_once();
    (void)L.make_snapshot();
    const std::string dir = "test_learner_ckpt";
    L.save_checkpoint(dir);

    auto M = make_learner(nc, lc, 99);
    M.load_checkpoint(dir);
    CHECK(M.update_count() == L.update_count());
    CHECK(M.alpha() == doctest::Approx(L.alpha()).epsilon(1e-7));
    CHECK(serialize_params(M.actor_params()) == serialize_params(L.actor_params()));
    CHECK(serialize_params(M.target_params(2)) == serialize_params(L.target_params(2)));
    ParamSet next = M.make_snapshot();
    CHECK(next.version == 2);  // continues after the pre-checkpoint snapshot
    std::filesystem::remove_all(dir);
}

TEST_CASE("learner: subset-min target never exceeds a member value") {
    auto nc = tiny_net();
    Rng rng = Rng::substream(8, "subset");
    std::vector<ParamSet> critics;
    for (int k = 0; k < 3; ++k) critics.push_back(make_critic_params(nc, k, rng));
    const int B = 32;
    Tensor feat = Tensor::zeros({B, nc.feature_len()});
    Tensor aux = Tensor::zeros({B, nc.critic_aux_in()});
    for (auto& v : feat.data) v = (float)rng.normal();
    for (auto& v : aux.data) v = (float)rng.normal();
    std::vector<const ParamSet*> all{&critics[0], &critics[1], &critics[2]};
    auto qmin = eval_critics(nc, all, feat, aux, true);
    for (int k = 0; k < 3; ++k) {
        auto qk = eval_critics(nc, {&critics[(size_t)k]}, feat, aux, false);
        for (int i = 0; i < B; ++i) CHECK(qmin[(size_t)i] <= qk[(size_t)i] + 1e-6f);
    }
}
