#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "autolap/params.hpp"
#include "autolap/rng.hpp"

using namespace autolap;

static ParamSet sample_params() {
    ParamSet ps;
    ps.version = 42;
    Rng rng(7);
    Tensor a({3, 4});
    for (auto& v : a.data) v = rng.normal_f();
    Tensor b({5});
    for (auto& v : b.data) v = rng.normal_f();
    Tensor c({2, 2, 3, 3});
    for (auto& v : c.data) v = rng.normal_f();
    ps.add("enc/conv0/w", std::move(c));
    ps.add("actor/dense0/w", std::move(a));
    ps.add("actor/dense0/b", std::move(b));
    return ps;
}

TEST_CASE("serialize/parse roundtrip is exact") {
    ParamSet ps = sample_params();
    auto bytes = serialize_params(ps);
    ParamSet back = parse_params(bytes);
    CHECK(back.version == ps.version);
    REQUIRE(back.count() == ps.count());
    for (size_t i = 0; i < ps.count(); ++i) {
        CHECK(back.names[i] == ps.names[i]);
        CHECK(back.tensors[i].shape == ps.tensors[i].shape);
        CHECK(back.tensors[i].data == ps.tensors[i].data);
    }
}

TEST_CASE("corruption is rejected") {
    auto bytes = serialize_params(sample_params());
    SUBCASE("flipped payload byte") {
        bytes[bytes.size() / 2] ^= 0x40;
        CHECK_THROWS(parse_params(bytes));
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        CHECK_THROWS(parse_params(bytes));
    }
    SUBCASE("truncated") {
        bytes.resize(bytes.size() - 5);
        CHECK_THROWS(parse_params(bytes));
    }
}

TEST_CASE("file roundtrip") {
    const auto path = std::filesystem::temp_directory_path() / "autolap_params_test.flpw";
    ParamSet ps = sample_params();
    save_params(path.string(), ps);
    ParamSet back = load_params(path.string());
    CHECK(back.count() == ps.count());
    CHECK(back.at("actor/dense0/w").data == ps.at("actor/dense0/w").data);
    std::filesystem::remove(path);
}

TEST_CASE("subset picks by prefix, absorb merges") {
    ParamSet ps = sample_params();
    ParamSet actor = ps.subset("actor/");
    CHECK(actor.count() == 2);
    CHECK(actor.has("actor/dense0/w"));
    CHECK(!actor.has("enc/conv0/w"));

    ParamSet enc = ps.subset("enc/");
    actor.absorb(enc);
    CHECK(actor.count() == 3);
    CHECK_THROWS(actor.absorb(enc));  // duplicate names rejected
}

TEST_CASE("init_dense respects the fan-in bound") {
    Rng rng(3);
    Tensor t = init_dense({16, 25}, 25, rng);
    const float bound = 1.0f / 5.0f;
    for (float v : t.data) {
        CHECK(v >= -bound);
        CHECK(v <= bound);
    }
    // not all identical
    CHECK(t.data[0] != t.data[1]);
}

TEST_CASE("adam: first step has magnitude lr, converges on a bowl") {
    ParamSet ps;
    Tensor t({2});
    t.data = {5.0f, -3.0f};
    ps.add("p", t);
    Adam opt(AdamConfig{0.1f, 0.9f, 0.999f, 1e-8f});

    Tensor g({2});
    g.data = {ps.at("p").data[0], ps.at("p").data[1]};
    opt.step(ps, {&g});
    // m_hat/sqrt(v_hat) = sign(g) on the first step
    CHECK(ps.at("p").data[0] == doctest::Approx(5.0f - 0.1f).epsilon(1e-4));
    CHECK(ps.at("p").data[1] == doctest::Approx(-3.0f + 0.1f).epsilon(1e-4));

    for (int i = 0; i < 500; ++i) {
        g.data = {ps.at("p").data[0], ps.at("p").data[1]};
        opt.step(ps, {&g});
    }
    CHECK(std::abs(ps.at("p").data[0]) < 1e-2f);
    CHECK(std::abs(ps.at("p").data[1]) < 1e-2f);
}

TEST_CASE("adam skips frozen tensors") {
    ParamSet ps;
    Tensor a({2}), b({2});
    a.data = {1.0f, 1.0f};
    b.data = {1.0f, 1.0f};
    ps.add("live", a);
    ps.add("frozen", b);
    Adam opt;
    Tensor g({2});
    g.data = {1.0f, 1.0f};
    opt.step(ps, {&g, nullptr});
    CHECK(ps.at("live").data[0] != 1.0f);
    CHECK(ps.at("frozen").data[0] == 1.0f);
}

TEST_CASE("polyak update") {
    ParamSet tgt, onl;
    Tensor a({2}), b({2});
    a.data = {0.0f, 10.0f};
    b.data = {10.0f, 0.0f};
    tgt.add("x", a);
    onl.add("x", b);
    polyak_update(tgt, onl, 0.005f);
    CHECK(tgt.at("x").data[0] == doctest::Approx(0.05f));
    CHECK(tgt.at("x").data[1] == doctest::Approx(9.95f));
}
