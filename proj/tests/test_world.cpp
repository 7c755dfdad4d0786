#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "autolap/world.hpp"

using namespace autolap;

static WorldMap empty_map(double half = 50.0) {
    WorldMap m;
    m.bounds = {{-half, -half}, {half, half}};
    m.cell_size = 1.0;
    m.grid_w = m.grid_h = (int)(2 * half);
    m.terrain.assign((size_t)m.grid_w * m.grid_h, TerrainCell{});
    return m;
}

TEST_CASE("straight line at steady speed advances v*dt") {
    WorldMap m = empty_map();
    DynamicsParams p;
    CarState s;
    s.speed = 2.0;
    auto r = step_dynamics(s, {2.0, 0.0}, m, p);
    CHECK(!r.collided);
    CHECK(r.state.position.x == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.state.position.y == doctest::Approx(0.0));
    CHECK(r.state.heading == doctest::Approx(0.0));
    CHECK(r.state.speed == doctest::Approx(2.0));
}

TEST_CASE("constant steering traces a circle of radius ~L/tan(steer)") {
    WorldMap m = empty_map();
    DynamicsParams p;
    CarState s;
    s.speed = 2.0;
    const double steer = 0.3;

    // reach steady state first
    for (int i = 0; i < 100; ++i) s = step_dynamics(s, {2.0, steer}, m, p).state;

    // fit the turning circle from three well-separated points
    std::vector<Vec2> pts;
    for (int i = 0; i < 40; ++i) {
        s = step_dynamics(s, {2.0, steer}, m, p).state;
        if (i % 15 == 0) pts.push_back(s.position);
    }
    const Vec2 a = pts[0], b = pts[1], c = pts[2];
    // circumcenter
    const double d = 2 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    const double ux = ((a.norm_sq()) * (b.y - c.y) + (b.norm_sq()) * (c.y - a.y) +
                       (c.norm_sq()) * (a.y - b.y)) / d;
    const double uy = ((a.norm_sq()) * (c.x - b.x) + (b.norm_sq()) * (a.x - c.x) +
                       (c.norm_sq()) * (b.x - a.x)) / d;
    const double radius = (a - Vec2{ux, uy}).norm();
    CHECK(radius == doctest::Approx(p.wheelbase / std::tan(steer)).epsilon(0.05));
}

TEST_CASE("mud scales steady-state displacement by the speed factor") {
    WorldMap nominal = empty_map(200.0);
    WorldMap mud = empty_map(200.0);
    for (auto& c : mud.terrain) c.speed_factor = 0.3f;

    DynamicsParams p;
    CarState sn, sm;
    // run to steady state on both terrains with the same action sequence
    for (int i = 0; i < 200; ++i) {
        sn = step_dynamics(sn, {3.0, 0.0}, nominal, p).state;
        sm = step_dynamics(sm, {3.0, 0.0}, mud, p).state;
    }
    const double xn0 = sn.position.x, xm0 = sm.position.x;
    for (int i = 0; i < 100; ++i) {
        sn = step_dynamics(sn, {3.0, 0.0}, nominal, p).state;
        sm = step_dynamics(sm, {3.0, 0.0}, mud, p).state;
    }
    const double ratio = (sm.position.x - xm0) / (sn.position.x - xn0);
    CHECK(ratio == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("speed never exceeds the command cap on nominal ground") {
    WorldMap m = empty_map();
    DynamicsParams p;
    CarState s;
    for (int i = 0; i < 500; ++i) {
        s = step_dynamics(s, {3.5, (i % 7 - 3) * 0.1}, m, p).state;
        CHECK(s.speed <= 3.5 + 1e-9);
        CHECK(s.speed >= 0.0);
    }
}

TEST_CASE("crossing an obstacle clamps to contact and spikes lateral accel") {
    WorldMap m = empty_map();
    m.obstacles.push_back(make_box({1.0, -5.0}, {2.0, 5.0}));
    DynamicsParams p;
    CarState s;
    s.position = {0.85, 0.0};
    s.speed = 3.0;
    auto r = step_dynamics(s, {3.0, 0.0}, m, p);
    CHECK(r.collided);
    CHECK(r.state.position.x == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.state.position.x < 1.0);  // nudged back to free space
    CHECK(std::abs(r.state.lateral_accel) > p.accel_threshold);
    CHECK(r.state.lateral_accel == doctest::Approx(5.0 * p.accel_threshold));
    CHECK(r.state.speed == 0.0);
    CHECK(m.in_free_space(r.state.position));
}

TEST_CASE("free motion lateral accel stays under the collision threshold") {
    WorldMap m = empty_map();
    DynamicsParams p;
    CarState s;
    s.speed = 3.5;
    for (int i = 0; i < 100; ++i) {
        auto r = step_dynamics(s, {3.5, 0.5}, m, p);
        REQUIRE(!r.collided);
        s = r.state;
        CHECK(std::abs(s.lateral_accel) <= 0.9 * p.accel_threshold + 1e-12);
    }
}

TEST_CASE("leaving the map bounds counts as a collision") {
    WorldMap m = empty_map(5.0);
    DynamicsParams p;
    CarState s;
    s.position = {4.9, 0.0};
    s.speed = 3.0;
    auto r = step_dynamics(s, {3.0, 0.0}, m, p);
    CHECK(r.collided);
    CHECK(r.state.position.x <= 5.0);
}

TEST_CASE("NaN input is rejected") {
    WorldMap m = empty_map();
    DynamicsParams p;
    CarState s;
    s.speed = std::nan("");
    CHECK_THROWS(step_dynamics(s, {2.0, 0.0}, m, p));
    CarState ok;
    CHECK_THROWS(step_dynamics(ok, {std::nan(""), 0.0}, m, p));
}

TEST_CASE("determinism: identical inputs give bit-identical trajectories") {
    WorldMap m = generate_scatter_map(99);
    DynamicsParams p;
    CarState a, b;
    for (int i = 0; i < 300; ++i) {
        const Action act{0.5 + (i % 30) * 0.1, ((i * 7) % 11 - 5) * 0.1};
        a = step_dynamics(a, act, m, p).state;
        b = step_dynamics(b, act, m, p).state;
        REQUIRE(a.position.x == b.position.x);
        REQUIRE(a.position.y == b.position.y);
        REQUIRE(a.heading == b.heading);
        REQUIRE(a.speed == b.speed);
    }
}

TEST_CASE("relative_goal") {
    CarState s;
    SUBCASE("dead ahead") {
        auto g = relative_goal(s, {5.0, 0.0});
        CHECK(g.unit_dir.x == doctest::Approx(1.0));
        CHECK(g.unit_dir.y == doctest::Approx(0.0));
        CHECK(g.distance == doctest::Approx(5.0));
    }
    SUBCASE("directly left") {
        auto g = relative_goal(s, {0.0, 3.0});
        CHECK(g.unit_dir.x == doctest::Approx(0.0));
        CHECK(g.unit_dir.y == doctest::Approx(1.0));
        CHECK(g.distance == doctest::Approx(3.0));
    }
    SUBCASE("rotated pose") {
        CarState r;
        r.position = {1.0, 1.0};
        r.heading = 3.14159265358979323846 / 4.0;
        const double s2 = std::sqrt(2.0);
        auto g = relative_goal(r, {1.0 + s2, 1.0 + s2});
        CHECK(g.unit_dir.x == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(g.unit_dir.y == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(g.distance == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("zero distance convention") {
        auto g = relative_goal(s, {0.0, 0.0});
        CHECK(g.unit_dir.x == 1.0);
        CHECK(g.unit_dir.y == 0.0);
        CHECK(g.distance == 0.0);
    }
    SUBCASE("unit norm whenever distance positive") {
        CarState r;
        r.position = {2.0, -3.0};
        r.heading = 1.1;
        auto g = relative_goal(r, {-4.0, 7.0});
        CHECK(g.unit_dir.norm() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("empty world renders all ones") {
    WorldMap m = empty_map(100.0);
    RasterParams rp;
    rp.width = rp.height = 16;
    CarState s;
    auto f = render_frame(s, m, rp);
    for (float v : f) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("wall at half range: center column ~0.5, edges farther") {
    WorldMap m = empty_map(100.0);
    RasterParams rp;
    rp.width = rp.height = 17;  // odd so there is a center column
    m.obstacles.push_back(make_box({rp.max_range / 2, -60.0}, {rp.max_range / 2 + 1, 60.0}));
    CarState s;
    auto f = render_frame(s, m, rp);
    const int mid = rp.width / 2;
    CHECK(f[mid] == doctest::Approx(0.5).epsilon(0.02));
    CHECK(f[0] > 0.5);
    CHECK(f[rp.width - 1] > 0.5);
    // column replicated down rows
    CHECK(f[mid + rp.width] == f[mid]);
}

TEST_CASE("frame stack pushes oldest-first") {
    WorldMap m = empty_map(100.0);
    RasterParams rp;
    rp.width = rp.height = 8;
    CarState s;
    EgoRaster r = initial_raster(s, m, rp);
    // identical states: all 3 frames identical
    for (int i = 0; i < 3; ++i)
        CHECK(r.frame(i)[0] == doctest::Approx(1.0));

    m.obstacles.push_back(make_box({1.0, -10.0}, {2.0, 10.0}));
    push_frame(r, render_frame(s, m, rp));
    CHECK(r.frame(0)[rp.width / 2] == doctest::Approx(1.0));  // old empty frame
    CHECK(r.frame(2)[rp.width / 2] < 0.5);                    // new frame sees the wall
}

TEST_CASE("mud under the ray darkens the column") {
    WorldMap m = empty_map(20.0);
    for (auto& c : m.terrain) c.speed_factor = 0.4f;
    RasterParams rp;
    rp.width = rp.height = 8;
    CarState s;
    auto f = render_frame(s, m, rp);
    for (int j = 0; j < rp.width; ++j) CHECK(f[j] == doctest::Approx(0.4).epsilon(1e-5));
}

TEST_CASE("map text roundtrip") {
    WorldMap m = generate_scatter_map(1234);
    const std::string text = map_to_text(m);
    CHECK(text.rfind("FLMAP v1\n", 0) == 0);
    WorldMap back = map_from_text(text);
    CHECK(back.map_id == m.map_id);
    CHECK(back.obstacles.size() == m.obstacles.size());
    CHECK(back.grid_w == m.grid_w);
    CHECK(back.terrain.size() == m.terrain.size());
    for (size_t i = 0; i < m.terrain.size(); ++i) {
        CHECK(back.terrain[i].speed_factor == m.terrain[i].speed_factor);
        CHECK(back.terrain[i].drag == m.terrain[i].drag);
    }
    // identical re-serialization
    CHECK(map_to_text(back) == text);

    CHECK_THROWS(map_from_text("FLMAP v2\n"));
    CHECK_THROWS(map_from_text("garbage"));
}

TEST_CASE("scatter map keeps the spawn clear and is seed-deterministic") {
    WorldMap a = generate_scatter_map(42);
    WorldMap b = generate_scatter_map(42);
    CHECK(map_to_text(a) == map_to_text(b));
    CHECK(a.in_free_space({0, 0}));
    WorldMap c = generate_scatter_map(43);
    CHECK(map_to_text(a) != map_to_text(c));
}

TEST_CASE("path_exists: open arena yes, walled off no") {
    WorldMap m = empty_map(10.0);
    CHECK(path_exists(m, {-5, 0}, {5, 0}));
    // wall across the middle
    m.obstacles.push_back(make_box({-0.6, -10.0}, {0.6, 10.0}));
    CHECK(!path_exists(m, {-5, 0}, {5, 0}));
}
