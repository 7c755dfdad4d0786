#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "autolap/graph.hpp"
#include "autolap/rng.hpp"

using namespace autolap;

// Rebuilds the graph from a flat parameter vector; used for both the
// analytic pass and the central-difference probes. h = 1e-3, per-coordinate
// agreement within 1e-4 on the scale max(1, |grad|).
using Builder =
    std::function<int(GraphD&, std::vector<int>&, const std::vector<double>&)>;

static void fd_check(const Builder& build, const std::vector<double>& flat,
                     double h = 1e-3, double tol = 1e-4) {
    GraphD g;
    std::vector<int> pids;
    const int loss = build(g, pids, flat);
    REQUIRE(g.val(loss).data.size() == 1);
    g.backward(loss);
    std::vector<double> analytic;
    for (int id : pids)
        for (double v : g.grad(id).data) analytic.push_back(v);
    REQUIRE(analytic.size() == flat.size());

    for (size_t i = 0; i < flat.size(); ++i) {
        auto fp = flat, fm = flat;
        fp[i] += h;
        fm[i] -= h;
        GraphD gp, gm;
        std::vector<int> tmp;
        const double lp = gp.val(build(gp, tmp, fp)).data[0];
        tmp.clear();
        const double lm = gm.val(build(gm, tmp, fm)).data[0];
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
        INFO("coordinate ", i, " analytic ", analytic[i], " fd ", fd);
        CHECK(std::abs(analytic[i] - fd) / denom <= tol);
    }
}

static std::vector<double> randv(size_t n, uint64_t seed, double scale = 1.0) {
    Rng r(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = scale * r.normal();
    return v;
}

static int param(GraphD& g, std::vector<int>& pids, const std::vector<double>& flat,
                 size_t off, std::vector<int> shape) {
    size_t n = 1;
    for (int s : shape) n *= (size_t)s;
    TensorD t(std::move(shape));
    for (size_t i = 0; i < n; ++i) t.data[i] = flat[off + i];
    const int id = g.input(std::move(t), true);
    pids.push_back(id);
    return id;
}

TEST_CASE("constant loss has zero gradient") {
    GraphD g;
    const int p = g.input(TensorD({3}), true);
    const int c = g.constant(TensorD::scalar(7.0));
    g.backward(c);
    (void)p;
    for (double v : g.grad(p).data) CHECK(v == 0.0);
}

TEST_CASE("gradient of ||p||^2 / 2 is p") {
    GraphD g;
    TensorD t({4});
    t.data = {1.5, -2.0, 0.25, 3.0};
    const int p = g.input(t, true);
    const int loss = g.mul_scalar(g.sum_all(g.square(p)), 0.5);
    g.backward(loss);
    for (int i = 0; i < 4; ++i) CHECK(g.grad(p).data[i] == doctest::Approx(t.data[i]));
}

TEST_CASE("fd: linear layer") {
    const int B = 3, in = 4, out = 5;
    auto flat = randv((size_t)out * in + out, 21);
    auto x = randv((size_t)B * in, 22);
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int w = param(g, pids, f, 0, {out, in});
            const int b = param(g, pids, f, (size_t)out * in, {out});
            TensorD xt({B, in});
            xt.data = x;
            const int y = g.linear(g.constant(xt), w, b);
            return g.mean_all(g.square(y));
        },
        flat);
}

TEST_CASE("fd: gradient flows through linear input too") {
    const int B = 2, in = 3, out = 2;
    auto wdat = randv((size_t)out * in + out, 23);
    auto flat = randv((size_t)B * in, 24);
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int x = param(g, pids, f, 0, {B, in});
            TensorD wt({out, in}), bt({out});
            for (int i = 0; i < out * in; ++i) wt.data[i] = wdat[i];
            for (int i = 0; i < out; ++i) bt.data[i] = wdat[out * in + i];
            const int y = g.linear(x, g.constant(wt), g.constant(bt));
            return g.mean_all(g.square(y));
        },
        flat);
}

TEST_CASE("fd: conv2d") {
    const int cin = 2, cout = 3, kh = 3, kw = 3, H = 5, W = 5, N = 2;
    const size_t wlen = (size_t)cout * cin * kh * kw;
    auto flat = randv(wlen + cout, 25, 0.5);
    auto x = randv((size_t)N * cin * H * W, 26);
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int w = param(g, pids, f, 0, {cout, cin, kh, kw});
            const int b = param(g, pids, f, wlen, {cout});
            TensorD xt({N, cin, H, W});
            xt.data = x;
            const int y = g.conv2d(g.constant(xt), w, b, 2, 1);
            return g.mean_all(g.square(y));
        },
        flat);
}

TEST_CASE("fd: elementwise chain") {
    auto flat = randv(6, 27, 0.8);
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int p = param(g, pids, f, 0, {2, 3});
            const int a = g.tanh_(p);
            const int b = g.softplus(g.mul_scalar(p, 0.7));
            const int c = g.exp_(g.mul_scalar(a, 0.3));
            const int d = g.mul(g.add(a, b), c);
            const int e = g.log_(g.add_scalar(g.square(d), 1.0));
            return g.mean_all(e);
        },
        flat);
}

TEST_CASE("fd: relu away from the kink") {
    std::vector<double> flat = {0.8, -0.6, 1.4, -2.0, 0.3, -0.9};
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int p = param(g, pids, f, 0, {6});
            return g.sum_all(g.relu(p));
        },
        flat);
}

TEST_CASE("fd: div and minimum") {
    auto a = randv(5, 28);
    std::vector<double> flat = a;
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int p = param(g, pids, f, 0, {5});
            TensorD other({5});
            other.data = {2.0, -1.5, 0.5, 3.0, -0.25};
            const int o = g.constant(other);
            const int q = g.div(p, g.add_scalar(g.square(o), 1.0));
            return g.sum_all(g.minimum(q, o));
        },
        flat);
}

TEST_CASE("fd: clamp interior passes gradient, exterior blocks it") {
    GraphD g;
    TensorD t({4});
    t.data = {-3.0, -0.5, 0.5, 3.0};
    const int p = g.input(t, true);
    const int loss = g.sum_all(g.clamp_(p, -1.0, 1.0));
    g.backward(loss);
    CHECK(g.grad(p).data[0] == 0.0);
    CHECK(g.grad(p).data[1] == 1.0);
    CHECK(g.grad(p).data[2] == 1.0);
    CHECK(g.grad(p).data[3] == 0.0);
}

TEST_CASE("fd: concat, slice, row_sum") {
    auto flat = randv(10, 29);
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int a = param(g, pids, f, 0, {2, 2});
            const int b = param(g, pids, f, 4, {2, 3});
            const int cat = g.concat_cols({a, b});
            const int mid = g.slice_cols(cat, 1, 4);
            return g.mean_all(g.square(g.row_sum(g.tanh_(mid))));
        },
        flat);
}

TEST_CASE("fd: expectile loss") {
    std::vector<double> flat = {1.2, -0.7, 0.3, -2.1};
    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int u = param(g, pids, f, 0, {4});
            return g.mean_all(g.expectile_sq(u, 0.7));
        },
        flat);
}

TEST_CASE("expectile weights: tau on positive side, 1-tau on negative") {
    GraphD g;
    TensorD t({2});
    t.data = {1.0, -1.0};
    const int u = g.input(t, false);
    const int l = g.expectile_sq(u, 0.7);
    CHECK(g.val(l).data[0] == doctest::Approx(0.7));
    CHECK(g.val(l).data[1] == doctest::Approx(0.3));

    GraphD g2;
    const int u2 = g2.input(t, false);
    const int l2 = g2.expectile_sq(u2, 0.5);
    CHECK(g2.val(l2).data[0] == doctest::Approx(0.5));
    CHECK(g2.val(l2).data[1] == doctest::Approx(0.5));
}

TEST_CASE("detach blocks gradient flow") {
    GraphD g;
    TensorD t({3});
    t.data = {1.0, 2.0, 3.0};
    const int p = g.input(t, true);
    const int d = g.detach(g.square(p));
    const int loss = g.sum_all(g.mul(d, p));
    g.backward(loss);
    // d treated as constant, so dL/dp = d = p^2
    for (int i = 0; i < 3; ++i)
        CHECK(g.grad(p).data[i] == doctest::Approx(t.data[i] * t.data[i]));
}

// Full squashed-Gaussian policy loss on a tiny net: the hardest path the
// real training code exercises.
TEST_CASE("fd: actor-style loss end to end") {
    const int B = 4, in = 3, hid = 5, adim = 2;
    const size_t n1 = (size_t)hid * in + hid;
    const size_t n2 = (size_t)(2 * adim) * hid + 2 * adim;
    auto flat = randv(n1 + n2, 31, 0.4);
    auto xdat = randv((size_t)B * in, 32);
    auto eps = randv((size_t)B * adim, 33);
    auto aprev = randv((size_t)B * adim, 34, 0.2);
    const double delta = 0.2;

    fd_check(
        [&](GraphD& g, std::vector<int>& pids, const std::vector<double>& f) {
            const int w1 = param(g, pids, f, 0, {hid, in});
            const int b1 = param(g, pids, f, (size_t)hid * in, {hid});
            const int w2 = param(g, pids, f, n1, {2 * adim, hid});
            const int b2 = param(g, pids, f, n1 + (size_t)(2 * adim) * hid, {2 * adim});

            TensorD xt({B, in});
            xt.data = xdat;
            TensorD et({B, adim});
            et.data = eps;
            TensorD pt({B, adim});
            pt.data = aprev;

            const int h = g.relu(g.linear(g.constant(xt), w1, b1));
            const int head = g.linear(h, w2, b2);
            const int mean = g.slice_cols(head, 0, adim);
            const int logstd = g.clamp_(g.slice_cols(head, adim, 2 * adim), -10.0, 2.0);
            const int std = g.exp_(logstd);
            const int x = g.add(mean, g.mul(std, g.constant(et)));

            // shifted tanh squash about the previous action
            const int aprev_n = g.constant(pt);
            const int u = g.mul_scalar(g.sub(x, aprev_n), 1.0 / delta);
            const int squashed = g.add(g.mul_scalar(g.tanh_(u), delta), aprev_n);

            // gaussian log prob of x
            const int z = g.div(g.sub(x, mean), std);
            const int lp_gauss =
                g.sub(g.mul_scalar(g.square(z), -0.5),
                      g.add_scalar(logstd, 0.5 * std::log(2 * 3.14159265358979323846)));
            // change of variables: log(1 - tanh^2 u) via the stable softplus form
            const int log_det = g.mul_scalar(
                g.add(g.add_scalar(g.neg(u), std::log(2.0)),
                      g.neg(g.softplus(g.mul_scalar(u, -2.0)))),
                2.0);
            const int logp = g.row_sum(g.sub(lp_gauss, log_det));

            // something Q-like so the squashed action matters in the loss
            const int qish = g.row_sum(g.mul(squashed, squashed));
            return g.mean_all(g.add(g.mul_scalar(logp, 0.05), qish));
        },
        flat);
}

TEST_CASE("float and double graphs agree on the same loss") {
    const int B = 3, in = 4, out = 2;
    auto flat = randv((size_t)out * in + out, 35, 0.5);
    auto xdat = randv((size_t)B * in, 36);

    GraphD gd;
    TensorD wd({out, in}), bd({out}), xd({B, in});
    for (int i = 0; i < out * in; ++i) wd.data[i] = flat[i];
    for (int i = 0; i < out; ++i) bd.data[i] = flat[out * in + i];
    xd.data = xdat;
    const int lossd = gd.mean_all(gd.square(gd.tanh_(gd.linear(gd.constant(xd), gd.input(wd, true), gd.input(bd, true)))));

    Graph gf;
    const int wf = gf.input(wd.cast<float>(), true);
    const int bf = gf.input(bd.cast<float>(), true);
    const int lossf = gf.mean_all(gf.square(gf.tanh_(gf.linear(gf.constant(xd.cast<float>()), wf, bf))));

    CHECK((double)gf.val(lossf).data[0] ==
          doctest::Approx(gd.val(lossd).data[0]).epsilon(1e-5));
}
