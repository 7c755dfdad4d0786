#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <vector>

#include "autolap/kernels.hpp"
#include "autolap/tensor.hpp"

// Dynamic reverse-mode tape. A graph is rebuilt per update step; ops append
// nodes in topological order so backward() is a reverse sweep. Templated on
// the scalar so the finite-difference tests can run the whole thing in
// double while the training path uses float.

namespace autolap {

template <class S>
class GraphT {
public:
    using T = TensorT<S>;

    int input(T v, bool needs_grad = false) {
        nodes_.push_back({std::move(v), T{}, needs_grad, {}, {}});
        return (int)nodes_.size() - 1;
    }
    int constant(T v) { return input(std::move(v), false); }

    const T& val(int id) const { return nodes_[id].val; }
    const T& grad(int id) const { return nodes_[id].grad; }
    bool needs(int id) const { return nodes_[id].needs_grad; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // y = x * w^T + b; x [B,in], w [out,in], b [out]
    int linear(int x, int w, int b) {
        const T& xv = nodes_[x].val;
        const T& wv = nodes_[w].val;
        const int B = xv.rows(), in = xv.cols(), out = wv.rows();
        assert(wv.cols() == in && (int)nodes_[b].val.data.size() == out);
        T y({B, out});
        kernels::matmul_nt(xv.data.data(), wv.data.data(), y.data.data(), B, in, out);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < out; ++j) y.data[(size_t)i * out + j] += nodes_[b].val.data[j];
        return emit(std::move(y), {x, w, b}, [x, w, b, B, in, out](GraphT& g) {
            const T& dy = g.nodes_[g.out_id_].grad;
            if (g.needs(x)) {
                T dx({B, in});
                kernels::matmul(dy.data.data(), g.nodes_[w].val.data.data(), dx.data.data(),
                                B, out, in);
                g.accum(x, dx);
            }
            if (g.needs(w)) {
                T dw({out, in});
                kernels::matmul_tn(dy.data.data(), g.nodes_[x].val.data.data(), dw.data.data(),
                                   out, B, in);
                g.accum(w, dw);
            }
            if (g.needs(b)) {
                T db({out});
                for (int i = 0; i < B; ++i)
                    for (int j = 0; j < out; ++j) db.data[j] += dy.data[(size_t)i * out + j];
                g.accum(b, db);
            }
        });
    }

    // x [N,C,H,W], w [out,in,kh,kw], b [out]
    int conv2d(int x, int w, int b, int stride, int pad) {
        const T& xv = nodes_[x].val;
        const T& wv = nodes_[w].val;
        assert(xv.shape.size() == 4 && wv.shape.size() == 4 && xv.shape[1] == wv.shape[1]);
        kernels::ConvDims d{xv.shape[0], xv.shape[1], xv.shape[2], xv.shape[3],
                            wv.shape[0], wv.shape[2], wv.shape[3], stride, pad};
        T y({d.n, d.cout, d.oh(), d.ow()});
        kernels::conv2d_forward(xv.data.data(), wv.data.data(), nodes_[b].val.data.data(),
                                y.data.data(), d);
        return emit(std::move(y), {x, w, b}, [x, w, b, d](GraphT& g) {
            const T& dy = g.nodes_[g.out_id_].grad;
            const bool nx = g.needs(x), nw = g.needs(w), nb = g.needs(b);
            T dx = nx ? T(g.nodes_[x].val.shape) : T{};
            T dw = nw ? T(g.nodes_[w].val.shape) : T{};
            T db = nb ? T(g.nodes_[b].val.shape) : T{};
            kernels::conv2d_backward(g.nodes_[x].val.data.data(), g.nodes_[w].val.data.data(),
                                     dy.data.data(), nx ? dx.data.data() : nullptr,
                                     nw ? dw.data.data() : nullptr,
                                     nb ? db.data.data() : nullptr, d);
            if (nx) g.accum(x, dx);
            if (nw) g.accum(w, dw);
            if (nb) g.accum(b, db);
        });
    }

    int relu(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = v > S(0) ? v : S(0);
        return unary(std::move(y), x, [](S xv, S, S g) { return xv > S(0) ? g : S(0); });
    }
    int tanh_(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = std::tanh(v);
        return unary(std::move(y), x, [](S, S yv, S g) { return g * (S(1) - yv * yv); });
    }
    int exp_(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = std::exp(v);
        return unary(std::move(y), x, [](S, S yv, S g) { return g * yv; });
    }
    int log_(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = std::log(v);
        return unary(std::move(y), x, [](S xv, S, S g) { return g / xv; });
    }
    // log(1+e^x), overflow-safe
    int softplus(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = v > S(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        return unary(std::move(y), x,
                     [](S xv, S, S g) { return g / (S(1) + std::exp(-xv)); });
    }
    int square(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = v * v;
        return unary(std::move(y), x, [](S xv, S, S g) { return g * S(2) * xv; });
    }
    int neg(int x) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = -v;
        return unary(std::move(y), x, [](S, S, S g) { return -g; });
    }
    int add_scalar(int x, S c) {
        T y = nodes_[x].val;
        for (S& v : y.data) v += c;
        return unary(std::move(y), x, [](S, S, S g) { return g; });
    }
    int mul_scalar(int x, S c) {
        T y = nodes_[x].val;
        for (S& v : y.data) v *= c;
        return unary(std::move(y), x, [c](S, S, S g) { return g * c; });
    }
    // gradient is zero outside [lo, hi]
    int clamp_(int x, S lo, S hi) {
        T y = nodes_[x].val;
        for (S& v : y.data) v = v < lo ? lo : (v > hi ? hi : v);
        return unary(std::move(y), x,
                     [lo, hi](S xv, S, S g) { return (xv >= lo && xv <= hi) ? g : S(0); });
    }
    // |tau - 1[x<0]| * x^2; the weight is treated as locally constant
    int expectile_sq(int x, S tau) {
        T y = nodes_[x].val;
        for (S& v : y.data) {
            const S w = v < S(0) ? (S(1) - tau) : tau;
            v = w * v * v;
        }
        return unary(std::move(y), x, [tau](S xv, S, S g) {
            const S w = xv < S(0) ? (S(1) - tau) : tau;
            return g * S(2) * w * xv;
        });
    }

    int add(int x, int y) {
        return binary(x, y, [](S a, S b) { return a + b; },
                      [](S, S, S g) { return g; }, [](S, S, S g) { return g; });
    }
    int sub(int x, int y) {
        return binary(x, y, [](S a, S b) { return a - b; },
                      [](S, S, S g) { return g; }, [](S, S, S g) { return -g; });
    }
    int mul(int x, int y) {
        return binary(x, y, [](S a, S b) { return a * b; },
                      [](S, S b, S g) { return g * b; }, [](S a, S, S g) { return g * a; });
    }
    int div(int x, int y) {
        return binary(x, y, [](S a, S b) { return a / b; },
                      [](S, S b, S g) { return g / b; },
                      [](S a, S b, S g) { return -g * a / (b * b); });
    }
    // ties go to x
    int minimum(int x, int y) {
        return binary(x, y, [](S a, S b) { return a <= b ? a : b; },
                      [](S a, S b, S g) { return a <= b ? g : S(0); },
                      [](S a, S b, S g) { return a <= b ? S(0) : g; });
    }

    int concat_cols(const std::vector<int>& parts) {
        const int B = nodes_[parts[0]].val.rows();
        int total = 0;
        for (int p : parts) {
            assert(nodes_[p].val.rows() == B);
            total += nodes_[p].val.cols();
        }
        T y({B, total});
        int off = 0;
        for (int p : parts) {
            const T& pv = nodes_[p].val;
            const int c = pv.cols();
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < c; ++j)
                    y.data[(size_t)i * total + off + j] = pv.data[(size_t)i * c + j];
            off += c;
        }
        return emit(std::move(y), parts, [parts, B, total](GraphT& g) {
            const T& dy = g.nodes_[g.out_id_].grad;
            int off = 0;
            for (int p : parts) {
                const int c = g.nodes_[p].val.cols();
                if (g.needs(p)) {
                    T dp({B, c});
                    for (int i = 0; i < B; ++i)
                        for (int j = 0; j < c; ++j)
                            dp.data[(size_t)i * c + j] = dy.data[(size_t)i * total + off + j];
                    g.accum(p, dp);
                }
                off += c;
            }
        });
    }

    int slice_cols(int x, int c0, int c1) {
        const T& xv = nodes_[x].val;
        const int B = xv.rows(), c = xv.cols(), w = c1 - c0;
        T y({B, w});
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < w; ++j)
                y.data[(size_t)i * w + j] = xv.data[(size_t)i * c + c0 + j];
        return emit(std::move(y), {x}, [x, B, c, c0, w](GraphT& g) {
            if (!g.needs(x)) return;
            const T& dy = g.nodes_[g.out_id_].grad;
            T dx({B, c});
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < w; ++j)
                    dx.data[(size_t)i * c + c0 + j] = dy.data[(size_t)i * w + j];
            g.accum(x, dx);
        });
    }

    int reshape(int x, std::vector<int> shape) {
        T y = nodes_[x].val;
        y.shape = std::move(shape);
        size_t n = 1;
        for (int s : y.shape) n *= (size_t)s;
        if (n != y.data.size()) throw std::invalid_argument("reshape: element count mismatch");
        const auto xshape = nodes_[x].val.shape;
        return emit(std::move(y), {x}, [x, xshape](GraphT& g) {
            if (!g.needs(x)) return;
            T dx = g.nodes_[g.out_id_].grad;
            dx.shape = xshape;
            g.accum(x, dx);
        });
    }

    // [B,n] -> [B,1]
    int row_sum(int x) {
        const T& xv = nodes_[x].val;
        const int B = xv.rows(), n = xv.cols();
        T y({B, 1});
        for (int i = 0; i < B; ++i) {
            S acc = S(0);
            for (int j = 0; j < n; ++j) acc += xv.data[(size_t)i * n + j];
            y.data[i] = acc;
        }
        return emit(std::move(y), {x}, [x, B, n](GraphT& g) {
            if (!g.needs(x)) return;
            const T& dy = g.nodes_[g.out_id_].grad;
            T dx({B, n});
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < n; ++j) dx.data[(size_t)i * n + j] = dy.data[i];
            g.accum(x, dx);
        });
    }

    int sum_all(int x) {
        S acc = S(0);
        for (S v : nodes_[x].val.data) acc += v;
        const size_t n = nodes_[x].val.data.size();
        return emit(T::scalar(acc), {x}, [x, n](GraphT& g) {
            if (!g.needs(x)) return;
            T dx(g.nodes_[x].val.shape);
            const S gs = g.nodes_[g.out_id_].grad.data[0];
            for (size_t i = 0; i < n; ++i) dx.data[i] = gs;
            g.accum(x, dx);
        });
    }

    int mean_all(int x) {
        const size_t n = nodes_[x].val.data.size();
        S acc = S(0);
        for (S v : nodes_[x].val.data) acc += v;
        acc /= S(n);
        return emit(T::scalar(acc), {x}, [x, n](GraphT& g) {
            if (!g.needs(x)) return;
            T dx(g.nodes_[x].val.shape);
            const S gs = g.nodes_[g.out_id_].grad.data[0] / S(n);
            for (size_t i = 0; i < n; ++i) dx.data[i] = gs;
            g.accum(x, dx);
        });
    }

    int detach(int x) { return input(nodes_[x].val, false); }

    // Seeds d(seed)/d(seed) = 1 and sweeps the tape in reverse. The seed
    // must be a scalar node.
    void backward(int seed) {
        assert(nodes_[seed].val.data.size() == 1);
        for (auto& n : nodes_)
            if (n.needs_grad) n.grad = T(n.val.shape);
        if (!nodes_[seed].needs_grad) return;
        nodes_[seed].grad.data[0] = S(1);
        for (int i = seed; i >= 0; --i) {
            if (!nodes_[i].backward || !nodes_[i].needs_grad) continue;
            out_id_ = i;
            nodes_[i].backward(*this);
        }
    }

private:
    struct Node {
        T val;
        T grad;
        bool needs_grad = false;
        std::function<void(GraphT&)> backward;
        std::vector<int> parents;
    };

    int emit(T y, std::vector<int> parents, std::function<void(GraphT&)> bw) {
        bool needs = false;
        for (int p : parents) needs = needs || nodes_[p].needs_grad;
        nodes_.push_back({std::move(y), T{}, needs, needs ? std::move(bw) : nullptr,
                          std::move(parents)});
        return (int)nodes_.size() - 1;
    }

    template <class Fb>
    int unary(T y, int x, Fb fb) {
        return emit(std::move(y), {x}, [x, fb](GraphT& g) {
            if (!g.needs(x)) return;
            const Node& out = g.nodes_[g.out_id_];
            Node& in = g.nodes_[x];
            const size_t n = in.val.data.size();
            for (size_t i = 0; i < n; ++i)
                in.grad.data[i] += fb(in.val.data[i], out.val.data[i], out.grad.data[i]);
        });
    }

    template <class Ff, class Fx, class Fy>
    int binary(int x, int y, Ff ff, Fx fx, Fy fy) {
        const T& xv = nodes_[x].val;
        const T& yv = nodes_[y].val;
        assert(xv.same_shape(yv));
        T out(xv.shape);
        const size_t n = xv.data.size();
        for (size_t i = 0; i < n; ++i) out.data[i] = ff(xv.data[i], yv.data[i]);
        return emit(std::move(out), {x, y}, [x, y, fx, fy, n](GraphT& g) {
            const T& dy = g.nodes_[g.out_id_].grad;
            const T& xv = g.nodes_[x].val;
            const T& yv = g.nodes_[y].val;
            if (g.needs(x))
                for (size_t i = 0; i < n; ++i)
                    g.nodes_[x].grad.data[i] += fx(xv.data[i], yv.data[i], dy.data[i]);
            if (g.needs(y))
                for (size_t i = 0; i < n; ++i)
                    g.nodes_[y].grad.data[i] += fy(xv.data[i], yv.data[i], dy.data[i]);
        });
    }

    void accum(int id, const T& d) {
        Node& n = nodes_[id];
        assert(n.grad.same_shape(d));
        for (size_t i = 0; i < d.data.size(); ++i) n.grad.data[i] += d.data[i];
    }

    std::vector<Node> nodes_;
    int out_id_ = -1;
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace autolap
