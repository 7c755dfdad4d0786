#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace autolap {

// Dense row-major tensor. Rank <= 4 in practice (batches of images / matrices).
template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> shp) : shape(std::move(shp)) {
        data.assign(count(shape), S(0));
    }
    TensorT(std::vector<int> shp, std::vector<S> d) : shape(std::move(shp)), data(std::move(d)) {
        if (data.size() != count(shape)) throw std::invalid_argument("tensor shape/data mismatch");
    }

    static size_t count(const std::vector<int>& shp) {
        size_t n = 1;
        for (int d : shp) n *= static_cast<size_t>(d);
        return n;
    }
    static TensorT zeros(std::vector<int> shp) { return TensorT(std::move(shp)); }
    static TensorT scalar(S v) { return TensorT({1}, {v}); }

    size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    S& operator[](size_t i) { return data[i]; }
    const S& operator[](size_t i) const { return data[i]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    template <class S2>
    TensorT<S2> cast() const {
        TensorT<S2> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<S2>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace autolap
