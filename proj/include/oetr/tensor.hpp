#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oetr/errors.hpp"

namespace oetr {

// Dense row-major tensor. float is the production dtype, double the
// verification dtype used by the gradient checks.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }
    Tensor(std::vector<std::size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw InvalidShape("tensor data length does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t size(std::size_t i) const { return shape.at(i); }

    T& at(std::size_t i) { return data[i]; }
    const T& at(std::size_t i) const { return data[i]; }
    T& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    T& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(double(v)); });
    }

    Tensor reshaped(std::vector<std::size_t> s) const {
        if (count(s) != numel()) throw InvalidShape("reshape changes element count");
        return Tensor(std::move(s), data);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        std::transform(data.begin(), data.end(), out.data.begin(),
                       [](T v) { return static_cast<U>(v); });
        return out;
    }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<std::size_t> s, T v) {
        Tensor t(std::move(s));
        t.fill(v);
        return t;
    }
    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ']';
        return os.str();
    }
};

// Seedable RNG wrapper used for weight init and test data.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }
    std::uint64_t next_u64() { return gen_(); }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }

    template <typename T>
    Tensor<T> normal_tensor(std::vector<std::size_t> shape, double mean = 0.0, double stddev = 1.0) {
        Tensor<T> t(std::move(shape));
        for (auto& v : t.data) v = static_cast<T>(normal(mean, stddev));
        return t;
    }
    template <typename T>
    Tensor<T> uniform_tensor(std::vector<std::size_t> shape, double lo = 0.0, double hi = 1.0) {
        Tensor<T> t(std::move(shape));
        for (auto& v : t.data) v = static_cast<T>(uniform(lo, hi));
        return t;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace oetr
