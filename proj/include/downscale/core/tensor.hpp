#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "downscale/common.hpp"

namespace downscale {

// All tensor storage starts on a fixed 64-byte boundary. Auto-vectorized
// reduction loops peel scalar iterations based on the runtime address, so
// without a fixed alignment the same sum over two allocations of the same
// data can differ in the last ulp, breaking bit-level reproducibility.
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(Align));
    }

    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
    friend bool operator!=(const AlignedAllocator&, const AlignedAllocator&) { return false; }
};

// Dense, contiguous, row-major tensor. Rank is dynamic (data pipeline uses
// (C,H,W) stacks, autograd uses (N,C,H,W), spectral ops use (N,C,H,W,2)).
// Copies are deep; pass by const& and move where it matters.
template <typename T>
class Tensor {
public:
    using value_type = T;
    using storage_type = std::vector<T, AlignedAllocator<T>>;

    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(count(shape_)), T(0));
    }

    Tensor(std::vector<std::int64_t> shape, T fill) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(count(shape_)), fill);
    }

    Tensor(std::vector<std::int64_t> shape, const std::vector<T>& data)
        : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (static_cast<std::int64_t>(data_.size()) != count(shape_))
            fail<ShapeError>("tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::int64_t> shape, T v) { return Tensor(std::move(shape), v); }

    static Tensor scalar(T v) {
        Tensor t({1});
        t.data_[0] = v;
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t shape(std::size_t i) const { return shape_.at(i); }
    std::size_t ndim() const { return shape_.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    storage_type& vec() { return data_; }
    const storage_type& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    T& at(std::int64_t a, std::int64_t b) { return data_[static_cast<std::size_t>(a * shape_[1] + b)]; }
    const T& at(std::int64_t a, std::int64_t b) const {
        return data_[static_cast<std::size_t>(a * shape_[1] + b)];
    }
    T& at(std::int64_t a, std::int64_t b, std::int64_t c) {
        return data_[static_cast<std::size_t>((a * shape_[1] + b) * shape_[2] + c)];
    }
    const T& at(std::int64_t a, std::int64_t b, std::int64_t c) const {
        return data_[static_cast<std::size_t>((a * shape_[1] + b) * shape_[2] + c)];
    }
    T& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
        return data_[static_cast<std::size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }
    const T& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
        return data_[static_cast<std::size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }
    T& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d, std::int64_t e) {
        return data_[static_cast<std::size_t>(
            (((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d) * shape_[4] + e)];
    }
    const T& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d, std::int64_t e) const {
        return data_[static_cast<std::size_t>(
            (((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d) * shape_[4] + e)];
    }

    Tensor clone() const { return *this; }

    Tensor reshaped(std::vector<std::int64_t> shape) const {
        if (count(shape) != numel()) fail<ShapeError>("reshape: element count mismatch");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
        return out;
    }

    T sum() const { return std::accumulate(data_.begin(), data_.end(), T(0)); }
    T min() const { return data_.empty() ? T(0) : *std::min_element(data_.begin(), data_.end()); }
    T max() const { return data_.empty() ? T(0) : *std::max_element(data_.begin(), data_.end()); }
    double mean() const { return data_.empty() ? 0.0 : static_cast<double>(sum()) / static_cast<double>(numel()); }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
        os << ")";
        return os.str();
    }

    static std::int64_t count(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (std::int64_t s : shape) {
            if (s < 0) fail<ShapeError>("tensor: negative dimension");
            n *= s;
        }
        return n;
    }

private:
    std::vector<std::int64_t> shape_;
    storage_type data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) fail<ShapeError>("max_abs_diff: shape mismatch");
    double m = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), sizeof(T) * static_cast<std::size_t>(a.numel())) == 0;
}

}  // namespace downscale
