#ifndef VXR_TENSOR_HPP
#define VXR_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "errors.hpp"

namespace vxr {

// Dense row-major N-d array with value semantics. Activations use the order
// [N, C, D, H, W]; scalars are rank-0 with one element.
template <typename S>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        init_strides();
        data_.assign(static_cast<std::size_t>(numel_), S(0));
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<S> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        init_strides();
        VXR_CHECK(numel_ == static_cast<std::int64_t>(data_.size()),
                  "tensor data length " << data_.size() << " does not match shape product " << numel_);
    }

    static Tensor full(std::vector<std::int64_t> shape, S value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    static Tensor scalar(S value) { return Tensor({}, std::vector<S>{value}); }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    const std::vector<std::int64_t>& strides() const { return strides_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return numel_; }
    bool empty() const { return data_.empty(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }

    S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const S& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    S& at(std::initializer_list<std::int64_t> idx) { return data_[static_cast<std::size_t>(offset(idx))]; }
    const S& at(std::initializer_list<std::int64_t> idx) const {
        return data_[static_cast<std::size_t>(offset(idx))];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(S v) {
        for (auto& x : data_) x = v;
    }

    template <typename T>
    Tensor<T> cast() const {
        std::vector<T> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
        return Tensor<T>(shape_, std::move(out));
    }

private:
    void init_strides() {
        for (auto e : shape_) VXR_CHECK(e >= 1, "tensor extent must be >= 1, got " << e);
        strides_.assign(shape_.size(), 1);
        numel_ = 1;
        for (int i = static_cast<int>(shape_.size()) - 1; i >= 0; --i) {
            strides_[static_cast<std::size_t>(i)] = numel_;
            numel_ *= shape_[static_cast<std::size_t>(i)];
        }
    }

    std::int64_t offset(std::initializer_list<std::int64_t> idx) const {
        VXR_CHECK(idx.size() == shape_.size(), "index rank " << idx.size() << " vs tensor rank " << shape_.size());
        std::int64_t off = 0;
        std::size_t i = 0;
        for (auto v : idx) off += v * strides_[i++];
        return off;
    }

    std::vector<std::int64_t> shape_;
    std::vector<std::int64_t> strides_;
    std::vector<S> data_;
    std::int64_t numel_ = 0;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace vxr

#endif
