#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pcv {

/// Dense row-major tensor of 32-bit floats.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> shape_, std::vector<float> data_);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, float value);
    static Tensor scalar(float value);

    std::int64_t numel() const;
    int rank() const { return static_cast<int>(shape.size()); }

    // 2D accessors; assert rank == 2
    int rows() const;
    int cols() const;
    float& at(int r, int c);
    float at(int r, int c) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

std::int64_t shape_numel(const std::vector<int>& shape);

// Plain (untracked) tensor kernels. The tape ops in autodiff.hpp call these.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
// x is (b*n) x c; returns b x c with per-channel max over each block of n rows.
// argmax (first index wins ties) written to *argmax_out when non-null,
// as row indices into x, one per output element.
Tensor reduce_max_points(const Tensor& x, int batch, int points,
                         std::vector<int>* argmax_out = nullptr);
Tensor log_softmax(const Tensor& x);
float nll_loss(const Tensor& logprobs, const std::vector<int>& targets);
// points (b*n) x 3 times per-sample 3x3 matrices (b x 9, row-major)
Tensor bmm_points(const Tensor& points, const Tensor& mats, int batch, int points_per);

Tensor transpose(const Tensor& a);
int argmax_row(const Tensor& x, int row);  // lowest index wins ties

}  // namespace pcv
