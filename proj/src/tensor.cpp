#include "pcv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pcv {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

Tensor::Tensor(std::vector<int> shape_, std::vector<float> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must be non-empty");
    for (int e : shape)
        if (e < 1) throw std::invalid_argument("tensor extent must be >= 1, got " + std::to_string(e));
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
        throw std::invalid_argument("tensor data length does not match shape");
}

Tensor Tensor::zeros(std::vector<int> shape) {
    std::vector<float> d(static_cast<size_t>(shape_numel(shape)), 0.0f);
    return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    std::vector<float> d(static_cast<size_t>(shape_numel(shape)), value);
    return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::scalar(float value) { return Tensor({1}, {value}); }

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

int Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("rows(): tensor is not 2D: " + shape_str());
    return shape[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("cols(): tensor is not 2D: " + shape_str());
    return shape[1];
}

float& Tensor::at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
float Tensor::at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul dimension mismatch: " + a.shape_str() + " * " + b.shape_str());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n});
    // ikj order keeps the inner loop contiguous
    for (int i = 0; i < m; ++i) {
        const float* arow = &a.data[static_cast<size_t>(i) * k];
        float* orow = &out.data[static_cast<size_t>(i) * n];
        for (int kk = 0; kk < k; ++kk) {
            const float av = arow[kk];
            if (av == 0.0f) continue;
            const float* brow = &b.data[static_cast<size_t>(kk) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.shape[0] != x.cols())
        throw std::invalid_argument("add_bias dimension mismatch: " + x.shape_str() + " + " + bias.shape_str());
    Tensor out = x;
    const int r = x.rows(), c = x.cols();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.data[static_cast<size_t>(i) * c + j] += bias.data[j];
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = std::max(0.0f, v);
    return out;
}

Tensor reduce_max_points(const Tensor& x, int batch, int points, std::vector<int>* argmax_out) {
    if (points < 1) throw std::domain_error("reduce_max_points: empty point axis");
    if (x.rank() != 2 || x.rows() != batch * points)
        throw std::invalid_argument("reduce_max_points: expected " + std::to_string(batch * points) +
                                    " rows, got " + x.shape_str());
    const int c = x.cols();
    Tensor out = Tensor::zeros({batch, c});
    if (argmax_out) argmax_out->assign(static_cast<size_t>(batch) * c, 0);
    for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < c; ++j) {
            int best_row = b * points;
            float best = x.at(best_row, j);
            for (int p = 1; p < points; ++p) {
                const float v = x.at(b * points + p, j);
                if (v > best) {  // strict: first index wins ties
                    best = v;
                    best_row = b * points + p;
                }
            }
            out.at(b, j) = best;
            if (argmax_out) (*argmax_out)[static_cast<size_t>(b) * c + j] = best_row;
        }
    }
    return out;
}

Tensor log_softmax(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("log_softmax expects 2D input: " + x.shape_str());
    const int r = x.rows(), c = x.cols();
    Tensor out = x;
    for (int i = 0; i < r; ++i) {
        float mx = x.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, x.at(i, j));
        float sum = 0.0f;
        for (int j = 0; j < c; ++j) sum += std::exp(x.at(i, j) - mx);
        const float lse = mx + std::log(sum);
        for (int j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) - lse;
    }
    return out;
}

float nll_loss(const Tensor& logprobs, const std::vector<int>& targets) {
    if (logprobs.rank() != 2 || static_cast<size_t>(logprobs.rows()) != targets.size())
        throw std::invalid_argument("nll_loss batch size mismatch");
    const int k = logprobs.cols();
    double acc = 0.0;
    for (size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0 || targets[i] >= k)
            throw std::out_of_range("nll_loss target " + std::to_string(targets[i]) +
                                    " out of range [0," + std::to_string(k) + ")");
        acc -= logprobs.at(static_cast<int>(i), targets[i]);
    }
    return static_cast<float>(acc / static_cast<double>(targets.size()));
}

Tensor bmm_points(const Tensor& points, const Tensor& mats, int batch, int points_per) {
    if (points.rank() != 2 || points.cols() != 3 || points.rows() != batch * points_per)
        throw std::invalid_argument("bmm_points: bad points shape " + points.shape_str());
    if (mats.rank() != 2 || mats.rows() != batch || mats.cols() != 9)
        throw std::invalid_argument("bmm_points: bad matrix shape " + mats.shape_str());
    Tensor out = Tensor::zeros({batch * points_per, 3});
    for (int b = 0; b < batch; ++b) {
        const float* M = &mats.data[static_cast<size_t>(b) * 9];
        for (int p = 0; p < points_per; ++p) {
            const int row = b * points_per + p;
            const float* in = &points.data[static_cast<size_t>(row) * 3];
            float* o = &out.data[static_cast<size_t>(row) * 3];
            for (int j = 0; j < 3; ++j)
                o[j] = in[0] * M[0 * 3 + j] + in[1] * M[1 * 3 + j] + in[2] * M[2 * 3 + j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose expects 2D input");
    const int r = a.rows(), c = a.cols();
    Tensor out = Tensor::zeros({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

int argmax_row(const Tensor& x, int row) {
    const int c = x.cols();
    int best = 0;
    float bv = x.at(row, 0);
    for (int j = 1; j < c; ++j)
        if (x.at(row, j) > bv) {
            bv = x.at(row, j);
            best = j;
        }
    return best;
}

}  // namespace pcv
