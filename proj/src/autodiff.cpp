#include "pcv/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace pcv {

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.kind = OpKind::Matmul;
    n.parents = {a, b};
    n.value = pcv::matmul(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

int Tape::add_bias(int x, int bias) {
    Node n;
    n.kind = OpKind::AddBias;
    n.parents = {x, bias};
    n.value = pcv::add_bias(nodes_[x].value, nodes_[bias].value);
    return push(std::move(n));
}

int Tape::relu(int x) {
    Node n;
    n.kind = OpKind::Relu;
    n.parents = {x};
    n.value = pcv::relu(nodes_[x].value);
    return push(std::move(n));
}

int Tape::reduce_max_points(int x, int batch, int points) {
    Node n;
    n.kind = OpKind::ReduceMaxPoints;
    n.parents = {x};
    n.batch = batch;
    n.points = points;
    n.value = pcv::reduce_max_points(nodes_[x].value, batch, points, &n.argmax);
    return push(std::move(n));
}

int Tape::log_softmax(int x) {
    Node n;
    n.kind = OpKind::LogSoftmax;
    n.parents = {x};
    n.value = pcv::log_softmax(nodes_[x].value);
    return push(std::move(n));
}

int Tape::nll_loss(int logprobs, std::vector<int> targets) {
    Node n;
    n.kind = OpKind::NllLoss;
    n.parents = {logprobs};
    n.targets = std::move(targets);
    n.value = Tensor::scalar(pcv::nll_loss(nodes_[logprobs].value, n.targets));
    return push(std::move(n));
}

int Tape::bmm_points(int points_node, int mats, int batch, int points_per) {
    Node n;
    n.kind = OpKind::BmmPoints;
    n.parents = {points_node, mats};
    n.batch = batch;
    n.points = points_per;
    n.value = pcv::bmm_points(nodes_[points_node].value, nodes_[mats].value, batch, points_per);
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    if (!nodes_[a].value.same_shape(nodes_[b].value))
        throw std::invalid_argument("mul shape mismatch");
    Node n;
    n.kind = OpKind::Mul;
    n.parents = {a, b};
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= nodes_[b].value.data[i];
    return push(std::move(n));
}

int Tape::sum(int a) {
    Node n;
    n.kind = OpKind::Sum;
    n.parents = {a};
    double acc = 0.0;
    for (float v : nodes_[a].value.data) acc += v;
    n.value = Tensor::scalar(static_cast<float>(acc));
    return push(std::move(n));
}

Tensor& Tape::grad_buf(int id) {
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    if (grads_[id].data.empty()) grads_[id] = Tensor::zeros(nodes_[id].value.shape);
    return grads_[id];
}

const Tensor& Tape::grad(int id) const {
    if (static_cast<size_t>(id) >= grads_.size() || grads_[id].data.empty())
        throw std::logic_error("grad(): no gradient recorded for node; run backward first");
    return grads_[id];
}

void Tape::zero_grad() {
    for (Tensor& g : grads_)
        for (float& v : g.data) v = 0.0f;
}

int Tape::op_count(OpKind kind) const {
    int c = 0;
    for (const Node& n : nodes_)
        if (n.kind == kind) ++c;
    return c;
}

void Tape::backward(int root) {
    if (root < 0 || root >= size()) throw std::logic_error("backward: invalid root node");
    if (nodes_[root].value.numel() != 1)
        throw std::logic_error("backward: root must be scalar, got " + nodes_[root].value.shape_str());
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    for (int id = 0; id < size(); ++id) grad_buf(id);  // nodes off the root's cone get zeros
    // local upstream buffers so repeated backward calls accumulate into grads_
    std::vector<Tensor> up(nodes_.size());
    up[root] = Tensor::scalar(1.0f);

    auto add_up = [&](int id, const Tensor& t) {
        if (up[id].data.empty()) up[id] = Tensor::zeros(nodes_[id].value.shape);
        for (size_t i = 0; i < t.data.size(); ++i) up[id].data[i] += t.data[i];
    };

    for (int id = root; id >= 0; --id) {
        if (up[id].data.empty()) continue;
        const Node& n = nodes_[id];
        const Tensor& g = up[id];
        switch (n.kind) {
            case OpKind::Leaf:
                break;
            case OpKind::Matmul: {
                const Tensor& a = nodes_[n.parents[0]].value;
                const Tensor& b = nodes_[n.parents[1]].value;
                add_up(n.parents[0], pcv::matmul(g, transpose(b)));
                add_up(n.parents[1], pcv::matmul(transpose(a), g));
                break;
            }
            case OpKind::AddBias: {
                add_up(n.parents[0], g);
                Tensor gb = Tensor::zeros(nodes_[n.parents[1]].value.shape);
                const int r = g.rows(), c = g.cols();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gb.data[j] += g.at(i, j);
                add_up(n.parents[1], gb);
                break;
            }
            case OpKind::Relu: {
                const Tensor& x = nodes_[n.parents[0]].value;
                Tensor gx = g;
                for (size_t i = 0; i < gx.data.size(); ++i)
                    if (x.data[i] <= 0.0f) gx.data[i] = 0.0f;
                add_up(n.parents[0], gx);
                break;
            }
            case OpKind::ReduceMaxPoints: {
                Tensor gx = Tensor::zeros(nodes_[n.parents[0]].value.shape);
                const int c = n.value.cols();
                for (int b = 0; b < n.batch; ++b)
                    for (int j = 0; j < c; ++j) {
                        const int src_row = n.argmax[static_cast<size_t>(b) * c + j];
                        gx.at(src_row, j) += g.at(b, j);
                    }
                add_up(n.parents[0], gx);
                break;
            }
            case OpKind::LogSoftmax: {
                const Tensor& y = n.value;  // logprobs
                const int r = y.rows(), c = y.cols();
                Tensor gx = g;
                for (int i = 0; i < r; ++i) {
                    float gsum = 0.0f;
                    for (int j = 0; j < c; ++j) gsum += g.at(i, j);
                    for (int j = 0; j < c; ++j)
                        gx.at(i, j) = g.at(i, j) - std::exp(y.at(i, j)) * gsum;
                }
                add_up(n.parents[0], gx);
                break;
            }
            case OpKind::NllLoss: {
                const Tensor& lp = nodes_[n.parents[0]].value;
                Tensor gx = Tensor::zeros(lp.shape);
                const float scale = g.data[0] / static_cast<float>(n.targets.size());
                for (size_t i = 0; i < n.targets.size(); ++i)
                    gx.at(static_cast<int>(i), n.targets[i]) = -scale;
                add_up(n.parents[0], gx);
                break;
            }
            case OpKind::BmmPoints: {
                const Tensor& pts = nodes_[n.parents[0]].value;
                const Tensor& mats = nodes_[n.parents[1]].value;
                Tensor gp = Tensor::zeros(pts.shape);
                Tensor gm = Tensor::zeros(mats.shape);
                for (int b = 0; b < n.batch; ++b) {
                    const float* M = &mats.data[static_cast<size_t>(b) * 9];
                    float* gM = &gm.data[static_cast<size_t>(b) * 9];
                    for (int p = 0; p < n.points; ++p) {
                        const int row = b * n.points + p;
                        const float* in = &pts.data[static_cast<size_t>(row) * 3];
                        const float* gy = &g.data[static_cast<size_t>(row) * 3];
                        float* gin = &gp.data[static_cast<size_t>(row) * 3];
                        for (int i = 0; i < 3; ++i)
                            for (int j = 0; j < 3; ++j) {
                                gin[i] += gy[j] * M[i * 3 + j];
                                gM[i * 3 + j] += in[i] * gy[j];
                            }
                    }
                }
                add_up(n.parents[0], gp);
                add_up(n.parents[1], gm);
                break;
            }
            case OpKind::Mul: {
                const Tensor& a = nodes_[n.parents[0]].value;
                const Tensor& b = nodes_[n.parents[1]].value;
                Tensor ga = g, gb = g;
                for (size_t i = 0; i < g.data.size(); ++i) {
                    ga.data[i] *= b.data[i];
                    gb.data[i] *= a.data[i];
                }
                add_up(n.parents[0], ga);
                add_up(n.parents[1], gb);
                break;
            }
            case OpKind::Sum: {
                add_up(n.parents[0], Tensor::full(nodes_[n.parents[0]].value.shape, g.data[0]));
                break;
            }
        }
        // fold this node's upstream into the persistent accumulator
        Tensor& acc = grad_buf(id);
        for (size_t i = 0; i < g.data.size(); ++i) acc.data[i] += g.data[i];
        up[id] = Tensor();  // release
    }
}

}  // namespace pcv
