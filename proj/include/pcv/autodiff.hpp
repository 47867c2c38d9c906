#pragma once

#include <vector>

#include "pcv/tensor.hpp"

namespace pcv {

enum class OpKind {
    Leaf,
    Matmul,
    AddBias,
    Relu,
    ReduceMaxPoints,
    LogSoftmax,
    NllLoss,
    BmmPoints,
    Mul,
    Sum,
};

/// Reverse-mode tape. Nodes are appended in topological order; backward
/// walks them in reverse and accumulates gradients for every node.
class Tape {
public:
    struct Node {
        OpKind kind;
        std::vector<int> parents;
        Tensor value;
        // op-specific state saved for backward
        std::vector<int> argmax;     // ReduceMaxPoints
        std::vector<int> targets;    // NllLoss
        int batch = 0, points = 0;   // ReduceMaxPoints / BmmPoints
    };

    int leaf(Tensor value);
    int matmul(int a, int b);
    int add_bias(int x, int bias);
    int relu(int x);
    int reduce_max_points(int x, int batch, int points);
    int log_softmax(int x);
    int nll_loss(int logprobs, std::vector<int> targets);
    int bmm_points(int points_node, int mats, int batch, int points_per);
    int mul(int a, int b);  // elementwise
    int sum(int a);         // -> scalar

    const Tensor& value(int id) const { return nodes_[id].value; }
    const Tensor& grad(int id) const;
    const Node& node(int id) const { return nodes_[id]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    /// Accumulates d(root)/d(node) into every node's gradient buffer.
    /// root must be scalar. Call zero_grad between unrelated backward passes.
    void backward(int root);
    void zero_grad();

    /// Count of nodes with the given op kind; used by structural checks.
    int op_count(OpKind kind) const;

private:
    int push(Node n);
    Tensor& grad_buf(int id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;  // lazily sized to nodes_
};

}  // namespace pcv
