#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pcv/autodiff.hpp"
#include "pcv/tensor.hpp"

namespace pcv {

struct ModelConfig {
    std::vector<int> point_mlp_widths = {64, 128, 256};
    std::vector<int> head_widths = {128};
    int num_classes = 5;
    bool with_input_tnet = false;
    int num_points = 1024;

    void validate() const;
};

/// Ordered named weight tensors plus the config that shaped them.
struct ModelParams {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

/// Forward pass on the tape; batch is b x n x 3. Returns (logits node,
/// input node). When track_input is true the input is a tape leaf whose
/// gradient after backward is the loss gradient w.r.t. the coordinates.
/// param_nodes, when non-null, receives the tape node id of every param
/// tensor in order (for training updates).
struct TapeForward {
    int logits = -1;
    int input = -1;
};
TapeForward forward_tape(const ModelParams& params, Tape& tape, const Tensor& batch,
                         std::vector<int>* param_nodes = nullptr);

/// Untracked forward pass; returns log-softmax logits, b x k.
Tensor forward(const ModelParams& params, const Tensor& batch);

/// Rowwise argmax of forward; ties break to the lowest class id.
std::vector<int> predict(const ModelParams& params, const Tensor& batch);

void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace pcv
