#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcv/data.hpp"
#include "pcv/model.hpp"

namespace pcv {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 10;
    double learning_rate = 0.02;
    double momentum = 0.9;
    double clip_norm = 1.0;  // global gradient-norm cap
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

/// SGD with momentum on nll loss; shuffles per epoch with a seeded RNG and
/// returns the best-validation-accuracy snapshot of the parameters.
std::pair<ModelParams, TrainHistory> train(const ModelParams& initial,
                                           const std::vector<PointCloud>& train_set,
                                           const std::vector<PointCloud>& val_set,
                                           const TrainConfig& config);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class;  // indexed by class id
    std::vector<int> per_class_total;
};

EvalResult evaluate(const ModelParams& params, const std::vector<PointCloud>& dataset);

void save_history_csv(const TrainHistory& h, const std::string& path);

}  // namespace pcv
