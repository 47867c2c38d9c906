#include "pcv/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pcv/rng.hpp"

namespace pcv {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (learning_rate < 0) throw std::invalid_argument("learning_rate must be >= 0");
    if (clip_norm <= 0) throw std::invalid_argument("clip_norm must be > 0");
}

namespace {

Tensor stack_batch(const std::vector<PointCloud>& clouds, const std::vector<int>& order,
                   size_t lo, size_t hi, std::vector<int>* targets) {
    const int b = static_cast<int>(hi - lo);
    const int n = clouds[order[lo]].size();
    Tensor batch = Tensor::zeros({b, n, 3});
    if (targets) targets->clear();
    for (size_t s = lo; s < hi; ++s) {
        const PointCloud& c = clouds[order[s]];
        if (c.size() != n) throw std::invalid_argument("stack_batch: inconsistent cloud sizes");
        std::copy(c.points.data.begin(), c.points.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>((s - lo) * n * 3));
        if (targets) targets->push_back(c.label);
    }
    return batch;
}

}  // namespace

std::pair<ModelParams, TrainHistory> train(const ModelParams& initial,
                                           const std::vector<PointCloud>& train_set,
                                           const std::vector<PointCloud>& val_set,
                                           const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw std::domain_error("train: empty training set");
    for (const PointCloud& c : train_set)
        if (c.label < 0 || c.label >= initial.config.num_classes)
            throw std::invalid_argument("train: label " + std::to_string(c.label) +
                                        " outside model's " +
                                        std::to_string(initial.config.num_classes) + " classes");

    ModelParams params = initial;
    std::vector<Tensor> velocity;
    for (const auto& [name, t] : params.tensors) velocity.push_back(Tensor::zeros(t.shape));

    Rng shuffle_rng(config.seed);
    std::vector<int> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    TrainHistory history;
    ModelParams best = params;
    double best_val = -1.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);

        double loss_sum = 0.0;
        int correct = 0, seen = 0, batches = 0;
        for (size_t lo = 0; lo < order.size(); lo += config.batch_size, ++batches) {
            const size_t hi = std::min(order.size(), lo + config.batch_size);
            std::vector<int> targets;
            const Tensor batch = stack_batch(train_set, order, lo, hi, &targets);

            Tape tape;
            std::vector<int> param_nodes;
            const TapeForward fwd = forward_tape(params, tape, batch, &param_nodes);
            const int loss = tape.nll_loss(fwd.logits, targets);
            const float loss_v = tape.value(loss).data[0];
            if (!std::isfinite(loss_v))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(batches));
            tape.backward(loss);

            const Tensor& logits = tape.value(fwd.logits);
            for (size_t s = 0; s < targets.size(); ++s)
                if (argmax_row(logits, static_cast<int>(s)) == targets[s]) ++correct;
            seen += static_cast<int>(targets.size());
            loss_sum += loss_v;

            double sq = 0.0;
            for (size_t p = 0; p < param_nodes.size(); ++p)
                for (float g : tape.grad(param_nodes[p]).data) sq += static_cast<double>(g) * g;
            const double norm = std::sqrt(sq);
            const double scale = (norm > config.clip_norm) ? config.clip_norm / norm : 1.0;

            for (size_t p = 0; p < param_nodes.size(); ++p) {
                if (params.tensors[p].first == "config.num_points") continue;
                const Tensor& g = tape.grad(param_nodes[p]);
                Tensor& v = velocity[p];
                Tensor& w = params.tensors[p].second;
                for (size_t i = 0; i < w.data.size(); ++i) {
                    v.data[i] = static_cast<float>(config.momentum * v.data[i] -
                                                   config.learning_rate * scale * g.data[i]);
                    w.data[i] += v.data[i];
                }
            }
        }

        EpochStats st;
        st.train_loss = loss_sum / batches;
        st.train_acc = static_cast<double>(correct) / seen;
        st.val_acc = val_set.empty() ? 0.0 : evaluate(params, val_set).accuracy;
        history.epochs.push_back(st);
        if (st.val_acc > best_val) {
            best_val = st.val_acc;
            best = params;
        }
    }
    return {val_set.empty() ? params : best, history};
}

EvalResult evaluate(const ModelParams& params, const std::vector<PointCloud>& dataset) {
    if (dataset.empty()) throw std::domain_error("evaluate: empty dataset");
    const int k = params.config.num_classes;
    EvalResult r;
    r.per_class.assign(k, 0.0);
    r.per_class_total.assign(k, 0);
    std::vector<int> correct_per_class(k, 0);
    int correct = 0;

    std::vector<int> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const size_t chunk = 32;
    for (size_t lo = 0; lo < dataset.size(); lo += chunk) {
        const size_t hi = std::min(dataset.size(), lo + chunk);
        std::vector<int> targets;
        const Tensor batch = stack_batch(dataset, order, lo, hi, &targets);
        const std::vector<int> preds = predict(params, batch);
        for (size_t s = 0; s < targets.size(); ++s) {
            const int y = targets[s];
            if (y < 0 || y >= k)
                throw std::invalid_argument("evaluate: label " + std::to_string(y) + " out of range");
            ++r.per_class_total[y];
            if (preds[s] == y) {
                ++correct;
                ++correct_per_class[y];
            }
        }
    }
    r.accuracy = static_cast<double>(correct) / dataset.size();
    for (int c = 0; c < k; ++c)
        r.per_class[c] = r.per_class_total[c]
                             ? static_cast<double>(correct_per_class[c]) / r.per_class_total[c]
                             : 0.0;
    return r;
}

void save_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "epoch,train_loss,train_acc,val_acc\n";
    for (size_t i = 0; i < h.epochs.size(); ++i)
        os << i << "," << h.epochs[i].train_loss << "," << h.epochs[i].train_acc << ","
           << h.epochs[i].val_acc << "\n";
}

}  // namespace pcv
