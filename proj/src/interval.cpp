#include "pcv/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pcv/perturb.hpp"

namespace pcv {

void IntervalTensor::check() const {
    if (!lower.same_shape(upper))
        throw std::logic_error("interval shape mismatch: " + lower.shape_str() + " vs " +
                               upper.shape_str());
    for (size_t i = 0; i < lower.data.size(); ++i) {
        if (!std::isfinite(lower.data[i]) || !std::isfinite(upper.data[i]))
            throw std::logic_error("interval bound is non-finite");
        if (lower.data[i] > upper.data[i])
            throw std::logic_error("interval inversion: lower > upper");
    }
}

Tensor IntervalTensor::width() const {
    Tensor w = upper;
    for (size_t i = 0; i < w.data.size(); ++i) w.data[i] -= lower.data[i];
    return w;
}

IntervalTensor input_ball(const Tensor& x, double eps) {
    if (eps < 0) throw std::invalid_argument("input_ball: eps must be >= 0");
    for (float v : x.data)
        if (v < 0.0f || v > 1.0f)
            throw std::invalid_argument("input_ball: input coordinate outside [0,1]");
    IntervalTensor iv;
    iv.lower = x;
    iv.upper = x;
    const float e = static_cast<float>(eps);
    for (size_t i = 0; i < x.data.size(); ++i) {
        iv.lower.data[i] = std::clamp(x.data[i] - e, 0.0f, 1.0f);
        iv.upper.data[i] = std::clamp(x.data[i] + e, 0.0f, 1.0f);
    }
    iv.check();
    return iv;
}

namespace {

// center-radius affine image; double accumulation keeps the rounding error
// well below the float forward pass's own noise
IntervalTensor affine_interval(const IntervalTensor& iv, const Tensor& w, const Tensor& bias) {
    const int m = iv.lower.rows(), k = iv.lower.cols(), n = w.cols();
    if (w.rows() != k) throw std::invalid_argument("affine_interval dimension mismatch");
    IntervalTensor out;
    out.lower = Tensor::zeros({m, n});
    out.upper = Tensor::zeros({m, n});
    std::vector<double> c(static_cast<size_t>(m) * n, 0.0), r(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const double lc = iv.lower.at(i, kk), uc = iv.upper.at(i, kk);
            const double cen = 0.5 * (lc + uc);
            const double rad = 0.5 * (uc - lc);
            const float* wrow = &w.data[static_cast<size_t>(kk) * n];
            double* crow = &c[static_cast<size_t>(i) * n];
            double* rrow = &r[static_cast<size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                crow[j] += cen * wrow[j];
                rrow[j] += rad * std::abs(static_cast<double>(wrow[j]));
            }
        }
        for (int j = 0; j < n; ++j) {
            const size_t idx = static_cast<size_t>(i) * n + j;
            const double b = bias.data[j];
            out.lower.at(i, j) = static_cast<float>(c[idx] - r[idx] + b);
            out.upper.at(i, j) = static_cast<float>(c[idx] + r[idx] + b);
        }
    }
    return out;
}

IntervalTensor relu_interval(const IntervalTensor& iv) {
    IntervalTensor out;
    out.lower = relu(iv.lower);
    out.upper = relu(iv.upper);
    return out;
}

IntervalTensor max_points_interval(const IntervalTensor& iv, int points) {
    IntervalTensor out;
    out.lower = reduce_max_points(iv.lower, 1, points);
    out.upper = reduce_max_points(iv.upper, 1, points);
    return out;
}

// per-class log-softmax bounds from logit bounds via worst-case margins
IntervalTensor log_softmax_interval(const IntervalTensor& iv) {
    const int k = iv.lower.cols();
    IntervalTensor out;
    out.lower = Tensor::zeros(iv.lower.shape);
    out.upper = Tensor::zeros(iv.upper.shape);
    for (int row = 0; row < iv.lower.rows(); ++row) {
        for (int i = 0; i < k; ++i) {
            // lower: this logit at its floor, rivals at their ceilings
            double mx = iv.lower.at(row, i);
            for (int j = 0; j < k; ++j)
                if (j != i) mx = std::max(mx, static_cast<double>(iv.upper.at(row, j)));
            double sum = 0.0;
            for (int j = 0; j < k; ++j) {
                const double v = (j == i) ? iv.lower.at(row, i) : iv.upper.at(row, j);
                sum += std::exp(v - mx);
            }
            out.lower.at(row, i) = static_cast<float>(iv.lower.at(row, i) - (mx + std::log(sum)));
            // upper: this logit at its ceiling, rivals at their floors
            mx = iv.upper.at(row, i);
            for (int j = 0; j < k; ++j)
                if (j != i) mx = std::max(mx, static_cast<double>(iv.lower.at(row, j)));
            sum = 0.0;
            for (int j = 0; j < k; ++j) {
                const double v = (j == i) ? iv.upper.at(row, i) : iv.lower.at(row, j);
                sum += std::exp(v - mx);
            }
            out.upper.at(row, i) = static_cast<float>(iv.upper.at(row, i) - (mx + std::log(sum)));
        }
    }
    return out;
}

}  // namespace

IntervalTensor propagate(const ModelParams& params, const IntervalTensor& iv,
                         std::vector<LayerBounds>* layers_out) {
    if (params.config.with_input_tnet)
        throw std::invalid_argument("propagate: T-Net models are not supported");
    iv.check();
    const int n = iv.lower.rows();
    if (iv.lower.cols() != 3 || n != params.config.num_points)
        throw std::invalid_argument("propagate: expected " +
                                    std::to_string(params.config.num_points) + " x 3 input, got " +
                                    iv.lower.shape_str());

    auto record = [&](const std::string& name, const IntervalTensor& b) {
        b.check();
        if (layers_out) layers_out->push_back({name, b});
    };

    IntervalTensor cur = iv;
    for (size_t i = 0; i < params.config.point_mlp_widths.size(); ++i) {
        const std::string pre = "mlp." + std::to_string(i);
        cur = relu_interval(affine_interval(cur, params.find(pre + ".weight"), params.find(pre + ".bias")));
        record(pre, cur);
    }
    cur = max_points_interval(cur, n);
    record("maxpool", cur);
    for (size_t i = 0; i < params.config.head_widths.size(); ++i) {
        const std::string pre = "head." + std::to_string(i);
        cur = relu_interval(affine_interval(cur, params.find(pre + ".weight"), params.find(pre + ".bias")));
        record(pre, cur);
    }
    cur = affine_interval(cur, params.find("out.weight"), params.find("out.bias"));
    record("out", cur);
    cur = log_softmax_interval(cur);
    record("log_softmax", cur);
    return cur;
}

std::string verdict_name(VerdictKind v) {
    switch (v) {
        case VerdictKind::Robust: return "robust";
        case VerdictKind::Falsified: return "falsified";
        case VerdictKind::Unknown: return "unknown";
    }
    return "unknown";
}

Verdict certify(const ModelParams& params, const Tensor& x, int label, double eps) {
    if (label < 0 || label >= params.config.num_classes)
        throw std::out_of_range("certify: label out of range");
    const IntervalTensor logits = propagate(params, input_ball(x, eps));

    Verdict v;
    v.label_logit_lower = logits.lower.at(0, label);
    v.best_other_upper = -std::numeric_limits<float>::infinity();
    for (int j = 0; j < params.config.num_classes; ++j)
        if (j != label) v.best_other_upper = std::max(v.best_other_upper, logits.upper.at(0, j));

    if (v.label_logit_lower > v.best_other_upper) {
        v.kind = VerdictKind::Robust;
        return v;
    }

    // falsification attempt: noise-free signed-gradient step stays inside the ball
    Tape tape;
    const TapeForward fwd = forward_tape(params, tape, x);
    const int loss = tape.nll_loss(fwd.logits, {label});
    tape.backward(loss);
    PerturbationSpec spec;
    spec.epsilon = eps;
    spec.noise_enabled = false;
    const Tensor adv = hybrid_p(x, spec, tape.grad(fwd.input));
    const int pred = predict(params, adv)[0];
    if (pred != label) {
        v.kind = VerdictKind::Falsified;
        v.witness = adv;
    } else {
        v.kind = VerdictKind::Unknown;
    }
    return v;
}

}  // namespace pcv
