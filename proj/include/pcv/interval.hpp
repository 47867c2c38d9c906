#pragma once

#include <string>
#include <vector>

#include "pcv/model.hpp"
#include "pcv/tensor.hpp"

namespace pcv {

/// Elementwise lower/upper bound pair; the box abstraction of a layer's
/// reachable values.
struct IntervalTensor {
    Tensor lower;
    Tensor upper;

    void check() const;  // lower <= upper, both finite
    Tensor width() const;
};

/// L-infinity ball of radius eps around x, intersected with [0,1].
IntervalTensor input_ball(const Tensor& x, double eps);

struct LayerBounds {
    std::string name;
    IntervalTensor bounds;
};

/// Pushes the box through every layer; returns bounds on the log-softmax
/// output. T-Net models are rejected (the input-dependent transform is
/// bilinear and outside the box domain). When layers_out is non-null every
/// intermediate layer's bounds are recorded for containment checks.
IntervalTensor propagate(const ModelParams& params, const IntervalTensor& iv,
                         std::vector<LayerBounds>* layers_out = nullptr);

enum class VerdictKind { Robust, Falsified, Unknown };

struct Verdict {
    VerdictKind kind = VerdictKind::Unknown;
    Tensor witness;                 // adversarial cloud, Falsified only
    float label_logit_lower = 0.0f;
    float best_other_upper = 0.0f;
};

/// Robust when the label's logit lower bound strictly beats every other
/// class's upper bound; otherwise a noise-free signed-gradient attack at the
/// same eps decides Falsified vs Unknown.
Verdict certify(const ModelParams& params, const Tensor& x, int label, double eps);

std::string verdict_name(VerdictKind v);

}  // namespace pcv
