#pragma once

#include <cstdint>

#include "pcv/tensor.hpp"

namespace pcv {

struct PerturbationSpec {
    double epsilon = 0.0;
    std::uint64_t noise_seed = 0;
    double clip_lo = 0.0;
    double clip_hi = 1.0;
    bool noise_enabled = true;  // off recovers plain FGSM

    void validate() const;
};

/// Elementwise sign, {-1, 0, +1}; sign(0) = 0. Non-finite entries are an error.
Tensor sign(const Tensor& grad);

/// Signed-gradient step, epsilon-scaled Gaussian noise, then clamp to
/// [clip_lo, clip_hi]. Noise draws come from Rng(noise_seed) in flat element
/// order, so the result is a pure function of (x, spec, grad).
Tensor hybrid_p(const Tensor& x, const PerturbationSpec& spec, const Tensor& grad);

}  // namespace pcv
