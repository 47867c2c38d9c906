#include "pcv/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcv/rng.hpp"

namespace pcv {

void PerturbationSpec::validate() const {
    if (epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
    if (!(clip_lo < clip_hi)) throw std::invalid_argument("clip_lo must be < clip_hi");
}

Tensor sign(const Tensor& grad) {
    Tensor out = grad;
    for (float& v : out.data) {
        if (!std::isfinite(v)) throw std::domain_error("sign: non-finite gradient entry");
        v = (v > 0.0f) ? 1.0f : (v < 0.0f ? -1.0f : 0.0f);
    }
    return out;
}

Tensor hybrid_p(const Tensor& x, const PerturbationSpec& spec, const Tensor& grad) {
    spec.validate();
    if (!x.same_shape(grad))
        throw std::invalid_argument("hybrid_p shape mismatch: x " + x.shape_str() + " vs grad " +
                                    grad.shape_str());
    const Tensor s = sign(grad);
    const float eps = static_cast<float>(spec.epsilon);
    const float lo = static_cast<float>(spec.clip_lo);
    const float hi = static_cast<float>(spec.clip_hi);
    Tensor out = x;
    Rng rng(spec.noise_seed);
    for (size_t i = 0; i < out.data.size(); ++i) {
        float v = out.data[i] + eps * s.data[i];
        if (spec.noise_enabled && eps > 0.0f)
            v += eps * static_cast<float>(rng.normal());
        out.data[i] = std::clamp(v, lo, hi);
    }
    return out;
}

}  // namespace pcv
