#pragma once

#include <string>
#include <vector>

#include "pcv/data.hpp"
#include "pcv/verifier.hpp"

namespace pcv {

/// Accuracy-vs-epsilon line chart with one circle marker per row and a
/// dashed line at the tipping threshold. Byte-deterministic for fixed input.
void plot_accuracy_curve(const SweepReport& report, const std::string& path);

struct GalleryPair {
    PointCloud clean;
    PointCloud perturbed;
    double epsilon = 0.0;
    int i_pred = -1;
    int f_pred = -1;
};

/// One row per pair: clean and perturbed XY projections side by side,
/// titled "i_pred -> f_pred".
void render_cloud_gallery(const std::vector<GalleryPair>& pairs, const std::string& path);

}  // namespace pcv
