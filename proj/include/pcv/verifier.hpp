#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcv/data.hpp"
#include "pcv/model.hpp"
#include "pcv/perturb.hpp"

namespace pcv {

struct AttackOutcome {
    std::string sample_id;
    double epsilon = 0.0;
    int i_pred = -1;
    int f_pred = -1;
    int target = -1;
    bool success = false;  // i_pred != f_pred
    PointCloud perturbed;
};

struct SweepRow {
    double epsilon = 0.0;
    double clean_accuracy = 0.0;      // i_acc
    double perturbed_accuracy = 0.0;  // f_acc
    int adversarial_count = 0;
    bool in_tipping_set = false;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<AttackOutcome> adversarial_set;
};

struct VerifyOptions {
    PerturbationSpec spec;           // epsilon is taken from the grid per row
    bool absolute_threshold = false; // f_acc <= 0.5 instead of f_acc <= 0.5 * i_acc
    bool keep_clouds = true;         // store perturbed clouds in the adversarial set
};

/// Tipping rule: perturbed accuracy at or below half the clean accuracy
/// (or the absolute 0.5 cutoff when absolute_threshold is set).
bool in_tipping(double clean_acc, double perturbed_acc, bool absolute_threshold);

/// Per-epsilon attack sweep: clean accuracy, perturbed accuracy, adversarial
/// set membership (i_pred != f_pred), tipping-set membership per threshold.
SweepReport verify(const ModelParams& params, const std::vector<PointCloud>& val_set,
                   const std::vector<double>& epsilons, const VerifyOptions& options);

/// Smallest epsilon in the tipping set, if any row crossed the threshold.
std::optional<double> tipping_point(const SweepReport& report);

void save_sweep_csv(const SweepReport& report, const std::string& path);

/// Writes each adversarial cloud plus an index CSV
/// (sample_id,epsilon,true_label,i_pred,f_pred). Returns the index path.
std::string export_adversarial_set(const SweepReport& report, const std::string& out_dir);

}  // namespace pcv
