#include "pcv/verifier.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "pcv/autodiff.hpp"
#include "pcv/parallel.hpp"
#include "pcv/rng.hpp"

namespace fs = std::filesystem;

namespace pcv {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

}  // namespace

bool in_tipping(double clean_acc, double perturbed_acc, bool absolute_threshold) {
    return absolute_threshold ? perturbed_acc <= 0.5 : perturbed_acc <= 0.5 * clean_acc;
}

SweepReport verify(const ModelParams& params, const std::vector<PointCloud>& val_set,
                   const std::vector<double>& epsilons, const VerifyOptions& options) {
    if (epsilons.empty()) throw std::invalid_argument("verify: empty epsilon list");
    if (val_set.empty()) throw std::invalid_argument("verify: empty validation set");
    for (size_t i = 1; i < epsilons.size(); ++i)
        if (epsilons[i] < epsilons[i - 1])
            throw std::invalid_argument("verify: epsilons must be sorted ascending");
    for (const PointCloud& c : val_set)
        if (c.label < 0 || c.label >= params.config.num_classes)
            throw std::invalid_argument("verify: label " + std::to_string(c.label) +
                                        " outside the model's class range");

    const int n_samples = static_cast<int>(val_set.size());

    // clean predictions and input gradients are epsilon-independent
    std::vector<int> i_preds(n_samples);
    std::vector<Tensor> grads(n_samples);
    parallel_for(n_samples, [&](int s) {
        Tape tape;
        const TapeForward fwd = forward_tape(params, tape, val_set[s].points);
        i_preds[s] = argmax_row(tape.value(fwd.logits), 0);
        const int loss = tape.nll_loss(fwd.logits, {val_set[s].label});
        tape.zero_grad();
        tape.backward(loss);
        grads[s] = tape.grad(fwd.input);
    });

    int clean_correct = 0;
    for (int s = 0; s < n_samples; ++s)
        if (i_preds[s] == val_set[s].label) ++clean_correct;
    const double i_acc = static_cast<double>(clean_correct) / n_samples;

    SweepReport report;
    for (size_t e = 0; e < epsilons.size(); ++e) {
        PerturbationSpec spec = options.spec;
        spec.epsilon = epsilons[e];

        std::vector<int> f_preds(n_samples);
        std::vector<Tensor> perturbed(n_samples);
        parallel_for(n_samples, [&](int s) {
            PerturbationSpec local = spec;
            local.noise_seed = mix_seed(spec.noise_seed,
                                        e * static_cast<std::uint64_t>(n_samples) + s);
            perturbed[s] = hybrid_p(val_set[s].points, local, grads[s]);
            f_preds[s] = predict(params, perturbed[s])[0];
        });

        SweepRow row;
        row.epsilon = epsilons[e];
        row.clean_accuracy = i_acc;
        int perturbed_correct = 0;
        for (int s = 0; s < n_samples; ++s) {
            if (f_preds[s] == val_set[s].label) ++perturbed_correct;
            if (f_preds[s] != i_preds[s]) {
                ++row.adversarial_count;
                AttackOutcome out;
                out.sample_id = val_set[s].id.empty() ? "sample" + std::to_string(s) : val_set[s].id;
                out.epsilon = epsilons[e];
                out.i_pred = i_preds[s];
                out.f_pred = f_preds[s];
                out.target = val_set[s].label;
                out.success = true;
                if (options.keep_clouds) {
                    out.perturbed.points = perturbed[s];
                    out.perturbed.label = val_set[s].label;
                    out.perturbed.id = out.sample_id;
                }
                report.adversarial_set.push_back(std::move(out));
            }
        }
        row.perturbed_accuracy = static_cast<double>(perturbed_correct) / n_samples;
        row.in_tipping_set =
            in_tipping(i_acc, row.perturbed_accuracy, options.absolute_threshold);
        report.rows.push_back(row);
    }
    return report;
}

std::optional<double> tipping_point(const SweepReport& report) {
    for (const SweepRow& row : report.rows)
        if (row.in_tipping_set) return row.epsilon;
    return std::nullopt;
}

void save_sweep_csv(const SweepReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "epsilon,clean_accuracy,perturbed_accuracy,adversarial_count,in_tipping_set\n";
    for (const SweepRow& r : report.rows)
        os << fmt_double(r.epsilon) << "," << fmt_double(r.clean_accuracy) << ","
           << fmt_double(r.perturbed_accuracy) << "," << r.adversarial_count << ","
           << (r.in_tipping_set ? 1 : 0) << "\n";
    if (!os) throw std::runtime_error("write failed for " + path);
}

std::string export_adversarial_set(const SweepReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::string index_path = (fs::path(out_dir) / "adversarial_index.csv").string();
    std::ofstream index(index_path);
    if (!index) throw std::runtime_error("cannot open " + index_path + " for writing");
    index << "sample_id,epsilon,true_label,i_pred,f_pred\n";
    for (const AttackOutcome& out : report.adversarial_set) {
        if (out.perturbed.points.data.empty())
            throw std::invalid_argument("export_adversarial_set: outcome for " + out.sample_id +
                                        " carries no perturbed cloud");
        const std::string fname = out.sample_id + "_eps" + fmt_double(out.epsilon) + ".cloud";
        save_cloud(out.perturbed, (fs::path(out_dir) / fname).string());
        index << out.sample_id << "," << fmt_double(out.epsilon) << "," << out.target << ","
              << out.i_pred << "," << out.f_pred << "\n";
    }
    if (!index) throw std::runtime_error("write failed for " + index_path);
    return index_path;
}

}  // namespace pcv
