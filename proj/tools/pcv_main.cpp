#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcv/data.hpp"
#include "pcv/interval.hpp"
#include "pcv/model.hpp"
#include "pcv/perturb.hpp"
#include "pcv/svg.hpp"
#include "pcv/train.hpp"
#include "pcv/verifier.hpp"

namespace fs = std::filesystem;
using namespace pcv;

namespace {

std::vector<double> default_grid() { return {0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3}; }

void check_grid(const std::vector<double>& eps) {
    for (size_t i = 0; i < eps.size(); ++i) {
        if (eps[i] < 0) throw CLI::ValidationError("--epsilons", "epsilon values must be >= 0");
        if (i && eps[i] < eps[i - 1])
            throw CLI::ValidationError("--epsilons", "epsilon grid must be sorted ascending");
    }
}

std::vector<PointCloud> load_val(const std::string& data_dir) {
    const auto manifest = load_manifest((fs::path(data_dir) / "val.manifest").string());
    return load_split(manifest, data_dir);
}

int run(int argc, char** argv) {
    CLI::App app{"pcv: point-cloud classifier robustness toolkit"};
    app.require_subcommand(1);

    std::string data_dir, model_path, out_dir = ".";
    std::vector<double> epsilons = default_grid();
    std::uint64_t seed = 0;
    bool no_noise = false, tnet = false, absolute_threshold = false;
    int points = 256, classes = 5;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--points", points, "points per cloud");
    gen->add_option("--classes", classes, "number of shape classes (<= 5)");
    int per_class = 125;
    double jitter = 0.01, val_fraction = 0.2;
    gen->add_option("--per-class", per_class, "samples per class");
    gen->add_option("--jitter", jitter, "Gaussian surface jitter");
    gen->add_option("--val-fraction", val_fraction, "validation split fraction");

    auto* trn = app.add_subcommand("train", "train the classifier on a dataset");
    trn->add_option("--data", data_dir, "dataset directory")->required();
    trn->add_option("--out", out_dir, "output directory")->required();
    trn->add_option("--seed", seed, "RNG seed");
    trn->add_flag("--tnet", tnet, "enable the 3x3 input transform net");
    int epochs = 20, batch_size = 10;
    double lr = 0.02, momentum = 0.9, clip = 1.0;
    trn->add_option("--epochs", epochs, "training epochs");
    trn->add_option("--batch", batch_size, "batch size");
    trn->add_option("--lr", lr, "learning rate");
    trn->add_option("--momentum", momentum, "SGD momentum");
    trn->add_option("--clip", clip, "global gradient-norm cap");
    std::vector<int> mlp_widths = {64, 128, 256}, head_widths = {128};
    trn->add_option("--mlp-widths", mlp_widths, "per-point MLP widths");
    trn->add_option("--head-widths", head_widths, "classifier head widths");

    auto* atk = app.add_subcommand("attack", "perturb the validation set and export adversarial samples");
    atk->add_option("--data", data_dir, "dataset directory")->required();
    atk->add_option("--model", model_path, "trained model file")->required();
    atk->add_option("--out", out_dir, "output directory")->required();
    atk->add_option("--epsilons", epsilons, "epsilon grid")->delimiter(',');
    atk->add_option("--seed", seed, "noise seed");
    atk->add_flag("--no-noise", no_noise, "disable the Gaussian noise stage (pure FGSM)");
    int gallery_count = 4;
    atk->add_option("--gallery", gallery_count, "samples per epsilon in the gallery");

    auto* ver = app.add_subcommand("verify", "full sweep: accuracies, tipping point, adversarial set");
    ver->add_option("--data", data_dir, "dataset directory")->required();
    ver->add_option("--model", model_path, "trained model file")->required();
    ver->add_option("--out", out_dir, "output directory")->required();
    ver->add_option("--epsilons", epsilons, "epsilon grid")->delimiter(',');
    ver->add_option("--seed", seed, "noise seed");
    ver->add_flag("--no-noise", no_noise, "disable the Gaussian noise stage");
    ver->add_flag("--absolute-threshold", absolute_threshold,
                  "tipping rule f_acc <= 0.5 instead of f_acc <= 0.5 * i_acc");

    auto* rch = app.add_subcommand("reach", "interval-reachability certification per sample");
    rch->add_option("--data", data_dir, "dataset directory")->required();
    rch->add_option("--model", model_path, "trained model file")->required();
    rch->add_option("--out", out_dir, "output directory")->required();
    rch->add_option("--epsilons", epsilons, "epsilon grid")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (*gen) {
        if (classes < 2 || classes > 5) {
            std::fprintf(stderr, "error: --classes must be in [2,5]\n");
            return 2;
        }
        DatasetConfig cfg;
        cfg.classes.resize(classes);
        cfg.per_class = per_class;
        cfg.val_fraction = val_fraction;
        cfg.num_points = points;
        cfg.jitter = jitter;
        auto [train_m, val_m] = build_dataset(cfg, seed, out_dir);
        std::printf("gen-data: %zu train / %zu val clouds in %s\n", train_m.files.size(),
                    val_m.files.size(), out_dir.c_str());
        return 0;
    }

    if (*trn) {
        const auto train_m = load_manifest((fs::path(data_dir) / "train.manifest").string());
        const auto val_m = load_manifest((fs::path(data_dir) / "val.manifest").string());
        const auto train_set = load_split(train_m, data_dir);
        const auto val_set = load_split(val_m, data_dir);

        ModelConfig mc;
        mc.point_mlp_widths = mlp_widths;
        mc.head_widths = head_widths;
        mc.num_classes = static_cast<int>(train_m.class_names.size());
        mc.num_points = train_m.num_points;
        mc.with_input_tnet = tnet;
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = lr;
        tc.momentum = momentum;
        tc.clip_norm = clip;
        tc.seed = seed;

        auto [params, history] = train(init_model(mc, seed), train_set, val_set, tc);
        fs::create_directories(out_dir);
        const std::string model_out = (fs::path(out_dir) / "model.pcvm").string();
        const std::string hist_out = (fs::path(out_dir) / "history.csv").string();
        save_model(params, model_out);
        save_history_csv(history, hist_out);
        const double best = evaluate(params, val_set).accuracy;
        std::printf("train: %d epochs, best val accuracy %.4f -> %s\n", epochs, best,
                    model_out.c_str());
        return 0;
    }

    if (*atk || *ver) {
        check_grid(epsilons);
        const ModelParams params = load_model(model_path);
        const auto val_set = load_val(data_dir);

        VerifyOptions opt;
        opt.spec.noise_seed = seed;
        opt.spec.noise_enabled = !no_noise;
        opt.absolute_threshold = absolute_threshold;
        const SweepReport report = verify(params, val_set, epsilons, opt);

        fs::create_directories(out_dir);
        const std::string index =
            export_adversarial_set(report, (fs::path(out_dir) / "adversarial").string());
        save_sweep_csv(report, (fs::path(out_dir) / "sweep.csv").string());

        if (*atk) {
            std::vector<GalleryPair> pairs;
            for (const AttackOutcome& out : report.adversarial_set) {
                int count_this_eps = 0;
                for (const GalleryPair& p : pairs)
                    if (p.epsilon == out.epsilon) ++count_this_eps;
                if (count_this_eps >= gallery_count) continue;
                for (size_t s = 0; s < val_set.size(); ++s) {
                    if ((val_set[s].id.empty() ? "sample" + std::to_string(s) : val_set[s].id) !=
                        out.sample_id)
                        continue;
                    GalleryPair p;
                    p.clean = val_set[s];
                    p.perturbed = out.perturbed;
                    p.epsilon = out.epsilon;
                    p.i_pred = out.i_pred;
                    p.f_pred = out.f_pred;
                    pairs.push_back(std::move(p));
                    break;
                }
            }
            if (!pairs.empty())
                render_cloud_gallery(pairs, (fs::path(out_dir) / "gallery.svg").string());
            std::printf("attack: %zu adversarial samples -> %s\n", report.adversarial_set.size(),
                        index.c_str());
            return 0;
        }

        if (epsilons.size() >= 2)
            plot_accuracy_curve(report, (fs::path(out_dir) / "accuracy_curve.svg").string());
        const auto tip = tipping_point(report);
        if (tip) {
            std::printf("verify: tipping point at epsilon=%g (clean %.4f) -> %s\n", *tip,
                        report.rows.front().clean_accuracy, out_dir.c_str());
            return 1;
        }
        std::printf("verify: no tipping point on the grid (clean %.4f) -> %s\n",
                    report.rows.front().clean_accuracy, out_dir.c_str());
        return 0;
    }

    if (*rch) {
        check_grid(epsilons);
        const ModelParams params = load_model(model_path);
        const auto val_set = load_val(data_dir);
        fs::create_directories(out_dir);
        const std::string cert_path = (fs::path(out_dir) / "certification.csv").string();
        std::ofstream os(cert_path);
        if (!os) throw std::runtime_error("cannot open " + cert_path + " for writing");
        os << "sample_id,epsilon,verdict,label_logit_lower,best_other_upper\n";
        int robust = 0, falsified = 0, unknown = 0;
        for (double eps : epsilons)
            for (size_t s = 0; s < val_set.size(); ++s) {
                const Verdict v = certify(params, val_set[s].points, val_set[s].label, eps);
                const std::string id =
                    val_set[s].id.empty() ? "sample" + std::to_string(s) : val_set[s].id;
                os << id << "," << eps << "," << verdict_name(v.kind) << "," << v.label_logit_lower
                   << "," << v.best_other_upper << "\n";
                if (v.kind == VerdictKind::Robust) ++robust;
                else if (v.kind == VerdictKind::Falsified) ++falsified;
                else ++unknown;
            }
        std::printf("reach: %d robust / %d falsified / %d unknown -> %s\n", robust, falsified,
                    unknown, cert_path.c_str());
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
