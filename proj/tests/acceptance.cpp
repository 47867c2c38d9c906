// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 2, 3, 7 and 8 share one trained desk-scale model.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pcv/data.hpp"
#include "pcv/interval.hpp"
#include "pcv/model.hpp"
#include "pcv/perturb.hpp"
#include "pcv/rng.hpp"
#include "pcv/train.hpp"
#include "pcv/verifier.hpp"

using namespace pcv;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_cloud(int n, Rng& rng) {
    Tensor x = Tensor::zeros({n, 3});
    for (float& v : x.data) v = static_cast<float>(rng.uniform());
    return x;
}

struct Shared {
    std::vector<PointCloud> train_set;
    std::vector<PointCloud> val_set;
    ModelParams params;
    SweepReport sweep;
    std::string work_dir;
};

// 1. analytic input gradients vs central finite differences, 100 seeds
bool criterion_gradients(Shared&, std::string& detail) {
    const double h = 1e-3, tol = 1e-2;
    int checked = 0, failures = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ModelConfig cfg;
        cfg.point_mlp_widths = {8, 16};
        cfg.head_widths = {8};
        cfg.num_classes = 3;
        cfg.num_points = 12;
        const ModelParams p = init_model(cfg, seed);
        Rng rng(1000 + seed);
        const Tensor x = random_cloud(12, rng);
        const int label = rng.uniform_int(0, 2);

        Tape tape;
        const TapeForward fwd = forward_tape(p, tape, x);
        tape.backward(tape.nll_loss(fwd.logits, {label}));
        const Tensor& g = tape.grad(fwd.input);

        for (int c = 0; c < 20; ++c) {
            const size_t idx =
                static_cast<size_t>(rng.uniform_int(0, static_cast<int>(x.data.size()) - 1));
            Tensor xp = x, xm = x;
            xp.data[idx] += static_cast<float>(h);
            xm.data[idx] -= static_cast<float>(h);
            const double fd = (nll_loss(forward(p, xp), {label}) -
                               nll_loss(forward(p, xm), {label})) / (2 * h);
            const double an = g.data[idx];
            const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, rel);
            ++checked;
            if (rel > tol) ++failures;
        }
    }
    std::ostringstream os;
    os << checked << " coords, worst rel err " << worst;
    detail = os.str();
    return failures == 0;
}

// 2. desk-scale training reaches >= 90% validation accuracy within 30 epochs
bool criterion_training(Shared& sh, std::string& detail) {
    DatasetConfig dc;
    dc.per_class = 125;
    dc.val_fraction = 0.2;
    dc.num_points = 256;
    const std::string data_dir = sh.work_dir + "/data";
    auto [train_m, val_m] = build_dataset(dc, 11, data_dir);
    sh.train_set = load_split(train_m, data_dir);
    sh.val_set = load_split(val_m, data_dir);

    ModelConfig cfg;
    cfg.point_mlp_widths = {32, 64, 128};
    cfg.head_widths = {64};
    cfg.num_classes = 5;
    cfg.num_points = 256;

    TrainConfig tc;
    tc.epochs = 30;
    tc.seed = 11;
    auto [params, history] = train(init_model(cfg, 11), sh.train_set, sh.val_set, tc);
    sh.params = std::move(params);

    double best = 0.0;
    for (const auto& e : history.epochs) best = std::max(best, e.val_acc);
    std::ostringstream os;
    os << sh.train_set.size() << "/" << sh.val_set.size() << " split, best val acc " << best;
    detail = os.str();
    return best >= 0.90;
}

// 3. sweep sanity on the trained model over the {0, 0.05, ..., 0.3} grid
bool criterion_sweep(Shared& sh, std::string& detail) {
    const std::vector<double> grid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
    sh.sweep = verify(sh.params, sh.val_set, grid, {});
    const double clean = evaluate(sh.params, sh.val_set).accuracy;

    std::ostringstream os;
    os << "f_acc:";
    for (const SweepRow& r : sh.sweep.rows) os << " " << r.perturbed_accuracy;
    detail = os.str();

    if (sh.sweep.rows.front().perturbed_accuracy != clean) return false;
    if (sh.sweep.rows.front().clean_accuracy != clean) return false;
    return sh.sweep.rows.back().perturbed_accuracy <= clean - 0.15;
}

// 4. tipping rule on a reference accuracy table plus 1000 random tables
bool criterion_tipping(Shared&, std::string& detail) {
    int mismatches = 0;
    if (!in_tipping(0.914, 0.431, false)) ++mismatches;  // 0.431 <= 0.457
    if (in_tipping(0.914, 0.458, false)) ++mismatches;

    Rng rng(42);
    for (int t = 0; t < 1000; ++t) {
        // random accuracy table: one clean accuracy, rising epsilon rows
        const double i_acc = rng.uniform();
        SweepReport rep;
        std::optional<double> expect;
        for (int row = 0; row < 6; ++row) {
            SweepRow s;
            s.epsilon = 0.05 * row;
            s.clean_accuracy = i_acc;
            s.perturbed_accuracy = rng.uniform();
            s.in_tipping_set = in_tipping(i_acc, s.perturbed_accuracy, false);
            if (s.in_tipping_set != (s.perturbed_accuracy <= i_acc * 0.5)) ++mismatches;
            if (!expect && s.perturbed_accuracy <= i_acc * 0.5) expect = s.epsilon;
            rep.rows.push_back(s);
        }
        if (tipping_point(rep) != expect) ++mismatches;
    }
    detail = "reference case + 1000 tables, " + std::to_string(mismatches) + " mismatches";
    return mismatches == 0;
}

// 5. hybrid perturbation contract over 1e5 randomized calls
bool criterion_perturbation(Shared&, std::string& detail) {
    Rng rng(7);
    int violations = 0;
    const int calls = 100000;
    for (int t = 0; t < calls; ++t) {
        const int n = rng.uniform_int(1, 8);
        Tensor x = random_cloud(n, rng);
        Tensor g = Tensor::zeros({n, 3});
        for (float& v : g.data) v = static_cast<float>(rng.uniform(-1, 1));
        PerturbationSpec spec;
        spec.noise_seed = static_cast<std::uint64_t>(t);
        const int mode = t % 3;
        if (mode == 0) {
            spec.epsilon = 0.0;
            if (hybrid_p(x, spec, g).data != x.data) ++violations;
        } else if (mode == 1) {
            spec.epsilon = rng.uniform(0.0, 0.5);
            spec.noise_enabled = false;
            const Tensor y = hybrid_p(x, spec, g);
            const Tensor s = sign(g);
            const float eps = static_cast<float>(spec.epsilon);
            for (size_t i = 0; i < y.data.size(); ++i) {
                // float oracle: step then clip, elementwise
                const float expect = std::clamp(x.data[i] + eps * s.data[i], 0.0f, 1.0f);
                if (y.data[i] != expect) ++violations;
                // float rounding of x + eps*s can overshoot eps by half an
                // ulp of x, so the L-inf bound carries an absolute slack
                if (std::abs(y.data[i] - x.data[i]) > eps + 1e-6f) ++violations;
            }
        } else {
            spec.epsilon = rng.uniform(0.0, 0.5);
            for (float v : hybrid_p(x, spec, g).data)
                if (v < 0.0f || v > 1.0f) ++violations;
        }
    }
    detail = std::to_string(calls) + " calls, " + std::to_string(violations) + " violations";
    return violations == 0;
}

// 6. interval propagation soundness: sampled in-ball points stay inside bounds
bool criterion_ibp(Shared&, std::string& detail) {
    Rng rng(12);
    int violations = 0;
    for (int sample = 0; sample < 100; ++sample) {
        ModelConfig cfg;
        cfg.point_mlp_widths = {16, 32};
        cfg.head_widths = {16};
        cfg.num_classes = 5;
        cfg.num_points = 16;
        const ModelParams p = init_model(cfg, 500 + sample);
        const Tensor x = random_cloud(16, rng);
        const double eps = rng.uniform(0.0, 0.2);
        const IntervalTensor out = propagate(p, input_ball(x, eps));

        for (int t = 0; t < 1000; ++t) {
            Tensor xp = x;
            for (float& v : xp.data)
                v = std::clamp(v + static_cast<float>(rng.uniform(-eps, eps)), 0.0f, 1.0f);
            const Tensor y = forward(p, xp);
            for (size_t i = 0; i < y.data.size(); ++i)
                if (y.data[i] < out.lower.data[i] || y.data[i] > out.upper.data[i]) ++violations;
        }
    }
    detail = "100 samples x 1000 points, " + std::to_string(violations) + " violations";
    return violations == 0;
}

// 7. no sample is both certified Robust and flipped by the noise-free attack
bool criterion_consistency(Shared& sh, std::string& detail) {
    const std::vector<double> grid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
    int conflicts = 0, robust = 0;
    for (const PointCloud& c : sh.val_set) {
        Tape tape;
        const TapeForward fwd = forward_tape(sh.params, tape, c.points);
        tape.backward(tape.nll_loss(fwd.logits, {c.label}));
        const Tensor grad = tape.grad(fwd.input);
        for (double eps : grid) {
            const Verdict v = certify(sh.params, c.points, c.label, eps);
            PerturbationSpec spec;
            spec.epsilon = eps;
            spec.noise_enabled = false;
            const int f_pred = predict(sh.params, hybrid_p(c.points, spec, grad))[0];
            if (v.kind == VerdictKind::Robust) {
                ++robust;
                if (f_pred != c.label) ++conflicts;
            }
        }
    }
    std::ostringstream os;
    os << sh.val_set.size() * grid.size() << " checks, " << robust << " robust, " << conflicts
       << " conflicts";
    detail = os.str();
    return conflicts == 0;
}

// 8. exported adversarial clouds reload bitwise and replay the flip
bool criterion_replay(Shared& sh, std::string& detail) {
    if (sh.sweep.adversarial_set.empty()) {
        detail = "no adversarial samples to export";
        return false;
    }
    const std::string dir = sh.work_dir + "/adversarial";
    const std::string index_path = export_adversarial_set(sh.sweep, dir);

    std::ifstream index(index_path);
    std::string line;
    std::getline(index, line);  // header
    size_t row = 0;
    int failures = 0;
    while (std::getline(index, line)) {
        std::stringstream ss(line);
        std::string id, eps_s, target_s, ipred_s, fpred_s;
        std::getline(ss, id, ',');
        std::getline(ss, eps_s, ',');
        std::getline(ss, target_s, ',');
        std::getline(ss, ipred_s, ',');
        std::getline(ss, fpred_s, ',');
        const PointCloud replay = load_cloud(dir + "/" + id + "_eps" + eps_s + ".cloud");
        const AttackOutcome& out = sh.sweep.adversarial_set[row];
        if (replay.points.data != out.perturbed.points.data) ++failures;
        const int f_pred = predict(sh.params, replay.points)[0];
        if (f_pred != out.f_pred || f_pred == out.i_pred) ++failures;
        ++row;
    }
    std::ostringstream os;
    os << row << " exported members, " << failures << " failures";
    detail = os.str();
    return row == sh.sweep.adversarial_set.size() && failures == 0;
}

// 9. model and cloud files survive save -> load -> save byte-identically
bool criterion_roundtrip(Shared& sh, std::string& detail) {
    Rng rng(77);
    int failures = 0;
    auto slurp = [](const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    for (int t = 0; t < 50; ++t) {
        ModelConfig cfg;
        cfg.point_mlp_widths = {rng.uniform_int(1, 16), rng.uniform_int(1, 16)};
        cfg.head_widths = {rng.uniform_int(1, 16)};
        cfg.num_classes = rng.uniform_int(2, 8);
        cfg.num_points = rng.uniform_int(4, 64);
        cfg.with_input_tnet = (t % 4 == 0);
        const ModelParams p = init_model(cfg, 900 + t);
        const std::string f1 = sh.work_dir + "/rt_a.pcvm";
        const std::string f2 = sh.work_dir + "/rt_b.pcvm";
        save_model(p, f1);
        save_model(load_model(f1), f2);
        if (slurp(f1) != slurp(f2)) ++failures;

        PointCloud c;
        const int n = rng.uniform_int(1, 128);
        c.points = Tensor::zeros({n, 3});
        for (float& v : c.points.data) v = static_cast<float>(rng.uniform());
        c.label = rng.uniform_int(0, 9);
        const std::string g1 = sh.work_dir + "/rt_a.cloud";
        const std::string g2 = sh.work_dir + "/rt_b.cloud";
        save_cloud(c, g1);
        save_cloud(load_cloud(g1), g2);
        if (slurp(g1) != slurp(g2)) ++failures;
    }
    detail = "50 model + 50 cloud instances, " + std::to_string(failures) + " failures";
    return failures == 0;
}

}  // namespace

int main() {
    Shared sh;
    sh.work_dir = (fs::temp_directory_path() / "pcv_acceptance").string();
    fs::remove_all(sh.work_dir);
    fs::create_directories(sh.work_dir);

    struct Criterion {
        const char* name;
        bool (*run)(Shared&, std::string&);
        double budget_s;  // 0 = no runtime requirement
    };
    const Criterion criteria[] = {
        {"gradient correctness vs finite differences", criterion_gradients, 60.0},
        {"desk-scale training reaches 90% validation accuracy", criterion_training, 300.0},
        {"epsilon sweep sanity on the trained model", criterion_sweep, 0.0},
        {"tipping-point rule on crafted tables", criterion_tipping, 0.0},
        {"hybrid perturbation contract", criterion_perturbation, 0.0},
        {"interval propagation soundness", criterion_ibp, 120.0},
        {"certification vs attack consistency", criterion_consistency, 0.0},
        {"adversarial set export replay", criterion_replay, 0.0},
        {"model and cloud format round-trips", criterion_roundtrip, 0.0},
    };

    int failed = 0;
    int id = 0;
    for (const Criterion& c : criteria) {
        ++id;
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(sh, detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed = seconds_since(t0);
        if (c.budget_s > 0 && elapsed > c.budget_s) {
            ok = false;
            detail += " [over time budget]";
        }
        std::printf("criterion %d %s: %s (%s, %.1fs)\n", id, ok ? "PASS" : "FAIL", c.name,
                    detail.c_str(), elapsed);
        std::fflush(stdout);
        if (!ok) ++failed;
    }
    fs::remove_all(sh.work_dir);
    return failed == 0 ? 0 : 1;
}
