#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pcv/rng.hpp"
#include "pcv/verifier.hpp"

using namespace pcv;
namespace fs = std::filesystem;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.point_mlp_widths = {8, 16};
    cfg.head_widths = {8};
    cfg.num_classes = 5;
    cfg.num_points = 16;
    return cfg;
}

std::vector<PointCloud> toy_val(int per_class, std::uint64_t seed) {
    std::vector<PointCloud> ds;
    for (int c = 0; c < 5; ++c)
        for (int i = 0; i < per_class; ++i) {
            PointCloud pc = generate_shape(static_cast<ShapeKind>(c), 16, 0.01,
                                           seed + static_cast<std::uint64_t>(c) * 100 + i);
            pc.label = c;
            pc.id = shape_kind_name(static_cast<ShapeKind>(c)) + "_" + std::to_string(i);
            ds.push_back(std::move(pc));
        }
    return ds;
}

std::string temp_dir(const char* name) {
    const auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

// Hand-built two-class model: the point feature is the x coordinate, so the
// prediction is class 0 exactly when the largest x exceeds 0.5. The signed
// gradient attack moves that single coordinate by eps, which makes flips
// predictable by hand.
ModelParams boundary_model() {
    ModelConfig cfg;
    cfg.point_mlp_widths = {1};
    cfg.head_widths = {};
    cfg.num_classes = 2;
    cfg.num_points = 4;
    ModelParams p;
    p.config = cfg;
    p.tensors.emplace_back("mlp.0.weight", Tensor({3, 1}, {1, 0, 0}));
    p.tensors.emplace_back("mlp.0.bias", Tensor({1}, {0}));
    p.tensors.emplace_back("out.weight", Tensor({1, 2}, {2, -2}));
    p.tensors.emplace_back("out.bias", Tensor({2}, {-1, 1}));
    return p;
}

PointCloud cloud_with_max_x(float mx, const std::string& id) {
    PointCloud pc;
    pc.points = Tensor({4, 3}, {mx,    0.5f, 0.5f,   //
                                0.1f,  0.4f, 0.6f,   //
                                0.15f, 0.3f, 0.2f,   //
                                0.05f, 0.7f, 0.9f});
    pc.label = mx > 0.5f ? 0 : 1;
    pc.id = id;
    return pc;
}

}  // namespace

TEST_CASE("eps 0: perturbed accuracy equals clean accuracy, no adversarials") {
    const ModelParams p = init_model(toy_config(), 1);
    const auto val = toy_val(3, 10);
    const SweepReport r = verify(p, val, {0.0}, {});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].perturbed_accuracy == r.rows[0].clean_accuracy);
    CHECK(r.rows[0].adversarial_count == 0);
    CHECK(r.adversarial_set.empty());
}

TEST_CASE("hand-checkable sweep: two of four samples flip at eps 0.3") {
    const ModelParams p = boundary_model();
    // max x 0.7 and 0.3 sit within 0.3 of the boundary and flip; 0.9 and 0.18 survive
    const std::vector<PointCloud> val = {
        cloud_with_max_x(0.7f, "a"), cloud_with_max_x(0.9f, "b"),
        cloud_with_max_x(0.3f, "c"), cloud_with_max_x(0.18f, "d")};
    VerifyOptions opt;
    opt.spec.noise_enabled = false;
    const SweepReport r = verify(p, val, {0.0, 0.3}, opt);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].clean_accuracy == 1.0);
    CHECK(r.rows[0].perturbed_accuracy == 1.0);
    CHECK(r.rows[0].adversarial_count == 0);
    const SweepRow& strong = r.rows[1];
    CHECK(strong.adversarial_count == 2);
    CHECK(strong.perturbed_accuracy == 0.5);
    CHECK(strong.in_tipping_set);  // 0.5 <= 0.5 * 1.0
    REQUIRE(r.adversarial_set.size() == 2);
    CHECK(r.adversarial_set[0].sample_id == "a");
    CHECK(r.adversarial_set[1].sample_id == "c");
    for (const AttackOutcome& out : r.adversarial_set) {
        CHECK(out.i_pred != out.f_pred);
        CHECK(out.success);
        CHECK(out.epsilon == 0.3);
        for (float v : out.perturbed.points.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("sweep is deterministic for a fixed noise seed") {
    const ModelParams p = boundary_model();
    const std::vector<PointCloud> val = {
        cloud_with_max_x(0.6f, "a"), cloud_with_max_x(0.55f, "b"),
        cloud_with_max_x(0.45f, "c"), cloud_with_max_x(0.4f, "d")};
    VerifyOptions opt;
    opt.spec.noise_seed = 77;
    const SweepReport a = verify(p, val, {0.05, 0.3}, opt);
    const SweepReport b = verify(p, val, {0.05, 0.3}, opt);
    CHECK(!a.adversarial_set.empty());
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].perturbed_accuracy == b.rows[i].perturbed_accuracy);
        CHECK(a.rows[i].adversarial_count == b.rows[i].adversarial_count);
    }
    REQUIRE(a.adversarial_set.size() == b.adversarial_set.size());
    for (size_t i = 0; i < a.adversarial_set.size(); ++i)
        CHECK(a.adversarial_set[i].perturbed.points.data ==
              b.adversarial_set[i].perturbed.points.data);
}

TEST_CASE("tipping rule: relative threshold on crafted tables") {
    SweepReport r;
    auto row = [](double eps, double i_acc, double f_acc) {
        SweepRow s;
        s.epsilon = eps;
        s.clean_accuracy = i_acc;
        s.perturbed_accuracy = f_acc;
        s.in_tipping_set = f_acc <= 0.5 * i_acc;
        return s;
    };
    r.rows = {row(0.0, 0.90, 0.90), row(0.1, 0.90, 0.60), row(0.2, 0.90, 0.43)};
    REQUIRE(tipping_point(r).has_value());
    CHECK(*tipping_point(r) == 0.2);

    r.rows = {row(0.0, 0.914, 0.914), row(0.2, 0.914, 0.431)};
    REQUIRE(tipping_point(r).has_value());
    CHECK(*tipping_point(r) == 0.2);

    r.rows = {row(0.0, 0.90, 0.90), row(0.1, 0.90, 0.46)};
    CHECK(!tipping_point(r).has_value());  // just above the boundary
    r.rows = {row(0.0, 0.90, 0.90), row(0.1, 0.90, 0.45)};
    CHECK(*tipping_point(r) == 0.1);  // boundary counts

    r.rows = {row(0.0, 0.90, 0.90), row(0.3, 0.90, 0.50)};
    CHECK(!tipping_point(r).has_value());
}

TEST_CASE("tipping rule boundary: exactly half of clean accuracy is in the set") {
    SweepRow s;
    s.perturbed_accuracy = 0.45;
    s.clean_accuracy = 0.90;
    CHECK(s.perturbed_accuracy <= 0.5 * s.clean_accuracy);
}

TEST_CASE("absolute threshold flag changes the rule") {
    const ModelParams p = init_model(toy_config(), 4);
    const auto val = toy_val(2, 40);
    VerifyOptions rel, abs_opt;
    abs_opt.absolute_threshold = true;
    const SweepReport a = verify(p, val, {0.0}, rel);
    const SweepReport b = verify(p, val, {0.0}, abs_opt);
    // untrained model: clean accuracy is low, so f_acc <= 0.5 absolute can
    // hold while f_acc <= 0.5 * i_acc does not
    CHECK(a.rows[0].in_tipping_set == (a.rows[0].perturbed_accuracy <= 0.5 * a.rows[0].clean_accuracy));
    CHECK(b.rows[0].in_tipping_set == (b.rows[0].perturbed_accuracy <= 0.5));
}

TEST_CASE("export: empty adversarial set yields a header-only index") {
    const std::string dir = temp_dir("pcv_export_empty");
    const std::string index = export_adversarial_set(SweepReport{}, dir);
    std::ifstream is(index);
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "sample_id,epsilon,true_label,i_pred,f_pred");
    CHECK(!std::getline(is, line));
}

TEST_CASE("export round-trip: saved clouds replay to the recorded flip") {
    const ModelParams p = boundary_model();
    const std::vector<PointCloud> val = {
        cloud_with_max_x(0.7f, "a"), cloud_with_max_x(0.9f, "b"), cloud_with_max_x(0.3f, "c")};
    VerifyOptions opt;
    opt.spec.noise_enabled = false;
    const SweepReport r = verify(p, val, {0.25}, opt);
    REQUIRE(!r.adversarial_set.empty());

    const std::string dir = temp_dir("pcv_export_rt");
    const std::string index = export_adversarial_set(r, dir);

    std::ifstream is(index);
    std::string header;
    std::getline(is, header);
    size_t rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string id, eps_s, target_s, ipred_s, fpred_s;
        std::getline(ss, id, ',');
        std::getline(ss, eps_s, ',');
        std::getline(ss, target_s, ',');
        std::getline(ss, ipred_s, ',');
        std::getline(ss, fpred_s, ',');
        const PointCloud replay = load_cloud(dir + "/" + id + "_eps" + eps_s + ".cloud");
        CHECK(replay.points.data == r.adversarial_set[rows].perturbed.points.data);
        CHECK(predict(p, replay.points)[0] == std::stoi(fpred_s));
        CHECK(std::stoi(ipred_s) != std::stoi(fpred_s));
        ++rows;
    }
    CHECK(rows == r.adversarial_set.size());
}

TEST_CASE("export without stored clouds is rejected") {
    const ModelParams p = boundary_model();
    const std::vector<PointCloud> val = {cloud_with_max_x(0.7f, "a")};
    VerifyOptions opt;
    opt.spec.noise_enabled = false;
    opt.keep_clouds = false;
    const SweepReport r = verify(p, val, {0.25}, opt);
    REQUIRE(!r.adversarial_set.empty());
    const std::string dir = temp_dir("pcv_export_nc");
    CHECK_THROWS_AS(export_adversarial_set(r, dir), std::invalid_argument);
}

TEST_CASE("sweep csv layout") {
    SweepReport r;
    SweepRow s;
    s.epsilon = 0.1;
    s.clean_accuracy = 0.9;
    s.perturbed_accuracy = 0.4;
    s.adversarial_count = 7;
    s.in_tipping_set = true;
    r.rows = {s};
    const std::string dir = temp_dir("pcv_sweep_csv");
    const std::string f = dir + "/sweep.csv";
    save_sweep_csv(r, f);
    std::ifstream is(f);
    std::string line;
    std::getline(is, line);
    CHECK(line == "epsilon,clean_accuracy,perturbed_accuracy,adversarial_count,in_tipping_set");
    std::getline(is, line);
    CHECK(line == "0.1,0.9,0.4,7,1");
}

TEST_CASE("usage errors") {
    const ModelParams p = init_model(toy_config(), 7);
    const auto val = toy_val(1, 70);
    CHECK_THROWS_AS(verify(p, val, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(verify(p, {}, {0.1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(verify(p, val, {0.2, 0.1}, {}), std::invalid_argument);
    auto bad = val;
    bad[0].label = 9;
    CHECK_THROWS_AS(verify(p, bad, {0.1}, {}), std::invalid_argument);
}
