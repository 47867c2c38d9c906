#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcv/data.hpp"
#include "pcv/interval.hpp"
#include "pcv/model.hpp"
#include "pcv/perturb.hpp"
#include "pcv/train.hpp"
#include "pcv/verifier.hpp"

namespace py = pybind11;
using namespace pcv;

namespace {

Tensor tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    std::vector<int> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<int>(arr.shape(i));
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<float> tensor_to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<float> arr(shape);
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "point-cloud classifier robustness toolkit";

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("point_mlp_widths", &ModelConfig::point_mlp_widths)
        .def_readwrite("head_widths", &ModelConfig::head_widths)
        .def_readwrite("num_classes", &ModelConfig::num_classes)
        .def_readwrite("with_input_tnet", &ModelConfig::with_input_tnet)
        .def_readwrite("num_points", &ModelConfig::num_points);

    py::class_<ModelParams>(m, "ModelParams")
        .def_property_readonly("config", [](const ModelParams& p) { return p.config; })
        .def("tensor_names", [](const ModelParams& p) {
            std::vector<std::string> names;
            for (const auto& [n, t] : p.tensors) names.push_back(n);
            return names;
        });

    py::class_<PointCloud>(m, "PointCloud")
        .def(py::init([](py::array_t<float> pts, int label, const std::string& id) {
                 PointCloud c;
                 c.points = tensor_from_array(pts);
                 c.label = label;
                 c.id = id;
                 return c;
             }),
             py::arg("points"), py::arg("label") = 0, py::arg("id") = "")
        .def_property_readonly("points", [](const PointCloud& c) { return tensor_to_array(c.points); })
        .def_readwrite("label", &PointCloud::label)
        .def_readwrite("id", &PointCloud::id);

    m.def("init_model", &init_model, py::arg("config"), py::arg("seed") = 0);
    m.def("save_model", &save_model);
    m.def("load_model", &load_model);
    m.def(
        "forward",
        [](const ModelParams& p, py::array_t<float> batch) {
            return tensor_to_array(forward(p, tensor_from_array(batch)));
        },
        py::arg("params"), py::arg("batch"));
    m.def(
        "predict",
        [](const ModelParams& p, py::array_t<float> batch) {
            return predict(p, tensor_from_array(batch));
        },
        py::arg("params"), py::arg("batch"));

    m.def(
        "generate_shape",
        [](const std::string& kind, int n, double jitter, std::uint64_t seed) {
            return generate_shape(shape_kind_from_name(kind), n, jitter, seed);
        },
        py::arg("kind"), py::arg("n"), py::arg("jitter") = 0.0, py::arg("seed") = 0);
    m.def("save_cloud", &save_cloud);
    m.def("load_cloud", &load_cloud);

    py::class_<PerturbationSpec>(m, "PerturbationSpec")
        .def(py::init<>())
        .def_readwrite("epsilon", &PerturbationSpec::epsilon)
        .def_readwrite("noise_seed", &PerturbationSpec::noise_seed)
        .def_readwrite("clip_lo", &PerturbationSpec::clip_lo)
        .def_readwrite("clip_hi", &PerturbationSpec::clip_hi)
        .def_readwrite("noise_enabled", &PerturbationSpec::noise_enabled);

    m.def(
        "hybrid_p",
        [](py::array_t<float> x, const PerturbationSpec& spec, py::array_t<float> grad) {
            return tensor_to_array(hybrid_p(tensor_from_array(x), spec, tensor_from_array(grad)));
        },
        py::arg("x"), py::arg("spec"), py::arg("grad"));

    py::enum_<VerdictKind>(m, "VerdictKind")
        .value("Robust", VerdictKind::Robust)
        .value("Falsified", VerdictKind::Falsified)
        .value("Unknown", VerdictKind::Unknown);

    py::class_<Verdict>(m, "Verdict")
        .def_readonly("kind", &Verdict::kind)
        .def_readonly("label_logit_lower", &Verdict::label_logit_lower)
        .def_readonly("best_other_upper", &Verdict::best_other_upper)
        .def_property_readonly("witness", [](const Verdict& v) -> py::object {
            if (v.witness.data.empty()) return py::none();
            return tensor_to_array(v.witness);
        });

    m.def(
        "certify",
        [](const ModelParams& p, py::array_t<float> x, int label, double eps) {
            return certify(p, tensor_from_array(x), label, eps);
        },
        py::arg("params"), py::arg("x"), py::arg("label"), py::arg("eps"));

    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("epsilon", &SweepRow::epsilon)
        .def_readonly("clean_accuracy", &SweepRow::clean_accuracy)
        .def_readonly("perturbed_accuracy", &SweepRow::perturbed_accuracy)
        .def_readonly("adversarial_count", &SweepRow::adversarial_count)
        .def_readonly("in_tipping_set", &SweepRow::in_tipping_set);

    py::class_<SweepReport>(m, "SweepReport")
        .def_readonly("rows", &SweepReport::rows)
        .def("adversarial_count",
             [](const SweepReport& r) { return r.adversarial_set.size(); });

    m.def(
        "verify",
        [](const ModelParams& p, const std::vector<PointCloud>& val,
           const std::vector<double>& epsilons, std::uint64_t noise_seed, bool noise_enabled,
           bool absolute_threshold) {
            VerifyOptions opt;
            opt.spec.noise_seed = noise_seed;
            opt.spec.noise_enabled = noise_enabled;
            opt.absolute_threshold = absolute_threshold;
            return verify(p, val, epsilons, opt);
        },
        py::arg("params"), py::arg("val_set"), py::arg("epsilons"), py::arg("noise_seed") = 0,
        py::arg("noise_enabled") = true, py::arg("absolute_threshold") = false);

    m.def(
        "tipping_point",
        [](const SweepReport& r) -> py::object {
            const auto t = tipping_point(r);
            if (!t) return py::none();
            return py::float_(*t);
        },
        py::arg("report"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("seed", &TrainConfig::seed);

    m.def(
        "train",
        [](const ModelParams& initial, const std::vector<PointCloud>& train_set,
           const std::vector<PointCloud>& val_set, const TrainConfig& cfg) {
            auto [params, history] = train(initial, train_set, val_set, cfg);
            std::vector<std::tuple<double, double, double>> hist;
            for (const auto& e : history.epochs)
                hist.emplace_back(e.train_loss, e.train_acc, e.val_acc);
            return py::make_tuple(params, hist);
        },
        py::arg("initial"), py::arg("train_set"), py::arg("val_set"), py::arg("config"));

    m.def(
        "evaluate",
        [](const ModelParams& p, const std::vector<PointCloud>& ds) {
            const EvalResult r = evaluate(p, ds);
            return py::make_tuple(r.accuracy, r.per_class);
        },
        py::arg("params"), py::arg("dataset"));
}
