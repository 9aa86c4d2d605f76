// Python bindings for the core operations: clipping, the OPU simulator,
// training on in-memory arrays, and the privacy accountant.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "photodp/clipping.hpp"
#include "photodp/config.hpp"
#include "photodp/opu.hpp"
#include "photodp/privacy.hpp"
#include "photodp/runner.hpp"
#include "photodp/training.hpp"

namespace py = pybind11;
using namespace photodp;

namespace {

Vector to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
    return Vector(a.data(), a.data() + a.shape(0));
}

py::array_t<double> from_vector(const Vector& v) {
    py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data());
    return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({static_cast<py::ssize_t>(m.rows()),
                             static_cast<py::ssize_t>(m.cols())});
    std::copy(m.data(), m.data() + m.size(), out.mutable_data());
    return out;
}

MechanismBounds bounds_from_kwargs(std::size_t m, double sigma, std::size_t n_l,
                                   double gamma_min, double gamma_max, double tau_h_min,
                                   double tau_h_max, double tau_b) {
    MechanismBounds b;
    b.m = m;
    b.sigma = sigma;
    b.n_l = n_l;
    b.gamma_min = gamma_min;
    b.gamma_max = gamma_max;
    b.tau_h_min = tau_h_min;
    b.tau_h_max = tau_h_max;
    b.tau_b = tau_b;
    return b;
}

py::dict report_to_dict(const PrivacyReport& r) {
    py::dict d;
    d["alpha"] = r.alpha;
    d["sigma"] = r.sigma;
    d["delta"] = r.delta;
    d["steps"] = r.steps;
    d["epochs"] = r.epochs;
    d["eps_rdp_total"] = r.eps_rdp_total;
    d["eps_dp"] = r.eps_dp;
    d["variant"] = to_string(r.variant);
    d["no_guarantee"] = r.no_guarantee;
    d["eps_rdp_per_column"] = r.eps_rdp_per_column;
    d["columns_per_layer"] = r.columns;
    d["clipping_note"] = r.clipping_note;
    return d;
}

LabeledDataset dataset_from_arrays(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& images,
    const std::vector<int>& labels) {
    LabeledDataset ds;
    ds.images = to_matrix(images);
    ds.labels = labels;
    ds.image_rows = 1;
    ds.image_cols = ds.images.cols();
    if (ds.labels.size() != ds.images.rows()) {
        throw std::invalid_argument("images and labels disagree on the sample count");
    }
    return ds;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "noisy optical random projection training with a DP accountant";

    // clipping operators
    m.def("clip", [](const py::array_t<double>& v, double c) {
        return from_vector(clip(to_vector(v), c));
    }, py::arg("v"), py::arg("c"));
    m.def("scale", [](const py::array_t<double>& v, double s) {
        return from_vector(scale(to_vector(v), s));
    }, py::arg("v"), py::arg("s"));
    m.def("offset", [](const py::array_t<double>& v, double nu) {
        return from_vector(offset(to_vector(v), nu));
    }, py::arg("v"), py::arg("nu"));
    m.def("ternarize", [](const py::array_t<double>& e, double t) {
        const TernaryVector tv = ternarize(to_vector(e), t);
        py::array_t<std::int8_t> out(
            std::vector<py::ssize_t>{static_cast<py::ssize_t>(tv.size())});
        std::copy(tv.begin(), tv.end(), out.mutable_data());
        return out;
    }, py::arg("e"), py::arg("t"));

    py::class_<OpuSim>(m, "OpuSim")
        .def(py::init<std::size_t, std::size_t, double, std::uint64_t, std::uint64_t,
                      double, bool>(),
             py::arg("in_dim"), py::arg("out_dim"), py::arg("entry_std") = 0.0,
             py::arg("matrix_seed") = 1, py::arg("noise_seed") = 2,
             py::arg("noise_sigma") = 0.0, py::arg("per_pass_noise") = false)
        .def_property_readonly("in_dim", &OpuSim::in_dim)
        .def_property_readonly("out_dim", &OpuSim::out_dim)
        .def_property_readonly("noise_sigma", &OpuSim::noise_sigma)
        .def_property_readonly("matrix",
                               [](const OpuSim& o) { return from_matrix(o.matrix()); })
        .def("project", [](OpuSim& o, const py::array_t<double>& x) {
            return from_vector(o.project(to_vector(x)));
        }, py::arg("x"))
        .def("project_ternary", [](OpuSim& o, const py::array_t<double>& e, double t) {
            return from_vector(o.project_ternary(to_vector(e), t));
        }, py::arg("e"), py::arg("t"));

    // accountant
    m.def("renyi_gaussian",
          [](const py::array_t<double>& mean1, const py::array_t<double>& var1,
             const py::array_t<double>& mean2, const py::array_t<double>& var2,
             double alpha) {
              return renyi_gaussian({to_vector(mean1), to_vector(var1)},
                                    {to_vector(mean2), to_vector(var2)}, alpha);
          },
          py::arg("mean1"), py::arg("var1"), py::arg("mean2"), py::arg("var2"),
          py::arg("alpha"));
    m.def("sensitivity_bound",
          [](std::size_t m_, double sigma, std::size_t n_l, double gamma_min,
             double gamma_max, double tau_h_min, double tau_h_max, double tau_b) {
              return sensitivity_bound(bounds_from_kwargs(m_, sigma, n_l, gamma_min,
                                                          gamma_max, tau_h_min, tau_h_max,
                                                          tau_b));
          },
          py::arg("m"), py::arg("sigma"), py::arg("n_l"), py::arg("gamma_min"),
          py::arg("gamma_max"), py::arg("tau_h_min"), py::arg("tau_h_max"),
          py::arg("tau_b"));
    m.def("epsilon_pdfa",
          [](std::size_t m_, double sigma, std::size_t n_l, double gamma_min,
             double gamma_max, double tau_h_min, double tau_h_max, double tau_b,
             double alpha, const std::string& variant) {
              return epsilon_pdfa(bounds_from_kwargs(m_, sigma, n_l, gamma_min, gamma_max,
                                                     tau_h_min, tau_h_max, tau_b),
                                  alpha, parse_bound_variant(variant));
          },
          py::arg("m"), py::arg("sigma"), py::arg("n_l"), py::arg("gamma_min"),
          py::arg("gamma_max"), py::arg("tau_h_min"), py::arg("tau_h_max"),
          py::arg("tau_b"), py::arg("alpha"), py::arg("variant") = "main");
    m.def("epsilon_equal_cov",
          [](std::size_t m_, double sigma, std::size_t n_l, double gamma_min,
             double gamma_max, double tau_h_min, double tau_h_max, double tau_b,
             double alpha) {
              return epsilon_equal_cov(bounds_from_kwargs(m_, sigma, n_l, gamma_min,
                                                          gamma_max, tau_h_min, tau_h_max,
                                                          tau_b),
                                       alpha);
          },
          py::arg("m"), py::arg("sigma"), py::arg("n_l"), py::arg("gamma_min"),
          py::arg("gamma_max"), py::arg("tau_h_min"), py::arg("tau_h_max"),
          py::arg("tau_b"), py::arg("alpha"));
    m.def("epsilon_saturating",
          [](std::size_t m_, double sigma, std::size_t n_l, double gamma_min,
             double gamma_max, double tau_h_min, double tau_h_max, double tau_b,
             double alpha) {
              return epsilon_saturating(bounds_from_kwargs(m_, sigma, n_l, gamma_min,
                                                           gamma_max, tau_h_min,
                                                           tau_h_max, tau_b),
                                        alpha);
          },
          py::arg("m"), py::arg("sigma"), py::arg("n_l"), py::arg("gamma_min"),
          py::arg("gamma_max"), py::arg("tau_h_min"), py::arg("tau_h_max"),
          py::arg("tau_b"), py::arg("alpha"));
    m.def("compose", [](const std::vector<double>& eps, const std::vector<std::size_t>& cols,
                        std::size_t steps, const std::string& mode) {
        return compose(eps, cols, steps,
                       mode == "uniform" ? Composition::Uniform : Composition::PerLayer);
    }, py::arg("eps_per_column"), py::arg("columns"), py::arg("steps"),
       py::arg("mode") = "per-layer");
    m.def("rdp_to_dp", &rdp_to_dp, py::arg("alpha"), py::arg("eps_rdp"), py::arg("delta"));

    m.def("audit_config", [](const std::string& config_text) {
        return report_to_dict(run_audit(parse_config_text(config_text)));
    }, py::arg("config_text"),
       "evaluate the accountant for a config document, without training");

    // training on in-memory arrays
    m.def("train_arrays",
          [](const py::array_t<double>& images, const std::vector<int>& labels,
             const py::array_t<double>& test_images, const std::vector<int>& test_labels,
             const std::vector<std::size_t>& widths, const std::string& algorithm,
             bool private_mechanism, std::size_t epochs, std::size_t batch_size,
             double learning_rate, double momentum, double sigma, double ternary_threshold,
             double tau_h_min, double tau_h_max, double tau_b, bool magnitude_floor,
             std::uint64_t seed) {
              const LabeledDataset train_set = dataset_from_arrays(images, labels);
              const LabeledDataset test_set = dataset_from_arrays(test_images, test_labels);
              TrainConfig cfg;
              cfg.algorithm = parse_algorithm(algorithm);
              cfg.private_mechanism = private_mechanism;
              cfg.epochs = epochs;
              cfg.batch_size = batch_size;
              cfg.learning_rate = learning_rate;
              cfg.momentum = momentum;
              cfg.sigma = sigma;
              cfg.ternary_threshold = ternary_threshold;
              cfg.clip.tau_h_min = tau_h_min;
              cfg.clip.tau_h_max = tau_h_max;
              cfg.clip.tau_b = tau_b;
              cfg.clip.magnitude_floor = magnitude_floor;
              cfg.seed_init = seed;
              cfg.seed_shuffle = seed + 1000;
              cfg.seed_noise = seed + 2000;
              cfg.seed_feedback = seed + 3000;
              NetworkSpec spec{widths, ActivationKind::Tanh};
              const TrainResult result =
                  train(cfg, spec, train_set, nullptr, &test_set);
              py::dict out;
              out["final_test_acc"] = result.metrics.final_test_acc;
              out["test_acc"] = result.metrics.test_acc;
              out["train_loss"] = result.metrics.train_loss;
              out["total_steps"] = result.metrics.total_steps;
              out["max_abs_z"] = result.metrics.max_abs_z;
              return out;
          },
          py::arg("images"), py::arg("labels"), py::arg("test_images"),
          py::arg("test_labels"), py::arg("widths"), py::arg("algorithm") = "dfa",
          py::arg("private_mechanism") = false, py::arg("epochs") = 1,
          py::arg("batch_size") = 32, py::arg("learning_rate") = 0.01,
          py::arg("momentum") = 0.9, py::arg("sigma") = 0.0,
          py::arg("ternary_threshold") = 0.15, py::arg("tau_h_min") = 0.1,
          py::arg("tau_h_max") = 1.0, py::arg("tau_b") = 1.0,
          py::arg("magnitude_floor") = false, py::arg("seed") = 1);
}
