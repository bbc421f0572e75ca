#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "tvnet/io.hpp"
#include "tvnet/losses.hpp"
#include "tvnet/solver.hpp"
#include "tvnet/synth.hpp"
#include "tvnet/trainer.hpp"
#include "tvnet/unrolled.hpp"
#include "tvnet/visualize.hpp"

namespace py = pybind11;
using namespace tvnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid to_grid(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + a.size());
  return Grid(h, w, std::move(data));
}

Array from_grid(const Grid& g) {
  Array out({g.height(), g.width()});
  std::memcpy(out.mutable_data(), g.data().data(), g.size() * sizeof(double));
  return out;
}

FlowField to_flow(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 2) throw std::invalid_argument("expected an (H, W, 2) flow array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  FlowField f(h, w);
  const double* src = a.data();
  for (std::size_t k = 0; k < f.size(); ++k) {
    f.u1[k] = src[2 * k];
    f.u2[k] = src[2 * k + 1];
  }
  return f;
}

Array from_flow(const FlowField& f) {
  Array out({f.height(), f.width(), 2});
  double* dst = out.mutable_data();
  for (std::size_t k = 0; k < f.size(); ++k) {
    dst[2 * k] = f.u1[k];
    dst[2 * k + 1] = f.u2[k];
  }
  return out;
}

Array from_vector(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

Kernel1D& kernel_by_name(DifferenceKernels& k, const std::string& name) {
  if (name == "image_x") return k.image_x;
  if (name == "image_y") return k.image_y;
  if (name == "flow_x") return k.flow_x;
  if (name == "flow_y") return k.flow_y;
  if (name == "div_x") return k.div_x;
  if (name == "div_y") return k.div_y;
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

py::dict record_dict(const TrainRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["loss"] = r.loss;
  d["mean_epe"] = r.mean_epe();
  d["pair_epe"] = r.pair_epe;
  d["ms"] = r.ms;
  return d;
}

std::vector<TrainingPair> to_pairs(const py::list& pairs) {
  std::vector<TrainingPair> out;
  for (const auto& item : pairs) {
    const auto t = item.cast<py::tuple>();
    if (t.size() != 3) throw std::invalid_argument("pairs must be (I0, I1, gt) tuples");
    TrainingPair p{to_grid(t[0].cast<Array>()), to_grid(t[1].cast<Array>()), to_flow(t[2].cast<Array>()), {},
                   "pair" + std::to_string(out.size())};
    p.mask = validity_mask(p.gt);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "TV-L1 optical flow and its differentiable unrolled form";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &SolverConfig::lambda)
      .def_readwrite("theta", &SolverConfig::theta)
      .def_readwrite("tau", &SolverConfig::tau)
      .def_readwrite("eps_stop", &SolverConfig::eps_stop)
      .def_readwrite("eps_div", &SolverConfig::eps_div)
      .def_readwrite("n_scales", &SolverConfig::n_scales)
      .def_readwrite("n_warps", &SolverConfig::n_warps)
      .def_readwrite("n_iters", &SolverConfig::n_iters)
      .def_readwrite("scale_factor", &SolverConfig::scale_factor)
      .def("validate", &SolverConfig::validate)
      .def("with_shape", &SolverConfig::with_shape, py::arg("scales"), py::arg("warps"), py::arg("iters"))
      .def("__eq__", [](const SolverConfig& a, const SolverConfig& b) { return a == b; })
      .def("__repr__", [](const SolverConfig& c) {
        return "SolverConfig(" + std::to_string(c.n_scales) + "-" + std::to_string(c.n_warps) + "-" +
               std::to_string(c.n_iters) + ")";
      });

  py::enum_<InitMode>(m, "InitMode")
      .value("zero", InitMode::zero)
      .value("constant_vector", InitMode::constant_vector)
      .value("full_field", InitMode::full_field);

  py::class_<TVNetParams>(m, "Params")
      .def(py::init<>())
      .def_static("initial", &TVNetParams::initial)
      .def_static("constant", &TVNetParams::constant, py::arg("u1"), py::arg("u2"))
      .def_static("field", [](const Array& u0) { return TVNetParams::field(to_flow(u0)); })
      .def_readonly("u0_mode", &TVNetParams::u0_mode)
      .def_property_readonly("parameter_count", &TVNetParams::parameter_count)
      .def("flatten", [](const TVNetParams& p) { return from_vector(p.flatten()); })
      .def("assign",
           [](TVNetParams& p, const Array& flat) {
             p.assign(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
           })
      .def("kernel",
           [](TVNetParams& p, const std::string& name) { return kernel_by_name(p.kernels, name).taps; })
      .def("set_kernel",
           [](TVNetParams& p, const std::string& name, std::vector<double> taps) {
             Kernel1D& k = kernel_by_name(p.kernels, name);
             if (taps.size() != k.taps.size()) throw std::invalid_argument("tap count mismatch");
             k.taps = std::move(taps);
           })
      .def("__eq__", [](const TVNetParams& a, const TVNetParams& b) { return a == b; });

  m.def(
      "solve",
      [](const Array& I0, const Array& I1, const SolverConfig& cfg, const TVNetParams& params) {
        const Grid a = to_grid(I0), b = to_grid(I1);
        FlowField f;
        {
          py::gil_scoped_release release;
          f = solve_multiscale(a, b, cfg, params);
        }
        return from_flow(f);
      },
      py::arg("I0"), py::arg("I1"), py::arg("config") = SolverConfig{}, py::arg("params") = TVNetParams{},
      "Coarse-to-fine TV-L1 flow from I0 to I1 as an (H, W, 2) array.");

  py::class_<ForwardResult>(m, "Forward")
      .def_property_readonly("flow", [](const ForwardResult& r) { return from_flow(r.flow); })
      .def_property_readonly("layers", [](const ForwardResult& r) { return r.tape.layer_count(); })
      .def(
          "backward",
          [](const ForwardResult& r, const Array& d_flow) {
            const BackwardResult b = backward(r.tape, to_flow(d_flow));
            return py::make_tuple(from_vector(b.grads.flatten()), from_grid(b.d_I0), from_grid(b.d_I1));
          },
          py::arg("d_flow"), "Returns (flat parameter gradient, d_I0, d_I1).");

  m.def(
      "forward",
      [](const Array& I0, const Array& I1, const TVNetParams& params, const SolverConfig& cfg) {
        return forward(to_grid(I0), to_grid(I1), params, cfg);
      },
      py::arg("I0"), py::arg("I1"), py::arg("params"), py::arg("config"));

  m.def(
      "grad_check",
      [](const Array& I0, const Array& I1, const TVNetParams& params, const SolverConfig& cfg,
         const Array& gt, int n_probes, double step, std::uint64_t seed) {
        const FlowField target = to_flow(gt);
        const GradCheckReport r = grad_check(
            to_grid(I0), to_grid(I1), params, cfg, [&](const FlowField& f) { return epe(f, target); }, n_probes,
            step, seed);
        return py::make_tuple(r.max_relative_error, r.probes.size());
      },
      py::arg("I0"), py::arg("I1"), py::arg("params"), py::arg("config"), py::arg("gt"), py::arg("n_probes") = 50,
      py::arg("step") = 1e-6, py::arg("seed") = 0,
      "Finite-difference check of the EPE gradient; returns (max relative error, probes).");

  m.def(
      "epe",
      [](const Array& pred, const Array& gt) {
        const FlowField g = to_flow(gt);
        const Grid mask = validity_mask(g);
        const LossValue l = epe(to_flow(pred), g, &mask);
        return py::make_tuple(l.value, from_flow(l.seed));
      },
      py::arg("pred"), py::arg("gt"), "Masked average end-point error and its derivative.");

  m.def(
      "flow_energy",
      [](const Array& I0, const Array& I1, const Array& flow, double lambda) {
        const LossValue l = flow_energy(to_grid(I0), to_grid(I1), to_flow(flow), lambda);
        return py::make_tuple(l.value, from_flow(l.seed));
      },
      py::arg("I0"), py::arg("I1"), py::arg("flow"), py::arg("lambda_"));

  m.def(
      "synth_pair",
      [](const std::string& kind, int size, double magnitude, std::uint64_t seed) {
        const SyntheticPair s = synth_pair(parse_synth_kind(kind), size, magnitude, seed);
        return py::make_tuple(from_grid(s.I0), from_grid(s.I1), from_flow(s.gt));
      },
      py::arg("kind") = "translate", py::arg("size") = 64, py::arg("magnitude") = 3.0, py::arg("seed") = 0);

  m.def(
      "train",
      [](const py::list& pairs, const TVNetParams& start, const SolverConfig& cfg, const std::string& mode,
         double learning_rate, int iterations, int log_every, int threads) {
        const auto data = to_pairs(pairs);
        TrainConfig tc;
        tc.mode = parse_train_mode(mode);
        tc.learning_rate = learning_rate;
        tc.max_iterations = iterations;
        tc.log_every = log_every;
        tc.threads = threads;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(data, start, cfg, tc);
        }
        py::list records;
        for (const auto& rec : r.records) records.append(record_dict(rec));
        return py::make_tuple(r.params, records);
      },
      py::arg("pairs"), py::arg("params"), py::arg("config"), py::arg("mode") = "all",
      py::arg("learning_rate") = 0.05, py::arg("iterations") = 3000, py::arg("log_every") = 1,
      py::arg("threads") = 1, "Full-batch gradient descent on (I0, I1, gt) tuples.");

  m.def(
      "evaluate",
      [](const py::list& pairs, const TVNetParams& params, const SolverConfig& cfg, int threads) {
        const auto data = to_pairs(pairs);
        py::gil_scoped_release release;
        return evaluate(data, params, cfg, threads);
      },
      py::arg("pairs"), py::arg("params"), py::arg("config"), py::arg("threads") = 1);

  m.def(
      "flow_to_color",
      [](const Array& flow, std::optional<double> max_magnitude) {
        const ColorImage c = flow_to_color(to_flow(flow), max_magnitude);
        py::array_t<std::uint8_t> out({c.height, c.width, 3});
        std::memcpy(out.mutable_data(), c.rgb.data(), c.rgb.size());
        return out;
      },
      py::arg("flow"), py::arg("max_magnitude") = py::none());

  m.def("read_flo", [](const std::filesystem::path& p) { return from_flow(read_flo(p)); });
  m.def("write_flo", [](const std::filesystem::path& p, const Array& f) { write_flo(p, to_flow(f)); });
  m.def("read_image", [](const std::filesystem::path& p) { return from_grid(read_image(p)); });
  m.def("write_image", [](const std::filesystem::path& p, const Array& g) { write_image(p, to_grid(g)); });
  m.def("read_params", &read_params);
  m.def("write_params", &write_params);
  m.def("read_config", [](const std::filesystem::path& p) { return read_config(p); });
}
