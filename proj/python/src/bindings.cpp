#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "radiomap/baseline.hpp"
#include "radiomap/dowjons.hpp"
#include "radiomap/experiment.hpp"
#include "radiomap/metrics.hpp"
#include "radiomap/nasdac.hpp"
#include "radiomap/simulate.hpp"
#include "radiomap/theory.hpp"

namespace py = pybind11;
using namespace radiomap;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoolGrid = py::array_t<bool, py::array::c_style | py::array::forcecast>;

// An (I, J, K) C-ordered array is exactly the K x IJ column-major unfolding.
RadioMapTensor to_tensor(const Array3& a) {
  if (a.ndim() != 3) throw ShapeError("expected an (I, J, K) array");
  const GridSpec g{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
  return RadioMapTensor(g, Eigen::Map<const Matrix>(a.data(), g.bins, g.cells()));
}

py::array_t<double> to_array(const RadioMapTensor& x) {
  const GridSpec& g = x.grid();
  py::array_t<double> out({g.rows, g.cols, g.bins});
  Eigen::Map<Matrix>(out.mutable_data(), g.bins, g.cells()) = x.unfolded();
  return out;
}

SensingMask to_mask(const BoolGrid& m) {
  if (m.ndim() != 2) throw ShapeError("expected an (I, J) boolean mask");
  const int rows = static_cast<int>(m.shape(0)), cols = static_cast<int>(m.shape(1));
  std::vector<int> flat;
  for (int q = 0; q < rows * cols; ++q)
    if (m.data()[q]) flat.push_back(q);
  return SensingMask::from_flat(rows, cols, flat);
}

py::array_t<bool> mask_array(const SensingMask& m) {
  py::array_t<bool> out({m.rows(), m.cols()});
  std::fill(out.mutable_data(), out.mutable_data() + out.size(), false);
  for (int q : m.columns()) out.mutable_data()[q] = true;
  return out;
}

FiberObservations observations(const Array3& tensor, const BoolGrid& mask) { return observe(to_tensor(tensor), to_mask(mask)); }

py::dict result_dict(const MethodOutput& out) {
  py::dict d;
  d["estimate"] = to_array(out.completion.estimate);
  if (!out.completion.psds.empty()) {
    const int R = static_cast<int>(out.completion.psds.size());
    Matrix C(out.completion.psds[0].values().size(), R);
    for (int r = 0; r < R; ++r) C.col(r) = out.completion.psds[r].values();
    std::vector<GridMatrix> slfs;
    for (const Slf& s : out.completion.slfs) slfs.push_back(s.values());
    d["C"] = C;
    d["slfs"] = slfs;
  }
  d["seconds"] = out.completion.diagnostics.total_seconds;
  d["warnings"] = out.completion.diagnostics.warnings;
  if (!out.trace.empty()) {
    std::vector<double> obj;
    for (const auto& row : out.trace) obj.push_back(row.objective);
    d["objective_trace"] = obj;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_radiomap, m) {
  m.doc() = "Radio map tensor completion with learned spatial priors";

  py::register_exception<Error>(m, "RadiomapError", PyExc_RuntimeError);

  py::class_<Autoencoder>(m, "Autoencoder")
      .def_static("load", &load_autoencoder, py::arg("path"))
      .def("save", [](const Autoencoder& ae, const std::string& path) { save_autoencoder(ae, path); })
      .def_property_readonly("rows", [](const Autoencoder& ae) { return ae.arch.rows; })
      .def_property_readonly("cols", [](const Autoencoder& ae) { return ae.arch.cols; })
      .def_property_readonly("latent_dim", [](const Autoencoder& ae) { return ae.arch.latent_dim; })
      .def("lipschitz_product", [](const Autoencoder& ae) { return lipschitz_product(ae.decoder).product; })
      .def(
          "decode", [](const Autoencoder& ae, const Vector& z) { return GridMatrix(forward_decoder(ae.decoder, z)); },
          py::arg("z"));

  m.def(
      "simulate",
      [](int rows, int cols, int bins, int emitters, double sampling_fraction, std::optional<double> eta,
         std::optional<double> dcorr, std::optional<double> snr_db, double min_distance, bool sparse_occupancy,
         std::uint64_t seed) {
        SceneConfig cfg;
        cfg.grid = {rows, cols, bins};
        cfg.emitters = emitters;
        cfg.sampling_fraction = sampling_fraction;
        if (eta) cfg.shadow_variance = {*eta, *eta};
        if (dcorr) cfg.decorrelation = {*dcorr, *dcorr};
        cfg.snr_db = snr_db;
        cfg.min_distance = min_distance;
        cfg.sparse_occupancy = sparse_occupancy;
        cfg.seed = seed;
        cfg.validate();
        const Scene s = gen_scene(cfg);
        py::dict d;
        d["truth"] = to_array(s.truth);
        d["noise"] = to_array(RadioMapTensor(s.truth.grid(), s.noise));
        d["mask"] = mask_array(s.observations.mask());
        d["C"] = s.factors.C;
        d["S"] = s.factors.S;
        std::vector<std::pair<double, double>> loc;
        for (const auto& e : s.emitters) loc.emplace_back(e.location[0], e.location[1]);
        d["locations"] = loc;
        d["warnings"] = s.warnings;
        return d;
      },
      py::arg("rows") = 32, py::arg("cols") = 32, py::arg("bins") = 64, py::arg("emitters") = 7,
      py::arg("sampling_fraction") = 0.1, py::arg("eta") = py::none(), py::arg("dcorr") = py::none(),
      py::arg("snr_db") = py::none(), py::arg("min_distance") = 0.5, py::arg("sparse_occupancy") = true,
      py::arg("seed") = 1, "Simulated scene as a dict of arrays; the observed tensor is truth + noise on mask.");

  m.def(
      "complete",
      [](const Array3& tensor, const BoolGrid& mask, const std::string& method, int rank, const Autoencoder* ae) {
        const FiberObservations obs = observations(tensor, mask);
        py::gil_scoped_release release;
        MethodOutput out = run_method(parse_method(method), obs, rank, ae);
        py::gil_scoped_acquire acquire;
        return result_dict(out);
      },
      py::arg("tensor"), py::arg("mask"), py::arg("method") = "nasdac", py::arg("rank") = 0,
      py::arg("autoencoder") = nullptr, "Completes an (I, J, K) tensor from the fibers at mask; values off the mask are ignored.");

  m.def(
      "sre", [](const Array3& est, const Array3& truth) { return sre(to_tensor(est), to_tensor(truth)); },
      py::arg("estimate"), py::arg("truth"));
  m.def(
      "nae", [](const Matrix& est, const Matrix& truth) { return nae(est, truth); }, py::arg("estimate"),
      py::arg("truth"));

  py::class_<BoundInputs>(m, "BoundInputs")
      .def(py::init<>())
      .def_readwrite("R", &BoundInputs::R)
      .def_readwrite("K", &BoundInputs::K)
      .def_readwrite("D", &BoundInputs::D)
      .def_readwrite("alpha", &BoundInputs::alpha)
      .def_readwrite("beta", &BoundInputs::beta)
      .def_readwrite("P", &BoundInputs::P)
      .def_readwrite("q", &BoundInputs::q)
      .def_readwrite("upsilon", &BoundInputs::upsilon)
      .def_readwrite("nu", &BoundInputs::nu)
      .def_readwrite("delta", &BoundInputs::delta)
      .def_readwrite("c", &BoundInputs::c)
      .def_readwrite("omega", &BoundInputs::omega)
      .def_readwrite("I", &BoundInputs::I)
      .def_readwrite("J", &BoundInputs::J);
  m.def("covering_log", &covering_log, py::arg("inputs"), py::arg("eps"));
  m.def("gap_bound", &gap_bound, py::arg("inputs"));
  m.def(
      "recovery_budget",
      [](const BoundInputs& in, double noise_full, double noise_sensed, std::optional<double> err_rep) {
        const RecoveryBudget b = recovery_budget(in, NoiseNorms{noise_full, noise_sensed}, err_rep);
        py::dict d;
        for (const auto& t : b.terms) d[py::str(t.label)] = t.value;
        d["total"] = b.total;
        return d;
      },
      py::arg("inputs"), py::arg("noise_full") = 0.0, py::arg("noise_sensed") = 0.0, py::arg("err_rep") = py::none());
}
