#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>

#include "bsda/distance.hpp"
#include "bsda/error.hpp"
#include "bsda/heatmap.hpp"
#include "bsda/metrics.hpp"
#include "bsda/synth.hpp"

namespace py = pybind11;
using namespace bsda;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

void require_2d(const py::array& a, const char* what) {
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be 2-D");
}

BinaryMask to_mask(const U8Array& a) {
  require_2d(a, "mask");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> cells(a.data(), a.data() + a.size());
  for (auto& c : cells) c = c != 0;
  return BinaryMask(h, w, std::move(cells));
}

ScalarField to_field(const F64Array& a, FieldKind kind = FieldKind::Other) {
  require_2d(a, "field");
  return ScalarField(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                     std::vector<double>(a.data(), a.data() + a.size()), kind);
}

F64Array from_field(const ScalarField& f) {
  F64Array out({f.height(), f.width()});
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

py::array_t<bool> from_mask(const BinaryMask& m) {
  py::array_t<bool> out({m.height(), m.width()});
  std::copy(m.cells().begin(), m.cells().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_bsda, m) {
  m.doc() = "Distance maps, boundary heatmaps, segmentation metrics and synthetic samples.";

  // Messages start with the error code name, e.g. "EmptyForeground: ...".
  py::register_exception<Error>(m, "BsdaError", PyExc_ValueError);

  m.def("edt", [](const U8Array& feature) { return from_field(edt(to_mask(feature))); }, py::arg("feature"),
        "Euclidean distance from every pixel to the nearest nonzero pixel.");
  m.def("compute_sdm", [](const U8Array& mask) { return from_field(compute_sdm(to_mask(mask))); }, py::arg("mask"));
  m.def("brute_force_sdm", [](const U8Array& mask) { return from_field(brute_force_sdm(to_mask(mask))); },
        py::arg("mask"));
  m.def("normalize_sdm",
        [](const F64Array& sdm) { return from_field(normalize_sdm(to_field(sdm, FieldKind::RawSdm))); },
        py::arg("sdm"));
  m.def(
      "boundary_heatmap",
      [](const U8Array& mask, double sigma, double floor) {
        return from_field(boundary_heatmap(to_mask(mask), HeatmapParams{sigma, floor}));
      },
      py::arg("mask"), py::arg("sigma") = 2.0, py::arg("floor") = 0.001);
  m.def(
      "heatsum",
      [](const std::vector<F64Array>& fields) {
        std::vector<ScalarField> fs;
        for (const auto& f : fields) fs.push_back(to_field(f));
        return from_field(heatsum(fs));
      },
      py::arg("fields"));

  m.def(
      "dice_jaccard",
      [](const U8Array& pred, const U8Array& gt) {
        const Overlap o = dice_jaccard(to_mask(pred), to_mask(gt));
        return py::make_tuple(o.dice, o.jaccard);
      },
      py::arg("pred"), py::arg("gt"), "Percent Dice and Jaccard.");
  m.def(
      "surface_distances",
      [](const U8Array& pred, const U8Array& gt) {
        SurfaceDistances d = surface_distances(to_mask(pred), to_mask(gt));
        return py::make_tuple(std::move(d.pred_to_gt), std::move(d.gt_to_pred));
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "score",
      [](const U8Array& pred, const U8Array& gt) {
        const SampleScore s = score_sample("", to_mask(pred), to_mask(gt));
        py::dict out;
        out["dice"] = s.overlap.dice;
        out["jaccard"] = s.overlap.jaccard;
        out["asd"] = s.asd ? py::cast(*s.asd) : py::none();
        out["hd95"] = s.hd95 ? py::cast(*s.hd95) : py::none();
        return out;
      },
      py::arg("pred"), py::arg("gt"), "Per-sample metrics; distances are None when a mask is empty.");

  m.def(
      "synthetic_sample",
      [](const std::string& label, std::uint64_t seed, int image_size) {
        SynthConfig cfg;
        cfg.image_size = image_size;
        cfg.validate();
        std::mt19937_64 rng(seed);
        const SynthSample s = gen_sample(parse_class(label), rng, cfg);
        return py::make_tuple(from_field(s.image), from_mask(s.mask));
      },
      py::arg("label"), py::arg("seed") = 0, py::arg("image_size") = 64,
      "One (image, mask) pair of class 'normal', 'enlarged_irregular' or 'reduced'.");
}
