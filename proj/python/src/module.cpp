#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <string>
#include <vector>

#include "brickscan/bake.hpp"
#include "brickscan/cascade.hpp"
#include "brickscan/commands.hpp"
#include "brickscan/detect.hpp"
#include "brickscan/error.hpp"
#include "brickscan/integral.hpp"
#include "brickscan/io.hpp"
#include "brickscan/mesh.hpp"
#include "brickscan/parallel.hpp"
#include "brickscan/pipeline.hpp"
#include "brickscan/raster.hpp"
#include "brickscan/wall.hpp"

namespace py = pybind11;
using namespace brickscan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const GrayRaster& img) {
  Array out({img.height, img.width});
  std::memcpy(out.mutable_data(), img.values.data(), img.values.size() * sizeof(double));
  return out;
}

Array to_numpy(const RgbRaster& img) {
  Array out({img.height, img.width, 3});
  double* p = out.mutable_data();
  for (const Rgb& c : img.values) {
    *p++ = c[0];
    *p++ = c[1];
    *p++ = c[2];
  }
  return out;
}

GrayRaster from_numpy(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  GrayRaster img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.values.data(), a.data(), img.values.size() * sizeof(double));
  return img;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["detections"] = r.detections;
  d["annotations"] = r.annotations;
  d["true_positives"] = r.true_positives;
  d["precision"] = r.precision_defined ? py::object(py::float_(r.precision)) : py::object(py::none());
  d["recall"] = r.recall_defined ? py::object(py::float_(r.recall)) : py::object(py::none());
  d["recall_H"] = r.recall_h;
  d["recall_V"] = r.recall_v;
  d["labels_per_brick"] = r.labels_per_brick;
  d["mean_labels_per_brick"] = r.mean_labels_per_brick;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic brick walls, surface maps and a Viola-Jones cascade detector";

  // Raised for every library error; `code` carries the error code name.
  static py::handle error_type = py::exception<Error>(m, "BrickscanError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(error_type)(e.what());
      err.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), err.ptr());
    }
  });

  py::class_<Rect>(m, "Rect")
      .def(py::init<double, double, double, double>(), py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"))
      .def_readwrite("x", &Rect::x)
      .def_readwrite("y", &Rect::y)
      .def_readwrite("w", &Rect::w)
      .def_readwrite("h", &Rect::h)
      .def("__eq__", [](const Rect& a, const Rect& b) { return a == b; })
      .def("__repr__", [](const Rect& r) {
        return "Rect(" + std::to_string(r.x) + ", " + std::to_string(r.y) + ", " + std::to_string(r.w) + ", " +
               std::to_string(r.h) + ")";
      });
  m.def("iou", &iou);

  py::class_<Annotation>(m, "Annotation")
      .def_readonly("rect", &Annotation::rect)
      .def_readonly("brick_id", &Annotation::brick_id)
      .def_property_readonly("orientation", [](const Annotation& a) { return std::string(to_string(a.orientation)); })
      .def_property_readonly("brick_type", [](const Annotation& a) { return std::string(to_string(a.brick_type)); });

  py::class_<Detection>(m, "Detection")
      .def(py::init([](const Rect& r, double score, int neighbors, std::string label) {
             return Detection{r, score, neighbors, std::move(label)};
           }),
           py::arg("rect"), py::arg("score") = 0.0, py::arg("neighbors") = 1, py::arg("label") = "brick")
      .def_readwrite("rect", &Detection::rect)
      .def_readwrite("score", &Detection::score)
      .def_readwrite("neighbors", &Detection::neighbors)
      .def_readwrite("label", &Detection::label);

  py::class_<TriangleMesh>(m, "TriangleMesh")
      .def_property_readonly("vertices",
                             [](const TriangleMesh& t) {
                               Array a({static_cast<py::ssize_t>(t.vertices.size()), py::ssize_t{3}});
                               double* p = a.mutable_data();
                               for (const Vec3& v : t.vertices) {
                                 *p++ = v.x;
                                 *p++ = v.y;
                                 *p++ = v.z;
                               }
                               return a;
                             })
      .def_property_readonly("triangles",
                             [](const TriangleMesh& t) {
                               py::array_t<std::uint32_t> a({static_cast<py::ssize_t>(t.triangles.size()), py::ssize_t{3}});
                               std::memcpy(a.mutable_data(), t.triangles.data(), t.triangles.size() * 3 * sizeof(std::uint32_t));
                               return a;
                             })
      .def("to_obj", [](const TriangleMesh& t) { return write_obj(t); });
  m.def("read_obj", [](const std::string& text) { return read_obj(text); });

  py::class_<WallModel>(m, "WallModel")
      .def_readonly("mesh", &WallModel::mesh)
      .def_readonly("annotations", &WallModel::annotations);
  m.def(
      "generate_wall",
      [](const std::string& pattern, std::uint64_t seed, bool ideal) {
        return generate_wall(parse_pattern(pattern), ideal ? BrickSpec::ideal() : BrickSpec{}, seed);
      },
      py::arg("pattern"), py::arg("seed") = 0, py::arg("ideal") = false,
      "Wall mesh and annotations from pattern DSL text.");

  py::class_<OrthoFrame>(m, "OrthoFrame")
      .def_readonly("width", &OrthoFrame::width)
      .def_readonly("height", &OrthoFrame::height)
      .def_readonly("pixel_size", &OrthoFrame::pixel_size)
      .def_property_readonly("cols", &OrthoFrame::cols)
      .def_property_readonly("rows", &OrthoFrame::rows)
      .def("pixel_to_world", &OrthoFrame::pixel_to_world)
      .def("world_to_pixel", &OrthoFrame::world_to_pixel);
  m.def("frame_from_mesh", &frame_from_mesh, py::arg("mesh"), py::arg("pixel_size"), py::arg("margin") = 30.0);

  m.def(
      "bake_height",
      [](const TriangleMesh& mesh, const OrthoFrame& f, double depth_range) {
        return to_numpy(bake_height(mesh, f, depth_range));
      },
      py::arg("mesh"), py::arg("frame"), py::arg("depth_range") = 60.0);
  m.def(
      "bake_maps",
      [](const TriangleMesh& mesh, const OrthoFrame& f, int rays_per_pixel, std::uint64_t seed) {
        BakeParams p;
        p.rays_per_pixel = rays_per_pixel;
        p.seed = seed;
        SurfaceMapSet s;
        {
          py::gil_scoped_release release;
          s = bake_map_set(mesh, f, p);
        }
        py::dict d;
        d["height"] = to_numpy(s.height);
        d["normal"] = to_numpy(s.normal);
        d["ao"] = to_numpy(s.ao);
        d["curvature"] = to_numpy(s.curvature);
        return d;
      },
      py::arg("mesh"), py::arg("frame"), py::arg("rays_per_pixel") = 16, py::arg("seed") = 0,
      "Height, normal (H x W x 3), AO and curvature maps as float arrays.");

  m.def(
      "rect_sum",
      [](const Array& img, int x, int y, int w, int h) { return IntegralImage(from_numpy(img)).rect_sum({x, y, w, h}); },
      "Sum of 16-bit quantised samples over a rectangle.");

  m.def(
      "group_rectangles",
      [](const std::vector<Detection>& d, int min_neighbors, double eps) { return group_rectangles(d, min_neighbors, eps); },
      py::arg("detections"), py::arg("min_neighbors"), py::arg("eps") = 0.2);

  m.def(
      "match_template_ncc",
      [](const Array& img, const Array& tmpl, double threshold) {
        const TemplateMatch tm = match_template_ncc(from_numpy(img), from_numpy(tmpl), threshold);
        Array scores({tm.scores.height, tm.scores.width});
        std::memcpy(scores.mutable_data(), tm.scores.values.data(), tm.scores.values.size() * sizeof(double));
        py::list peaks;
        for (const auto& p : tm.peaks) peaks.append(py::make_tuple(p.x, p.y, p.score));
        return py::make_tuple(scores, peaks);
      },
      py::arg("image"), py::arg("template"), py::arg("threshold") = 0.9,
      "(scores, [(x, y, score), ...]) with peaks in descending score.");

  py::class_<CascadeModel>(m, "CascadeModel")
      .def_readonly("window_w", &CascadeModel::window_w)
      .def_readonly("window_h", &CascadeModel::window_h)
      .def_property_readonly("stage_count", [](const CascadeModel& c) { return c.stages.size(); })
      .def_property_readonly("crop_dilation", [](const CascadeModel& c) { return c.metadata.crop_dilation; })
      .def("to_json", [](const CascadeModel& c) { return cascade_to_json(c); });
  m.def("load_cascade", [](const std::filesystem::path& p) { return cascade_from_json(read_text_file(p)); });

  m.def(
      "detect",
      [](const Array& img, const CascadeModel& model, double scale_factor, int min_neighbors, double group_eps,
         bool face_rects) {
        DetectParams p;
        p.scale_factor = scale_factor;
        p.min_neighbors = min_neighbors;
        p.group_eps = group_eps;
        const GrayRaster g = from_numpy(img);
        std::vector<Detection> d;
        {
          py::gil_scoped_release release;
          d = detect_multiscale(g, model, p);
        }
        if (face_rects) to_face_rects(d, model.metadata.crop_dilation);
        return d;
      },
      py::arg("image"), py::arg("model"), py::arg("scale_factor") = 1.1, py::arg("min_neighbors") = 3,
      py::arg("group_eps") = 0.15, py::arg("face_rects") = true);

  m.def(
      "evaluate",
      [](const std::vector<Detection>& d, const std::vector<Annotation>& a, const OrthoFrame& f, double iou_threshold) {
        return report_dict(evaluate(d, a, f, iou_threshold));
      },
      py::arg("detections"), py::arg("annotations"), py::arg("frame"), py::arg("iou_threshold") = 0.5);

  m.def(
      "run_all",
      [](const std::filesystem::path& out, std::uint64_t seed, const std::string& train_pattern,
         const std::string& heldout_pattern) {
        PipelineConfig c;
        c.seed = seed;
        c.train_pattern = train_pattern;
        c.heldout_pattern = heldout_pattern;
        py::gil_scoped_release release;
        run_all(c, out);
      },
      py::arg("out_dir"), py::arg("seed"), py::arg("train_pattern"), py::arg("heldout_pattern"),
      "End-to-end run with the default configuration into out_dir.");

  m.def("set_thread_count", &set_thread_count);
  m.def("thread_count", &thread_count);
}
