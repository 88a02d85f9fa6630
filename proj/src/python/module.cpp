// Python bindings for the core operations: image I/O, segmentation, both
// registration algorithms, warping, metrics and dataset synthesis.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mamreg/bspline.hpp"
#include "mamreg/demons.hpp"
#include "mamreg/errors.hpp"
#include "mamreg/field_io.hpp"
#include "mamreg/harness.hpp"
#include "mamreg/image_ops.hpp"
#include "mamreg/metrics.hpp"
#include "mamreg/pgm_io.hpp"
#include "mamreg/segmentation.hpp"
#include "mamreg/synth.hpp"

namespace py = pybind11;
using namespace mamreg;

namespace {

Image image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr,
                       double spacing_x, double spacing_y) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D array (rows, cols)");
    Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)), 0.0,
              spacing_x, spacing_y);
    std::memcpy(img.data.data(), arr.data(), sizeof(double) * img.size());
    return img;
}

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> arr({img.height, img.width});
    std::memcpy(arr.mutable_data(), img.data.data(), sizeof(double) * img.size());
    return arr;
}

Mask mask_from_array(const py::array_t<bool, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D boolean array");
    Mask mask(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
    const bool* src = arr.data();
    for (size_t i = 0; i < mask.size(); ++i) mask.data[i] = src[i] ? 1 : 0;
    return mask;
}

py::array_t<bool> mask_to_array(const Mask& mask) {
    py::array_t<bool> arr({mask.height, mask.width});
    bool* dst = arr.mutable_data();
    for (size_t i = 0; i < mask.size(); ++i) dst[i] = mask.data[i] != 0;
    return arr;
}

py::array_t<double> field_to_array(const DisplacementField& f) {
    py::array_t<double> arr({f.height, f.width, 2});
    double* dst = arr.mutable_data();
    for (size_t i = 0; i < f.size(); ++i) {
        dst[2 * i] = f.dx[i];
        dst[2 * i + 1] = f.dy[i];
    }
    return arr;
}

DisplacementField field_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr,
    double spacing_x, double spacing_y) {
    if (arr.ndim() != 3 || arr.shape(2) != 2)
        throw std::invalid_argument("expected an array of shape (rows, cols, 2)");
    DisplacementField f(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)),
                        spacing_x, spacing_y);
    const double* src = arr.data();
    for (size_t i = 0; i < f.size(); ++i) {
        f.dx[i] = src[2 * i];
        f.dy[i] = src[2 * i + 1];
    }
    return f;
}

Mask default_or_mask(const Image& fixed, const std::optional<Mask>& mask) {
    return mask ? *mask : segment_breast(fixed);
}

py::dict report_to_dict(const MetricReport& r) {
    py::dict d;
    d["ssd"] = r.ssd;
    d["cc"] = r.cc;
    d["mi"] = r.mi;
    d["h_joint"] = r.h_joint;
    d["n_pixels"] = r.n_pixels;
    d["cc_degenerate"] = r.cc_degenerate;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Deformable registration toolkit for bilateral mammography studies";

    py::register_exception<IoError>(m, "IoError");
    py::register_exception<FormatError>(m, "FormatError");
    py::register_exception<SegmentationError>(m, "SegmentationImageError");
    py::register_exception<RegistrationError>(m, "RegistrationError");
    py::register_exception<ConfigError>(m, "ConfigurationError");
    py::register_exception<DataError>(m, "DataError");

    py::class_<Image>(m, "Image")
        .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                         double spacing_x, double spacing_y) {
                 return image_from_array(arr, spacing_x, spacing_y);
             }),
             py::arg("array"), py::arg("spacing_x") = kDefaultSpacingMm,
             py::arg("spacing_y") = kDefaultSpacingMm)
        .def_readonly("width", &Image::width)
        .def_readonly("height", &Image::height)
        .def_readonly("spacing_x", &Image::spacing_x)
        .def_readonly("spacing_y", &Image::spacing_y)
        .def_property_readonly("array", &image_to_array)
        .def("__repr__", [](const Image& img) {
            return "<Image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                   " @" + std::to_string(img.spacing_x) + "mm>";
        });

    py::class_<Mask>(m, "Mask")
        .def(py::init([](py::array_t<bool, py::array::c_style | py::array::forcecast> arr) {
                 return mask_from_array(arr);
             }),
             py::arg("array"))
        .def_readonly("width", &Mask::width)
        .def_readonly("height", &Mask::height)
        .def("count", &Mask::count)
        .def_property_readonly("array", &mask_to_array);

    py::class_<DisplacementField>(m, "DisplacementField")
        .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                         double spacing_x, double spacing_y) {
                 return field_from_array(arr, spacing_x, spacing_y);
             }),
             py::arg("array"), py::arg("spacing_x"), py::arg("spacing_y"))
        .def_readonly("width", &DisplacementField::width)
        .def_readonly("height", &DisplacementField::height)
        .def_readonly("spacing_x", &DisplacementField::spacing_x)
        .def_readonly("spacing_y", &DisplacementField::spacing_y)
        .def_property_readonly("array", &field_to_array);

    // image I/O and core operations
    m.def("load_pgm", &load_pgm, py::arg("path"));
    m.def("save_pgm", &save_pgm, py::arg("image"), py::arg("path"), py::arg("bit_depth") = 16);
    m.def("load_field", &load_field, py::arg("path"));
    m.def("save_field", &save_field, py::arg("field"), py::arg("path"));
    m.def("resample", &resample, py::arg("image"), py::arg("width"), py::arg("height"));
    m.def("warp", &warp, py::arg("image"), py::arg("field"));
    m.def("flip_horizontal", py::overload_cast<const Image&>(&flip_horizontal), py::arg("image"));
    m.def("histogram_match", &histogram_match, py::arg("moving"), py::arg("reference"),
          py::arg("levels") = 1024, py::arg("landmarks") = 7);
    m.def("sample_bilinear", &sample_bilinear, py::arg("image"), py::arg("x_mm"), py::arg("y_mm"));

    m.def(
        "segment_breast",
        [](const Image& image, int border, double sigma_multiplier, int radius) {
            return segment_breast(image, {border, sigma_multiplier, radius});
        },
        py::arg("image"), py::arg("border") = 10, py::arg("sigma_multiplier") = 12.0,
        py::arg("radius") = 3);

    // metrics
    m.def("ssd", &ssd, py::arg("fixed"), py::arg("moving"), py::arg("mask"));
    m.def(
        "correlation",
        [](const Image& f, const Image& mv, const Mask& k) { return correlation(f, mv, k); },
        py::arg("fixed"), py::arg("moving"), py::arg("mask"));
    m.def("mutual_information", &mutual_information, py::arg("fixed"), py::arg("moving"),
          py::arg("mask"), py::arg("bins") = 64);
    m.def(
        "metrics",
        [](const Image& f, const Image& mv, const Mask& k, int bins) {
            return report_to_dict(compute_metrics(f, mv, k, bins));
        },
        py::arg("fixed"), py::arg("moving"), py::arg("mask"), py::arg("bins") = 64);
    m.def(
        "jeh_image",
        [](const Image& f, const Image& mv, const Mask& k, int bins, int size) {
            return jeh_image(joint_histogram(f, mv, k, bins), size);
        },
        py::arg("fixed"), py::arg("moving"), py::arg("mask"), py::arg("bins") = 256,
        py::arg("size") = 256);

    // demons registration
    m.def(
        "register_demons",
        [](const Image& fixed, const Image& moving, std::optional<Mask> mask,
           const std::string& variant, int max_iterations, double smoothing_sigma,
           double k_factor, double convergence_tol, int working_width, int working_height) {
            DemonsParams p;
            p.variant = variant == "symmetric" ? DemonsVariant::Symmetric : DemonsVariant::Classic;
            p.max_iterations = max_iterations;
            p.smoothing_sigma = smoothing_sigma;
            p.k_factor = k_factor;
            p.convergence_tol = convergence_tol;
            p.working_width = working_width;
            p.working_height = working_height;
            DemonsResult r;
            {
                py::gil_scoped_release release;
                r = register_demons(fixed, moving, default_or_mask(fixed, mask), p);
            }
            py::dict info;
            info["iterations"] = r.iterations;
            info["converged"] = r.converged;
            info["final_mean_update"] = r.final_mean_update;
            info["clamp_events"] = r.clamp_events;
            return py::make_tuple(r.field, info);
        },
        py::arg("fixed"), py::arg("moving"), py::arg("mask") = std::nullopt,
        py::arg("variant") = "classic", py::arg("max_iterations") = 500,
        py::arg("smoothing_sigma") = 1.0, py::arg("k_factor") = 0.0,
        py::arg("convergence_tol") = 1e-3, py::arg("working_width") = 219,
        py::arg("working_height") = 136);

    // b-spline registration
    py::class_<BSplineGrid>(m, "BSplineGrid")
        .def_readonly("nx", &BSplineGrid::nx)
        .def_readonly("ny", &BSplineGrid::ny)
        .def_readonly("spacing_x", &BSplineGrid::spacing_x)
        .def_readonly("spacing_y", &BSplineGrid::spacing_y)
        .def("displacement",
             [](const BSplineGrid& g, double x, double y) { return bspline_displacement(g, x, y); })
        .def("to_field", &grid_to_field, py::arg("width"), py::arg("height"),
             py::arg("pixel_spacing_x"), py::arg("pixel_spacing_y"))
        .def("save_json", &save_grid_json, py::arg("path"))
        .def_static("load_json", &load_grid_json, py::arg("path"));
    m.def("refine_grid", &refine_grid, py::arg("grid"));

    m.def(
        "register_bspline",
        [](const Image& fixed, const Image& moving, std::optional<Mask> mask, int levels,
           const std::vector<std::pair<int, int>>& grid_schedule, int max_iterations_per_level,
           double initial_step, double min_step, int mi_bins, int working_width,
           int working_height) {
            BSplineParams p;
            p.levels = levels;
            p.grid_schedule = grid_schedule;
            p.max_iterations_per_level = max_iterations_per_level;
            p.initial_step = initial_step;
            p.min_step = min_step;
            p.mi_bins = mi_bins;
            p.working_width = working_width;
            p.working_height = working_height;
            BSplineResult r;
            {
                py::gil_scoped_release release;
                r = register_bspline(fixed, moving, default_or_mask(fixed, mask), p);
            }
            py::dict info;
            info["iterations"] = r.iterations_total;
            info["final_mi"] = r.final_mi;
            py::list level_list;
            for (const auto& level : r.levels) {
                py::dict d;
                d["width"] = level.width;
                d["height"] = level.height;
                d["iterations"] = level.iterations;
                d["initial_mi"] = level.initial_mi;
                d["final_mi"] = level.final_mi;
                level_list.append(d);
            }
            info["levels"] = level_list;
            return py::make_tuple(r.grid, info);
        },
        py::arg("fixed"), py::arg("moving"), py::arg("mask") = std::nullopt,
        py::arg("levels") = 3,
        py::arg("grid_schedule") =
            std::vector<std::pair<int, int>>{{6, 5}, {10, 8}, {18, 14}},
        py::arg("max_iterations_per_level") = 100, py::arg("initial_step") = 2.0,
        py::arg("min_step") = 0.01, py::arg("mi_bins") = 64, py::arg("working_width") = 219,
        py::arg("working_height") = 136);

    // synthesis
    m.def(
        "make_breast_phantom",
        [](const std::string& view, int width, int height, double spacing, uint64_t seed) {
            return make_breast_phantom(view_from_string(view), width, height, spacing, seed);
        },
        py::arg("view") = "RCC", py::arg("width") = 548, py::arg("height") = 341,
        py::arg("spacing") = 0.4, py::arg("seed") = 1);
    m.def(
        "apply_affine",
        [](const Image& img, const std::array<double, 4>& matrix,
           const std::pair<double, double>& translation_mm) {
            AffineTransform t;
            t.a00 = matrix[0];
            t.a01 = matrix[1];
            t.a10 = matrix[2];
            t.a11 = matrix[3];
            t.tx = translation_mm.first;
            t.ty = translation_mm.second;
            return apply_affine(img, t);
        },
        py::arg("image"), py::arg("matrix") = std::array<double, 4>{1, 0, 0, 1},
        py::arg("translation_mm") = std::pair<double, double>{0.0, 0.0});
    m.def(
        "add_mass",
        [](const Image& img, double center_x, double center_y, double size_mm, double amplitude) {
            LesionSpec spec;
            spec.kind = LesionKind::Mass;
            spec.center_x = center_x;
            spec.center_y = center_y;
            spec.size_mm = size_mm;
            spec.amplitude = amplitude;
            return add_mass(img, spec);
        },
        py::arg("image"), py::arg("center_x"), py::arg("center_y"), py::arg("size_mm") = 5.0,
        py::arg("amplitude") = 0.2);
    m.def(
        "add_calcifications",
        [](const Image& img, double center_x, double center_y, double size_mm, double amplitude,
           int count, uint64_t seed) {
            LesionSpec spec;
            spec.kind = LesionKind::Calcification;
            spec.center_x = center_x;
            spec.center_y = center_y;
            spec.size_mm = size_mm;
            spec.amplitude = amplitude;
            spec.count = count;
            return add_calcifications(img, spec, seed);
        },
        py::arg("image"), py::arg("center_x"), py::arg("center_y"), py::arg("size_mm") = 6.0,
        py::arg("amplitude") = 0.3, py::arg("count") = 8, py::arg("seed") = 1);
    m.def(
        "generate_dataset",
        [](const std::string& config_path) {
            const auto manifest = generate_dataset(SynthConfig::from_json_file(config_path));
            py::list out;
            for (const auto& c : manifest) {
                py::dict d;
                d["id"] = c.id;
                d["view"] = to_string(c.view);
                d["classification"] = c.classification;
                d["alteration"] = to_string(c.alteration);
                d["altered_path"] = c.altered_path;
                d["ground_truth_path"] = c.ground_truth_path;
                out.append(d);
            }
            return out;
        },
        py::arg("config_path"));

    // experiment harness
    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::string& rows_csv) {
            const ExperimentConfig config = ExperimentConfig::from_json_file(config_path);
            std::vector<ReportRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_experiment(config);
                if (!rows_csv.empty()) write_rows_csv(rows, rows_csv);
            }
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["case_id"] = r.case_id;
                d["classification"] = r.classification;
                d["alteration"] = r.alteration;
                d["mode"] = to_string(r.mode);
                d["method"] = to_string(r.method);
                d["ok"] = r.ok;
                if (r.ok) {
                    d["mi_pre"] = r.pre.mi;
                    d["mi_post"] = r.post.mi;
                    d["mi_delta"] = r.mi_delta;
                    d["cc_delta"] = r.cc_delta;
                    d["ssd_delta"] = r.ssd_delta;
                }
                d["iterations"] = r.iterations;
                d["wall_ms"] = r.wall_ms;
                out.append(d);
            }
            return out;
        },
        py::arg("config_path"), py::arg("rows_csv") = std::string());

    m.attr("__version__") = "0.1.0";
}
