#include "mamreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mamreg/errors.hpp"
#include "mamreg/image_ops.hpp"
#include "mamreg/pgm_io.hpp"
#include "mamreg/rng.hpp"
#include "mamreg/segmentation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mamreg {

AffineTransform AffineTransform::inverse() const {
    const double d = det();
    if (std::abs(d) < 1e-12)
        throw std::invalid_argument("AffineTransform: singular matrix");
    AffineTransform inv;
    inv.a00 = a11 / d;
    inv.a01 = -a01 / d;
    inv.a10 = -a10 / d;
    inv.a11 = a00 / d;
    // (A, t)^-1 about the same center is (A^-1, -A^-1 t).
    inv.tx = -(inv.a00 * tx + inv.a01 * ty);
    inv.ty = -(inv.a10 * tx + inv.a11 * ty);
    return inv;
}

AffineTransform AffineTransform::rotation_deg(double angle_deg) {
    const double a = angle_deg * std::numbers::pi / 180.0;
    AffineTransform t;
    t.a00 = std::cos(a);
    t.a01 = -std::sin(a);
    t.a10 = std::sin(a);
    t.a11 = std::cos(a);
    return t;
}

const char* to_string(AlterationKind k) {
    switch (k) {
        case AlterationKind::Compression: return "compression";
        case AlterationKind::Movement: return "movement";
        case AlterationKind::Deformation: return "deformation";
        case AlterationKind::Rotation: default: return "rotation";
    }
}

AlterationKind alteration_from_string(const std::string& s) {
    if (s == "compression") return AlterationKind::Compression;
    if (s == "movement") return AlterationKind::Movement;
    if (s == "deformation") return AlterationKind::Deformation;
    if (s == "rotation") return AlterationKind::Rotation;
    throw ConfigError("unknown alteration '" + s + "'");
}

const char* to_string(View v) {
    switch (v) {
        case View::RCC: return "RCC";
        case View::LCC: return "LCC";
        case View::RMLO: return "RMLO";
        case View::LMLO: default: return "LMLO";
    }
}

View view_from_string(const std::string& s) {
    if (s == "RCC") return View::RCC;
    if (s == "LCC") return View::LCC;
    if (s == "RMLO") return View::RMLO;
    if (s == "LMLO") return View::LMLO;
    throw ConfigError("unknown view '" + s + "'");
}

View opposite_view(View v) {
    switch (v) {
        case View::RCC: return View::LCC;
        case View::LCC: return View::RCC;
        case View::RMLO: return View::LMLO;
        case View::LMLO: default: return View::RMLO;
    }
}

bool is_left(View v) { return v == View::LCC || v == View::LMLO; }

namespace {

void check_lesion(const Image& image, const LesionSpec& spec) {
    if (spec.amplitude <= 0.0 || spec.amplitude > 1.0)
        throw std::invalid_argument("lesion: amplitude must be in (0, 1]");
    if (spec.size_mm <= 0.0)
        throw std::invalid_argument("lesion: size must be > 0");
    if (spec.count < 1)
        throw std::invalid_argument("lesion: count must be >= 1");
    if (spec.center_x < 0.0 || spec.center_x > image.domain_x() ||
        spec.center_y < 0.0 || spec.center_y > image.domain_y())
        throw std::invalid_argument("lesion: center outside image extent");
}

} // namespace

Image add_mass(const Image& image, const LesionSpec& spec) {
    if (spec.kind != LesionKind::Mass)
        throw std::invalid_argument("add_mass: spec kind must be mass");
    check_lesion(image, spec);
    Image out = image;
    const double sigma = spec.size_mm;
    const double cutoff = 4.0 * sigma;
    const int i0 = std::max(0, static_cast<int>(std::floor((spec.center_x - cutoff) / image.spacing_x)));
    const int i1 = std::min(image.width - 1, static_cast<int>(std::ceil((spec.center_x + cutoff) / image.spacing_x)));
    const int j0 = std::max(0, static_cast<int>(std::floor((spec.center_y - cutoff) / image.spacing_y)));
    const int j1 = std::min(image.height - 1, static_cast<int>(std::ceil((spec.center_y + cutoff) / image.spacing_y)));
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            const double rx = i * image.spacing_x - spec.center_x;
            const double ry = j * image.spacing_y - spec.center_y;
            const double r2 = rx * rx + ry * ry;
            if (r2 > cutoff * cutoff) continue;
            const double v = out.at(i, j) + spec.amplitude * std::exp(-r2 / (2.0 * sigma * sigma));
            out.at(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

Image add_calcifications(const Image& image, const LesionSpec& spec, uint64_t seed) {
    if (spec.kind != LesionKind::Calcification)
        throw std::invalid_argument("add_calcifications: spec kind must be calcification");
    check_lesion(image, spec);
    Image out = image;
    Rng rng(seed);
    for (int k = 0; k < spec.count; ++k) {
        const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double rad = spec.size_mm * std::sqrt(rng.uniform());
        const double cx = spec.center_x + rad * std::cos(ang);
        const double cy = spec.center_y + rad * std::sin(ang);
        const double r_px = rng.uniform(1.0, 3.0);
        const double cx_px = cx / image.spacing_x;
        const double cy_px = cy / image.spacing_y;
        const int i0 = std::max(0, static_cast<int>(std::floor(cx_px - r_px)));
        const int i1 = std::min(image.width - 1, static_cast<int>(std::ceil(cx_px + r_px)));
        const int j0 = std::max(0, static_cast<int>(std::floor(cy_px - r_px)));
        const int j1 = std::min(image.height - 1, static_cast<int>(std::ceil(cy_px + r_px)));
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const double du = i - cx_px, dv = j - cy_px;
                if (du * du + dv * dv > r_px * r_px) continue;
                out.at(i, j) = std::clamp(out.at(i, j) + spec.amplitude, 0.0, 1.0);
            }
        }
    }
    return out;
}

Image apply_affine(const Image& image, const AffineTransform& xf) {
    if (!xf.invertible())
        throw std::invalid_argument("apply_affine: singular matrix");
    if (xf.a00 == 1.0 && xf.a01 == 0.0 && xf.a10 == 0.0 && xf.a11 == 1.0 &&
        xf.tx == 0.0 && xf.ty == 0.0)
        return image; // the identity must be exact, not interpolated
    const double d = xf.det();
    const double i00 = xf.a11 / d, i01 = -xf.a01 / d;
    const double i10 = -xf.a10 / d, i11 = xf.a00 / d;
    const double cx = image.domain_x() / 2.0;
    const double cy = image.domain_y() / 2.0;
    Image out(image.width, image.height, 0.0, image.spacing_x, image.spacing_y);
    for (int j = 0; j < image.height; ++j) {
        for (int i = 0; i < image.width; ++i) {
            // x = A^-1 (y - c - t) + c
            const double px = i * image.spacing_x - cx - xf.tx;
            const double py = j * image.spacing_y - cy - xf.ty;
            const double sx = i00 * px + i01 * py + cx;
            const double sy = i10 * px + i11 * py + cy;
            out.at(i, j) = sample_bilinear(image, sx, sy);
        }
    }
    return out;
}

AffineTransform make_alteration(AlterationKind kind, double magnitude,
                                double extent_w_mm, double extent_h_mm, uint64_t seed) {
    if (magnitude <= 0.0 || magnitude > 0.2)
        throw std::invalid_argument("make_alteration: magnitude must be in (0, 0.2]");
    (void)extent_h_mm;
    Rng rng(seed);
    AffineTransform t;
    switch (kind) {
        case AlterationKind::Compression:
            t.a00 = 1.0 - magnitude;
            break;
        case AlterationKind::Movement: {
            const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
            t.tx = magnitude * extent_w_mm * std::cos(ang);
            t.ty = magnitude * extent_w_mm * std::sin(ang);
            break;
        }
        case AlterationKind::Deformation:
            t.a01 = magnitude;
            t.a00 = 1.0 + rng.uniform(-magnitude / 2.0, magnitude / 2.0);
            t.a11 = 1.0 + rng.uniform(-magnitude / 2.0, magnitude / 2.0);
            break;
        case AlterationKind::Rotation: {
            const double sign = rng.coin() ? 1.0 : -1.0;
            t = AffineTransform::rotation_deg(sign * magnitude * 25.0);
            break;
        }
    }
    return t;
}

namespace {

struct Blob {
    double x, y, sigma, amp;
};

inline double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

Image make_breast_phantom(View view, int width, int height, double spacing_mm,
                          uint64_t seed) {
    if (width < 32 || height < 32)
        throw std::invalid_argument("make_breast_phantom: image must be at least 32x32");
    const bool mlo = (view == View::RMLO || view == View::LMLO);
    Rng rng(derive_seed(seed, mlo ? "MLO" : "CC"));

    Image img(width, height, 0.0, spacing_mm, spacing_mm);
    const double W = img.domain_x(), H = img.domain_y();

    // Texture blobs, drawn in physical coordinates of the right-laterality view.
    std::vector<Blob> blobs(45);
    for (Blob& b : blobs) {
        b.x = rng.uniform(0.0, 0.8 * W);
        b.y = rng.uniform(0.1 * H, 0.9 * H);
        b.sigma = rng.uniform(0.03 * H, 0.14 * H);
        b.amp = rng.uniform(-0.12, 0.18);
    }

    // Tissue outline: half-ellipse rising from a flat chest wall. Everything
    // stays clear of the 12-px rim so a border frame sees only background.
    const double margin = 12.0 * spacing_mm;
    const double wall_x = std::max(margin, 0.12 * W);
    const double ecy = mlo ? 0.55 * H : 0.50 * H;
    const double ea = std::min(mlo ? 0.62 * W : 0.68 * W, W - margin - wall_x);
    const double eb = std::min({mlo ? 0.52 * H : 0.44 * H, ecy - margin, H - margin - ecy});

    for (int j = 0; j < height; ++j) {
        for (int i = 0; i < width; ++i) {
            const double x = i * spacing_mm;
            const double y = j * spacing_mm;
            double v = 0.015 + 0.01 * rng.uniform(); // scanner background noise

            const double rx = std::max(x - wall_x, 0.0) / ea;
            const double ry = (y - ecy) / eb;
            const double r = std::sqrt(rx * rx + ry * ry);
            if (x >= wall_x && r < 1.0) {
                double tissue = 0.32 + 0.22 * (1.0 - r * r);
                for (const Blob& b : blobs) {
                    const double dx = x - b.x, dy = y - b.y;
                    tissue += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
                }
                if (mlo) {
                    // Pectoral wedge in the upper chest-wall corner.
                    const double edge = 0.4 * W * (1.0 - (y - margin) / (0.5 * H)) - (x - wall_x);
                    tissue += 0.18 * smoothstep(0.0, 4.0, edge);
                }
                v += smoothstep(0.0, 0.08, 1.0 - r) * tissue;
            }
            img.at(i, j) = std::clamp(v, 0.0, 0.97);
        }
    }

    // Name-tag artifact away from the tissue and from the border frame.
    const int tag_x0 = width - width / 8 - 14, tag_x1 = width - 14;
    const int tag_y0 = 14, tag_y1 = 14 + height / 14;
    for (int j = tag_y0; j <= tag_y1; ++j)
        for (int i = tag_x0; i <= tag_x1; ++i)
            img.at(i, j) = 0.85;

    if (is_left(view)) return flip_horizontal(img);
    return img;
}

// ---------------------------------------------------------------------------
// Dataset generation

namespace {

json lesion_to_json(const LesionSpec& l) {
    json j;
    j["kind"] = l.kind == LesionKind::Mass ? "mass" : "calcification";
    j["center_mm"] = {l.center_x, l.center_y};
    j["size_mm"] = l.size_mm;
    j["amplitude"] = l.amplitude;
    j["count"] = l.count;
    return j;
}

LesionSpec lesion_from_json(const json& j) {
    LesionSpec l;
    l.kind = j.at("kind").get<std::string>() == "mass" ? LesionKind::Mass
                                                       : LesionKind::Calcification;
    l.center_x = j.at("center_mm").at(0).get<double>();
    l.center_y = j.at("center_mm").at(1).get<double>();
    l.size_mm = j.at("size_mm").get<double>();
    l.amplitude = j.at("amplitude").get<double>();
    l.count = j.at("count").get<int>();
    return l;
}

json case_to_json(const CaseManifest& c) {
    json j;
    j["id"] = c.id;
    j["view"] = to_string(c.view);
    j["classification"] = c.classification;
    j["alteration"] = to_string(c.alteration);
    j["matrix"] = {c.transform.a00, c.transform.a01, c.transform.a10, c.transform.a11};
    j["translation_mm"] = {c.transform.tx, c.transform.ty};
    json lesions = json::array();
    for (const LesionSpec& l : c.lesions) lesions.push_back(lesion_to_json(l));
    j["lesions"] = lesions;
    j["seed"] = c.seed;
    j["ground_truth_path"] = c.ground_truth_path;
    j["altered_path"] = c.altered_path;
    return j;
}

CaseManifest case_from_json(const json& j) {
    CaseManifest c;
    c.id = j.at("id").get<std::string>();
    c.view = view_from_string(j.at("view").get<std::string>());
    c.classification = j.at("classification").get<std::string>();
    c.alteration = alteration_from_string(j.at("alteration").get<std::string>());
    c.transform.a00 = j.at("matrix").at(0).get<double>();
    c.transform.a01 = j.at("matrix").at(1).get<double>();
    c.transform.a10 = j.at("matrix").at(2).get<double>();
    c.transform.a11 = j.at("matrix").at(3).get<double>();
    c.transform.tx = j.at("translation_mm").at(0).get<double>();
    c.transform.ty = j.at("translation_mm").at(1).get<double>();
    for (const json& l : j.at("lesions")) c.lesions.push_back(lesion_from_json(l));
    c.seed = j.at("seed").get<uint64_t>();
    c.ground_truth_path = j.at("ground_truth_path").get<std::string>();
    c.altered_path = j.at("altered_path").get<std::string>();
    return c;
}

// Seeded pick of a lesion center well inside the tissue mask.
bool pick_center(const Mask& mask, double spacing_x, double spacing_y, int margin_px,
                 Rng& rng, double& cx, double& cy) {
    std::vector<size_t> candidates;
    candidates.reserve(mask.size() / 4);
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask.data[i]) candidates.push_back(i);
    if (candidates.empty()) return false;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const size_t idx = candidates[rng.next_u64() % candidates.size()];
        const int x = static_cast<int>(idx % mask.width);
        const int y = static_cast<int>(idx / mask.width);
        bool interior = x >= margin_px && y >= margin_px &&
                        x < mask.width - margin_px && y < mask.height - margin_px;
        for (int dy = -margin_px; interior && dy <= margin_px; dy += margin_px)
            for (int dx = -margin_px; interior && dx <= margin_px; dx += margin_px)
                interior = mask.at(x + dx, y + dy) != 0;
        if (interior) {
            cx = x * spacing_x;
            cy = y * spacing_y;
            return true;
        }
    }
    // Fall back to the mask centroid.
    double sx = 0.0, sy = 0.0;
    for (size_t i : candidates) {
        sx += static_cast<double>(i % mask.width);
        sy += static_cast<double>(i / mask.width);
    }
    cx = sx / candidates.size() * spacing_x;
    cy = sy / candidates.size() * spacing_y;
    return true;
}

} // namespace

SynthConfig SynthConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("synth config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("synth config: " + std::string(e.what()));
    }
    SynthConfig c;
    c.output_dir = j.value("output_dir", c.output_dir);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.cases_per_view = j.value("cases_per_view", c.cases_per_view);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.spacing = j.value("spacing", c.spacing);
    c.magnitude_min = j.value("magnitude_min", c.magnitude_min);
    c.magnitude_max = j.value("magnitude_max", c.magnitude_max);
    c.mass_size_min = j.value("mass_size_min", c.mass_size_min);
    c.mass_size_max = j.value("mass_size_max", c.mass_size_max);
    c.mass_amp_min = j.value("mass_amp_min", c.mass_amp_min);
    c.mass_amp_max = j.value("mass_amp_max", c.mass_amp_max);
    c.calc_cluster_radius = j.value("calc_cluster_radius", c.calc_cluster_radius);
    c.calc_count_min = j.value("calc_count_min", c.calc_count_min);
    c.calc_count_max = j.value("calc_count_max", c.calc_count_max);
    c.calc_amplitude = j.value("calc_amplitude", c.calc_amplitude);
    if (j.contains("seed_images")) {
        for (auto it = j["seed_images"].begin(); it != j["seed_images"].end(); ++it)
            c.seed_images.emplace_back(view_from_string(it.key()), it.value().get<std::string>());
    }
    if (c.cases_per_view < 1) throw ConfigError("synth config: cases_per_view must be >= 1");
    if (c.width < 32 || c.height < 32) throw ConfigError("synth config: images must be at least 32x32");
    if (c.magnitude_min <= 0.0 || c.magnitude_max > 0.2 || c.magnitude_min > c.magnitude_max)
        throw ConfigError("synth config: magnitude range must lie in (0, 0.2]");
    return c;
}

void save_manifest(const std::vector<CaseManifest>& cases, const std::string& path) {
    json arr = json::array();
    for (const CaseManifest& c : cases) arr.push_back(case_to_json(c));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("manifest: cannot write '" + path + "'");
    out << arr.dump(2) << "\n";
}

std::vector<CaseManifest> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("manifest: cannot open '" + path + "'");
    json arr;
    try {
        in >> arr;
    } catch (const json::exception& e) {
        throw FormatError("manifest: " + std::string(e.what()));
    }
    if (!arr.is_array()) throw FormatError("manifest: top-level JSON array expected");
    std::vector<CaseManifest> cases;
    try {
        for (const json& j : arr) cases.push_back(case_from_json(j));
    } catch (const json::exception& e) {
        throw FormatError("manifest: " + std::string(e.what()));
    }
    return cases;
}

std::vector<CaseManifest> generate_dataset(const SynthConfig& config) {
    static const View kViews[4] = {View::RCC, View::LCC, View::RMLO, View::LMLO};
    static const char* kClasses[3] = {"normal", "masses", "calcification"};
    static const AlterationKind kAlterations[3] = {
        AlterationKind::Compression, AlterationKind::Movement, AlterationKind::Deformation};

    fs::create_directories(config.output_dir);

    std::vector<CaseManifest> manifest;
    for (View view : kViews) {
        Image gt;
        bool loaded = false;
        for (const auto& [v, path] : config.seed_images) {
            if (v == view) {
                gt = load_pgm(path);
                loaded = true;
                break;
            }
        }
        if (!loaded) {
            // Left/right pairs share a seed so laterality is an exact mirror.
            const uint64_t pair_seed = derive_seed(config.master_seed,
                                                   view == View::RCC || view == View::LCC ? "CC" : "MLO");
            gt = make_breast_phantom(view, config.width, config.height, config.spacing, pair_seed);
        }
        const std::string gt_name = std::string("gt_") + to_string(view) + ".pgm";
        save_pgm(gt, (fs::path(config.output_dir) / gt_name).string(), 16);

        const Mask tissue = segment_breast(gt);
        const int margin_px = std::max(8, static_cast<int>(std::ceil(10.0 / gt.spacing_x)));

        for (int i = 0; i < config.cases_per_view; ++i) {
            CaseManifest c;
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "%s_%03d", to_string(view), i);
            c.id = idbuf;
            c.view = view;
            c.classification = kClasses[i % 3];
            c.alteration = kAlterations[(i / 3) % 3];
            c.seed = derive_seed(config.master_seed, c.id);
            Rng rng(c.seed);

            Image altered = gt;
            if (c.classification != std::string("normal")) {
                LesionSpec spec;
                double cx = 0.0, cy = 0.0;
                if (pick_center(tissue, gt.spacing_x, gt.spacing_y, margin_px, rng, cx, cy)) {
                    spec.center_x = cx;
                    spec.center_y = cy;
                    if (c.classification == std::string("masses")) {
                        spec.kind = LesionKind::Mass;
                        spec.size_mm = rng.uniform(config.mass_size_min, config.mass_size_max);
                        spec.amplitude = rng.uniform(config.mass_amp_min, config.mass_amp_max);
                        spec.count = 1;
                        altered = add_mass(altered, spec);
                    } else {
                        spec.kind = LesionKind::Calcification;
                        spec.size_mm = config.calc_cluster_radius;
                        spec.amplitude = config.calc_amplitude;
                        spec.count = rng.uniform_int(config.calc_count_min, config.calc_count_max);
                        altered = add_calcifications(altered, spec, rng.next_u64());
                    }
                    c.lesions.push_back(spec);
                }
            }

            const double magnitude = rng.uniform(config.magnitude_min, config.magnitude_max);
            c.transform = make_alteration(c.alteration, magnitude, gt.phys_width(),
                                          gt.phys_height(), rng.next_u64());
            altered = apply_affine(altered, c.transform);

            c.ground_truth_path = gt_name;
            c.altered_path = c.id + ".pgm";
            save_pgm(altered, (fs::path(config.output_dir) / c.altered_path).string(), 16);
            manifest.push_back(std::move(c));
        }
    }

    save_manifest(manifest, (fs::path(config.output_dir) / "manifest.json").string());
    return manifest;
}

} // namespace mamreg
