#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mamreg/image.hpp"

namespace mamreg {

// 2x2 linear part plus translation, applied in physical coordinates about
// the image center c: y = A(x - c) + c + t. The transform describes how the
// image content moves, so rendering samples the source at the inverse.
struct AffineTransform {
    double a00 = 1.0, a01 = 0.0;
    double a10 = 0.0, a11 = 1.0;
    double tx = 0.0, ty = 0.0; // mm

    double det() const { return a00 * a11 - a01 * a10; }
    bool invertible() const { return std::abs(det()) > 1e-12; }
    AffineTransform inverse() const;

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(double tx_mm, double ty_mm) {
        AffineTransform t;
        t.tx = tx_mm;
        t.ty = ty_mm;
        return t;
    }
    static AffineTransform rotation_deg(double angle_deg);
};

enum class LesionKind { Mass, Calcification };

struct LesionSpec {
    LesionKind kind = LesionKind::Mass;
    double center_x = 0.0, center_y = 0.0; // mm
    double size_mm = 5.0;                  // mass sigma / calcification cluster radius
    double amplitude = 0.2;                // intensity delta, (0, 1]
    int count = 1;                         // calcification cluster size
};

enum class AlterationKind { Compression, Movement, Deformation, Rotation };

const char* to_string(AlterationKind k);
AlterationKind alteration_from_string(const std::string& s);

// Additive Gaussian bump: image + amplitude * exp(-r^2 / (2 size^2)),
// truncated to zero beyond 4*size from the center, clamped to [0,1].
Image add_mass(const Image& image, const LesionSpec& spec);

// `count` bright discs with radii uniform in [1,3] px, centers uniform in a
// disc of radius size_mm around the lesion center; deterministic in `seed`.
Image add_calcifications(const Image& image, const LesionSpec& spec, uint64_t seed);

// Backward warping through the inverse transform; background 0.
Image apply_affine(const Image& image, const AffineTransform& xf);

// Seeded global alteration of the given magnitude (in (0, 0.2]):
//   compression - diag(1-m, 1)
//   movement    - translation of m * extent_w_mm in a seeded direction
//   deformation - x-shear m with diagonal scale jitter uniform in +-m/2
//   rotation    - angle m * 25 degrees, seeded sign
AffineTransform make_alteration(AlterationKind kind, double magnitude,
                                double extent_w_mm, double extent_h_mm, uint64_t seed);

enum class View { RCC, LCC, RMLO, LMLO };

const char* to_string(View v);
View view_from_string(const std::string& s);
View opposite_view(View v);
bool is_left(View v);

// Procedural mammogram-like test image: half-elliptic tissue region against
// a noisy dark background, smooth internal blob texture, a bright name-tag
// artifact in a corner, MLO views with a pectoral wedge. Left-laterality
// views are exact mirrors of the same-seed right views.
Image make_breast_phantom(View view, int width, int height, double spacing_mm,
                          uint64_t seed);

struct CaseManifest {
    std::string id;
    View view = View::RCC;
    std::string classification; // normal | masses | calcification
    AlterationKind alteration = AlterationKind::Compression;
    AffineTransform transform;
    std::vector<LesionSpec> lesions;
    uint64_t seed = 0;
    std::string ground_truth_path; // relative to the manifest directory
    std::string altered_path;
};

struct SynthConfig {
    std::string output_dir = "dataset";
    uint64_t master_seed = 20260810;
    int cases_per_view = 33;
    int width = 548;
    int height = 341;
    double spacing = 0.4; // mm
    // Optional per-view seed image paths; a phantom is generated when empty.
    std::vector<std::pair<View, std::string>> seed_images;
    double magnitude_min = 0.02, magnitude_max = 0.05;
    double mass_size_min = 4.0, mass_size_max = 8.0;     // mm
    double mass_amp_min = 0.15, mass_amp_max = 0.3;
    double calc_cluster_radius = 6.0;                    // mm
    int calc_count_min = 5, calc_count_max = 12;
    double calc_amplitude = 0.3;

    static SynthConfig from_json_file(const std::string& path);
};

// Writes one ground-truth image per view plus cases_per_view altered images
// per view and the manifest.json case array; everything derives from
// master_seed, so regeneration is bit-identical.
std::vector<CaseManifest> generate_dataset(const SynthConfig& config);

std::vector<CaseManifest> load_manifest(const std::string& path);
void save_manifest(const std::vector<CaseManifest>& cases, const std::string& path);

} // namespace mamreg
