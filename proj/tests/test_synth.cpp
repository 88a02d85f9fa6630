#include <cmath>
#include <filesystem>
#include <numbers>

#include <doctest.h>

#include "mamreg/errors.hpp"
#include "mamreg/image_ops.hpp"
#include "mamreg/pgm_io.hpp"
#include "mamreg/segmentation.hpp"
#include "mamreg/synth.hpp"
#include "test_helpers.hpp"

using namespace mamreg;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

Mask erode_square(const Mask& mask, int r) {
    Mask out(mask.width, mask.height);
    for (int j = r; j < mask.height - r; ++j)
        for (int i = r; i < mask.width - r; ++i) {
            bool all = true;
            for (int dy = -r; all && dy <= r; ++dy)
                for (int dx = -r; all && dx <= r; ++dx) all = mask.at(i + dx, j + dy) != 0;
            out.at(i, j) = all ? 1 : 0;
        }
    return out;
}

} // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("add_mass: vanishing amplitude, center gain, truncation radius") {
    const Image img = blob_image(40, 30, 21);
    LesionSpec tiny;
    tiny.kind = LesionKind::Mass;
    tiny.center_x = 20.0;
    tiny.center_y = 15.0;
    tiny.size_mm = 3.0;
    tiny.amplitude = 1e-9;
    const Image almost = add_mass(img, tiny);
    for (size_t i = 0; i < img.size(); ++i) CHECK(std::abs(almost.data[i] - img.data[i]) <= 1e-8);

    Image dark(41, 31, 0.1, 1.0, 1.0);
    LesionSpec spec = tiny;
    spec.amplitude = 0.3;
    const Image lit = add_mass(dark, spec);
    CHECK(lit.at(20, 15) == doctest::Approx(0.1 + 0.3).epsilon(1e-12));
    // nothing changes beyond 4*size from the center
    for (int j = 0; j < 31; ++j)
        for (int i = 0; i < 41; ++i) {
            const double r = std::hypot(i - 20.0, j - 15.0);
            if (r > 4.0 * spec.size_mm + 1.5)
                CHECK(lit.at(i, j) == dark.at(i, j));
        }

    LesionSpec bad = spec;
    bad.center_x = -5.0;
    CHECK_THROWS_AS(add_mass(dark, bad), std::invalid_argument);
    bad = spec;
    bad.amplitude = 0.0;
    CHECK_THROWS_AS(add_mass(dark, bad), std::invalid_argument);
}

TEST_CASE("add_mass: total added intensity matches the Gaussian integral") {
    Image dark(121, 121, 0.0, 1.0, 1.0);
    LesionSpec spec;
    spec.kind = LesionKind::Mass;
    spec.center_x = 60.0;
    spec.center_y = 60.0;
    spec.size_mm = 4.0; // >= 3 px
    spec.amplitude = 0.5;
    const Image with = add_mass(dark, spec);
    double total = 0.0;
    for (double v : with.data) total += v;
    const double expected = spec.amplitude * 2.0 * std::numbers::pi * spec.size_mm * spec.size_mm;
    CHECK(std::abs(total - expected) / expected < 0.02);
}

TEST_CASE("add_calcifications: determinism, spots near the center, count lower bound") {
    Image dark(80, 60, 0.0, 1.0, 1.0);
    LesionSpec spec;
    spec.kind = LesionKind::Calcification;
    spec.center_x = 40.0;
    spec.center_y = 30.0;
    spec.size_mm = 8.0;
    spec.amplitude = 0.4;
    spec.count = 1;
    const Image one = add_calcifications(dark, spec, 77);
    int changed = 0;
    for (int j = 0; j < 60; ++j)
        for (int i = 0; i < 80; ++i)
            if (one.at(i, j) > 0.0) {
                ++changed;
                CHECK(std::hypot(i - 40.0, j - 30.0) <= spec.size_mm + 3.0 + 1.0);
            }
    CHECK(changed >= 1);

    const Image again = add_calcifications(dark, spec, 77);
    for (size_t i = 0; i < one.size(); ++i) CHECK(again.data[i] == one.data[i]);

    spec.count = 20;
    const Image many = add_calcifications(dark, spec, 78);
    int raised = 0;
    for (double v : many.data) raised += v > 0.0;
    CHECK(raised >= 20);
}

TEST_CASE("apply_affine: identity, full turn, translation against warp") {
    const Image img = blob_image(48, 36, 31);
    const Image same = apply_affine(img, AffineTransform::identity());
    for (size_t i = 0; i < img.size(); ++i) CHECK(same.data[i] == img.data[i]);

    const Image turned = apply_affine(img, AffineTransform::rotation_deg(360.0));
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(turned.data[i] - img.data[i]) <= 1e-6);

    // a transform that moves content by -spacing along x samples at +spacing,
    // which is exactly the warp with a constant field of one pixel spacing
    DisplacementField plus(48, 36, img.spacing_x, img.spacing_y);
    for (double& v : plus.dx) v = img.spacing_x;
    const Image via_warp = warp(img, plus);
    const Image via_affine = apply_affine(img, AffineTransform::translation(-img.spacing_x, 0.0));
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(via_affine.data[i] - via_warp.data[i]) <= 1e-9);

    // and the mirrored statement for +spacing content motion
    DisplacementField minus(48, 36, img.spacing_x, img.spacing_y);
    for (double& v : minus.dx) v = -img.spacing_x;
    const Image via_warp2 = warp(img, minus);
    const Image via_affine2 = apply_affine(img, AffineTransform::translation(img.spacing_x, 0.0));
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(via_affine2.data[i] - via_warp2.data[i]) <= 1e-9);

    AffineTransform singular;
    singular.a00 = 0.0;
    singular.a11 = 0.0;
    CHECK_THROWS_AS(apply_affine(img, singular), std::invalid_argument);
}

TEST_CASE("apply_affine: inverse recovers the image away from the borders") {
    const Image img = make_breast_phantom(View::RCC, 96, 64, 1.0, 5);
    Rng seeds(404);
    for (int rep = 0; rep < 4; ++rep) {
        const auto kind = static_cast<AlterationKind>(rep % 4);
        const AffineTransform t =
            make_alteration(kind, 0.05, img.phys_width(), img.phys_height(), seeds.next_u64());
        const Image there = apply_affine(img, t);
        const Image back = apply_affine(there, t.inverse());
        const double tmag = std::hypot(t.tx, t.ty);
        const int erosion = static_cast<int>(std::ceil(tmag / img.spacing_x)) + 2;
        const Mask roi = erode_square(segment_breast(img), erosion);
        REQUIRE(roi.count() > 0);
        double mae = 0.0;
        for (size_t i = 0; i < img.size(); ++i)
            if (roi.data[i]) mae += std::abs(back.data[i] - img.data[i]);
        mae /= static_cast<double>(roi.count());
        CHECK(mae <= 0.01);
    }
}

TEST_CASE("make_alteration: pinned matrices and seeded determinants") {
    const AffineTransform comp = make_alteration(AlterationKind::Compression, 0.05, 100.0, 80.0, 1);
    CHECK(comp.a00 == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(comp.a01 == 0.0);
    CHECK(comp.a10 == 0.0);
    CHECK(comp.a11 == 1.0);
    CHECK(comp.tx == 0.0);
    CHECK(comp.ty == 0.0);

    const AffineTransform move = make_alteration(AlterationKind::Movement, 0.02, 100.0, 80.0, 2);
    CHECK(std::hypot(move.tx, move.ty) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(move.a00 == 1.0);

    Rng seeds(31337);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto kind = static_cast<AlterationKind>(rep % 4);
        const double m = 0.001 + 0.199 * seeds.uniform();
        const AffineTransform t = make_alteration(kind, m, 210.0, 140.0, seeds.next_u64());
        CHECK(t.invertible());
    }

    CHECK_THROWS_AS(make_alteration(AlterationKind::Rotation, 0.0, 100.0, 80.0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_alteration(AlterationKind::Rotation, 0.3, 100.0, 80.0, 1),
                    std::invalid_argument);
}

TEST_CASE("phantoms: laterality mirroring and segmentability") {
    const Image rcc = make_breast_phantom(View::RCC, 96, 64, 1.0, 99);
    const Image lcc = make_breast_phantom(View::LCC, 96, 64, 1.0, 99);
    const Image mirrored = flip_horizontal(rcc);
    for (size_t i = 0; i < rcc.size(); ++i) CHECK(lcc.data[i] == mirrored.data[i]);

    const Mask mask = segment_breast(rcc);
    CHECK(mask.count() > 0.15 * rcc.size());
    const Image rmlo = make_breast_phantom(View::RMLO, 96, 64, 1.0, 99);
    CHECK(segment_breast(rmlo).count() > 0.15 * rmlo.size());
}

TEST_CASE("generate_dataset: single case per view") {
    SynthConfig config;
    config.output_dir = scratch_dir("synth_small");
    config.cases_per_view = 1;
    config.width = 96;
    config.height = 64;
    config.spacing = 1.0;
    config.master_seed = 7;
    const auto manifest = generate_dataset(config);
    REQUIRE(manifest.size() == 4);
    for (const CaseManifest& c : manifest) {
        CHECK(c.transform.invertible());
        CHECK(fs::exists(fs::path(config.output_dir) / c.altered_path));
        CHECK(fs::exists(fs::path(config.output_dir) / c.ground_truth_path));
    }
    const auto reloaded = load_manifest((fs::path(config.output_dir) / "manifest.json").string());
    REQUIRE(reloaded.size() == 4);
    CHECK(reloaded[0].id == manifest[0].id);
    CHECK(reloaded[0].transform.a00 == manifest[0].transform.a00);
}

TEST_CASE("generate_dataset: regeneration is byte-identical") {
    SynthConfig config;
    config.cases_per_view = 2;
    config.width = 96;
    config.height = 64;
    config.spacing = 1.0;
    config.master_seed = 1234;

    config.output_dir = scratch_dir("synth_rep_a");
    generate_dataset(config);
    const auto a = read_file_bytes(config.output_dir + "/manifest.json");
    const auto a_img = read_file_bytes(config.output_dir + "/RCC_001.pgm");

    config.output_dir = scratch_dir("synth_rep_b");
    generate_dataset(config);
    const auto b = read_file_bytes(config.output_dir + "/manifest.json");
    const auto b_img = read_file_bytes(config.output_dir + "/RCC_001.pgm");

    REQUIRE(!a.empty());
    CHECK(a == b);
    CHECK(a_img == b_img);
}

TEST_SUITE_END();
