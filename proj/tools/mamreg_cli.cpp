// Command-line front end for the registration toolkit: dataset synthesis,
// segmentation, registration, warping, metric reports and JEH renderings.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

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

namespace fs = std::filesystem;
using namespace mamreg;

namespace {

int run_app(int argc, char** argv) {
    CLI::App app{"mamreg - bilateral mammography registration toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic ground-truth dataset");
    std::string synth_config;
    synth->add_option("config", synth_config, "dataset config JSON")->required();

    // segment
    auto* segment = app.add_subcommand("segment", "segment breast tissue into a mask");
    std::string seg_in, seg_out;
    SegmentOptions seg_opts;
    segment->add_option("image", seg_in, "input PGM")->required();
    segment->add_option("-o,--output", seg_out, "output mask PGM")->required();
    segment->add_option("--border", seg_opts.border, "background frame width, px");
    segment->add_option("--sigma-mult", seg_opts.sigma_multiplier, "threshold multiplier");
    segment->add_option("--radius", seg_opts.radius, "component adjacency radius, px");

    // register
    auto* reg = app.add_subcommand("register", "register moving onto fixed");
    std::string reg_method, reg_fixed, reg_moving, reg_out, reg_mask, reg_params, reg_grid_out;
    bool reg_flip = false;
    reg->add_option("--method", reg_method, "bspline | demons | demons-sym")->required();
    reg->add_option("--fixed", reg_fixed, "fixed image PGM")->required();
    reg->add_option("--moving", reg_moving, "moving image PGM")->required();
    reg->add_flag("--flip", reg_flip, "flip the moving image horizontally first");
    reg->add_option("-o,--output", reg_out, "output displacement field (MREGF1)")->required();
    reg->add_option("--mask", reg_mask, "fixed-image mask PGM (default: segment the fixed image)");
    reg->add_option("--params", reg_params, "experiment config JSON supplying parameter blocks");
    reg->add_option("--grid-out", reg_grid_out, "also save the B-spline grid as JSON");

    // warp
    auto* warp_cmd = app.add_subcommand("warp", "apply a displacement field to an image");
    std::string warp_in, warp_field, warp_out;
    int warp_depth = 16;
    warp_cmd->add_option("--image", warp_in, "input PGM")->required();
    warp_cmd->add_option("--field", warp_field, "displacement field (MREGF1)")->required();
    warp_cmd->add_option("-o,--output", warp_out, "output PGM")->required();
    warp_cmd->add_option("--depth", warp_depth, "output bit depth (8 or 16)");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "similarity metrics between two images");
    std::string met_fixed, met_moving, met_mask;
    int met_bins = 64;
    metrics_cmd->add_option("--fixed", met_fixed)->required();
    metrics_cmd->add_option("--moving", met_moving)->required();
    metrics_cmd->add_option("--mask", met_mask, "ROI mask PGM (default: segment the fixed image)");
    metrics_cmd->add_option("--bins", met_bins, "histogram bins");

    // run
    auto* run = app.add_subcommand("run", "run a full experiment from a config");
    std::string run_config;
    run->add_option("config", run_config, "experiment config JSON")->required();

    // report
    auto* report = app.add_subcommand("report", "summarize an experiment row CSV");
    std::string rep_in, rep_out, rep_mode = "all";
    report->add_option("rows", rep_in, "rows CSV from 'run'")->required();
    report->add_option("-o,--output", rep_out, "summary CSV")->required();
    report->add_option("--mode", rep_mode, "intra | bilateral | all");

    // jeh
    auto* jeh = app.add_subcommand("jeh", "render a joint entropy histogram image");
    std::string jeh_fixed, jeh_moving, jeh_mask, jeh_out;
    int jeh_bins = 256, jeh_size = 256;
    jeh->add_option("--fixed", jeh_fixed)->required();
    jeh->add_option("--moving", jeh_moving)->required();
    jeh->add_option("--mask", jeh_mask, "ROI mask PGM (default: segment the fixed image)");
    jeh->add_option("--bins", jeh_bins);
    jeh->add_option("--size", jeh_size, "output image size, px");
    jeh->add_option("-o,--output", jeh_out, "output PGM")->required();

    CLI11_PARSE(app, argc, argv);

    if (*synth) {
        const SynthConfig config = SynthConfig::from_json_file(synth_config);
        const auto manifest = generate_dataset(config);
        std::cout << "wrote " << manifest.size() << " cases to " << config.output_dir << "\n";
        return 0;
    }

    if (*segment) {
        const Image img = load_pgm(seg_in);
        const Mask mask = segment_breast(img, seg_opts);
        save_mask_pgm(mask, seg_out);
        std::cout << "mask: " << mask.count() << " / " << mask.size() << " pixels\n";
        return 0;
    }

    if (*reg) {
        const Method method = method_from_string(reg_method);
        ExperimentConfig config;
        if (!reg_params.empty()) config = ExperimentConfig::from_json_file(reg_params);
        const Image fixed = load_pgm(reg_fixed);
        Image moving = load_pgm(reg_moving);
        if (reg_flip) moving = flip_horizontal(moving);
        const Mask mask = reg_mask.empty() ? segment_breast(fixed, config.segment)
                                           : load_mask_pgm(reg_mask);
        if (method == Method::BSpline) {
            const BSplineResult r = register_bspline(fixed, moving, mask, config.bspline);
            save_field(grid_to_field(r.grid, fixed.width, fixed.height,
                                     fixed.spacing_x, fixed.spacing_y),
                       reg_out);
            if (!reg_grid_out.empty()) save_grid_json(r.grid, reg_grid_out);
            std::cout << "bspline: " << r.iterations_total << " iterations, final MI "
                      << r.final_mi << "\n";
        } else {
            DemonsParams dp = config.demons;
            dp.variant = method == Method::DemonsSym ? DemonsVariant::Symmetric
                                                     : DemonsVariant::Classic;
            const DemonsResult r = register_demons(fixed, moving, mask, dp);
            save_field(r.field, reg_out);
            std::cout << "demons: " << r.iterations << " iterations, "
                      << (r.converged ? "converged" : "iteration cap") << ", mean update "
                      << r.final_mean_update << " mm\n";
        }
        return 0;
    }

    if (*warp_cmd) {
        const Image img = load_pgm(warp_in);
        const DisplacementField field = load_field(warp_field);
        save_pgm(warp(img, field), warp_out, warp_depth);
        return 0;
    }

    if (*metrics_cmd) {
        const Image fixed = load_pgm(met_fixed);
        const Image moving = load_pgm(met_moving);
        const Mask mask = met_mask.empty() ? segment_breast(fixed) : load_mask_pgm(met_mask);
        const MetricReport r = compute_metrics(fixed, moving, mask, met_bins);
        std::cout << "mi=" << r.mi << " cc=" << r.cc << " ssd=" << r.ssd
                  << " h_joint=" << r.h_joint << " n=" << r.n_pixels << "\n";
        return 0;
    }

    if (*run) {
        const ExperimentConfig config = ExperimentConfig::from_json_file(run_config);
        const auto rows = run_experiment(config);
        fs::create_directories(config.output_dir);
        const std::string rows_path = (fs::path(config.output_dir) / "rows.csv").string();
        write_rows_csv(rows, rows_path);
        size_t failed = 0;
        for (const auto& r : rows) failed += !r.ok;
        std::cout << "wrote " << rows.size() << " rows (" << failed << " failed) to "
                  << rows_path << "\n";
        return 0;
    }

    if (*report) {
        std::vector<ReportRow> rows = read_rows_csv(rep_in);
        if (rep_mode != "all") {
            const Mode mode = mode_from_string(rep_mode);
            std::erase_if(rows, [&](const ReportRow& r) { return r.mode != mode; });
        }
        write_summary_csv(summarize(rows), rep_out);
        std::cout << "wrote summary to " << rep_out << "\n";
        return 0;
    }

    if (*jeh) {
        const Image fixed = load_pgm(jeh_fixed);
        const Image moving = load_pgm(jeh_moving);
        const Mask mask = jeh_mask.empty() ? segment_breast(fixed) : load_mask_pgm(jeh_mask);
        const JointHistogram hist = joint_histogram(fixed, moving, mask, jeh_bins);
        save_pgm(jeh_image(hist, jeh_size), jeh_out, 8);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
