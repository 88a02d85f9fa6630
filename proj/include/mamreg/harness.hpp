#pragma once

#include <string>
#include <vector>

#include "mamreg/bspline.hpp"
#include "mamreg/demons.hpp"
#include "mamreg/metrics.hpp"
#include "mamreg/segmentation.hpp"
#include "mamreg/synth.hpp"

namespace mamreg {

enum class Method { BSpline, Demons, DemonsSym };
enum class Mode { Intra, Bilateral };

const char* to_string(Method m);
const char* to_string(Mode m);
Method method_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);

struct ExperimentConfig {
    std::string manifest_path;
    std::string output_dir = "out";
    std::vector<Method> methods = {Method::BSpline, Method::Demons, Method::DemonsSym};
    std::vector<Mode> modes = {Mode::Intra, Mode::Bilateral};
    int parallel_jobs = 1;
    // Emits wall_ms as 0 so repeated runs produce byte-identical CSV.
    bool deterministic_timing = false;
    int metric_bins = 64;
    bool metric_mask_intersection = false; // default: fixed-image mask only
    SegmentOptions segment;
    DemonsParams demons; // variant is set per method
    BSplineParams bspline;
    int jeh_bins = 256;
    int jeh_size = 256;
    std::vector<std::string> jeh_cases; // case ids to render during run_experiment

    static ExperimentConfig from_json_file(const std::string& path);
};

struct ReportRow {
    std::string case_id;
    std::string classification;
    std::string alteration;
    Mode mode = Mode::Intra;
    Method method = Method::BSpline;
    bool ok = false;
    std::string error; // not part of the CSV
    MetricReport pre, post;
    double mi_delta = 0.0, cc_delta = 0.0, ssd_delta = 0.0;
    long iterations = 0;
    long wall_ms = 0;
};

// One case through the pipeline. Intra mode registers the altered image back
// onto its own ground truth; bilateral mode registers the flipped altered
// image onto the opposite view's ground truth. Both images are segmented,
// metrics run over the fixed mask (optionally intersected with the warped
// moving mask) before and after registration. Failures come back as a row
// with ok=false rather than as exceptions.
ReportRow run_case(const CaseManifest& c, Method method, Mode mode,
                   const ExperimentConfig& config, const std::string& dataset_dir);

// Cartesian product of cases x methods x modes with at most parallel_jobs
// concurrent cases; rows are sorted by (case id, method, mode) so output
// never depends on scheduling.
std::vector<ReportRow> run_experiment(const ExperimentConfig& config);

void write_rows_csv(const std::vector<ReportRow>& rows, const std::string& path);
std::vector<ReportRow> read_rows_csv(const std::string& path);

struct SummaryRow {
    std::string classification; // "all" in the grand rows
    std::string alteration;
    Method method = Method::BSpline;
    long n = 0;
    double mi_delta_mean = 0.0;
    double cc_delta_mean = 0.0;
    double ssd_delta_mean = 0.0;
};

// Mean deltas per classification x alteration x method over succeeded rows,
// plus one grand-mean row per method.
std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);

// Writes <case>_<method>_<mode>_{id,pre,post}.pgm joint-histogram renderings
// into output_dir: the identity pair, the unregistered pair and the
// registered pair.
void emit_jeh(const CaseManifest& c, Method method, Mode mode,
              const ExperimentConfig& config, const std::string& dataset_dir);

} // namespace mamreg
