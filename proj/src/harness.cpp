#include "mamreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <mutex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mamreg/errors.hpp"
#include "mamreg/field_io.hpp"
#include "mamreg/image_ops.hpp"
#include "mamreg/pgm_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mamreg {

const char* to_string(Method m) {
    switch (m) {
        case Method::BSpline: return "bspline";
        case Method::Demons: return "demons";
        case Method::DemonsSym: default: return "demons_sym";
    }
}

const char* to_string(Mode m) { return m == Mode::Intra ? "intra" : "bilateral"; }

Method method_from_string(const std::string& s) {
    if (s == "bspline") return Method::BSpline;
    if (s == "demons") return Method::Demons;
    if (s == "demons_sym" || s == "demons-sym") return Method::DemonsSym;
    throw ConfigError("unknown method '" + s + "'");
}

Mode mode_from_string(const std::string& s) {
    if (s == "intra") return Mode::Intra;
    if (s == "bilateral") return Mode::Bilateral;
    throw ConfigError("unknown mode '" + s + "'");
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("experiment config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("experiment config: " + std::string(e.what()));
    }
    ExperimentConfig c;
    try {
        c.manifest_path = j.at("manifest").get<std::string>();
        c.output_dir = j.value("output_dir", c.output_dir);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const json& m : j["methods"]) c.methods.push_back(method_from_string(m.get<std::string>()));
        }
        if (j.contains("modes")) {
            c.modes.clear();
            for (const json& m : j["modes"]) c.modes.push_back(mode_from_string(m.get<std::string>()));
        }
        c.parallel_jobs = j.value("parallel_jobs", c.parallel_jobs);
        c.deterministic_timing = j.value("deterministic_timing", c.deterministic_timing);
        if (j.contains("metrics")) {
            const json& m = j["metrics"];
            c.metric_bins = m.value("bins", c.metric_bins);
            c.metric_mask_intersection = m.value("mask", std::string("fixed")) == "intersection";
        }
        if (j.contains("segment")) {
            const json& s = j["segment"];
            c.segment.border = s.value("border", c.segment.border);
            c.segment.sigma_multiplier = s.value("sigma_multiplier", c.segment.sigma_multiplier);
            c.segment.radius = s.value("radius", c.segment.radius);
        }
        if (j.contains("demons")) {
            const json& d = j["demons"];
            c.demons.max_iterations = d.value("max_iterations", c.demons.max_iterations);
            c.demons.smoothing_sigma = d.value("smoothing_sigma", c.demons.smoothing_sigma);
            c.demons.k_factor = d.value("k_factor", c.demons.k_factor);
            c.demons.convergence_tol = d.value("convergence_tol", c.demons.convergence_tol);
            c.demons.working_width = d.value("working_width", c.demons.working_width);
            c.demons.working_height = d.value("working_height", c.demons.working_height);
        }
        if (j.contains("bspline")) {
            const json& b = j["bspline"];
            c.bspline.levels = b.value("levels", c.bspline.levels);
            if (b.contains("grid_schedule")) {
                c.bspline.grid_schedule.clear();
                for (const json& g : b["grid_schedule"])
                    c.bspline.grid_schedule.emplace_back(g.at(0).get<int>(), g.at(1).get<int>());
            }
            c.bspline.max_iterations_per_level =
                b.value("max_iterations_per_level", c.bspline.max_iterations_per_level);
            c.bspline.initial_step = b.value("initial_step", c.bspline.initial_step);
            c.bspline.min_step = b.value("min_step", c.bspline.min_step);
            c.bspline.mi_bins = b.value("mi_bins", c.bspline.mi_bins);
            c.bspline.working_width = b.value("working_width", c.bspline.working_width);
            c.bspline.working_height = b.value("working_height", c.bspline.working_height);
        }
        if (j.contains("jeh")) {
            const json& h = j["jeh"];
            c.jeh_bins = h.value("bins", c.jeh_bins);
            c.jeh_size = h.value("size", c.jeh_size);
            if (h.contains("cases"))
                for (const json& id : h["cases"]) c.jeh_cases.push_back(id.get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError("experiment config: " + std::string(e.what()));
    }
    if (c.methods.empty() || c.modes.empty())
        throw ConfigError("experiment config: need at least one method and one mode");
    if (c.parallel_jobs < 1) throw ConfigError("experiment config: parallel_jobs must be >= 1");
    return c;
}

namespace {

struct CasePipeline {
    Image fixed, moving, warped;
    Mask fixed_mask, metric_mask;
    long iterations = 0;
};

// Shared fixed/moving/register/warp path behind run_case and emit_jeh.
CasePipeline process_case(const CaseManifest& c, Method method, Mode mode,
                          const ExperimentConfig& config, const std::string& dataset_dir) {
    CasePipeline p;
    const fs::path base(dataset_dir);
    const Image altered = load_pgm((base / c.altered_path).string());
    if (mode == Mode::Intra) {
        p.fixed = load_pgm((base / c.ground_truth_path).string());
        p.moving = altered;
    } else {
        const std::string gt_name = std::string("gt_") + to_string(opposite_view(c.view)) + ".pgm";
        p.fixed = load_pgm((base / gt_name).string());
        p.moving = flip_horizontal(altered); // opposite laterality: swap into the fixed frame
    }

    p.fixed_mask = segment_breast(p.fixed, config.segment);
    // The moving-side mask only matters for the intersection metric knob;
    // computed lazily so an unsegmentable altered image cannot fail a
    // fixed-mask run.
    Mask moving_mask;
    if (config.metric_mask_intersection)
        moving_mask = segment_breast(p.moving, config.segment);

    if (method == Method::BSpline) {
        const BSplineResult r = register_bspline(p.fixed, p.moving, p.fixed_mask, config.bspline);
        const DisplacementField field = grid_to_field(r.grid, p.fixed.width, p.fixed.height,
                                                      p.fixed.spacing_x, p.fixed.spacing_y);
        p.warped = warp(p.moving, field);
        p.iterations = r.iterations_total;
    } else {
        DemonsParams dp = config.demons;
        dp.variant = method == Method::DemonsSym ? DemonsVariant::Symmetric : DemonsVariant::Classic;
        const DemonsResult r = register_demons(p.fixed, p.moving, p.fixed_mask, dp);
        p.warped = warp(p.moving, r.field);
        p.iterations = r.iterations;
    }

    p.metric_mask = p.fixed_mask;
    if (config.metric_mask_intersection) {
        for (size_t i = 0; i < p.metric_mask.size(); ++i)
            p.metric_mask.data[i] = p.metric_mask.data[i] && moving_mask.data[i];
        if (p.metric_mask.count() == 0) p.metric_mask = p.fixed_mask;
    }
    return p;
}

} // namespace

ReportRow run_case(const CaseManifest& c, Method method, Mode mode,
                   const ExperimentConfig& config, const std::string& dataset_dir) {
    ReportRow row;
    row.case_id = c.id;
    row.classification = c.classification;
    row.alteration = to_string(c.alteration);
    row.mode = mode;
    row.method = method;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const CasePipeline p = process_case(c, method, mode, config, dataset_dir);
        row.pre = compute_metrics(p.fixed, p.moving, p.metric_mask, config.metric_bins);
        row.post = compute_metrics(p.fixed, p.warped, p.metric_mask, config.metric_bins);
        row.mi_delta = row.post.mi - row.pre.mi;
        row.cc_delta = row.post.cc - row.pre.cc;
        row.ssd_delta = row.post.ssd - row.pre.ssd;
        row.iterations = p.iterations;
        row.ok = true;
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_ms = config.deterministic_timing
                      ? 0
                      : std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    return row;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& config) {
    const std::vector<CaseManifest> cases = load_manifest(config.manifest_path);
    const std::string dataset_dir = fs::path(config.manifest_path).parent_path().string();

    struct Task {
        const CaseManifest* c;
        Method method;
        Mode mode;
    };
    std::vector<Task> tasks;
    for (const CaseManifest& c : cases)
        for (Method m : config.methods)
            for (Mode mode : config.modes) tasks.push_back({&c, m, mode});

    std::vector<ReportRow> rows(tasks.size());
    std::atomic<size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            rows[i] = run_case(*tasks[i].c, tasks[i].method, tasks[i].mode, config, dataset_dir);
            if (!rows[i].ok) {
                const std::lock_guard<std::mutex> lock(log_mutex);
                std::cerr << "case " << rows[i].case_id << " " << to_string(tasks[i].method)
                          << "/" << to_string(tasks[i].mode) << " failed: " << rows[i].error
                          << "\n";
            }
        }
    };
    const size_t n_threads = std::min<size_t>(config.parallel_jobs, std::max<size_t>(tasks.size(), 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.case_id != b.case_id) return a.case_id < b.case_id;
        const std::string ma = to_string(a.method), mb = to_string(b.method);
        if (ma != mb) return ma < mb;
        return std::string(to_string(a.mode)) < to_string(b.mode);
    });

    if (!config.jeh_cases.empty()) {
        fs::create_directories(config.output_dir);
        for (const std::string& id : config.jeh_cases) {
            const auto it = std::find_if(cases.begin(), cases.end(),
                                         [&](const CaseManifest& c) { return c.id == id; });
            if (it == cases.end()) throw ConfigError("jeh case '" + id + "' not in the manifest");
            for (Method m : config.methods)
                for (Mode mode : config.modes) emit_jeh(*it, m, mode, config, dataset_dir);
        }
    }
    return rows;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw FormatError("csv: bad number '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

constexpr const char* kRowsHeader =
    "case_id,classification,alteration,mode,method,status,mi_pre,mi_post,mi_delta,"
    "cc_pre,cc_post,cc_delta,ssd_pre,ssd_post,ssd_delta,iterations,wall_ms";

} // namespace

void write_rows_csv(const std::vector<ReportRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("csv: cannot write '" + path + "'");
    out << kRowsHeader << "\n";
    for (const ReportRow& r : rows) {
        out << r.case_id << ',' << r.classification << ',' << r.alteration << ','
            << to_string(r.mode) << ',' << to_string(r.method) << ','
            << (r.ok ? "ok" : "failed") << ',';
        if (r.ok) {
            out << fmt_double(r.pre.mi) << ',' << fmt_double(r.post.mi) << ','
                << fmt_double(r.mi_delta) << ',' << fmt_double(r.pre.cc) << ','
                << fmt_double(r.post.cc) << ',' << fmt_double(r.cc_delta) << ','
                << fmt_double(r.pre.ssd) << ',' << fmt_double(r.post.ssd) << ','
                << fmt_double(r.ssd_delta) << ',';
        } else {
            out << ",,,,,,,,,";
        }
        out << r.iterations << ',' << r.wall_ms << "\n";
    }
}

std::vector<ReportRow> read_rows_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("csv: empty file '" + path + "'");
    if (line.find("case_id") != 0) throw FormatError("csv: unexpected header in '" + path + "'");
    std::vector<ReportRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 17) throw FormatError("csv: bad row in '" + path + "'");
        ReportRow r;
        r.case_id = f[0];
        r.classification = f[1];
        r.alteration = f[2];
        r.mode = mode_from_string(f[3]);
        r.method = method_from_string(f[4]);
        r.ok = f[5] == "ok";
        if (r.ok) {
            r.pre.mi = parse_double(f[6]);
            r.post.mi = parse_double(f[7]);
            r.mi_delta = parse_double(f[8]);
            r.pre.cc = parse_double(f[9]);
            r.post.cc = parse_double(f[10]);
            r.cc_delta = parse_double(f[11]);
            r.pre.ssd = parse_double(f[12]);
            r.post.ssd = parse_double(f[13]);
            r.ssd_delta = parse_double(f[14]);
        }
        r.iterations = static_cast<long>(parse_double(f[15]));
        r.wall_ms = static_cast<long>(parse_double(f[16]));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("summarize: no rows");
    static const char* kClasses[] = {"normal", "masses", "calcification"};
    static const char* kAlterations[] = {"compression", "movement", "deformation", "rotation"};
    static const Method kMethods[] = {Method::BSpline, Method::Demons, Method::DemonsSym};

    std::vector<SummaryRow> out;
    auto accumulate = [&](const char* cls, const char* alt, Method m) {
        SummaryRow s;
        s.classification = cls;
        s.alteration = alt;
        s.method = m;
        for (const ReportRow& r : rows) {
            if (!r.ok || r.method != m) continue;
            if (std::string(cls) != "all" && r.classification != cls) continue;
            if (std::string(alt) != "all" && r.alteration != alt) continue;
            ++s.n;
            s.mi_delta_mean += r.mi_delta;
            s.cc_delta_mean += r.cc_delta;
            s.ssd_delta_mean += r.ssd_delta;
        }
        if (s.n > 0) {
            s.mi_delta_mean /= s.n;
            s.cc_delta_mean /= s.n;
            s.ssd_delta_mean /= s.n;
            out.push_back(s);
        }
    };
    for (const char* cls : kClasses)
        for (const char* alt : kAlterations)
            for (Method m : kMethods) accumulate(cls, alt, m);
    for (Method m : kMethods) accumulate("all", "all", m);
    return out;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("csv: cannot write '" + path + "'");
    out << "classification,alteration,method,n,mi_delta_mean,cc_delta_mean,ssd_delta_mean\n";
    for (const SummaryRow& r : rows) {
        out << r.classification << ',' << r.alteration << ',' << to_string(r.method) << ','
            << r.n << ',' << fmt_double(r.mi_delta_mean) << ',' << fmt_double(r.cc_delta_mean)
            << ',' << fmt_double(r.ssd_delta_mean) << "\n";
    }
}

void emit_jeh(const CaseManifest& c, Method method, Mode mode,
              const ExperimentConfig& config, const std::string& dataset_dir) {
    const CasePipeline p = process_case(c, method, mode, config, dataset_dir);
    fs::create_directories(config.output_dir);
    const std::string stem = c.id + "_" + to_string(method) + "_" + to_string(mode) + "_";
    const auto render = [&](const Image& a, const Image& b, const std::string& tag) {
        const JointHistogram hist = joint_histogram(a, b, p.metric_mask, config.jeh_bins);
        save_pgm(jeh_image(hist, config.jeh_size),
                 (fs::path(config.output_dir) / (stem + tag + ".pgm")).string(), 8);
    };
    render(p.fixed, p.fixed, "id");
    render(p.fixed, p.moving, "pre");
    render(p.fixed, p.warped, "post");
}

} // namespace mamreg
