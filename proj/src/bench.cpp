#include "stml/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace stml {

namespace {

struct Blob {
    std::vector<double> center;
    double sigma;
    double amplitude;
};

double blob_field(const std::vector<Blob>& blobs, std::span<const double> x) {
    double v = 0.0;
    for (const auto& b : blobs) {
        double r2 = 0.0;
        for (std::size_t a = 0; a < b.center.size(); ++a) r2 += (x[a] - b.center[a]) * (x[a] - b.center[a]);
        v += b.amplitude * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
    }
    return v;
}

// Rotation in the plane of the first two axes about c, followed by t.
Affine rigid_about(const std::vector<double>& c, double angle, const std::vector<double>& t) {
    const int d = static_cast<int>(c.size());
    Affine g = identity_affine(d);
    g.matrix(0, 0) = std::cos(angle);
    g.matrix(0, 1) = -std::sin(angle);
    g.matrix(1, 0) = std::sin(angle);
    g.matrix(1, 1) = std::cos(angle);
    const Eigen::Map<const Eigen::VectorXd> cv(c.data(), d);
    const Eigen::Map<const Eigen::VectorXd> tv(t.data(), d);
    g.translation = cv - g.matrix * cv + tv;
    return g;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

std::string dims_label(const std::vector<int>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
    return s;
}

}  // namespace

SynthData synth_generate(const SynthSpec& spec) {
    const int d = static_cast<int>(spec.dims.size());
    if (d != 2 && d != 3) throw std::invalid_argument("synth_generate: dims must have 2 or 3 axes");
    if (spec.frames < 3) throw std::invalid_argument("synth_generate: need at least 3 frames");
    if (spec.blob_count < 1) throw std::invalid_argument("synth_generate: need at least one blob");
    if (!(spec.blob_margin >= 0.0 && spec.blob_margin < 0.5))
        throw std::invalid_argument("synth_generate: blob_margin must lie in [0, 0.5)");
    if (!(spec.blob_sigma_min > 0.0 && spec.blob_sigma_max >= spec.blob_sigma_min))
        throw std::invalid_argument("synth_generate: need 0 < blob_sigma_min <= blob_sigma_max");

    const Grid grid(spec.dims, std::vector<double>(static_cast<std::size_t>(d), 1.0),
                    std::vector<double>(static_cast<std::size_t>(d), 0.0));
    const std::vector<double> center = grid.center();
    const double min_extent = static_cast<double>(*std::min_element(spec.dims.begin(), spec.dims.end()));

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Blob> blobs(static_cast<std::size_t>(spec.blob_count));
    for (auto& b : blobs) {
        b.center.resize(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) b.center[a] = (spec.blob_margin + (1.0 - 2.0 * spec.blob_margin) * unit(rng)) * spec.dims[a];
        b.sigma = (spec.blob_sigma_min + (spec.blob_sigma_max - spec.blob_sigma_min) * unit(rng)) * min_extent;
        b.amplitude = 0.5 + 0.5 * unit(rng);
    }

    const int n = spec.frames;
    AffineStack truth(n, d);
    const double rot = spec.rotation_amplitude_deg * std::numbers::pi / 180.0;
    for (int k = 1; k <= n; ++k) {
        const double s = static_cast<double>(k - 1) / (n - 1);
        std::vector<double> t(static_cast<std::size_t>(d), 0.0);
        double angle = 0.0;
        if (spec.motion == MotionModel::sinusoidal) {
            t[0] = spec.translation_amplitude * std::sin(std::numbers::pi * s);
            t[1] = 0.6 * spec.translation_amplitude * std::sin(2.0 * std::numbers::pi * s);
            angle = rot * std::sin(std::numbers::pi * s);
        } else {
            t[0] = spec.translation_amplitude * s;
            t[1] = -0.5 * spec.translation_amplitude * s;
        }
        truth.set(k, rigid_about(center, angle, t));
    }

    const PointSet centers = cell_centers(grid);
    std::vector<std::vector<double>> clean(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        const PointSet src = apply_affine(truth.at(k).inverse(), centers);
        auto& v = clean[static_cast<std::size_t>(k - 1)];
        v.resize(centers.size());
        for (std::size_t c = 0; c < centers.size(); ++c) v[c] = blob_field(blobs, src[c]);
    }

    const auto [lo, hi] = std::minmax_element(clean.front().begin(), clean.front().end());
    const double sigma = spec.noise_level * (*hi - *lo);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Image> frames;
    std::vector<double> times;
    for (int k = 1; k <= n; ++k) {
        auto v = clean[static_cast<std::size_t>(k - 1)];
        if (sigma > 0.0) {
            for (double& x : v) x += sigma * noise(rng);
        }
        frames.emplace_back(grid, std::move(v));
        times.push_back((k - 1) * spec.frame_interval);
    }

    ImageSequence seq(std::move(frames), std::move(times));
    const double rho = min_consecutive_rho(seq, AffineStack::identity(n, d));
    if (!(rho > 0.9)) {
        throw std::invalid_argument("synth_generate: motion too large, min consecutive correlation " + fmt(rho) +
                                    " <= 0.9");
    }
    return SynthData{std::move(seq), std::move(truth), rho};
}

std::optional<double> reduction_in_D(double d_unregistered, double d_registered) {
    if (d_unregistered == 0.0) return std::nullopt;
    return 100.0 * (d_unregistered - d_registered) / d_unregistered;
}

double rel_diff_y(const AffineStack& a, const AffineStack& b) {
    if (a.dim() != b.dim() || a.frame_count() != b.frame_count() || a.indices() != b.indices()) {
        throw std::invalid_argument("rel_diff_y: stacks have different shapes");
    }
    const Eigen::VectorXd id = identity_affine(a.dim()).params();
    double num = 0.0;
    double den = 0.0;
    for (const auto& [k, t] : a.items()) {
        num += (t.params() - b.at(k).params()).squaredNorm();
        den += (t.params() - id).squaredNorm();
    }
    if (den == 0.0) throw std::invalid_argument("rel_diff_y: reference stack equals identity");
    return 100.0 * std::sqrt(num / den);
}

AffineStack gauge_fixed(const AffineStack& y) {
    const Affine inv = y.at(1).inverse();
    AffineStack out(y.frame_count(), y.dim());
    for (const auto& [k, t] : y.items()) out.set(k, t.compose(inv));
    return out;
}

GroundTruthError ground_truth_error(const AffineStack& estimate, const AffineStack& truth, const Grid& grid) {
    const AffineStack e = gauge_fixed(estimate);
    const AffineStack g = gauge_fixed(truth);
    const auto c = grid.center();
    const Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(c.size()));
    GroundTruthError err;
    for (const auto& [k, te] : e.items()) {
        const Affine& tg = g.at(k);
        const Eigen::VectorXd diff = (te.matrix * cv + te.translation) - (tg.matrix * cv + tg.translation);
        for (Eigen::Index a = 0; a < diff.size(); ++a) {
            err.max_translation_cells =
                std::max(err.max_translation_cells, std::abs(diff(a)) / grid.spacing()[static_cast<std::size_t>(a)]);
        }
        err.max_matrix_entry = std::max(err.max_matrix_entry, (te.matrix - tg.matrix).cwiseAbs().maxCoeff());
    }
    return err;
}

// ---------------------------------------------------------------------------
// configuration

std::map<std::string, std::string> parse_config(std::istream& is) {
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path.string());
    return parse_config(is);
}

namespace {

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects a number, got " + v);
    return out;
}

long to_long(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long out = 0;
    try {
        out = std::stol(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects an integer, got " + v);
    return out;
}

}  // namespace

void apply_settings(RunConfig& c, const std::map<std::string, std::string>& settings) {
    for (const auto& [key, v] : settings) {
        if (key == "spatial_levels") c.spatial_levels = static_cast<int>(to_long(key, v));
        else if (key == "temporal_coarsest_size") c.temporal_coarsest_size = static_cast<int>(to_long(key, v));
        else if (key == "beta") c.registration.beta = to_double(key, v);
        else if (key == "lambda") {
            if (v == "auto") c.registration.lambda.reset();
            else c.registration.lambda = to_double(key, v);
        } else if (key == "lambda_factor") c.registration.lambda_factor = to_double(key, v);
        else if (key == "eps") c.registration.stop.eps = to_double(key, v);
        else if (key == "stop_mode") {
            if (v == "dissim") c.registration.stop.mode = StopMode::dissimilarity;
            else if (v == "param") c.registration.stop.mode = StopMode::parameter;
            else throw std::invalid_argument("config: stop_mode must be dissim or param");
        } else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_long(key, v));
        else if (key == "threads") c.registration.threads = static_cast<int>(to_long(key, v));
        else if (key == "method") {
            if (v == "stml") c.method = Method::stml;
            else if (v == "spml") c.method = Method::spml;
            else if (v == "both") c.method = Method::both;
            else throw std::invalid_argument("config: method must be stml, spml or both");
        } else if (key == "memory") c.registration.optim.memory = static_cast<int>(to_long(key, v));
        else if (key == "max_iters") c.registration.optim.max_iters = static_cast<int>(to_long(key, v));
        else if (key == "grad_tol") c.registration.optim.grad_tol = to_double(key, v);
        else if (key == "step_tol") c.registration.optim.step_tol = to_double(key, v);
        else if (key == "dims") {
            std::istringstream is(v);
            std::vector<int> dims;
            std::string tok;
            while (is >> tok) dims.push_back(static_cast<int>(to_long(key, tok)));
            c.synth.dims = dims;
        } else if (key == "frames") c.synth.frames = static_cast<int>(to_long(key, v));
        else if (key == "translation_amplitude") c.synth.translation_amplitude = to_double(key, v);
        else if (key == "rotation_amplitude_deg") c.synth.rotation_amplitude_deg = to_double(key, v);
        else if (key == "noise_level") c.synth.noise_level = to_double(key, v);
        else if (key == "blob_count") c.synth.blob_count = static_cast<int>(to_long(key, v));
        else if (key == "blob_margin") c.synth.blob_margin = to_double(key, v);
        else if (key == "blob_sigma_min") c.synth.blob_sigma_min = to_double(key, v);
        else if (key == "blob_sigma_max") c.synth.blob_sigma_max = to_double(key, v);
        else if (key == "motion") {
            if (v == "sinusoidal") c.synth.motion = MotionModel::sinusoidal;
            else if (v == "linear") c.synth.motion = MotionModel::linear;
            else throw std::invalid_argument("config: motion must be sinusoidal or linear");
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// runs

double RunReport::total_wall_s(Method m) const {
    const auto& r = m == Method::spml ? spml : stml;
    if (!r) return 0.0;
    double ms = 0.0;
    for (const auto& run : r->runs) ms += run.wall_ms;
    return ms / 1000.0;
}

int RunReport::total_evaluations(Method m) const {
    const auto& r = m == Method::spml ? spml : stml;
    if (!r) return 0;
    int total = 0;
    for (const auto& run : r->runs) total += run.total_evaluations();
    return total;
}

RunReport run_registration(const ImageSequence& seq, const RunConfig& config,
                           const std::optional<AffineStack>& truth) {
    const SpatialPyramid pyramid = build_pyramid(seq, config.spatial_levels);
    const int n = static_cast<int>(seq.size());
    const int d = seq.grid().dim();

    RunReport report;
    report.truth = truth;
    report.min_rho = min_consecutive_rho(seq, AffineStack::identity(n, d));
    if (config.method != Method::stml) report.spml = spml_run(pyramid, config.registration);
    if (config.method != Method::spml) {
        const TemporalSchedule schedule = build_temporal_levels(n, config.temporal_coarsest_size);
        report.stml = stml_run(pyramid, schedule, config.registration);
    }
    report.lambda = report.spml ? report.spml->lambda : report.stml->lambda;

    auto metrics = [&](const DriverResult& r, int l) {
        MethodLevelMetrics m;
        const auto& sol = r.level_solutions[static_cast<std::size_t>(l)];
        SubsetObjective all(pyramid.levels[static_cast<std::size_t>(l)], sol.indices(), 0.0);
        m.dissimilarity = all.dissimilarity(sol);
        m.reduction_pct = reduction_in_D(r.unregistered_dissimilarity[static_cast<std::size_t>(l)], m.dissimilarity);
        m.wall_s = r.wall_ms_at_level(l) / 1000.0;
        m.evaluations = r.evaluations_at_level(l);
        if (truth) m.truth_error = ground_truth_error(sol, *truth, seq.grid());
        return m;
    };

    for (int l = 0; l < pyramid.level_count(); ++l) {
        LevelReport lr;
        lr.level = l;
        lr.dims = pyramid.levels[static_cast<std::size_t>(l)].grid().dims();
        const DriverResult& any = report.spml ? *report.spml : *report.stml;
        lr.unregistered = any.unregistered_dissimilarity[static_cast<std::size_t>(l)];
        if (report.spml) lr.spml = metrics(*report.spml, l);
        if (report.stml) lr.stml = metrics(*report.stml, l);
        if (lr.spml && lr.stml) {
            lr.rel_diff_y_pct = rel_diff_y(report.spml->level_solutions[static_cast<std::size_t>(l)],
                                           report.stml->level_solutions[static_cast<std::size_t>(l)]);
            if (lr.stml->wall_s > 0.0) lr.speedup = lr.spml->wall_s / lr.stml->wall_s;
            lr.eval_ratio = static_cast<double>(lr.stml->evaluations) / lr.spml->evaluations;
        }
        report.levels.push_back(std::move(lr));
    }
    return report;
}

RunReport run_benchmark(const RunConfig& config) {
    SynthSpec spec = config.synth;
    spec.seed = config.seed;
    const SynthData data = synth_generate(spec);
    return run_registration(data.sequence, config, data.truth);
}

// ---------------------------------------------------------------------------
// output

std::string report_csv_header() {
    return "level,grid,min_rho,lambda,reduction_D_spml_pct,reduction_D_stml_pct,rel_diff_y_pct,time_spml_s,"
           "time_stml_s,speedup,evals_spml,evals_stml,eval_ratio,gt_translation_err_spml_cells,gt_matrix_err_spml,"
           "gt_translation_err_stml_cells,gt_matrix_err_stml";
}

void write_report_csv(std::ostream& os, const RunReport& report) {
    using M = std::optional<MethodLevelMetrics>;
    auto reduction = [](const M& m) { return m ? m->reduction_pct : std::nullopt; };
    auto wall = [](const M& m) { return m ? std::optional(m->wall_s) : std::nullopt; };
    auto evals = [](const M& m) { return m ? std::optional<double>(m->evaluations) : std::nullopt; };
    auto gt_t = [](const M& m) {
        return m && m->truth_error ? std::optional(m->truth_error->max_translation_cells) : std::nullopt;
    };
    auto gt_a = [](const M& m) {
        return m && m->truth_error ? std::optional(m->truth_error->max_matrix_entry) : std::nullopt;
    };

    os << report_csv_header() << '\n';
    for (const auto& lr : report.levels) {
        os << (lr.level + 1) << ',' << dims_label(lr.dims) << ',' << fmt(report.min_rho) << ','
           << fmt(report.lambda) << ',' << fmt(reduction(lr.spml)) << ',' << fmt(reduction(lr.stml)) << ','
           << fmt(lr.rel_diff_y_pct) << ',' << fmt(wall(lr.spml)) << ',' << fmt(wall(lr.stml)) << ','
           << fmt(lr.speedup) << ',' << fmt(evals(lr.spml)) << ',' << fmt(evals(lr.stml)) << ','
           << fmt(lr.eval_ratio) << ',' << fmt(gt_t(lr.spml)) << ',' << fmt(gt_a(lr.spml)) << ','
           << fmt(gt_t(lr.stml)) << ',' << fmt(gt_a(lr.stml)) << '\n';
    }

    const bool both = report.spml && report.stml;
    std::optional<double> ts, tt, es, et, speedup, ratio;
    if (report.spml) {
        ts = report.total_wall_s(Method::spml);
        es = report.total_evaluations(Method::spml);
    }
    if (report.stml) {
        tt = report.total_wall_s(Method::stml);
        et = report.total_evaluations(Method::stml);
    }
    if (both && *tt > 0.0) speedup = *ts / *tt;
    if (both) ratio = *et / *es;
    os << "total,," << fmt(report.min_rho) << ',' << fmt(report.lambda) << ",NA,NA,NA," << fmt(ts) << ','
       << fmt(tt) << ',' << fmt(speedup) << ',' << fmt(es) << ',' << fmt(et) << ',' << fmt(ratio)
       << ",NA,NA,NA,NA\n";
}

void write_levels_jsonl(std::ostream& os, const RunReport& report) {
    auto emit = [&](const char* method, const DriverResult& r) {
        for (const auto& run : r.runs) {
            nlohmann::json j;
            j["method"] = method;
            j["spatial_level"] = run.spatial_level;
            j["temporal_level"] = run.temporal_level;
            j["active_frames"] = run.active.size();
            j["iterations"] = run.result.iterations;
            j["objective_evaluations"] = run.result.objective_evaluations;
            j["aux_evaluations"] = run.aux_evaluations;
            j["D_before"] = run.dissimilarity_before;
            j["D_after"] = run.dissimilarity_after;
            j["D_all"] = run.dissimilarity_all;
            j["stop_reason"] = std::string(to_string(run.result.reason));
            j["stopped"] = run.stopped;
            j["wall_ms"] = run.wall_ms;
            os << j.dump() << '\n';
        }
    };
    if (report.spml) emit("spml", *report.spml);
    if (report.stml) emit("stml", *report.stml);
}

void write_line_profile(std::ostream& os, const ImageSequence& seq, const RunReport& report) {
    const Grid& g = seq.grid();
    const int d = g.dim();
    const int len = g.dims()[0];
    PointSet line{d, {}};
    for (int i = 0; i < len; ++i) {
        for (int a = 0; a < d; ++a) {
            const double idx = a == 0 ? i + 0.5 : g.dims()[static_cast<std::size_t>(a)] / 2 + 0.5;
            line.coords.push_back(g.origin()[static_cast<std::size_t>(a)] + idx * g.spacing()[static_cast<std::size_t>(a)]);
        }
    }
    os << "method,frame,time,position,intensity\n";
    os << std::setprecision(8);
    auto emit = [&](const char* method, const AffineStack& y) {
        for (int k = 1; k <= static_cast<int>(seq.size()); ++k) {
            const auto v = sample(seq.frame(k), apply_affine(y.at(k), line));
            for (int i = 0; i < len; ++i) {
                os << method << ',' << k << ',' << seq.time(k) << ',' << line[static_cast<std::size_t>(i)][0] << ','
                   << v[static_cast<std::size_t>(i)] << '\n';
            }
        }
    };
    emit("unregistered", AffineStack::identity(static_cast<int>(seq.size()), d));
    if (report.spml) emit("spml", report.spml->transforms);
    if (report.stml) emit("stml", report.stml->transforms);
}

void write_run_outputs(const std::filesystem::path& dir, const RunReport& report) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "report.csv");
        write_report_csv(os, report);
    }
    {
        std::ofstream os(dir / "levels.jsonl");
        write_levels_jsonl(os, report);
    }
    if (report.spml) write_stack(dir / "transforms_spml.txt", report.spml->transforms);
    if (report.stml) write_stack(dir / "transforms_stml.txt", report.stml->transforms);
    if (report.truth) write_stack(dir / "ground_truth.txt", *report.truth);
}

void aggregate_reports(const std::filesystem::path& root, std::ostream& os) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "report.csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    os << "run," << report_csv_header() << '\n';
    for (const auto& f : files) {
        std::ifstream is(f);
        std::string line;
        std::getline(is, line);
        if (line != report_csv_header()) throw std::runtime_error("aggregate_reports: unexpected header in " + f.string());
        const std::string run = std::filesystem::relative(f.parent_path(), root).string();
        while (std::getline(is, line)) {
            if (!line.empty()) os << run << ',' << line << '\n';
        }
    }
}

}  // namespace stml
