#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "stml/bench.hpp"

using namespace stml;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.synth.dims = {32, 32};
    c.synth.frames = 9;
    c.spatial_levels = 2;
    c.registration.optim.max_iters = 10;
    return c;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string l;
    while (std::getline(is, l)) out.push_back(l);
    return out;
}

AffineStack shifted(int n, double dx) {
    AffineStack y = AffineStack::identity(n, 2);
    for (int k = 1; k <= n; ++k) {
        Affine t = y.at(k);
        t.translation(0) = dx * k;
        y.set(k, t);
    }
    return y;
}

}  // namespace

TEST_CASE("synthetic generator") {
    SynthSpec s;
    s.dims = {32, 32};
    s.frames = 9;
    const SynthData a = synth_generate(s);
    const SynthData b = synth_generate(s);
    CHECK(a.sequence == b.sequence);
    CHECK(a.truth == b.truth);
    CHECK(a.truth.at(1) == identity_affine(2));
    CHECK(a.min_consecutive_rho > 0.9);
    CHECK(a.min_consecutive_rho < 1.0);

    s.seed = 43;
    CHECK_FALSE(synth_generate(s).sequence == a.sequence);

    SynthSpec still = s;
    still.translation_amplitude = 0.0;
    still.rotation_amplitude_deg = 0.0;
    still.noise_level = 0.0;
    const SynthData z = synth_generate(still);
    CHECK(z.min_consecutive_rho == doctest::Approx(1.0).epsilon(1e-14));
    for (int k = 2; k <= 9; ++k) CHECK(z.sequence.frame(k) == z.sequence.frame(1));

    SynthSpec wild = s;
    wild.translation_amplitude = 12.0;
    CHECK_THROWS_AS(synth_generate(wild), std::invalid_argument);
    SynthSpec bad = s;
    bad.blob_sigma_min = 0.0;
    CHECK_THROWS_AS(synth_generate(bad), std::invalid_argument);
}

TEST_CASE("default generator correlation") {
    const SynthData d = synth_generate(SynthSpec{});
    CHECK(d.sequence.size() == 17);
    CHECK(d.sequence.grid().dims() == std::vector<int>{64, 64});
    CHECK(d.min_consecutive_rho > 0.9);
    CHECK(d.min_consecutive_rho < 1.0);
}

TEST_CASE("reduction in D") {
    CHECK(*reduction_in_D(0.7, 0.7) == 0.0);
    CHECK(*reduction_in_D(0.7, 0.0) == 100.0);
    CHECK(*reduction_in_D(0.5, 0.1) == doctest::Approx(80.0));
    CHECK_FALSE(reduction_in_D(0.0, 0.1).has_value());
}

TEST_CASE("relative difference of transforms") {
    const AffineStack a = shifted(4, 0.5);
    CHECK(rel_diff_y(a, a) == 0.0);
    CHECK(rel_diff_y(a, AffineStack::identity(4, 2)) == doctest::Approx(100.0));
    CHECK(rel_diff_y(a, shifted(4, 0.25)) == doctest::Approx(50.0));
    CHECK_THROWS_AS(rel_diff_y(AffineStack::identity(4, 2), a), std::invalid_argument);
    CHECK_THROWS_AS(rel_diff_y(a, shifted(5, 0.5)), std::invalid_argument);
}

TEST_CASE("gauge fixing and ground-truth error") {
    const Grid g({8, 8}, {1, 1}, {0, 0});
    const AffineStack truth = shifted(3, 0.4);
    CHECK(gauge_fixed(truth).at(1).params().isApprox(identity_affine(2).params()));

    // a common offset is invisible after gauge fixing
    AffineStack est = shifted(3, 0.4);
    for (int k = 1; k <= 3; ++k) {
        Affine t = est.at(k);
        t.translation(1) += 2.0;
        est.set(k, t);
    }
    const GroundTruthError e0 = ground_truth_error(est, truth, g);
    CHECK(e0.max_translation_cells < 1e-12);
    CHECK(e0.max_matrix_entry < 1e-12);

    const GroundTruthError e1 = ground_truth_error(shifted(3, 0.5), truth, g);
    CHECK(e1.max_translation_cells == doctest::Approx(0.2));
    CHECK(e1.max_matrix_entry == doctest::Approx(0.0));
}

TEST_CASE("settings") {
    RunConfig c;
    apply_settings(c, {{"beta", "1e-4"}, {"lambda", "2.5"}, {"stop_mode", "param"}, {"dims", "48 40"},
                       {"method", "spml"}, {"seed", "7"}});
    CHECK(c.registration.beta == 1e-4);
    CHECK(*c.registration.lambda == 2.5);
    CHECK(c.registration.stop.mode == StopMode::parameter);
    CHECK(c.synth.dims == std::vector<int>{48, 40});
    CHECK(c.method == Method::spml);
    CHECK(c.seed == 7);
    apply_settings(c, {{"lambda", "auto"}});
    CHECK_FALSE(c.registration.lambda.has_value());

    CHECK_THROWS_AS(apply_settings(c, {{"betta", "1"}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_settings(c, {{"beta", "x"}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_settings(c, {{"stop_mode", "never"}}), std::invalid_argument);

    std::istringstream is("# comment\nbeta = 0.5\n\neps=0.01  # trailing\n");
    const auto kv = parse_config(is);
    CHECK(kv.at("beta") == "0.5");
    CHECK(kv.at("eps") == "0.01");
    std::istringstream bad("just words\n");
    CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
}

TEST_CASE("benchmark report") {
    const RunReport r = run_benchmark(small_config());
    REQUIRE(r.levels.size() == 2);
    REQUIRE(r.spml);
    REQUIRE(r.stml);
    for (const auto& l : r.levels) {
        CHECK(l.spml);
        CHECK(l.stml);
        CHECK(l.rel_diff_y_pct);
        CHECK(l.eval_ratio);
        CHECK(*l.spml->reduction_pct > 0.0);
        CHECK(l.spml->truth_error);
    }
    CHECK(r.total_evaluations(Method::stml) > 0);

    std::ostringstream csv;
    write_report_csv(csv, r);
    const auto rows = lines_of(csv.str());
    CHECK(rows.front() == report_csv_header());
    CHECK(rows.size() == 4);
    CHECK(rows.back().rfind("total,", 0) == 0);

    std::ostringstream jl;
    write_levels_jsonl(jl, r);
    const auto records = lines_of(jl.str());
    CHECK(records.size() == r.spml->runs.size() + r.stml->runs.size());
    for (const auto& rec : records) {
        const auto j = nlohmann::json::parse(rec);
        CHECK(j.contains("spatial_level"));
        CHECK(j.contains("method"));
    }

    // deterministic apart from timings
    const RunReport again = run_benchmark(small_config());
    CHECK(again.stml->transforms == r.stml->transforms);
    CHECK(again.spml->transforms == r.spml->transforms);
}

TEST_CASE("single-method run has no cross-method columns") {
    RunConfig c = small_config();
    c.method = Method::spml;
    const RunReport r = run_benchmark(c);
    CHECK_FALSE(r.stml);
    for (const auto& l : r.levels) {
        CHECK_FALSE(l.speedup);
        CHECK_FALSE(l.rel_diff_y_pct);
    }
    std::ostringstream csv;
    write_report_csv(csv, r);
    CHECK(lines_of(csv.str()).front() == report_csv_header());
    CHECK(csv.str().find("NA") != std::string::npos);
}

TEST_CASE("run outputs and aggregation") {
    const fs::path root = fs::temp_directory_path() / "stml_test_runs";
    fs::remove_all(root);
    RunConfig c = small_config();
    c.method = Method::stml;
    const RunReport r = run_benchmark(c);
    write_run_outputs(root / "a", r);
    write_run_outputs(root / "b", r);
    CHECK(fs::exists(root / "a" / "report.csv"));
    CHECK(fs::exists(root / "a" / "levels.jsonl"));

    std::ostringstream agg;
    aggregate_reports(root, agg);
    const auto rows = lines_of(agg.str());
    CHECK(rows.front() == "run," + report_csv_header());
    CHECK(rows.size() == 1 + 2 * 3);

    std::ostringstream prof;
    SynthSpec s = c.synth;
    s.seed = c.seed;
    write_line_profile(prof, synth_generate(s).sequence, r);
    CHECK(lines_of(prof.str()).size() > 1);
    fs::remove_all(root);
}
