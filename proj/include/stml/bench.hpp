#pragma once

// Synthetic sequences with known motion, benchmark runs of both drivers and
// table-style reporting.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stml/drivers.hpp"

namespace stml {

enum class MotionModel { sinusoidal, linear };

struct SynthSpec {
    std::vector<int> dims{64, 64};
    int frames = 17;
    double frame_interval = 1.0;
    /// Peak translation in cells.
    double translation_amplitude = 1.5;
    /// Peak in-plane rotation about the domain center, degrees.
    double rotation_amplitude_deg = 2.0;
    /// Noise standard deviation relative to the dynamic range of frame 1.
    double noise_level = 0.005;
    int blob_count = 12;
    /// Blob centers are drawn from [margin, 1 - margin] times the extent.
    double blob_margin = 0.2;
    /// Blob standard deviations relative to the smallest extent.
    double blob_sigma_min = 0.03;
    double blob_sigma_max = 0.07;
    MotionModel motion = MotionModel::sinusoidal;
    std::uint64_t seed = 42;
};

struct SynthData {
    ImageSequence sequence;
    /// g_k with g_1 = identity; frame k samples the base pattern at g_k^{-1}(x).
    AffineStack truth;
    double min_consecutive_rho = 0.0;
};

/// Throws std::invalid_argument when the motion is too large for the
/// consecutive-frame correlation to stay above 0.9.
SynthData synth_generate(const SynthSpec& spec);

/// Percent reduction; nullopt when d_unregistered is zero.
std::optional<double> reduction_in_D(double d_unregistered, double d_registered);

/// 100 * ||Ya - Yb|| / ||Ya - Id|| over stacked parameters.
double rel_diff_y(const AffineStack& a, const AffineStack& b);

/// y_k composed with the inverse of y_1, so frame 1 becomes identity.
AffineStack gauge_fixed(const AffineStack& y);

struct GroundTruthError {
    /// Max over frames and axes of the displacement error at the domain center.
    double max_translation_cells = 0.0;
    double max_matrix_entry = 0.0;
};

/// Both stacks are gauge-fixed before comparison.
GroundTruthError ground_truth_error(const AffineStack& estimate, const AffineStack& truth, const Grid& grid);

enum class Method { stml, spml, both };

struct RunConfig {
    int spatial_levels = 3;
    int temporal_coarsest_size = 3;
    RegistrationConfig registration;
    std::uint64_t seed = 42;
    Method method = Method::both;
    SynthSpec synth;
};

/// Applies key = value settings; unknown keys throw std::invalid_argument.
void apply_settings(RunConfig& config, const std::map<std::string, std::string>& settings);
/// Flat "key = value" text, '#' starts a comment.
std::map<std::string, std::string> parse_config(std::istream& is);
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

struct MethodLevelMetrics {
    std::optional<double> reduction_pct;
    double dissimilarity = 0.0;
    double wall_s = 0.0;
    int evaluations = 0;
    std::optional<GroundTruthError> truth_error;
};

struct LevelReport {
    int level = 0;  ///< 0 = coarsest
    std::vector<int> dims;
    double unregistered = 0.0;
    std::optional<MethodLevelMetrics> spml;
    std::optional<MethodLevelMetrics> stml;
    std::optional<double> rel_diff_y_pct;
    std::optional<double> speedup;
    std::optional<double> eval_ratio;  ///< stml / spml objective evaluations
};

struct RunReport {
    double min_rho = 0.0;
    double lambda = 0.0;
    std::vector<LevelReport> levels;
    std::optional<DriverResult> spml;
    std::optional<DriverResult> stml;
    std::optional<AffineStack> truth;

    double total_wall_s(Method m) const;
    int total_evaluations(Method m) const;
};

/// Registers a given sequence; truth may be absent.
RunReport run_registration(const ImageSequence& seq, const RunConfig& config,
                           const std::optional<AffineStack>& truth = std::nullopt);

/// Generates the synthetic sequence (seeded by config.seed) and registers it.
RunReport run_benchmark(const RunConfig& config);

/// Fixed column set; single-method runs write NA in cross-method columns.
void write_report_csv(std::ostream& os, const RunReport& report);
std::string report_csv_header();
/// One JSON object per LevelRun.
void write_levels_jsonl(std::ostream& os, const RunReport& report);
/// Intensity along the central line of axis 0 for every frame, unregistered
/// and after applying each available transform stack.
void write_line_profile(std::ostream& os, const ImageSequence& seq, const RunReport& report);

/// Writes report.csv, levels.jsonl and transforms_<method>.txt into dir.
void write_run_outputs(const std::filesystem::path& dir, const RunReport& report);

/// Concatenates report.csv files of run directories below root, prefixing a
/// run column.
void aggregate_reports(const std::filesystem::path& root, std::ostream& os);

}  // namespace stml
