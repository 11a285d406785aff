#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nfpose/config.hpp"
#include "nfpose/metrics.hpp"

namespace nfpose {

PartitionPlan make_plan(const ExperimentConfig& cfg);

// Copy of cfg with the sweep variable set to value.
ExperimentConfig at_sweep_value(const ExperimentConfig& cfg, double value);

// Scenario with poses drawn from cfg.sampling (or the fixed poses, if any).
ScenarioConfig draw_scenario(const ExperimentConfig& cfg, std::uint64_t scene_seed);

// Scenes are shared across sweep points (same trial index, same scene seed);
// noise and scattering differ per point.
std::uint64_t scene_seed(std::uint64_t base, int trial);
std::uint64_t noise_seed(std::uint64_t base, int point, int trial);

struct TrialOutcome {
  std::optional<TrialErrors> apple;
  std::optional<TrialErrors> baseline;
  std::optional<double> bound_position_sq;  // sum_k trace of the position block
  std::optional<double> bound_attitude_sq;
};

TrialOutcome run_trial(const ExperimentConfig& point_cfg, int point, int trial);

struct MetricRow {
  std::string variable;
  double value = 0.0;
  std::string estimator;
  double rmse = 0.0;
  double nmse = 0.0;
  double bound_rmse = 0.0;      // NaN when not computed
  double bound_attitude = 0.0;  // NaN when not computed
  int trials = 0;               // successful trials
  int failed = 0;
  double wall_seconds = 0.0;    // not written to CSV
};

// Trials run on `threads` workers; aggregation order is fixed, so the rows do
// not depend on the thread count.
std::vector<MetricRow> run_sweep(const ExperimentConfig& cfg, int threads,
                                 const std::function<void(int done, int total)>& progress = {});

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows);
std::string format_double(double v);  // 17 significant digits, "inf"/"nan" spelled out

std::string render_svg(const std::vector<MetricRow>& rows);

// True when some row lost more than half of its trials.
bool failure_majority(const std::vector<MetricRow>& rows);

}  // namespace nfpose
