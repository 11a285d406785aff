#pragma once

#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfpose/apple.hpp"
#include "nfpose/baseline.hpp"
#include "nfpose/mcrb.hpp"

namespace nfpose {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Random MS placement; angles in radians. Elevation is measured from the BS
// array plane.
struct SamplingSpec {
  double range_min = 5.0;
  double range_max = 8.0;
  double elevation_min = kPi / 12.0;
  double elevation_max = kPi / 2.0;
  double pitch_max = kPi / 3.0;
};

enum class SweepVariable { PxDbm, Subarrays, Pattern, RicianK, Range };

struct SweepSpec {
  SweepVariable variable = SweepVariable::PxDbm;
  std::vector<double> values{0.0, 5.0, 10.0, 15.0, 20.0};
  int trials = 50;
  bool run_apple = true;
  bool run_baseline = true;
  bool bound = false;
};

struct ExperimentConfig {
  ScenarioConfig scenario;  // poses empty means drawn from sampling per trial
  int num_ms = 1;
  int partition_mx = 4;
  int partition_my = 4;
  int pattern_size = 5;  // 3, 5 or 9
  bool nominal_range_auto = true;  // apple.nominal_range follows the sampled range
  SamplingSpec sampling;
  AppleConfig apple;
  BaselineConfig baseline;
  McrbConfig mcrb;
  SweepSpec sweep;

  void validate() const;
};

// Flat "key = value" lines grouped by [section]; '#' starts a comment.
// Unknown sections or keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Text of the documented schema with default values.
std::string default_config_text();

std::string sweep_variable_name(SweepVariable v);
TransmitPattern pattern_for(int size, int n);

}  // namespace nfpose
