#include "nfpose/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace nfpose {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

int parse_count(const std::string& s) {
  const long long v = parse_int(s);
  if (v < 0 || v > 1'000'000'000) throw ConfigError("count out of range: '" + s + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

Vec3 parse_vec3(const std::string& s) {
  const auto items = split_list(s);
  if (items.size() != 3) throw ConfigError("expected three comma-separated numbers: '" + s + "'");
  return {parse_double(items[0]), parse_double(items[1]), parse_double(items[2])};
}

double deg(double d) { return d * kPi / 180.0; }

SweepVariable parse_variable(const std::string& s) {
  if (s == "px_dbm") return SweepVariable::PxDbm;
  if (s == "subarrays") return SweepVariable::Subarrays;
  if (s == "pattern") return SweepVariable::Pattern;
  if (s == "rician_k") return SweepVariable::RicianK;
  if (s == "range") return SweepVariable::Range;
  throw ConfigError("unknown sweep variable '" + s + "'");
}

struct FixedPose {
  bool has_position = false, has_attitude = false;
  Vec3 position = Vec3::Zero();
  Vec3 attitude = Vec3::Zero();
};

}  // namespace

std::string sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::PxDbm: return "px_dbm";
    case SweepVariable::Subarrays: return "subarrays";
    case SweepVariable::Pattern: return "pattern";
    case SweepVariable::RicianK: return "rician_k";
    case SweepVariable::Range: return "range";
  }
  return "unknown";
}

TransmitPattern pattern_for(int size, int n) {
  switch (size) {
    case 3: return TransmitPattern::t3(n);
    case 5: return TransmitPattern::t5(n);
    case 9: return TransmitPattern::t9(n);
    default: throw ConfigError("pattern must be 3, 5 or 9, got " + std::to_string(size));
  }
}

void ExperimentConfig::validate() const {
  if (num_ms < 1) throw ConfigError("num_ms must be at least 1");
  if (!scenario.poses.empty() && scenario.num_ms() != num_ms) {
    throw ConfigError("fixed poses given for " + std::to_string(scenario.num_ms()) + " MSs but num_ms is " +
                      std::to_string(num_ms));
  }
  if (partition_mx < 1 || partition_my < 1) throw ConfigError("partition counts must be positive");
  if (scenario.bs.nx % partition_mx != 0 || scenario.bs.ny % partition_my != 0) {
    throw ConfigError("partition " + std::to_string(partition_mx) + "x" + std::to_string(partition_my) +
                      " does not divide the BS array");
  }
  if (scenario.ms.nx != scenario.ms.ny) throw ConfigError("the transmit patterns need a square MS array");
  if (pattern_size != 3 && pattern_size != 5 && pattern_size != 9) throw ConfigError("pattern must be 3, 5 or 9");
  if (!(sampling.range_min > 0.0) || sampling.range_max < sampling.range_min) throw ConfigError("bad range bounds");
  if (sampling.elevation_max < sampling.elevation_min) throw ConfigError("bad elevation bounds");
  if (!(apple.sigma_ini > 0.0)) throw ConfigError("sigma_ini must be positive");
  if (apple.iterations < 0) throw ConfigError("iterations must be non-negative");
  if (sweep.trials < 1) throw ConfigError("trials must be at least 1");
  if (sweep.values.empty()) throw ConfigError("sweep values must not be empty");
  if (!(scenario.carrier_hz > 0.0)) throw ConfigError("carrier frequency must be positive");
  if (!(scenario.noise_var_w >= 0.0)) throw ConfigError("noise power must be non-negative");
  if (!(scenario.rician_k > 0.0)) throw ConfigError("rician_k must be positive");
  scenario.bs.validate();
  scenario.ms.validate();
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::map<int, FixedPose> fixed;
  std::string section;
  int ms_index = 0;

  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> keys = {
      {"scenario.carrier_hz", [&](const std::string& v) { c.scenario.carrier_hz = parse_double(v); }},
      {"scenario.bs_nx", [&](const std::string& v) { c.scenario.bs.nx = parse_count(v); }},
      {"scenario.bs_ny", [&](const std::string& v) { c.scenario.bs.ny = parse_count(v); }},
      {"scenario.ms_nx", [&](const std::string& v) { c.scenario.ms.nx = parse_count(v); }},
      {"scenario.ms_ny", [&](const std::string& v) { c.scenario.ms.ny = parse_count(v); }},
      {"scenario.pattern", [&](const std::string& v) { c.pattern_size = parse_count(v); }},
      {"scenario.tx_power_dbm", [&](const std::string& v) { c.scenario.tx_power_w = dbm_to_watt(parse_double(v)); }},
      {"scenario.noise_dbm", [&](const std::string& v) {
         const double d = parse_double(v);
         c.scenario.noise_var_w = std::isinf(d) && d < 0 ? 0.0 : dbm_to_watt(d);
       }},
      {"scenario.rician_k", [&](const std::string& v) { c.scenario.rician_k = parse_double(v); }},
      {"scenario.num_ms", [&](const std::string& v) { c.num_ms = parse_count(v); }},
      {"scenario.seed", [&](const std::string& v) {
         const long long s = parse_int(v);
         if (s < 0) throw ConfigError("seed must be non-negative");
         c.scenario.seed = static_cast<std::uint64_t>(s);
       }},
      {"scenario.allow_reactive", [&](const std::string& v) { c.scenario.allow_reactive = parse_bool(v); }},
      {"partition.mx", [&](const std::string& v) { c.partition_mx = parse_count(v); }},
      {"partition.my", [&](const std::string& v) { c.partition_my = parse_count(v); }},
      {"sampling.range_min", [&](const std::string& v) { c.sampling.range_min = parse_double(v); }},
      {"sampling.range_max", [&](const std::string& v) { c.sampling.range_max = parse_double(v); }},
      {"sampling.elevation_min_deg", [&](const std::string& v) { c.sampling.elevation_min = deg(parse_double(v)); }},
      {"sampling.elevation_max_deg", [&](const std::string& v) { c.sampling.elevation_max = deg(parse_double(v)); }},
      {"sampling.pitch_max_deg", [&](const std::string& v) { c.sampling.pitch_max = deg(parse_double(v)); }},
      {"apple.iterations", [&](const std::string& v) { c.apple.iterations = parse_count(v); }},
      {"apple.sigma_ini", [&](const std::string& v) { c.apple.sigma_ini = parse_double(v); }},
      {"apple.nominal_range", [&](const std::string& v) {
         if (v == "auto") {
           c.nominal_range_auto = true;
         } else {
           c.nominal_range_auto = false;
           c.apple.nominal_range = parse_double(v);
         }
       }},
      {"apple.position_prior_std", [&](const std::string& v) { c.apple.position_prior_std = parse_double(v); }},
      {"apple.attitude_kappa", [&](const std::string& v) {
         const double k = parse_double(v);
         c.apple.attitude_prior = {VonMises(0.0, k), VonMises(0.0, k), VonMises(0.0, k)};
       }},
      {"apple.coef_prior_var", [&](const std::string& v) { c.apple.coef_prior_var = parse_double(v); }},
      {"baseline.grid_oversampling", [&](const std::string& v) { c.baseline.grid_oversampling = parse_count(v); }},
      {"baseline.fine_step", [&](const std::string& v) { c.baseline.fine_step = parse_double(v); }},
      {"baseline.low_power_ratio", [&](const std::string& v) { c.baseline.low_power_ratio = parse_double(v); }},
      {"bound.fd_rel_step", [&](const std::string& v) { c.mcrb.fd_rel_step = parse_double(v); }},
      {"bound.second_rel_step", [&](const std::string& v) { c.mcrb.second_rel_step = parse_double(v); }},
      {"bound.cond_max", [&](const std::string& v) { c.mcrb.cond_max = parse_double(v); }},
      {"bound.grid_fallback", [&](const std::string& v) { c.mcrb.grid_fallback = parse_bool(v); }},
      {"sweep.variable", [&](const std::string& v) { c.sweep.variable = parse_variable(v); }},
      {"sweep.values", [&](const std::string& v) {
         c.sweep.values.clear();
         for (const auto& s : split_list(v)) c.sweep.values.push_back(parse_double(s));
       }},
      {"sweep.trials", [&](const std::string& v) { c.sweep.trials = parse_count(v); }},
      {"sweep.estimators", [&](const std::string& v) {
         c.sweep.run_apple = c.sweep.run_baseline = false;
         for (const auto& s : split_list(v)) {
           if (s == "apple") {
             c.sweep.run_apple = true;
           } else if (s == "baseline") {
             c.sweep.run_baseline = true;
           } else {
             throw ConfigError("unknown estimator '" + s + "'");
           }
         }
       }},
      {"sweep.bound", [&](const std::string& v) { c.sweep.bound = parse_bool(v); }},
      {"ms.position", [&](const std::string& v) {
         fixed[ms_index].position = parse_vec3(v);
         fixed[ms_index].has_position = true;
       }},
      {"ms.attitude_deg", [&](const std::string& v) {
         const Vec3 a = parse_vec3(v);
         fixed[ms_index].attitude = Vec3(deg(a.x()), deg(a.y()), deg(a.z()));
         fixed[ms_index].has_attitude = true;
       }},
  };

  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.rfind("ms.", 0) == 0) {
        try {
          ms_index = static_cast<int>(parse_int(section.substr(3)));
        } catch (const ConfigError&) {
          throw ConfigError(where + "bad MS section '" + section + "'");
        }
        if (ms_index < 1) throw ConfigError(where + "MS sections are numbered from 1");
        continue;
      }
      static const std::set<std::string> known{"scenario", "partition", "sampling", "apple",
                                               "baseline", "bound", "sweep"};
      if (!known.count(section)) throw ConfigError(where + "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
    const bool ms_section = section.rfind("ms.", 0) == 0;
    const std::string lookup = (ms_section ? std::string("ms") : section) + "." + key;
    const auto it = keys.find(lookup);
    if (it == keys.end()) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }

  if (!fixed.empty()) {
    int expect = 1;
    for (const auto& [i, f] : fixed) {
      if (i != expect++) throw ConfigError("MS sections must be numbered 1..K without gaps");
      if (!f.has_position) throw ConfigError("[ms." + std::to_string(i) + "] needs a position");
      Pose p;
      p.position = f.position;
      p.attitude = EulerAngles::canonical(f.attitude);
      c.scenario.poses.push_back(p);
    }
  }
  if (c.nominal_range_auto) c.apple.nominal_range = 0.5 * (c.sampling.range_min + c.sampling.range_max);
  try {
    c.scenario.pattern = pattern_for(c.pattern_size, c.scenario.ms.nx);
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(f);
}

std::string default_config_text() {
  return R"(# Desk-scale defaults.
[scenario]
carrier_hz = 28e9
bs_nx = 32
bs_ny = 32
ms_nx = 16
ms_ny = 16
pattern = 5            # 3, 5 or 9 active MS antennas
tx_power_dbm = 20
noise_dbm = -70
rician_k = inf         # LoS to NLoS power ratio, linear
num_ms = 1
seed = 1
allow_reactive = false

[partition]
mx = 4
my = 4

[sampling]
range_min = 5
range_max = 8
elevation_min_deg = 15
elevation_max_deg = 90
pitch_max_deg = 60

[apple]
iterations = 0         # 0: 1 for one MS, 5 otherwise
sigma_ini = 100
nominal_range = auto   # mid of the sampled range
position_prior_std = 1000
attitude_kappa = 1e-6
coef_prior_var = 0     # 0: link budget at nominal_range

[baseline]
grid_oversampling = 4
fine_step = 0.001
low_power_ratio = 25

[bound]
fd_rel_step = 1e-6
second_rel_step = 1e-4
cond_max = 1e12
grid_fallback = false

[sweep]
variable = px_dbm      # px_dbm, subarrays, pattern, rician_k, range
values = 0, 5, 10, 15, 20
trials = 50
estimators = apple, baseline
bound = false

# Fixed poses replace sampling when present, one section per MS:
# [ms.1]
# position = 1.0, 0.5, 6.0
# attitude_deg = 10, -5, 20
)";
}

}  // namespace nfpose
