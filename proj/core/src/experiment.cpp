#include "nfpose/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "nfpose/rng.hpp"

namespace nfpose {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool finite_poses(const std::vector<PoseEstimate>& p) {
  for (const PoseEstimate& e : p) {
    if (!e.position.allFinite() || !e.basis.matrix().allFinite()) return false;
  }
  return true;
}
}  // namespace

PartitionPlan make_plan(const ExperimentConfig& cfg) {
  return uniform_partition(cfg.scenario.bs, cfg.partition_mx, cfg.partition_my, cfg.scenario.wavelength());
}

ExperimentConfig at_sweep_value(const ExperimentConfig& cfg, double value) {
  ExperimentConfig c = cfg;
  switch (cfg.sweep.variable) {
    case SweepVariable::PxDbm:
      c.scenario.tx_power_w = dbm_to_watt(value);
      break;
    case SweepVariable::Subarrays: {
      const int s = static_cast<int>(std::lround(std::sqrt(value)));
      if (s < 1 || s * s != static_cast<int>(std::lround(value))) {
        throw ConfigError("subarray count must be a perfect square, got " + format_double(value));
      }
      c.partition_mx = c.partition_my = s;
      break;
    }
    case SweepVariable::Pattern:
      c.pattern_size = static_cast<int>(std::lround(value));
      c.scenario.pattern = pattern_for(c.pattern_size, c.scenario.ms.nx);
      break;
    case SweepVariable::RicianK:
      c.scenario.rician_k = value;
      break;
    case SweepVariable::Range: {
      const double width = cfg.sampling.range_max - cfg.sampling.range_min;
      c.sampling.range_min = value;
      c.sampling.range_max = value + width;
      if (c.nominal_range_auto) c.apple.nominal_range = value + 0.5 * width;
      break;
    }
  }
  c.validate();
  return c;
}

ScenarioConfig draw_scenario(const ExperimentConfig& cfg, std::uint64_t seed) {
  ScenarioConfig s = cfg.scenario;
  if (!s.poses.empty()) return s;
  Rng rng(seed);
  const SamplingSpec& sp = cfg.sampling;
  for (int k = 0; k < cfg.num_ms; ++k) {
    const double r = uniform(rng, sp.range_min, sp.range_max);
    const double az = uniform(rng, 0.0, 2.0 * kPi);
    const double el = uniform(rng, sp.elevation_min, sp.elevation_max);
    const double roll = uniform(rng, -kPi, kPi);
    const double pitch = uniform(rng, -sp.pitch_max, sp.pitch_max);
    const double yaw = uniform(rng, -kPi, kPi);
    Pose p;
    p.position = r * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    p.attitude = EulerAngles::canonical(roll, pitch, yaw);
    s.poses.push_back(p);
  }
  return s;
}

std::uint64_t scene_seed(std::uint64_t base, int trial) {
  return mix_seed({base, 0x5ce7eULL, static_cast<std::uint64_t>(trial)});
}

std::uint64_t noise_seed(std::uint64_t base, int point, int trial) {
  return mix_seed({base, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(trial)});
}

TrialOutcome run_trial(const ExperimentConfig& cfg, int point, int trial) {
  TrialOutcome out;
  const std::uint64_t base = cfg.scenario.seed;
  ScenarioConfig sc = draw_scenario(cfg, scene_seed(base, trial));
  sc.validate();
  const PartitionPlan plan = make_plan(cfg);
  const ReceivedSignal sig = simulate_received(sc, noise_seed(base, point, trial));
  const EstimationContext ctx = estimation_context(sc);
  if (cfg.sweep.run_apple) {
    try {
      const AppleResult r = run_apple(sig, ctx, plan, cfg.apple);
      if (finite_poses(r.poses)) out.apple = trial_errors(r.poses, sc.poses);
    } catch (const std::exception&) {
    }
  }
  if (cfg.sweep.run_baseline) {
    try {
      const BaselineResult r = run_baseline(sig, ctx, cfg.baseline);
      if (finite_poses(r.poses)) out.baseline = trial_errors(r.poses, sc.poses);
    } catch (const std::exception&) {
    }
  }
  if (cfg.sweep.bound) {
    try {
      const McrbResult b = compute_mcrb(sc, plan, cfg.mcrb);
      double p = 0.0, a = 0.0;
      for (double v : b.position_trace) p += v;
      for (double v : b.attitude_trace) a += v;
      if (std::isfinite(p) && std::isfinite(a)) {
        out.bound_position_sq = p;
        out.bound_attitude_sq = a;
      }
    } catch (const std::exception&) {
    }
  }
  return out;
}

std::vector<MetricRow> run_sweep(const ExperimentConfig& cfg, int threads,
                                 const std::function<void(int, int)>& progress) {
  cfg.validate();
  const int P = static_cast<int>(cfg.sweep.values.size());
  const int N = cfg.sweep.trials;
  std::vector<ExperimentConfig> points;
  for (double v : cfg.sweep.values) points.push_back(at_sweep_value(cfg, v));

  const int total = P * N;
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(total));
  std::vector<double> seconds(static_cast<std::size_t>(total), 0.0);
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (int job = next++; job < total; job = next++) {
      const int p = job / N, t = job % N;
      const auto t0 = std::chrono::steady_clock::now();
      outcomes[static_cast<std::size_t>(job)] = run_trial(points[static_cast<std::size_t>(p)], p, t);
      seconds[static_cast<std::size_t>(job)] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const int d = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(d, total);
      }
    }
  };
  const int nt = std::max(1, std::min(threads, total));
  std::vector<std::thread> pool;
  for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<MetricRow> rows;
  const std::string var = sweep_variable_name(cfg.sweep.variable);
  for (int p = 0; p < P; ++p) {
    double bp = 0.0, ba = 0.0, wall = 0.0;
    int nb = 0;
    std::vector<TrialErrors> apple, base;
    for (int t = 0; t < N; ++t) {
      const TrialOutcome& o = outcomes[static_cast<std::size_t>(p * N + t)];
      wall += seconds[static_cast<std::size_t>(p * N + t)];
      if (o.apple) apple.push_back(*o.apple);
      if (o.baseline) base.push_back(*o.baseline);
      if (o.bound_position_sq) {
        bp += *o.bound_position_sq;
        ba += *o.bound_attitude_sq;
        ++nb;
      }
    }
    const double brmse = cfg.sweep.bound && nb > 0 ? std::sqrt(bp / nb) : kNan;
    const double batt = cfg.sweep.bound && nb > 0 ? std::sqrt(ba / nb) : kNan;
    auto emit = [&](const std::string& name, const std::vector<TrialErrors>& tr) {
      const Metrics m = aggregate(tr);
      MetricRow r;
      r.variable = var;
      r.value = cfg.sweep.values[static_cast<std::size_t>(p)];
      r.estimator = name;
      r.rmse = m.rmse;
      r.nmse = m.nmse;
      r.bound_rmse = brmse;
      r.bound_attitude = batt;
      r.trials = m.trials;
      r.failed = N - m.trials;
      r.wall_seconds = wall;
      rows.push_back(r);
    };
    if (cfg.sweep.run_apple) emit("apple", apple);
    if (cfg.sweep.run_baseline) emit("baseline", base);
    if (!cfg.sweep.run_apple && !cfg.sweep.run_baseline && cfg.sweep.bound) emit("bound", {});
  }
  return rows;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "variable,value,estimator,rmse_m,nmse,bound_rmse_m,bound_attitude_rad,trials,failed\r\n";
  for (const MetricRow& r : rows) {
    out << r.variable << ',' << format_double(r.value) << ',' << r.estimator << ',' << format_double(r.rmse)
        << ',' << format_double(r.nmse) << ',' << format_double(r.bound_rmse) << ','
        << format_double(r.bound_attitude) << ',' << r.trials << ',' << r.failed << "\r\n";
  }
}

bool failure_majority(const std::vector<MetricRow>& rows) {
  for (const MetricRow& r : rows) {
    if (2 * r.failed > r.trials + r.failed) return true;
  }
  return false;
}

namespace {

struct Series {
  std::string name;
  std::string colour;
  std::vector<double> y;  // NaN for missing
};

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& colour) {
  std::ostringstream s;
  std::ostringstream pts;
  int n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(ys[i])) continue;
    pts << xs[i] << ',' << ys[i] << ' ';
    s << "<circle cx=\"" << xs[i] << "\" cy=\"" << ys[i] << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    ++n;
  }
  if (n > 1) s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
  return s.str();
}

std::string panel(const std::vector<double>& values, const std::vector<Series>& series, const std::string& title,
                  double x0, double y0, double w, double h) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Series& s : series) {
    for (double v : s.y) {
      if (std::isfinite(v) && v > 0.0) {
        lo = std::min(lo, std::log10(v));
        hi = std::max(hi, std::log10(v));
      }
    }
  }
  if (!std::isfinite(lo)) {
    lo = -1.0;
    hi = 0.0;
  }
  lo = std::floor(lo);
  hi = std::max(std::ceil(hi), lo + 1.0);
  const std::size_t n = values.size();
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = x0 + (n == 1 ? 0.5 * w : w * static_cast<double>(i) / static_cast<double>(n - 1));
  auto ymap = [&](double v) {
    if (!(std::isfinite(v) && v > 0.0)) return kNan;
    return y0 + h - h * (std::log10(v) - lo) / (hi - lo);
  };
  std::ostringstream s;
  s << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\"" << h
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  s << "<text x=\"" << x0 + w / 2 << "\" y=\"" << y0 - 8 << "\" text-anchor=\"middle\">" << title << "</text>\n";
  for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); ++d) {
    const double y = y0 + h - h * (d - lo) / (hi - lo);
    s << "<line x1=\"" << x0 << "\" x2=\"" << x0 + w << "\" y1=\"" << y << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d
      << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    s << "<text x=\"" << xs[i] << "\" y=\"" << y0 + h + 16 << "\" text-anchor=\"middle\">"
      << format_double(values[i]) << "</text>\n";
  }
  for (const Series& se : series) {
    std::vector<double> ys;
    for (double v : se.y) ys.push_back(ymap(v));
    s << polyline(xs, ys, se.colour);
  }
  return s.str();
}

}  // namespace

std::string render_svg(const std::vector<MetricRow>& rows) {
  std::vector<double> values;
  for (const MetricRow& r : rows) {
    if (std::find(values.begin(), values.end(), r.value) == values.end()) values.push_back(r.value);
  }
  auto column = [&](const std::string& est, double MetricRow::*field) {
    std::vector<double> y(values.size(), kNan);
    for (const MetricRow& r : rows) {
      if (r.estimator != est) continue;
      const auto i = static_cast<std::size_t>(std::find(values.begin(), values.end(), r.value) - values.begin());
      y[i] = r.*field;
    }
    return y;
  };
  std::vector<double> bound(values.size(), kNan), bound_att(values.size(), kNan);
  for (const MetricRow& r : rows) {
    const auto i = static_cast<std::size_t>(std::find(values.begin(), values.end(), r.value) - values.begin());
    bound[i] = r.bound_rmse;
    bound_att[i] = r.bound_attitude;
  }
  const std::vector<Series> pos{{"apple", "#1f77b4", column("apple", &MetricRow::rmse)},
                                {"baseline", "#d62728", column("baseline", &MetricRow::rmse)},
                                {"bound", "#2ca02c", bound}};
  const std::vector<Series> att{{"apple", "#1f77b4", column("apple", &MetricRow::nmse)},
                                {"baseline", "#d62728", column("baseline", &MetricRow::nmse)}};
  const std::string var = rows.empty() ? "" : rows.front().variable;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"380\" font-family=\"sans-serif\" "
       "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << panel(values, pos, "position RMSE (m)", 70, 40, 340, 260);
  s << panel(values, att, "rotation NMSE", 520, 40, 340, 260);
  s << "<text x=\"450\" y=\"350\" text-anchor=\"middle\">" << var << "</text>\n";
  double lx = 70;
  for (const Series& se : pos) {
    s << "<rect x=\"" << lx << "\" y=\"358\" width=\"12\" height=\"12\" fill=\"" << se.colour << "\"/><text x=\""
      << lx + 16 << "\" y=\"369\">" << se.name << "</text>\n";
    lx += 90;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace nfpose
