#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nfpose/experiment.hpp"
#include "nfpose/signal_io.hpp"

using namespace nfpose;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  if (c.config.empty()) {
    std::istringstream in(default_config_text());
    cfg = parse_config(in);
  } else {
    cfg = load_config(c.config);
  }
  if (c.seed) cfg.scenario.seed = *c.seed;
  return cfg;
}

// Output stream: the --out file, or stdout when empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot write '" + path + "'");
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

ScenarioConfig single_scene(const ExperimentConfig& cfg) {
  ScenarioConfig sc = draw_scenario(cfg, scene_seed(cfg.scenario.seed, 0));
  sc.validate();
  return sc;
}

void write_poses(std::ostream& out, const std::vector<Pose>& poses) {
  out << "ms,x_m,y_m,z_m,roll_rad,pitch_rad,yaw_rad\r\n";
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const Pose& p = poses[k];
    out << k + 1 << ',' << format_double(p.position.x()) << ',' << format_double(p.position.y()) << ','
        << format_double(p.position.z()) << ',' << format_double(p.attitude.roll()) << ','
        << format_double(p.attitude.pitch()) << ',' << format_double(p.attitude.yaw()) << "\r\n";
  }
}

int write_estimates(std::ostream& out, const std::vector<PoseEstimate>& est, const std::vector<Pose>& truth) {
  bool finite = true;
  for (const PoseEstimate& e : est) finite = finite && e.position.allFinite();
  out << "ms,truth_ms,x_m,y_m,z_m,roll_rad,pitch_rad,yaw_rad,position_error_m,rotation_nmse\r\n";
  std::vector<int> match(est.size(), -1);
  if (finite) {
    const TrialErrors te = trial_errors(est, truth);
    for (std::size_t k = 0; k < truth.size(); ++k) match[static_cast<std::size_t>(te.assignment[k])] = static_cast<int>(k);
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    const PoseEstimate& e = est[i];
    double pe = std::nan(""), rn = std::nan("");
    if (match[i] >= 0) {
      const Pose& t = truth[static_cast<std::size_t>(match[i])];
      pe = (e.position - t.position).norm();
      const Mat32 r = rotation_basis(t.attitude).matrix();
      rn = (r - e.basis.matrix()).squaredNorm() / r.squaredNorm();
    }
    out << i + 1 << ',' << match[i] + 1 << ',' << format_double(e.position.x()) << ','
        << format_double(e.position.y()) << ',' << format_double(e.position.z()) << ','
        << format_double(e.attitude.roll()) << ',' << format_double(e.attitude.pitch()) << ','
        << format_double(e.attitude.yaw()) << ',' << format_double(pe) << ',' << format_double(rn) << "\r\n";
  }
  return finite ? 0 : kExitNumerical;
}

ReceivedSignal obtain_signal(const ExperimentConfig& cfg, const ScenarioConfig& sc, const std::string& path) {
  if (!path.empty()) {
    ReceivedSignal s = read_signal(path);
    if (s.rows() != sc.bs.size() || s.slots() != sc.num_slots()) {
      throw ConfigError("signal file shape does not match the configuration");
    }
    return s;
  }
  return simulate_received(sc, noise_seed(cfg.scenario.seed, 0, 0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field pose estimation with a partitioned base-station array"};
  app.require_subcommand(1);
  Common common;
  int threads = 1;
  bool svg = false;
  std::string signal_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Configuration file (defaults when omitted)");
    sub->add_option("--seed", common.seed, "Override scenario.seed");
    sub->add_option("--out", common.out, "Output path (stdout when omitted)");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Simulate received signals; truth poses go to stdout");
  add_common(simulate);
  simulate->get_option("--out")->required()->description("Signal file to write");
  CLI::App* estimate = app.add_subcommand("estimate", "Run APPLE on a simulated or stored signal");
  add_common(estimate);
  estimate->add_option("--signal", signal_path, "Signal file from 'simulate'");
  CLI::App* baseline = app.add_subcommand("baseline", "Run the far-field baseline");
  add_common(baseline);
  baseline->add_option("--signal", signal_path, "Signal file from 'simulate'");
  CLI::App* bound = app.add_subcommand("bound", "Misspecified lower bound for the configured scene");
  add_common(bound);
  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep");
  add_common(sweep);
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--svg", svg, "Also write an SVG chart next to --out");
  app.add_subcommand("defaults", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand("defaults")) {
      std::cout << default_config_text();
      return 0;
    }
    const ExperimentConfig cfg = load(common);
    if (app.got_subcommand(simulate)) {
      const ScenarioConfig sc = single_scene(cfg);
      const ReceivedSignal s = simulate_received(sc, noise_seed(cfg.scenario.seed, 0, 0));
      write_signal(common.out, s, cfg.scenario.seed);
      write_poses(std::cout, sc.poses);
      return 0;
    }
    if (app.got_subcommand(estimate) || app.got_subcommand(baseline)) {
      const ScenarioConfig sc = single_scene(cfg);
      const ReceivedSignal s = obtain_signal(cfg, sc, signal_path);
      const EstimationContext ctx = estimation_context(sc);
      std::vector<PoseEstimate> est;
      if (app.got_subcommand(estimate)) {
        est = run_apple(s, ctx, make_plan(cfg), cfg.apple).poses;
      } else {
        est = run_baseline(s, ctx, cfg.baseline).poses;
      }
      Output out(common.out);
      return write_estimates(out.get(), est, sc.poses);
    }
    if (app.got_subcommand(bound)) {
      const ScenarioConfig sc = single_scene(cfg);
      const McrbResult r = compute_mcrb(sc, make_plan(cfg), cfg.mcrb);
      Output out(common.out);
      out.get() << "ms,position_bound_m,attitude_bound_rad,position_bias_m\r\n";
      bool finite = true;
      for (int k = 0; k < sc.num_ms(); ++k) {
        const double pb = r.position_bound(k);
        const double ab = std::sqrt(std::max(0.0, r.attitude_trace[static_cast<std::size_t>(k)]));
        finite = finite && std::isfinite(pb) && std::isfinite(ab);
        out.get() << k + 1 << ',' << format_double(pb) << ',' << format_double(ab) << ','
                  << format_double(r.bias.segment<3>(3 * k).norm()) << "\r\n";
      }
      if (r.pinv_used) std::cerr << "warning: information matrix ill-conditioned, pseudo-inverse used\n";
      return finite ? 0 : kExitNumerical;
    }
    if (app.got_subcommand(sweep)) {
      const auto rows = run_sweep(cfg, threads, [](int done, int total) {
        std::fprintf(stderr, "\r%d/%d trials", done, total);
        if (done == total) std::fprintf(stderr, "\n");
      });
      {
        Output out(common.out);
        write_csv(out.get(), rows);
      }
      for (const MetricRow& r : rows) {
        std::fprintf(stderr, "%s=%s %s: %d ok, %d failed, %.1f s\n", r.variable.c_str(),
                     format_double(r.value).c_str(), r.estimator.c_str(), r.trials, r.failed, r.wall_seconds);
      }
      if (svg) {
        const std::string path = (common.out.empty() ? std::string("sweep") : common.out) + ".svg";
        std::ofstream f(path);
        f << render_svg(rows);
      }
      return failure_majority(rows) ? kExitNumerical : 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
