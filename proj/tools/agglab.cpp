// agglab: command-line laboratory for radially symmetric aggregation
// dynamics with power-law kernels.  Subcommands evaluate the sphere-averaged
// kernels, run ring simulations, verify kernel properties, search for
// similarity data, fit collapse-time scaling, and emit critical-ratio
// curves.  Every run that starts computing writes a MANIFEST.json with the
// fully resolved configuration.
//
// Exit codes: 0 success, 2 invalid parameters (message names the parameter
// and its valid range), 1 numeric failure (partial artifacts are kept and
// the manifest is marked incomplete).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agglab/diagnostics.hpp"
#include "agglab/flow.hpp"
#include "agglab/io.hpp"
#include "agglab/kernels.hpp"
#include "agglab/radial_measure.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

bool is_set(double x) { return !std::isnan(x); }

std::string now_iso8601_utc() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& p,
                const std::function<void(std::ostream&)>& emit) {
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  emit(os);
  os.flush();
  if (!os) throw std::runtime_error("write to '" + p.string() + "' failed");
}

// Ties a CLI option to a JSON config key of the same name (minus the leading
// dashes).  Explicit flags win over config values; config values win over
// defaults.
class OptionBinder {
 public:
  explicit OptionBinder(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* bind(const std::string& flag, T& target, const std::string& help) {
    CLI::Option* opt = app_->add_option(flag, target, help);
    remember(flag, opt, target);
    return opt;
  }

  CLI::Option* bind_flag(const std::string& flag, bool& target,
                         const std::string& help) {
    CLI::Option* opt = app_->add_flag(flag, target, help);
    remember(flag, opt, target);
    return opt;
  }

  void apply(const json& cfg) {
    if (!cfg.is_object())
      throw std::invalid_argument("config file must hold a JSON object");
    for (const auto& item : cfg.items())
      if (!keys_.count(item.key()))
        throw std::invalid_argument("unknown config key '" + item.key() + "'");
    for (const auto& apply_one : appliers_) apply_one(cfg);
  }

 private:
  template <class T>
  void remember(const std::string& flag, CLI::Option* opt, T& target) {
    const std::string key = flag.substr(flag.find_first_not_of('-'));
    keys_.insert(key);
    appliers_.push_back([&target, key, opt](const json& cfg) {
      if (opt->count() > 0) return;
      const auto it = cfg.find(key);
      if (it == cfg.end()) return;
      try {
        target = it->get<T>();
      } catch (const json::exception&) {
        throw std::invalid_argument("config key '" + key +
                                    "' has the wrong type");
      }
    });
  }

  CLI::App* app_;
  std::set<std::string> keys_;
  std::vector<std::function<void(const json&)>> appliers_;
};

// Manifest bookkeeping for one run.  Construction creates the output
// directory; finish() stamps duration and status and writes MANIFEST.json.
struct RunContext {
  RunContext(const std::string& command, json config, const std::string& out)
      : out_dir(out), begin(std::chrono::steady_clock::now()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
      throw std::invalid_argument("output directory '" + out_dir.string() +
                                  "' cannot be created");
    manifest["command"] = command;
    manifest["config"] = std::move(config);
    manifest["version"] = kVersion;
    manifest["started_at"] = now_iso8601_utc();
    manifest["outputs"] = json::array();
  }

  fs::path path(const std::string& name) const { return out_dir / name; }

  void add_output(const std::string& name) {
    manifest["outputs"].push_back(name);
  }

  void finish(const std::string& status) {
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - begin;
    manifest["duration_seconds"] = dt.count();
    manifest["status"] = status;
    write_text(path("MANIFEST.json"),
               [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  }

  fs::path out_dir;
  json manifest;
  std::chrono::steady_clock::time_point begin;
};

// ---------------------------------------------------------------------------
// Shared option groups

struct CommonOpts {
  std::string out = ".";
  std::string config_path;
  long long seed = 0;

  void add(OptionBinder& b) {
    b.bind("--out", out, "Output directory for artifacts (default: .)");
    b.bind("--seed", seed,
           "Seed recorded in the manifest and used by sampling diagnostics");
    // --config is read before the other options are resolved, so it binds
    // directly rather than through the binder.
  }
};

struct DataOpts {
  std::string data;
  int d = 0;
  double alpha = kUnset;
  double k = kUnset;
  double epsilon = kUnset;

  void add(OptionBinder& b, bool with_kind = true) {
    if (with_kind)
      b.bind("--data", data,
             "Initial profile: log_critical_alpha1 | power_law | log_critical_general");
    b.bind("--d", d, "Space dimension (integer >= 2)");
    b.bind("--alpha", alpha, "Kernel exponent");
    b.bind("--k", k, "Logarithmic weight exponent (log-critical profiles)");
    b.bind("--epsilon", epsilon, "Supercritical offset (power_law profile)");
  }

  agglab::InitialDataSpec spec() const {
    if (data.empty()) throw std::invalid_argument("data is required");
    agglab::InitialDataSpec s;
    s.kind = agglab::initial_data_kind_from_string(data);
    s.d = d;
    s.alpha = alpha;
    s.k = k;
    s.epsilon = epsilon;
    return s;
  }

  void require_attractive() const {
    if (!is_set(alpha)) throw std::invalid_argument("alpha is required");
    if (!(alpha > 0.0 && alpha < 2.0))
      throw std::domain_error("alpha must lie in (0, 2)");
  }

  json to_json(bool with_kind = true) const {
    json j;
    if (with_kind) j["data"] = data;
    j["d"] = d;
    j["alpha"] = alpha;
    if (is_set(k)) j["k"] = k;
    if (is_set(epsilon)) j["epsilon"] = epsilon;
    return j;
  }
};

struct GridOpts {
  int rings = 1000;
  double r_min = 1e-6;
  double r_max = 0.5;
  std::string spacing = "geometric";

  void add(OptionBinder& b) {
    b.bind("--rings", rings, "Number of rings in the discretization");
    b.bind("--r-min", r_min, "Innermost shell boundary");
    b.bind("--r-max", r_max, "Outermost shell boundary (<= 0.5)");
    b.bind("--spacing", spacing, "Shell spacing: geometric | uniform");
  }

  agglab::GridSpec grid() const {
    agglab::GridSpec g;
    if (rings < 1) throw std::invalid_argument("rings must be an integer >= 1");
    g.n_rings = rings;
    g.r_min = r_min;
    g.r_max = r_max;
    if (spacing == "geometric")
      g.spacing = agglab::GridSpec::Spacing::geometric;
    else if (spacing == "uniform")
      g.spacing = agglab::GridSpec::Spacing::uniform;
    else
      throw std::invalid_argument("spacing must be geometric or uniform");
    if (!(g.r_min > 0.0 && g.r_min < g.r_max && g.r_max <= 0.5))
      throw std::invalid_argument(
          "grid bounds must satisfy 0 < r-min < r-max <= 1/2");
    return g;
  }

  json to_json() const {
    return {{"rings", rings},
            {"r_min", r_min},
            {"r_max", r_max},
            {"spacing", spacing}};
  }
};

struct SimOpts {
  double rel_tol = 1e-8;
  double abs_tol = 1e-14;
  double absorb_radius = 1e-9;
  double merge_gap = 0.0;
  double max_step = 0.0;
  double record_every = kUnset;  // resolved per command when unset
  double cache_spacing = 5e-4;
  bool no_kernel_cache = false;
  bool no_closed_form = false;
  int threads = 1;

  void add(OptionBinder& b) {
    b.bind("--rel-tol", rel_tol, "ODE relative tolerance");
    b.bind("--abs-tol", abs_tol, "ODE absolute tolerance");
    b.bind("--absorb-radius", absorb_radius,
           "Radius at which a ring is absorbed into the origin atom");
    b.bind("--merge-gap", merge_gap, "Adjacent rings closer than this merge");
    b.bind("--max-step", max_step, "Cap on the ODE step (0 = uncapped)");
    b.bind("--record-every", record_every, "Snapshot spacing in time");
    b.bind("--cache-spacing", cache_spacing,
           "Log spacing of the kernel interpolation table");
    b.bind_flag("--no-kernel-cache", no_kernel_cache,
                "Evaluate every kernel value by quadrature (slow)");
    b.bind_flag("--no-closed-form", no_closed_form,
                "Disable the d=3, alpha=1 closed-form velocity path");
    b.bind("--threads", threads, "Worker threads for velocity assembly");
  }

  agglab::SimConfig sim(double default_record) const {
    if (threads < 1)
      throw std::invalid_argument("threads must be an integer >= 1");
    agglab::SimConfig c;
    c.rel_tol = rel_tol;
    c.abs_tol = abs_tol;
    c.absorb_radius = absorb_radius;
    c.merge_gap = merge_gap;
    c.max_step = max_step;
    c.record_every = is_set(record_every) ? record_every : default_record;
    c.use_kernel_cache = !no_kernel_cache;
    c.use_closed_form_d3 = !no_closed_form;
    c.cache_log_spacing = cache_spacing;
    c.n_threads = threads;
    c.validate();
    return c;
  }

  json to_json(const agglab::SimConfig& resolved) const {
    return {{"rel_tol", resolved.rel_tol},
            {"abs_tol", resolved.abs_tol},
            {"absorb_radius", resolved.absorb_radius},
            {"merge_gap", resolved.merge_gap},
            {"max_step", resolved.max_step},
            {"record_every", resolved.record_every},
            {"use_kernel_cache", resolved.use_kernel_cache},
            {"use_closed_form_d3", resolved.use_closed_form_d3},
            {"cache_log_spacing", resolved.cache_log_spacing},
            {"threads", resolved.n_threads}};
  }
};

// ---------------------------------------------------------------------------
// Subcommands

struct KernelCmd {
  CommonOpts common;
  DataOpts data;
  double rho = kUnset;
  bool derivative = false;

  int run() {
    if (data.d == 0) throw std::invalid_argument("d is required");
    if (!is_set(data.alpha)) throw std::invalid_argument("alpha is required");
    if (!is_set(rho)) throw std::invalid_argument("rho is required");
    agglab::KernelParams params(data.d, data.alpha);

    json cfg = data.to_json(false);
    cfg["rho"] = rho;
    cfg["derivative"] = derivative;
    cfg["out"] = common.out;
    RunContext ctx("kernel", cfg, common.out);
    try {
      json result = {{"d", data.d}, {"alpha", data.alpha}, {"rho", rho}};
      double value;
      if (derivative) {
        value = agglab::psi_prime(rho, params);
        result["psi_prime"] = value;
      } else {
        value = agglab::psi(rho, params);
        result["psi"] = value;
      }
      std::cout << agglab::format_double(value) << '\n';
      write_text(ctx.path("kernel.json"),
                 [&](std::ostream& os) { os << result.dump(2) << '\n'; });
      ctx.add_output("kernel.json");
      ctx.finish("ok");
      return 0;
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    }
  }
};

struct SimulateCmd {
  CommonOpts common;
  DataOpts data;
  GridOpts grid;
  SimOpts sim;
  double t_end = kUnset;

  int run() {
    data.require_attractive();
    const agglab::InitialData profile = agglab::make_initial_data(data.spec());
    const agglab::GridSpec g = grid.grid();
    if (!is_set(t_end)) throw std::invalid_argument("t-end is required");
    if (!(t_end >= 0.0)) throw std::invalid_argument("t-end must be >= 0");
    const agglab::SimConfig cfg = sim.sim(t_end > 0.0 ? t_end / 50.0 : 0.0);
    agglab::KernelParams params(data.d, data.alpha);

    json manifest_cfg = data.to_json();
    manifest_cfg.update(grid.to_json());
    manifest_cfg.update(sim.to_json(cfg));
    manifest_cfg["t_end"] = t_end;
    manifest_cfg["seed"] = common.seed;
    manifest_cfg["out"] = common.out;
    RunContext ctx("simulate", manifest_cfg, common.out);

    auto emit = [&](const agglab::Trajectory& traj) {
      write_text(ctx.path("trajectory.csv"), [&](std::ostream& os) {
        agglab::write_trajectory_csv(os, traj);
      });
      ctx.add_output("trajectory.csv");
      write_text(ctx.path("events.csv"), [&](std::ostream& os) {
        agglab::write_events_csv(os, traj);
      });
      ctx.add_output("events.csv");
      if (!traj.snapshots.empty()) {
        const json final_measure =
            agglab::to_json(traj.snapshots.back().measure);
        write_text(ctx.path("final_measure.json"), [&](std::ostream& os) {
          os << final_measure.dump(2) << '\n';
        });
        ctx.add_output("final_measure.json");
      }
    };

    try {
      const agglab::RadialMeasure m0 = discretize(profile, g, cfg.quadrature);
      const agglab::Trajectory traj =
          integrate(agglab::initial_state(m0), params, cfg, t_end);
      emit(traj);
      ctx.finish("ok");
      return 0;
    } catch (const agglab::flow_error& e) {
      emit(e.partial());
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    }
  }
};

struct VerifyCmd {
  CommonOpts common;
  DataOpts data;
  int grid_points = 60;
  double grid_max = 1000.0;

  int run() {
    if (data.d == 0) throw std::invalid_argument("d is required");
    if (!is_set(data.alpha)) throw std::invalid_argument("alpha is required");
    agglab::KernelParams params(data.d, data.alpha);
    if (!(data.alpha < 2.0))
      throw std::domain_error("alpha must lie in (2-d, 2)");
    if (grid_points < 50)
      throw std::invalid_argument("grid-points must be an integer >= 50");
    if (!(grid_max >= 1000.0))
      throw std::invalid_argument("grid-max must be >= 1000");

    json cfg = data.to_json(false);
    cfg["grid_points"] = grid_points;
    cfg["grid_max"] = grid_max;
    cfg["out"] = common.out;
    RunContext ctx("verify", cfg, common.out);
    try {
      std::vector<double> grid{0.0};
      const auto tail = agglab::detail::logspace(1e-2, grid_max, grid_points - 1);
      grid.insert(grid.end(), tail.begin(), tail.end());
      const agglab::KernelPropertyReport report =
          agglab::verify_kernel_properties(params, grid);
      for (const agglab::PropertyCheck& c : report.checks)
        std::cout << (c.pass ? "pass" : "FAIL") << "  " << c.name
                  << "  margin=" << agglab::format_double(c.margin) << '\n';
      write_text(ctx.path("kernel_properties.json"), [&](std::ostream& os) {
        os << agglab::to_json(report).dump(2) << '\n';
      });
      ctx.add_output("kernel_properties.json");
      ctx.finish("ok");
      return 0;
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    }
  }
};

struct SimilarityCmd {
  CommonOpts common;
  int d = 0;
  double rho1 = kUnset, rho2 = kUnset;
  std::string measure_path;

  int run() {
    if (d == 0) throw std::invalid_argument("d is required");
    const bool have_pair = is_set(rho1) && is_set(rho2);
    if (have_pair == !measure_path.empty())
      throw std::invalid_argument(
          "similarity needs either --measure or both --rho1 and --rho2");

    json cfg = {{"d", d}, {"out", common.out}};
    if (have_pair) {
      cfg["rho1"] = rho1;
      cfg["rho2"] = rho2;
    } else {
      cfg["measure"] = measure_path;
    }

    if (have_pair) {
      if (!(rho1 > 0.0 && rho2 > rho1))
        throw std::domain_error("radii must satisfy 0 < rho1 < rho2");
      RunContext ctx("similarity", cfg, common.out);
      try {
        const agglab::TwoRingSimilarity sol =
            agglab::solve_two_ring_similarity(d, rho1, rho2);
        std::cout << (sol.feasible ? "feasible" : "infeasible")
                  << "  m1=" << agglab::format_double(sol.m1)
                  << "  m2=" << agglab::format_double(sol.m2) << '\n';
        write_text(ctx.path("similarity.json"), [&](std::ostream& os) {
          os << agglab::to_json(sol).dump(2) << '\n';
        });
        ctx.add_output("similarity.json");
        ctx.finish("ok");
        return 0;
      } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        ctx.finish("incomplete");
        return 1;
      }
    }

    std::ifstream in(measure_path);
    if (!in)
      throw std::invalid_argument("measure file '" + measure_path +
                                  "' cannot be read");
    json parsed;
    try {
      in >> parsed;
    } catch (const json::exception&) {
      throw std::invalid_argument("measure file '" + measure_path +
                                  "' is not valid JSON");
    }
    const agglab::RadialMeasure m = agglab::measure_from_json(parsed);
    RunContext ctx("similarity", cfg, common.out);
    try {
      const agglab::SimilarityReport report = agglab::similarity_residual(m, d);
      std::cout << "lambda_hat=" << agglab::format_double(report.lambda_hat)
                << "  residual=" << agglab::format_double(report.residual)
                << '\n';
      write_text(ctx.path("similarity.json"), [&](std::ostream& os) {
        os << agglab::to_json(report).dump(2) << '\n';
      });
      ctx.add_output("similarity.json");
      ctx.finish("ok");
      return 0;
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    }
  }
};

struct ScalingCmd {
  CommonOpts common;
  DataOpts data;
  GridOpts grid;
  SimOpts sim;
  std::vector<double> r0;

  ScalingCmd() {
    grid.rings = 2000;
    data.data = "power_law";
  }

  int run() {
    data.require_attractive();
    const agglab::InitialData profile = agglab::make_initial_data(data.spec());
    const agglab::GridSpec g = grid.grid();
    const agglab::SimConfig cfg = sim.sim(0.0);
    if (r0.empty()) r0 = agglab::detail::logspace(std::pow(10.0, -2.5), 0.1, 6);

    json manifest_cfg = data.to_json();
    manifest_cfg.update(grid.to_json());
    manifest_cfg.update(sim.to_json(cfg));
    manifest_cfg["r0"] = r0;
    manifest_cfg["seed"] = common.seed;
    manifest_cfg["out"] = common.out;
    RunContext ctx("scaling", manifest_cfg, common.out);
    try {
      const agglab::CollapseScalingReport report =
          agglab::collapse_scaling(profile, r0, g, cfg);
      std::cout << "slope=" << agglab::format_double(report.slope)
                << "  stderr=" << agglab::format_double(report.slope_stderr)
                << '\n';
      write_text(ctx.path("scaling.json"), [&](std::ostream& os) {
        os << agglab::to_json(report).dump(2) << '\n';
      });
      ctx.add_output("scaling.json");
      ctx.finish("ok");
      return 0;
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    }
  }
};

struct RatioCmd {
  CommonOpts common;
  DataOpts data;
  GridOpts grid;
  SimOpts sim;
  double time = kUnset;

  RatioCmd() { grid.r_min = 1e-8; }

  int run() {
    data.require_attractive();
    const agglab::InitialDataSpec spec = data.spec();
    if (spec.kind == agglab::InitialDataKind::power_law)
      throw std::domain_error(
          "data must be log_critical_alpha1 or log_critical_general for ratio");
    const agglab::InitialData profile = agglab::make_initial_data(spec);
    const agglab::GridSpec g = grid.grid();
    if (!is_set(time)) throw std::invalid_argument("time is required");
    if (!(time >= 0.0)) throw std::invalid_argument("time must be >= 0");
    const agglab::SimConfig cfg = sim.sim(time > 0.0 ? time / 4.0 : 0.0);
    agglab::KernelParams params(data.d, data.alpha);

    json manifest_cfg = data.to_json();
    manifest_cfg.update(grid.to_json());
    manifest_cfg.update(sim.to_json(cfg));
    manifest_cfg["time"] = time;
    manifest_cfg["seed"] = common.seed;
    manifest_cfg["out"] = common.out;
    RunContext ctx("ratio", manifest_cfg, common.out);
    try {
      const agglab::RadialMeasure m0 = discretize(profile, g, cfg.quadrature);
      const agglab::Trajectory traj =
          integrate(agglab::initial_state(m0), params, cfg, time);
      const agglab::RatioCurve curve =
          agglab::critical_ratio_curve(traj, time, params);
      write_text(ctx.path("ratio.csv"), [&](std::ostream& os) {
        agglab::write_ratio_csv(os, curve);
      });
      ctx.add_output("ratio.csv");
      write_text(ctx.path("ratio.json"), [&](std::ostream& os) {
        os << agglab::to_json(curve).dump(2) << '\n';
      });
      ctx.add_output("ratio.json");
      ctx.finish("ok");
      return 0;
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      ctx.finish("incomplete");
      return 1;
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for radially symmetric aggregation "
               "dynamics with power-law kernels"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  KernelCmd kernel_cmd;
  SimulateCmd simulate_cmd;
  VerifyCmd verify_cmd;
  SimilarityCmd similarity_cmd;
  ScalingCmd scaling_cmd;
  RatioCmd ratio_cmd;

  struct Wiring {
    CLI::App* sub;
    std::unique_ptr<OptionBinder> binder;
    std::string* config_path;
    std::function<int()> run;
  };
  std::vector<Wiring> wirings;

  auto wire = [&](CLI::App* sub, CommonOpts& common, std::function<int()> run) {
    auto binder = std::make_unique<OptionBinder>(sub);
    common.add(*binder);
    sub->add_option("--config", common.config_path,
                    "JSON file with option values (flags take precedence)");
    wirings.push_back(
        {sub, std::move(binder), &common.config_path, std::move(run)});
    return wirings.back().binder.get();
  };

  {
    CLI::App* sub = app.add_subcommand(
        "kernel", "Evaluate the sphere-averaged kernel psi (or psi')");
    OptionBinder* b =
        wire(sub, kernel_cmd.common, [&] { return kernel_cmd.run(); });
    kernel_cmd.data.add(*b, false);
    b->bind("--rho", kernel_cmd.rho, "Relative radius argument of psi");
    b->bind_flag("--derivative", kernel_cmd.derivative,
                 "Evaluate psi' instead of psi");
  }
  {
    CLI::App* sub = app.add_subcommand(
        "simulate", "Integrate the ring dynamics from a singular profile");
    OptionBinder* b =
        wire(sub, simulate_cmd.common, [&] { return simulate_cmd.run(); });
    simulate_cmd.data.add(*b);
    simulate_cmd.grid.add(*b);
    simulate_cmd.sim.add(*b);
    b->bind("--t-end", simulate_cmd.t_end, "Integration end time");
  }
  {
    CLI::App* sub = app.add_subcommand(
        "verify", "Check kernel positivity, monotonicity, tails, curvature");
    OptionBinder* b =
        wire(sub, verify_cmd.common, [&] { return verify_cmd.run(); });
    verify_cmd.data.add(*b, false);
    b->bind("--grid-points", verify_cmd.grid_points,
            "Sample points for the property grid (>= 50)");
    b->bind("--grid-max", verify_cmd.grid_max,
            "Upper end of the property grid (>= 1000)");
  }
  {
    CLI::App* sub = app.add_subcommand(
        "similarity",
        "Solve for two-ring similarity masses or score a measure's residual");
    OptionBinder* b =
        wire(sub, similarity_cmd.common, [&] { return similarity_cmd.run(); });
    b->bind("--d", similarity_cmd.d, "Space dimension (integer >= 2)");
    b->bind("--rho1", similarity_cmd.rho1, "Inner ring radius");
    b->bind("--rho2", similarity_cmd.rho2, "Outer ring radius");
    b->bind("--measure", similarity_cmd.measure_path,
            "JSON file holding a radial measure to score");
  }
  {
    CLI::App* sub = app.add_subcommand(
        "scaling", "Fit the collapse-time exponent for power-law data");
    OptionBinder* b =
        wire(sub, scaling_cmd.common, [&] { return scaling_cmd.run(); });
    scaling_cmd.data.add(*b);
    scaling_cmd.grid.add(*b);
    scaling_cmd.sim.add(*b);
    b->bind("--r0", scaling_cmd.r0,
            "Labels whose absorption times enter the fit (repeatable)");
  }
  {
    CLI::App* sub = app.add_subcommand(
        "ratio", "Emit the critical-ratio curve of a log-critical profile");
    OptionBinder* b =
        wire(sub, ratio_cmd.common, [&] { return ratio_cmd.run(); });
    ratio_cmd.data.add(*b);
    ratio_cmd.grid.add(*b);
    ratio_cmd.sim.add(*b);
    b->bind("--time", ratio_cmd.time, "Time at which the curve is evaluated");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    for (Wiring& w : wirings) {
      if (!w.sub->parsed()) continue;
      if (!w.config_path->empty()) {
        std::ifstream in(*w.config_path);
        if (!in)
          throw std::invalid_argument("config file '" + *w.config_path +
                                      "' cannot be read");
        json cfg;
        try {
          in >> cfg;
        } catch (const json::exception&) {
          throw std::invalid_argument("config file '" + *w.config_path +
                                      "' is not valid JSON");
        }
        w.binder->apply(cfg);
      }
      return w.run();
    }
    std::cerr << "error: no command given\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
