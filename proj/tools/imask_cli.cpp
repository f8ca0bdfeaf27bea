// imask: phantoms, sinograms, step-size tables, solver runs and run comparison.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "imask/errors.hpp"
#include "imask/experiment.hpp"

namespace {

using namespace imask;

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const std::string text = serialize(RunConfig{});
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eq = text.find(" =", pos);
    keys.push_back(text.substr(pos, eq - pos));
    pos = text.find('\n', pos) + 1;
  }
  return keys;
}

std::string flag_name(std::string key) {
  for (auto& ch : key) {
    if (ch == '_') ch = '-';
  }
  return "--" + key;
}

/// Config file, then one flag per RunConfig key, then repeated --set key=value.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "flat key = value config file");
    for (const auto& key : config_keys()) cmd->add_option(flag_name(key), values[key], "config key " + key);
    cmd->add_option("--set", sets, "override as key=value (repeatable)");
  }

  RunConfig resolve(const CLI::App* cmd) const {
    RunConfig cfg = file.empty() ? RunConfig{} : load_config(file);
    for (const auto& [key, value] : values) {
      if (cmd->count(flag_name(key)) > 0) set_config_value(cfg, key, value);
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void print_constants(const StepChoice& s) {
  const RateConstants& k = s.constants;
  std::printf("L        %.6g\nLbar     %.6g\nLbar_p   %.6g\nmin_p    %.6g\n", k.L, k.Lbar,
              k.Lbar_p, k.min_p);
  if (!k.converged) std::printf("warning  power method did not converge\n");
  std::printf("sigma_B  %.6g\n", s.sigma_B);
  if (s.plan) {
    std::printf("c        %.6g\nrho      %.6g\neta*     %.6g\nsigma*   %.6g\ntheta*   %.8g\n",
                s.plan->c, s.plan->rho, s.plan->eta_star, s.plan->sigma_star, s.plan->theta_star);
  }
  std::printf("sigma    %.6g\n", s.sigma);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiresolution sketched primal-dual reconstruction for parallel-beam CT"};
  app.require_subcommand(1);

  // phantom
  auto* ph = app.add_subcommand("phantom", "write a phantom as a 16-bit graymap");
  std::string ph_kind = "shepp-logan";
  std::size_t ph_side = 64;
  std::size_t ph_align = 0;
  std::string ph_out = "phantom.pgm";
  ph->add_option("--kind", ph_kind, "shepp-logan | square-insert | flat");
  ph->add_option("--side", ph_side, "pixels per edge (power of two)");
  ph->add_option("--alignment", ph_align, "square-insert edge grid (0 = side/4)");
  ph->add_option("-o,--out", ph_out, "output path");

  // sinogram
  auto* sg = app.add_subcommand("sinogram", "write the (noisy) sinogram of a configured phantom");
  ConfigFlags sg_flags;
  sg_flags.attach(sg);
  std::string sg_out = "sinogram.pgm";
  std::string sg_csv;
  sg->add_option("-o,--out", sg_out, "graymap output (detectors x angles)");
  sg->add_option("--csv", sg_csv, "also write raw values, one angle per row");

  // rates
  auto* rt = app.add_subcommand("rates", "constants and the (c, rho) step-size table");
  ConfigFlags rt_flags;
  rt_flags.attach(rt);
  std::size_t rt_grid = 100;
  std::string rt_out;
  rt->add_option("--grid", rt_grid, "grid points per axis");
  rt->add_option("-o,--out", rt_out, "CSV path (stdout when empty)");

  // solve
  auto* sv = app.add_subcommand("solve", "run a configured experiment and write its bundle");
  ConfigFlags sv_flags;
  sv_flags.attach(sv);

  // compare
  auto* cp = app.add_subcommand("compare", "align bundles by cost and estimate decay slopes");
  std::vector<std::string> cp_dirs;
  double cp_threshold = 1e-3;
  double cp_cost_max = 0.0;
  std::string cp_out = "summary.csv";
  std::string cp_aligned = "aligned.csv";
  cp->add_option("bundles", cp_dirs, "bundle directories")->required();
  cp->add_option("--threshold", cp_threshold, "rel_dist level for cost_to_threshold");
  cp->add_option("--cost-max", cp_cost_max, "slope window (0 = shortest run)");
  cp->add_option("-o,--out", cp_out, "summary CSV");
  cp->add_option("--aligned", cp_aligned, "cost-aligned CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*ph) {
      const Phantom p = make_phantom(parse_phantom_kind(ph_kind), ph_side, ph_align);
      write_pgm(ph_out, p.values, ph_side, ph_side);
      std::printf("wrote %s (%zux%zu)\n", ph_out.c_str(), ph_side, ph_side);
    } else if (*sg) {
      const RunConfig cfg = sg_flags.resolve(sg);
      const Setup s = build_setup(cfg);
      write_pgm(sg_out, s.problem.b, s.geom.n_detectors, s.geom.n_angles);
      if (!sg_csv.empty()) {
        std::ofstream out(sg_csv);
        for (std::size_t a = 0; a < s.geom.n_angles; ++a) {
          for (std::size_t d = 0; d < s.geom.n_detectors; ++d) {
            if (d) out << ',';
            out << format_number(s.problem.b[a * s.geom.n_detectors + d]);
          }
          out << '\n';
        }
      }
      std::printf("wrote %s (%zu angles x %zu detectors)\n", sg_out.c_str(), s.geom.n_angles,
                  s.geom.n_detectors);
    } else if (*rt) {
      const RunConfig cfg = rt_flags.resolve(rt);
      const Setup s = build_setup(cfg);
      const StepChoice choice = choose_step(cfg, s);
      print_constants(choice);
      const PlanGrid grid = search_plane(choice.constants.inflated(1.01), rt_grid, rt_grid);
      std::ofstream file;
      if (!rt_out.empty()) file.open(rt_out);
      std::ostream& os = rt_out.empty() ? std::cout : file;
      os << "c,rho,eta_star,sigma_star,theta_star\n";
      for (const auto& p : grid.plans) {
        os << format_number(p.c) << ',' << format_number(p.rho) << ',' << format_number(p.eta_star)
           << ',' << format_number(p.sigma_star) << ',' << format_number(p.theta_star) << '\n';
      }
    } else if (*sv) {
      RunConfig cfg = sv_flags.resolve(sv);
      if (cfg.output_dir.empty()) cfg.output_dir = "run";
      const ExperimentResult res = run_experiment(cfg);
      if (cfg.algorithm != Algorithm::pdhg) print_constants(res.step);
      const MetricsRow& last = res.mean.back();
      std::printf("seeds    %zu\nk        %llu\ncost     %.6g\nrel_dist %.6g\npsnr     %.4f\n",
                  res.runs.size(), static_cast<unsigned long long>(last.k), last.cost,
                  last.rel_dist, last.psnr);
      std::printf("wrote bundle %s\n", cfg.output_dir.c_str());
    } else if (*cp) {
      std::vector<Bundle> bundles;
      for (const auto& d : cp_dirs) bundles.push_back(load_bundle(d));
      CompareOptions opt;
      opt.threshold = cp_threshold;
      opt.cost_max = cp_cost_max;
      const Comparison c = compare_runs(bundles, opt);
      std::ofstream s(cp_out);
      std::ofstream a(cp_aligned);
      if (!s || !a) throw ConfigError("cannot write comparison outputs");
      write_comparison(s, a, c);
      std::ostringstream discard;
      write_comparison(std::cout, discard, c);
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kNumericalExit;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
