// Command-line front end: moments, validate, identify, bounds, export-lp.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtebounds/mtebounds.hpp"

namespace mb = mtebounds;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };
Level g_level = Level::Warn;

void log(Level l, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (l <= g_level) std::cerr << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
}

struct Loaded {
  mb::json config_json;
  mb::json moments_json;
  mb::RunConfig cfg;
  mb::MomentTable moments;
};

Loaded load(const std::string& config_path, const std::string& moments_path) {
  Loaded l;
  l.config_json = mb::read_json_file(config_path);
  l.moments_json = mb::read_json_file(moments_path);
  l.cfg = mb::parse_config(l.config_json);
  l.moments = mb::moments_from_json(l.moments_json);
  return l;
}

/// Prints the report; true when there are no errors.
bool report(const mb::ValidationReport& r) {
  for (const auto& w : r.warnings) log(Level::Warn, w);
  for (const auto& e : r.errors) log(Level::Error, e);
  return r.ok();
}

double default_anchor(const mb::RunConfig& cfg, const std::optional<double>& flag) {
  if (flag) return *flag;
  return cfg.anchor_grid().front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharp bounds on treatment-effect parameters under threshold-crossing selection"};
  app.require_subcommand(1);

  std::size_t workers = 0;
  std::optional<unsigned long long> seed;
  std::string level = "warn";
  app.add_option("--workers", workers, "Worker threads for the sweep (overrides the config)");
  app.add_option("--seed", seed, "Seed for test-harness sampling; the solver itself is deterministic");
  app.add_option("--log-level", level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  std::string csv_path, out_path, config_path, moments_path, outdir, lambda_text;
  std::optional<double> anchor;
  mb::Supports sup;

  auto* c_mom = app.add_subcommand("moments", "Compute a moment table from microdata CSV");
  c_mom->add_option("microdata", csv_path, "CSV with columns y, d, z (or z1, z2) and optional x")->required();
  c_mom->add_option("-o,--output", out_path, "Moment table output file")->required();
  c_mom->add_option("--d-support", sup.d, "Treatment labels in order")->delimiter(',');
  c_mom->add_option("--z-support", sup.z, "Instrument labels in order")->delimiter(',');
  c_mom->add_option("--z1-support", sup.z1, "First instrument labels in order")->delimiter(',');
  c_mom->add_option("--z2-support", sup.z2, "Second instrument labels in order")->delimiter(',');
  c_mom->add_option("--x-support", sup.x, "Covariate labels in order")->delimiter(',');

  auto add_inputs = [&](CLI::App* c) {
    c->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    c->add_option("-m,--moments", moments_path, "Moment table (JSON)")->required();
  };
  auto* c_val = app.add_subcommand("validate", "Check a configuration against a moment table");
  add_inputs(c_val);

  auto* c_id = app.add_subcommand("identify", "Identify thresholds at one dependence parameter");
  add_inputs(c_id);
  c_id->add_option("--lambda", lambda_text, "rho, or w1,w2:r1,r2 for mixtures");
  c_id->add_option("--anchor", anchor, "Double hurdle anchor value");

  auto* c_b = app.add_subcommand("bounds", "Sweep the dependence grid and write the identified set");
  add_inputs(c_b);
  c_b->add_option("-o,--outdir", outdir, "Output directory");

  auto* c_lp = app.add_subcommand("export-lp", "Write the linear program at one dependence parameter");
  add_inputs(c_lp);
  c_lp->add_option("--lambda", lambda_text, "rho, or w1,w2:r1,r2 for mixtures");
  c_lp->add_option("--anchor", anchor, "Double hurdle anchor value");
  c_lp->add_option("-o,--output", out_path, "LP file")->required();

  CLI11_PARSE(app, argc, argv);
  g_level = level == "error" ? Level::Error : level == "info" ? Level::Info : level == "debug" ? Level::Debug : Level::Warn;
  if (seed) log(Level::Debug, "seed " + std::to_string(*seed) + " (unused by the solver)");

  try {
    if (*c_mom) {
      std::ifstream in(csv_path);
      if (!in) throw mb::DataError("cannot open '" + csv_path + "'");
      const mb::MomentTable m = mb::moments_from_microdata(in, sup);
      mb::write_moments(out_path, m);
      log(Level::Info, "wrote " + out_path);
      return kExitOk;
    }

    Loaded in = load(config_path, moments_path);
    if (workers > 0) in.cfg.workers = workers;
    const mb::ValidationReport rep = mb::validate(in.cfg, in.moments);

    if (*c_val) {
      const bool ok = report(rep);
      std::cout << (ok ? "valid" : "invalid") << " (" << rep.errors.size() << " errors, " << rep.warnings.size()
                << " warnings)\n";
      return ok ? kExitOk : kExitValidation;
    }
    if (!report(rep)) return kExitValidation;

    if (*c_id || *c_lp) {
      const mb::LambdaPoint lambda = mb::parse_lambda_text(lambda_text);
      const double a = default_anchor(in.cfg, anchor);
      const std::size_t dim = mb::family_dimension(in.cfg.family, in.cfg.model.dim());
      (void)mb::make_distribution(in.cfg.family, lambda, dim);

      if (*c_id) {
        mb::SelectionModel model = in.cfg.model;
        if (!std::isnan(a)) model.anchor = a;
        std::vector<mb::UDistribution> dists(model.n_x, mb::make_distribution(in.cfg.family, lambda, dim));
        mb::IdentifyOptions opt;
        opt.eps_feas = in.cfg.tol.eps_feas;
        opt.quad = in.cfg.tol.quad;
        const mb::IdentifyResult r = mb::identify_thresholds(model, dists, in.moments.p, opt);
        mb::json j = mb::json::object();
        const char* status = r.status == mb::IdentifyStatus::Identified ? "identified"
                             : r.status == mb::IdentifyStatus::Rejected ? "rejected"
                                                                        : "numerical_failure";
        j["status"] = status;
        j["max_residual"] = mb::number_json(r.max_residual);
        j["message"] = r.message;
        if (r.ok()) {
          j["thresholds"] = r.thresholds.g;
          if (!r.thresholds.tilde.empty()) j["latent_thresholds"] = r.thresholds.tilde;
        }
        std::cout << j.dump(2) << "\n";
        return r.status == mb::IdentifyStatus::NumericalFailure ? kExitNumerical : kExitOk;
      }

      mb::PointProblem pp = mb::build_point_lp(in.cfg, in.moments, lambda, a);
      if (pp.early) {
        log(Level::Error, std::string("no linear program at this point: ") + mb::to_string(*pp.early) + ": " +
                              pp.message);
        return *pp.early == mb::PointStatus::NumericalFailure ? kExitNumerical : kExitValidation;
      }
      for (const auto& n : pp.notes) log(Level::Warn, n);
      const std::string title = "mtebounds objective constant " + mb::number_text(pp.target.constant);
      mb::write_text_file(out_path, mb::export_lp(pp.lp, title));
      log(Level::Info, "wrote " + out_path);
      return kExitOk;
    }

    // bounds
    if (outdir.empty() && in.config_json.contains("output_dir") && in.config_json["output_dir"].is_string()) {
      outdir = in.config_json["output_dir"].get<std::string>();
    }
    if (outdir.empty()) {
      log(Level::Error, "bounds: no output directory (use -o or output_dir in the config)");
      return kExitValidation;
    }
    log(Level::Info, "sweeping " + std::to_string(in.cfg.lambdas.size() * in.cfg.anchor_grid().size()) +
                         " points with " + std::to_string(in.cfg.workers) + " workers");
    const mb::SweepResult res = mb::run_sweep(in.cfg, in.moments);
    const std::string hash = mb::config_hash(in.config_json, in.moments_json);
    mb::emit_results(res, in.cfg, hash, outdir);

    bool numerical = false;
    for (const auto& r : res.records) {
      if (r.status == mb::PointStatus::NumericalFailure) {
        numerical = true;
        log(Level::Warn, "point " + std::to_string(r.index) + ": " + r.message);
      }
    }
    if (res.identified_set.empty()) {
      std::cout << "identified set: empty" << (res.rejected_everywhere ? " (model rejected at every lambda)" : "")
                << "\n";
    } else {
      std::cout << "identified set:";
      for (const auto& iv : res.identified_set) {
        std::cout << " [" << mb::number_text(iv.lo) << ", " << mb::number_text(iv.hi) << "]";
      }
      std::cout << "\n";
    }
    return numerical ? kExitNumerical : kExitOk;
  } catch (const mb::ConfigError& e) {
    log(Level::Error, e.what());
    return kExitValidation;
  } catch (const mb::DataError& e) {
    log(Level::Error, e.what());
    return kExitValidation;
  } catch (const mb::DistributionError& e) {
    log(Level::Error, e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    log(Level::Error, e.what());
    return kExitNumerical;
  }
}
