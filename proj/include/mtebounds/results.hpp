#pragma once

// Sweep results as a structured JSON file and a flat per-point CSV table.
// Both are pure functions of their inputs, so identical sweeps give
// byte-identical files.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtebounds/config.hpp"
#include "mtebounds/data.hpp"
#include "mtebounds/engine.hpp"

namespace mtebounds {

/// Infinite bounds become the strings "inf" and "-inf"; NaN becomes null.
inline json number_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

/// %.17g, with infinities as inf/-inf and NaN as an empty field.
inline std::string number_text(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json lambda_json(const LambdaPoint& l) {
  json j = json::object();
  j["weights"] = l.weights;
  j["rhos"] = l.rhos;
  return j;
}

inline json record_json(const PointRecord& r) {
  json j = json::object();
  j["index"] = r.index;
  j["lambda"] = lambda_json(r.lambda);
  j["anchor"] = r.anchor ? json(*r.anchor) : json(nullptr);
  j["status"] = to_string(r.status);
  j["lb"] = number_json(r.lb);
  j["ub"] = number_json(r.ub);
  j["message"] = r.message;
  json diag = json::object();
  diag["identification_residual"] = number_json(r.identification_residual);
  diag["cells"] = r.cells;
  diag["variables"] = r.variables;
  diag["rows"] = r.rows;
  diag["lp_iterations"] = r.lp_iterations;
  diag["lp_residual"] = number_json(r.lp_residual);
  j["diagnostics"] = diag;
  j["notes"] = r.notes;
  if (r.thresholds) {
    j["thresholds"] = r.thresholds->g;
    if (!r.thresholds->tilde.empty()) j["latent_thresholds"] = r.thresholds->tilde;
  } else {
    j["thresholds"] = nullptr;
  }
  return j;
}

inline json tolerances_json(const Tolerances& t) {
  json j = json::object();
  j["eps_feas"] = t.eps_feas;
  j["merge_tol"] = t.merge_tol;
  j["mass_floor"] = t.mass_floor;
  j["max_cells"] = t.max_cells;
  j["quad_abs_tol"] = t.quad.abs_tol;
  j["quad_rel_tol"] = t.quad.rel_tol;
  j["lp_feasibility"] = t.lp.feasibility;
  j["lp_optimality"] = t.lp.optimality;
  j["lp_pivot"] = t.lp.pivot;
  j["lp_max_iterations"] = t.lp.max_iterations;
  return j;
}

inline json result_json(const SweepResult& res, const RunConfig& cfg, const std::string& hash) {
  json j = json::object();
  j["schema_version"] = kSchemaVersion;
  j["config_hash"] = hash;
  j["model"] = to_string(cfg.model.kind);
  j["family"] = to_string(cfg.family);
  j["target"] = to_string(cfg.target.kind);
  j["tolerances"] = tolerances_json(cfg.tol);
  json set = json::array();
  for (const auto& iv : res.identified_set) set.push_back(json::array({number_json(iv.lo), number_json(iv.hi)}));
  j["identified_set"] = set;
  j["empty"] = res.identified_set.empty();
  j["rejected_everywhere"] = res.rejected_everywhere;
  json counts = json::object();
  counts["points"] = res.records.size();
  for (PointStatus s : {PointStatus::Bounded, PointStatus::Rejected, PointStatus::TargetUndefined,
                        PointStatus::InfeasibleOutcomeMoments, PointStatus::NumericalFailure}) {
    std::size_t n = 0;
    for (const auto& r : res.records) n += r.status == s;
    counts[to_string(s)] = n;
  }
  j["counts"] = counts;
  json recs = json::array();
  for (const auto& r : res.records) recs.push_back(record_json(r));
  j["records"] = recs;
  return j;
}

/// One row per grid point: index, lambda components, anchor, status, lb, ub.
inline std::string lambda_table_csv(const SweepResult& res, const RunConfig& cfg) {
  std::size_t nw = 0, nr = 0;
  for (const auto& r : res.records) {
    nw = std::max(nw, r.lambda.weights.size());
    nr = std::max(nr, r.lambda.rhos.size());
  }
  const bool anchors = cfg.model.kind == ModelKind::DoubleHurdle;
  std::string out = "index";
  for (std::size_t i = 0; i < nw; ++i) out += ",w" + std::to_string(i + 1);
  for (std::size_t i = 0; i < nr; ++i) out += ",rho" + std::to_string(i + 1);
  if (anchors) out += ",anchor";
  out += ",status,lb,ub\n";
  for (const auto& r : res.records) {
    out += std::to_string(r.index);
    for (std::size_t i = 0; i < nw; ++i) out += "," + (i < r.lambda.weights.size() ? number_text(r.lambda.weights[i]) : "");
    for (std::size_t i = 0; i < nr; ++i) out += "," + (i < r.lambda.rhos.size() ? number_text(r.lambda.rhos[i]) : "");
    if (anchors) out += "," + (r.anchor ? number_text(*r.anchor) : std::string());
    out += std::string(",") + to_string(r.status) + "," + number_text(r.lb) + "," + number_text(r.ub) + "\n";
  }
  return out;
}

/// Writes result.json and lambda_table.csv into outdir (created if needed).
inline void emit_results(const SweepResult& res, const RunConfig& cfg, const std::string& hash,
                         const std::string& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw DataError("cannot create '" + outdir + "': " + ec.message());
  const std::filesystem::path dir(outdir);
  write_text_file((dir / "result.json").string(), result_json(res, cfg, hash).dump(2) + "\n");
  write_text_file((dir / "lambda_table.csv").string(), lambda_table_csv(res, cfg));
}

}  // namespace mtebounds
