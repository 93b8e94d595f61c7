#pragma once

// JSON model files, JSON result files, and CSV emitters. Parsing is strict:
// unknown keys anywhere in a model file are errors, so typos fail loudly
// instead of silently dropping a term from the model. All output goes through
// atomic_write_text (write sibling temp file, then rename) so readers never
// observe a half-written file, and all number formatting is locale
// independent.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pdmp/errors.hpp"
#include "pdmp/gene_expression.hpp"
#include "pdmp/linalg.hpp"
#include "pdmp/model.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/version.hpp"

namespace pdmp {

using Json = nlohmann::json;

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& path, const std::string& what) {
  throw InvalidModelError(path.empty() ? what : path + ": " + what);
}

inline void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) parse_fail(path, "expected a JSON object");
}

// Strict-mode key check: everything present must be in the allowed list.
inline void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed,
                                const std::string& path) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) { known = true; break; }
    if (!known) parse_fail(path, "unknown key \"" + item.key() + "\"");
  }
}

inline const Json& require_key(const Json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(path, std::string("missing required key \"") + key + "\"");
  return *it;
}

inline double parse_number(const Json& j, const std::string& path) {
  if (!j.is_number()) parse_fail(path, "expected a number");
  return j.get<double>();
}

inline Eigen::Index parse_dimension(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<int64_t>() < 1)
    parse_fail(path, "expected a positive integer");
  return static_cast<Eigen::Index>(j.get<int64_t>());
}

inline Vector parse_vector(const Json& j, Eigen::Index n, const std::string& path) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    parse_fail(path, "expected an array of " + std::to_string(n) + " numbers");
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = parse_number(j[static_cast<size_t>(i)], path + "[" + std::to_string(i) + "]");
  return v;
}

// Row-major nested arrays: j[i] is row i.
inline Matrix parse_matrix(const Json& j, Eigen::Index rows, Eigen::Index cols,
                           const std::string& path) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    parse_fail(path, "expected an array of " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<size_t>(r)];
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      parse_fail(row_path, "expected a row of " + std::to_string(cols) + " numbers");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = parse_number(row[static_cast<size_t>(c)],
                             row_path + "[" + std::to_string(c) + "]");
  }
  return m;
}

inline Json vector_to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline Json matrix_to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

}  // namespace detail

inline InterEventDistribution distribution_from_json(const Json& j,
                                                     const std::string& path = "distribution") {
  detail::require_object(j, path);
  const Json& type_j = detail::require_key(j, "type", path);
  if (!type_j.is_string()) detail::parse_fail(path + ".type", "expected a string");
  const std::string type = type_j.get<std::string>();
  try {
    if (type == "exponential") {
      detail::reject_unknown_keys(j, {"type", "rate"}, path);
      return InterEventDistribution::exponential(
          detail::parse_number(detail::require_key(j, "rate", path), path + ".rate"));
    }
    if (type == "gamma") {
      detail::reject_unknown_keys(j, {"type", "shape", "scale"}, path);
      return InterEventDistribution::gamma(
          detail::parse_number(detail::require_key(j, "shape", path), path + ".shape"),
          detail::parse_number(detail::require_key(j, "scale", path), path + ".scale"));
    }
    if (type == "deterministic") {
      detail::reject_unknown_keys(j, {"type", "value"}, path);
      return InterEventDistribution::deterministic(
          detail::parse_number(detail::require_key(j, "value", path), path + ".value"));
    }
    if (type == "lognormal") {
      detail::reject_unknown_keys(j, {"type", "mu", "sigma"}, path);
      return InterEventDistribution::lognormal(
          detail::parse_number(detail::require_key(j, "mu", path), path + ".mu"),
          detail::parse_number(detail::require_key(j, "sigma", path), path + ".sigma"));
    }
    if (type == "weibull") {
      detail::reject_unknown_keys(j, {"type", "shape", "scale"}, path);
      return InterEventDistribution::weibull(
          detail::parse_number(detail::require_key(j, "shape", path), path + ".shape"),
          detail::parse_number(detail::require_key(j, "scale", path), path + ".scale"));
    }
    if (type == "tabulated") {
      detail::reject_unknown_keys(j, {"type", "points"}, path);
      const Json& pts = detail::require_key(j, "points", path);
      if (!pts.is_array() || pts.size() < 2)
        detail::parse_fail(path + ".points", "expected an array of at least 2 [t, pdf] pairs");
      std::vector<double> ts, ws;
      ts.reserve(pts.size());
      ws.reserve(pts.size());
      for (size_t i = 0; i < pts.size(); ++i) {
        const std::string pt_path = path + ".points[" + std::to_string(i) + "]";
        const Json& pt = pts[i];
        if (!pt.is_array() || pt.size() != 2)
          detail::parse_fail(pt_path, "expected a [t, pdf] pair");
        ts.push_back(detail::parse_number(pt[0], pt_path + "[0]"));
        ws.push_back(detail::parse_number(pt[1], pt_path + "[1]"));
      }
      return InterEventDistribution::tabulated(std::move(ts), std::move(ws));
    }
  } catch (const DomainError& e) {
    detail::parse_fail(path, e.what());
  }
  detail::parse_fail(path + ".type", "unknown distribution type \"" + type + "\"");
}

inline Json distribution_to_json(const InterEventDistribution& d) {
  Json j;
  switch (d.kind()) {
    case DistributionKind::Exponential:
      j["type"] = "exponential";
      j["rate"] = d.param_a();
      break;
    case DistributionKind::Gamma:
      j["type"] = "gamma";
      j["shape"] = d.param_a();
      j["scale"] = d.param_b();
      break;
    case DistributionKind::Deterministic:
      j["type"] = "deterministic";
      j["value"] = d.param_a();
      break;
    case DistributionKind::LogNormal:
      j["type"] = "lognormal";
      j["mu"] = d.param_a();
      j["sigma"] = d.param_b();
      break;
    case DistributionKind::Weibull:
      j["type"] = "weibull";
      j["shape"] = d.param_a();
      j["scale"] = d.param_b();
      break;
    case DistributionKind::Tabulated: {
      j["type"] = "tabulated";
      Json pts = Json::array();
      const auto& ts = d.table_times();
      const auto& ws = d.table_weights();
      for (size_t i = 0; i < ts.size(); ++i) pts.push_back(Json::array({ts[i], ws[i]}));
      j["points"] = std::move(pts);
      break;
    }
  }
  return j;
}

// Parses a full model file. Shape errors, unknown keys, and inadmissible
// parameters all throw InvalidModelError with the JSON path of the offender.
inline PDMPModel model_from_json(const Json& j) {
  detail::require_object(j, "");
  detail::reject_unknown_keys(j, {"dimension", "dynamics", "poisson_resets", "general_reset"},
                              "");
  const Eigen::Index n = detail::parse_dimension(detail::require_key(j, "dimension", ""),
                                                 "dimension");

  const Json& dyn = detail::require_key(j, "dynamics", "");
  detail::require_object(dyn, "dynamics");
  detail::reject_unknown_keys(dyn, {"a_hat", "A"}, "dynamics");
  LinearDynamics dynamics{
      detail::parse_vector(detail::require_key(dyn, "a_hat", "dynamics"), n, "dynamics.a_hat"),
      detail::parse_matrix(detail::require_key(dyn, "A", "dynamics"), n, n, "dynamics.A")};

  std::vector<PoissonResetFamily> poisson;
  if (auto it = j.find("poisson_resets"); it != j.end()) {
    if (!it->is_array()) detail::parse_fail("poisson_resets", "expected an array");
    for (size_t i = 0; i < it->size(); ++i) {
      const std::string path = "poisson_resets[" + std::to_string(i) + "]";
      const Json& f = (*it)[i];
      detail::require_object(f, path);
      detail::reject_unknown_keys(f, {"rate", "J", "R_mean", "R_second"}, path);
      PoissonResetFamily fam;
      fam.rate = detail::parse_number(detail::require_key(f, "rate", path), path + ".rate");
      fam.J1 = detail::parse_matrix(detail::require_key(f, "J", path), n, n, path + ".J");
      fam.R1_mean =
          detail::parse_vector(detail::require_key(f, "R_mean", path), n, path + ".R_mean");
      // A reset offset given only by its mean is treated as deterministic.
      if (auto second = f.find("R_second"); second != f.end())
        fam.R1_second = detail::parse_matrix(*second, n, n, path + ".R_second");
      else
        fam.R1_second = fam.R1_mean * fam.R1_mean.transpose();
      poisson.push_back(std::move(fam));
    }
  }

  const Json& gen = detail::require_key(j, "general_reset", "");
  detail::require_object(gen, "general_reset");
  detail::reject_unknown_keys(gen, {"distribution", "J", "R", "Q", "B", "C", "D"},
                              "general_reset");
  GeneralResetFamily general{
      distribution_from_json(detail::require_key(gen, "distribution", "general_reset"),
                             "general_reset.distribution"),
      detail::parse_matrix(detail::require_key(gen, "J", "general_reset"), n, n,
                           "general_reset.J"),
      Vector::Zero(n), Matrix::Zero(n, n), Matrix::Zero(n, n), Vector::Zero(n),
      Matrix::Zero(n, n)};
  if (auto it = gen.find("R"); it != gen.end())
    general.R2 = detail::parse_vector(*it, n, "general_reset.R");
  if (auto it = gen.find("Q"); it != gen.end())
    general.Q2 = detail::parse_matrix(*it, n, n, "general_reset.Q");
  if (auto it = gen.find("B"); it != gen.end())
    general.B2 = detail::parse_matrix(*it, n, n, "general_reset.B");
  if (auto it = gen.find("C"); it != gen.end())
    general.C2 = detail::parse_vector(*it, n, "general_reset.C");
  if (auto it = gen.find("D"); it != gen.end())
    general.D2 = detail::parse_matrix(*it, n, n, "general_reset.D");

  PDMPModel model{std::move(dynamics), std::move(poisson), std::move(general)};
  const ValidationReport report = validate(model);
  if (!report.ok()) throw InvalidModelError(report.to_string());
  return model;
}

inline Json model_to_json(const PDMPModel& m) {
  Json j;
  j["dimension"] = static_cast<int64_t>(m.dim());
  j["dynamics"] = {{"a_hat", detail::vector_to_json(m.dynamics.a_hat)},
                   {"A", detail::matrix_to_json(m.dynamics.A)}};
  Json resets = Json::array();
  for (const auto& f : m.poisson_families)
    resets.push_back({{"rate", f.rate},
                      {"J", detail::matrix_to_json(f.J1)},
                      {"R_mean", detail::vector_to_json(f.R1_mean)},
                      {"R_second", detail::matrix_to_json(f.R1_second)}});
  j["poisson_resets"] = std::move(resets);
  j["general_reset"] = {{"distribution", distribution_to_json(m.general_family.dist)},
                        {"J", detail::matrix_to_json(m.general_family.J2)},
                        {"R", detail::vector_to_json(m.general_family.R2)},
                        {"Q", detail::matrix_to_json(m.general_family.Q2)},
                        {"B", detail::matrix_to_json(m.general_family.B2)},
                        {"C", detail::vector_to_json(m.general_family.C2)},
                        {"D", detail::matrix_to_json(m.general_family.D2)}};
  return j;
}

inline PDMPModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidModelError("cannot open model file: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidModelError("model file is not valid JSON: " + std::string(e.what()));
  }
  return model_from_json(j);
}

namespace detail {

inline Json stability_to_json(const StabilityReport& r) {
  return {{"order", r.order},
          {"spectral_radius", r.spectral_radius},
          {"stable", r.stable},
          {"matrix_checked", r.matrix_checked}};
}

}  // namespace detail

struct ResultMeta {
  std::string input_digest;       // sha256 hex of the model file bytes
  double quadrature_tolerance = 0.0;
};

inline Json result_to_json(const MeanSolution& s, const ResultMeta& meta) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["input_digest"] = meta.input_digest;
  j["quadrature_tolerance"] = meta.quadrature_tolerance;
  j["order"] = 1;
  j["mean"] = detail::vector_to_json(s.mean);
  j["stability"] = Json::array({detail::stability_to_json(s.stability)});
  j["numerical_error_estimate"] = s.numerical_error_estimate;
  return j;
}

inline Json result_to_json(const MomentSolution& s, const ResultMeta& meta) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["input_digest"] = meta.input_digest;
  j["quadrature_tolerance"] = meta.quadrature_tolerance;
  j["order"] = 2;
  j["mean"] = detail::vector_to_json(s.mean);
  j["second_moment"] = detail::matrix_to_json(s.second_moment);
  j["covariance"] = detail::matrix_to_json(s.covariance);
  j["cv2"] = detail::vector_to_json(s.cv2);
  Json stab = Json::array();
  for (const auto& r : s.stability) stab.push_back(detail::stability_to_json(r));
  j["stability"] = std::move(stab);
  j["numerical_error_estimate"] = s.numerical_error_estimate;
  return j;
}

struct SimulateMeta {
  std::string input_digest;
  uint64_t seed = 0;
  int64_t burnin_cycles = 0;
  std::string sampler;
};

inline Json stats_to_json(const EnsembleStats& s, const SimulateMeta& meta) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["input_digest"] = meta.input_digest;
  j["seed"] = meta.seed;
  j["burnin_cycles"] = meta.burnin_cycles;
  j["sampler"] = meta.sampler;
  j["n_traj"] = s.n_traj;
  j["mean"] = detail::vector_to_json(s.mean);
  j["mean_se"] = detail::vector_to_json(s.mean_se);
  j["second_moment"] = detail::matrix_to_json(s.second_moment);
  j["second_moment_se"] = detail::matrix_to_json(s.second_moment_se);
  j["cv2"] = detail::vector_to_json(s.cv2);
  j["cv2_se"] = detail::vector_to_json(s.cv2_se);
  j["warnings"] = s.warnings;
  return j;
}

// Locale-independent shortest round-trip formatting ('.' decimal separator
// regardless of the process locale).
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view x_header) {
  std::string out;
  out += x_header;
  out += ",cc,synth,part,total,cc_norm,synth_norm,part_norm,total_norm\n";
  for (const auto& r : rows) {
    out += format_double(r.x);
    for (double v : {r.cc, r.synth, r.part, r.total, r.cc_norm, r.synth_norm, r.part_norm,
                     r.total_norm}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

// Event log CSV: one row per reset, with the state on both sides of the jump.
// event_kind is "general" for the renewal reset, "poisson<i>" for family i.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "time,event_kind";
  const Eigen::Index n =
      traj.events.empty() ? traj.final_state.size() : traj.events.front().state_before.size();
  for (Eigen::Index i = 0; i < n; ++i) out += ",before_" + std::to_string(i);
  for (Eigen::Index i = 0; i < n; ++i) out += ",after_" + std::to_string(i);
  out += '\n';
  for (const auto& ev : traj.events) {
    out += format_double(ev.time);
    out += ',';
    out += ev.kind < 0 ? "general" : "poisson" + std::to_string(ev.kind);
    for (Eigen::Index i = 0; i < n; ++i) {
      out += ',';
      out += format_double(ev.state_before(i));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      out += ',';
      out += format_double(ev.state_after(i));
    }
    out += '\n';
  }
  return out;
}

// Writes via a sibling temp file and renames over the target, so a crash
// mid-write never leaves a truncated file at the destination.
inline void atomic_write_text(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace pdmp
