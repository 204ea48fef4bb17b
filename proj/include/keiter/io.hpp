#pragma once

// Persistence and configuration. Everything on disk is UTF-8 JSON or CSV;
// doubles are serialized in shortest round-trip form, so save/load is exact
// and reruns are byte-comparable. Writes go through a temp-then-rename step.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "keiter/common.hpp"
#include "keiter/diagnostics.hpp"
#include "keiter/iteration.hpp"
#include "keiter/sampling.hpp"
#include "keiter/variety.hpp"
#include "keiter/weights.hpp"

namespace kei {

using json = nlohmann::json;

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr const char* kStateFormat = "keiter-state/1";
inline constexpr const char* kSampleFormat = "keiter-sample/1";
inline constexpr const char* kManifestFormat = "keiter-manifest/1";
inline constexpr const char* kReportFormat = "keiter-chain-report/1";

// ---------------------------------------------------------------------------
// Low-level file helpers.

inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail_io("cannot open '" + tmp.string() + "' for writing");
    f << text;
    f.flush();
    if (!f) fail_io("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail_io("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline void atomic_write_json(const std::filesystem::path& path, const json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_io("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (!f && !f.eof()) fail_io("read failed for '" + path.string() + "'");
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail_io("'" + path.string() + "' is not valid JSON");
  return j;
}

// Shortest round-trip decimal form of a double (what the JSON writer emits),
// reused for CSV cells so both formats print numbers identically.
inline std::string num_str(double v) { return json(v).dump(); }

// ---------------------------------------------------------------------------
// JSON <-> core types. Complex numbers are [re, im] pairs.

inline json cplx_to_json(cplx v) { return json::array({v.real(), v.imag()}); }

inline cplx cplx_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) fail_validation("expected a [re, im] pair");
  return cplx(j[0].get<double>(), j[1].get<double>());
}

inline json point_to_json(const VarietyPoint& p) {
  json z = json::array();
  for (Eigen::Index v = 0; v < p.z.size(); ++v) z.push_back(cplx_to_json(p.z[v]));
  return json{{"z", std::move(z)}, {"chart_affine", p.chart_affine}, {"chart_residue", p.chart_residue}};
}

inline VarietyPoint point_from_json(const json& j) {
  VarietyPoint p;
  const json& z = j.at("z");
  p.z = VecC(static_cast<Eigen::Index>(z.size()));
  for (std::size_t v = 0; v < z.size(); ++v) p.z[static_cast<Eigen::Index>(v)] = cplx_from_json(z[v]);
  p.chart_affine = j.at("chart_affine").get<int>();
  p.chart_residue = j.at("chart_residue").get<int>();
  return p;
}

// Content hash of a sample set over the exact double bit patterns.
inline std::string sample_content_hash(const SampleSet& S) {
  std::uint64_t h = fnv1a64(S.method);
  h = fnv1a64(&S.seed, sizeof S.seed, h);
  h = fnv1a64(&S.block, sizeof S.block, h);
  h = fnv1a64(S.variety_hash, h);
  for (const auto& p : S.points) {
    h = fnv1a64(&p.chart_affine, sizeof p.chart_affine, h);
    h = fnv1a64(&p.chart_residue, sizeof p.chart_residue, h);
    for (Eigen::Index v = 0; v < p.z.size(); ++v) {
      double re = p.z[v].real(), im = p.z[v].imag();
      h = fnv1a64(&re, sizeof re, h);
      h = fnv1a64(&im, sizeof im, h);
    }
  }
  for (Eigen::Index k = 0; k < S.weights.size(); ++k) {
    double w = S.weights[k];
    h = fnv1a64(&w, sizeof w, h);
  }
  return hash_hex(h);
}

// Provenance stamp carried by every output file.
struct RunStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string sample_hash;
};

inline void stamp_json(json& j, const RunStamp& st) {
  j["config_hash"] = st.config_hash;
  j["seed"] = st.seed;
  j["sample_hash"] = st.sample_hash;
}

inline json sample_to_json(const SampleSet& S, const RunStamp& st) {
  json pts = json::array();
  for (const auto& p : S.points) pts.push_back(point_to_json(p));
  json ws = json::array();
  for (Eigen::Index k = 0; k < S.weights.size(); ++k) ws.push_back(S.weights[k]);
  json j{{"format", kSampleFormat}, {"method", S.method},        {"sample_seed", S.seed},
         {"block", S.block},        {"variety_hash", S.variety_hash}, {"points", std::move(pts)},
         {"weights", std::move(ws)}, {"content_hash", sample_content_hash(S)}};
  stamp_json(j, st);
  return j;
}

inline SampleSet sample_from_json(const json& j) {
  if (j.value("format", "") != kSampleFormat) fail_validation("not a sample file (format tag mismatch)");
  SampleSet S;
  S.method = j.at("method").get<std::string>();
  S.seed = j.at("sample_seed").get<std::uint64_t>();
  S.block = j.at("block").get<int>();
  S.variety_hash = j.at("variety_hash").get<std::string>();
  const json& pts = j.at("points");
  const json& ws = j.at("weights");
  if (pts.size() != ws.size()) fail_validation("sample file has mismatched point and weight counts");
  S.points.reserve(pts.size());
  for (const auto& p : pts) S.points.push_back(point_from_json(p));
  S.weights = VecR(static_cast<Eigen::Index>(ws.size()));
  for (std::size_t k = 0; k < ws.size(); ++k) S.weights[static_cast<Eigen::Index>(k)] = ws[k].get<double>();
  if (j.contains("content_hash") && j["content_hash"].get<std::string>() != sample_content_hash(S))
    fail_validation("sample file content hash does not match its payload");
  return S;
}

inline json state_to_json(const MetricState& st, const RunStamp& stamp, double epsilon) {
  json exps = json::array();
  for (const auto& e : st.basis.exps) exps.push_back(e);
  json P = json::array();
  for (Eigen::Index r = 0; r < st.P.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < st.P.cols(); ++c) row.push_back(cplx_to_json(st.P(r, c)));
    P.push_back(std::move(row));
  }
  json j{{"format", kStateFormat}, {"m", st.m},       {"twist", st.basis.k},
         {"basis", std::move(exps)}, {"P", std::move(P)}, {"variety_hash", st.variety_hash},
         {"provenance", st.provenance}, {"epsilon", epsilon}};
  stamp_json(j, stamp);
  return j;
}

inline MetricState state_from_json(const json& j) {
  if (j.value("format", "") != kStateFormat) fail_validation("not a state file (format tag mismatch)");
  MetricState st;
  st.m = j.at("m").get<int>();
  st.basis.m = st.m;
  st.basis.k = j.at("twist").get<int>();
  for (const auto& e : j.at("basis")) st.basis.exps.push_back(e.get<Expo>());
  const json& P = j.at("P");
  Eigen::Index N = static_cast<Eigen::Index>(P.size());
  if (N != static_cast<Eigen::Index>(st.basis.exps.size()))
    fail_validation("state file P size disagrees with its basis");
  st.P = MatC(N, N);
  for (Eigen::Index r = 0; r < N; ++r) {
    if (P[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(N))
      fail_validation("state file P is not square");
    for (Eigen::Index c = 0; c < N; ++c) st.P(r, c) = cplx_from_json(P[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  }
  st.variety_hash = j.at("variety_hash").get<std::string>();
  st.provenance = j.at("provenance").get<std::string>();
  return st;
}

inline json step_report_to_json(const StepReport& r) {
  return json{{"m_from", r.m_from},
              {"m_to", r.m_to},
              {"condition", r.condition},
              {"min_eigenvalue", r.min_eigenvalue},
              {"sample_mass", r.sample_mass},
              {"trace_sum", r.trace_sum},
              {"trace_residual", r.trace_residual},
              {"L_before", r.L_before},
              {"L_after", r.L_after},
              {"holder_slack", r.holder_slack},
              {"millis", r.millis}};
}

inline StepReport step_report_from_json(const json& j) {
  StepReport r;
  r.m_from = j.at("m_from").get<int>();
  r.m_to = j.at("m_to").get<int>();
  r.condition = j.at("condition").get<double>();
  r.min_eigenvalue = j.at("min_eigenvalue").get<double>();
  r.sample_mass = j.at("sample_mass").get<double>();
  r.trace_sum = j.at("trace_sum").get<double>();
  r.trace_residual = j.at("trace_residual").get<double>();
  r.L_before = j.at("L_before").get<double>();
  r.L_after = j.at("L_after").get<double>();
  r.holder_slack = j.at("holder_slack").get<double>();
  r.millis = j.at("millis").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Run configuration. Accepted as JSON or as a small TOML subset (sections,
// key = value, strings, numbers, booleans, flat arrays, # comments) mapped
// onto the same tree.

struct RunConfig {
  std::string variety_text;
  std::optional<int> variety_nvars;
  int m0 = 1;
  int m_max = 0;
  double init_scale = 1.0;
  std::string weight_kind = "one";  // "one" | "zero"
  std::string weight_q;             // vanishing locus polynomial for kind "zero"
  std::vector<double> epsilons{1.0};
  std::string sampling_method = "random-line";  // | "chart-quadrature"
  long n_points = 0;
  int resolution = 0;
  std::uint64_t seed = 0;
  int probes = 200;
  std::string out_dir;
  int checkpoint_cadence = 1;
};

namespace detail {

[[noreturn]] inline void missing_field(const std::string& name) {
  fail_validation("config is missing required field '" + name + "'");
}

inline const json& need(const json& j, const char* name) {
  if (!j.contains(name)) missing_field(name);
  return j.at(name);
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) fail_validation("config root must be an object");
  RunConfig c;
  c.variety_text = detail::need(j, "variety").get<std::string>();
  if (j.contains("variety_nvars")) c.variety_nvars = j["variety_nvars"].get<int>();
  c.m0 = j.value("m0", 1);
  c.m_max = detail::need(j, "m_max").get<int>();
  if (c.m0 < 1) fail_validation("config field 'm0' must be >= 1");
  if (c.m_max <= c.m0) fail_validation("config field 'm_max' must exceed m0");
  c.init_scale = j.value("init_scale", 1.0);
  if (!(c.init_scale > 0.0)) fail_validation("config field 'init_scale' must be positive");

  if (j.contains("weight")) {
    const json& w = j["weight"];
    c.weight_kind = w.value("kind", "one");
    if (c.weight_kind != "one" && c.weight_kind != "zero")
      fail_validation("config field 'weight.kind' must be 'one' or 'zero'");
    if (c.weight_kind == "zero") {
      c.weight_q = detail::need(w, "q").get<std::string>();
      const json& eps = detail::need(w, "epsilon");
      c.epsilons.clear();
      if (eps.is_array())
        for (const auto& e : eps) c.epsilons.push_back(e.get<double>());
      else
        c.epsilons.push_back(eps.get<double>());
      if (c.epsilons.empty()) fail_validation("config field 'weight.epsilon' must not be empty");
      for (double e : c.epsilons)
        if (!(e > 0.0) || e > 1.0) fail_validation("config field 'weight.epsilon' entries must lie in (0, 1]");
      for (std::size_t i = 1; i < c.epsilons.size(); ++i)
        if (!(c.epsilons[i] < c.epsilons[i - 1]))
          fail_validation("config field 'weight.epsilon' list must be strictly decreasing");
    }
  }

  const json& s = detail::need(j, "sampling");
  c.sampling_method = s.value("method", "random-line");
  if (c.sampling_method == "random-line") {
    c.n_points = detail::need(s, "n_points").get<long>();
    if (c.n_points < 1) fail_validation("config field 'sampling.n_points' must be positive");
  } else if (c.sampling_method == "chart-quadrature") {
    c.resolution = detail::need(s, "resolution").get<int>();
    if (c.resolution < 4) fail_validation("config field 'sampling.resolution' must be at least 4");
  } else {
    fail_validation("config field 'sampling.method' must be 'random-line' or 'chart-quadrature'");
  }
  c.seed = s.value("seed", 0ULL);

  c.probes = j.value("probes", 200);
  if (c.probes < 1) fail_validation("config field 'probes' must be positive");
  c.out_dir = j.value("out", "");
  c.checkpoint_cadence = j.value("checkpoint_cadence", 1);
  if (c.checkpoint_cadence < 1) fail_validation("config field 'checkpoint_cadence' must be >= 1");
  return c;
}

// Normalized echo of a config; hashing this makes TOML and JSON spellings of
// the same run agree, and makes the effective seed part of the hash.
inline json config_to_json(const RunConfig& c) {
  json j;
  j["variety"] = c.variety_text;
  if (c.variety_nvars) j["variety_nvars"] = *c.variety_nvars;
  j["m0"] = c.m0;
  j["m_max"] = c.m_max;
  j["init_scale"] = c.init_scale;
  json w{{"kind", c.weight_kind}};
  if (c.weight_kind == "zero") {
    w["q"] = c.weight_q;
    w["epsilon"] = c.epsilons;
  }
  j["weight"] = std::move(w);
  json s{{"method", c.sampling_method}, {"seed", c.seed}};
  if (c.sampling_method == "random-line") s["n_points"] = c.n_points;
  else s["resolution"] = c.resolution;
  j["sampling"] = std::move(s);
  j["probes"] = c.probes;
  // out_dir is where results land, not part of what is being computed, so it
  // stays out of the echo and out of the hash: reruns into different
  // directories must produce byte-identical artifacts
  j["checkpoint_cadence"] = c.checkpoint_cadence;
  return j;
}

inline std::string config_hash(const RunConfig& c) { return hash_hex(fnv1a64(config_to_json(c).dump())); }

// ---------------------------------------------------------------------------
// TOML subset reader.

namespace detail {

inline std::string toml_strip(const std::string& line) {
  // cut a # comment that is not inside a string
  bool in_str = false;
  std::string out;
  for (char ch : line) {
    if (ch == '"') in_str = !in_str;
    if (ch == '#' && !in_str) break;
    out.push_back(ch);
  }
  std::size_t b = out.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = out.find_last_not_of(" \t\r");
  return out.substr(b, e - b + 1);
}

inline json toml_scalar(const std::string& tok, int lineno) {
  if (tok.empty()) fail_validation("config TOML line " + std::to_string(lineno) + ": empty value");
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      fail_validation("config TOML line " + std::to_string(lineno) + ": unterminated string");
    return json(tok.substr(1, tok.size() - 2));
  }
  if (tok == "true") return json(true);
  if (tok == "false") return json(false);
  try {
    std::size_t pos = 0;
    if (tok.find_first_of(".eE") == std::string::npos) {
      long long v = std::stoll(tok, &pos);
      if (pos == tok.size()) return json(v);
    } else {
      double v = std::stod(tok, &pos);
      if (pos == tok.size()) return json(v);
    }
  } catch (...) {
  }
  fail_validation("config TOML line " + std::to_string(lineno) + ": cannot parse value '" + tok + "'");
}

}  // namespace detail

inline json parse_toml_subset(const std::string& text) {
  json root = json::object();
  json* cur = &root;
  std::istringstream ss(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(ss, raw)) {
    ++lineno;
    std::string line = detail::toml_strip(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_validation("config TOML line " + std::to_string(lineno) + ": malformed section");
      std::string name = line.substr(1, line.size() - 2);
      cur = &root;
      std::size_t start = 0;
      while (true) {
        std::size_t dot = name.find('.', start);
        std::string part = name.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) fail_validation("config TOML line " + std::to_string(lineno) + ": empty section name");
        cur = &((*cur)[part]);
        if (!cur->is_object()) *cur = json::object();
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail_validation("config TOML line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::toml_strip(line.substr(0, eq));
    std::string val = detail::toml_strip(line.substr(eq + 1));
    if (key.empty()) fail_validation("config TOML line " + std::to_string(lineno) + ": empty key");
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']') fail_validation("config TOML line " + std::to_string(lineno) + ": unterminated array");
      json arr = json::array();
      std::string body = val.substr(1, val.size() - 2);
      std::size_t start = 0;
      while (start <= body.size()) {
        std::size_t comma = body.find(',', start);
        std::string tok = detail::toml_strip(body.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!tok.empty()) arr.push_back(detail::toml_scalar(tok, lineno));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      (*cur)[key] = std::move(arr);
    } else {
      (*cur)[key] = detail::toml_scalar(val, lineno);
    }
  }
  return root;
}

// Dispatch on leading character: JSON objects start with '{'.
inline RunConfig load_config_text(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) fail_validation("config file is empty");
  if (text[b] == '{') {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail_validation("config file is not valid JSON");
    return config_from_json(j);
  }
  return config_from_json(parse_toml_subset(text));
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
  return load_config_text(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Derived run objects.

inline Hypersurface variety_from_config(const RunConfig& c) {
  return parse_hypersurface(c.variety_text, c.variety_nvars);
}

inline WeightSpec weight_from_config(const RunConfig& c, const Hypersurface& X, double epsilon) {
  if (c.weight_kind == "one") return make_weight_one();
  return make_weight_zero(parse_polynomial(c.weight_q, X.nvars()), epsilon);
}

inline SampleSet sample_from_config(const RunConfig& c, const Hypersurface& X) {
  if (c.sampling_method == "random-line") return sample_fs(X, static_cast<int>(c.n_points), c.seed);
  return curve_chart_quadrature(X, c.resolution);
}

// Probe points are regenerated deterministically from the run seed, offset so
// they never coincide with a random-line sample drawn from the same seed.
inline std::vector<VarietyPoint> probes_from_config(const RunConfig& c, const Hypersurface& X) {
  SampleSet P = sample_fs(X, c.probes, c.seed ^ 0x70726f6265ULL);
  return P.points;
}

// ---------------------------------------------------------------------------
// CSV emitters.

inline std::string convergence_series_csv(const ConvergenceSeries& cs) {
  std::ostringstream out;
  out << "m,sup_delta,mean_delta,einstein_sup,einstein_median,L_value,trace_residual,holder_slack\n";
  for (const auto& r : cs.rows)
    out << r.m << ',' << num_str(r.sup_delta) << ',' << num_str(r.mean_delta) << ',' << num_str(r.einstein_sup)
        << ',' << num_str(r.einstein_median) << ',' << num_str(r.L_value) << ',' << num_str(r.trace_residual)
        << ',' << num_str(r.holder_slack) << '\n';
  return out.str();
}

inline json convergence_fit_json(const ConvergenceSeries& cs) {
  json j{{"model", cs.fit_model}, {"fit_ok", cs.fit_ok}, {"rows", cs.rows.size()}};
  if (cs.fit_ok) {
    j["C"] = cs.fit.C;
    j["R2"] = cs.fit.R2;
  }
  return j;
}

}  // namespace kei
