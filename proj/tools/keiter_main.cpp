// Command-line front end: iterate / verify / report / sample.
//
// Exit codes: 0 success, 1 validation, 2 numerical failure, 3 I/O. Everything
// written under --out carries the (config hash, seed, sample hash) stamp, and
// a rerun with the same config and seed reproduces every state file byte for
// byte at any thread count.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "keiter/io.hpp"
#include "keiter/verify.hpp"

namespace fs = std::filesystem;
using namespace kei;

namespace {

std::string chain_label(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chain%02u", static_cast<unsigned>(j));
  return buf;
}

std::string state_file_name(const std::string& label, int m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_state_m%04d", m);
  return label + buf + ".json";
}

void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) fail_validation("an output directory is required (config 'out' or --out)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_io("cannot create output directory '" + dir + "': " + ec.message());
}

// ---------------------------------------------------------------------------

int cmd_iterate(const RunConfig& c) {
  ensure_out_dir(c.out_dir);
  Hypersurface X = variety_from_config(c);
  SampleSet S = sample_from_config(c, X);
  RunStamp stamp{config_hash(c), c.seed, sample_content_hash(S)};
  fs::path dir(c.out_dir);

  atomic_write_json(dir / "config.json", config_to_json(c));
  atomic_write_json(dir / "sample.json", sample_to_json(S, stamp));

  std::vector<double> eps = c.weight_kind == "zero" ? c.epsilons : std::vector<double>{1.0};
  json chains = json::array();
  json failures = json::array();
  for (std::size_t j = 0; j < eps.size(); ++j) {
    std::string label = chain_label(j);
    WeightSpec w = weight_from_config(c, X, eps[j]);
    normalize_weight_sup(w, S);
    MetricState st0 = init_state(X, c.m0);
    st0.P *= 1.0 / c.init_scale;
    ChainResult ch = run_chain_shared(X, st0, c.m_max, w, S);

    json state_files = json::array();
    for (const auto& st : ch.states) {
      if (st.m == c.m0) continue;
      bool keep = (st.m - c.m0) % c.checkpoint_cadence == 0 || st.m == ch.states.back().m;
      if (!keep) continue;
      std::string name = state_file_name(label, st.m);
      atomic_write_json(dir / name, state_to_json(st, stamp, eps[j]));
      state_files.push_back(name);
    }

    json rep{{"format", kReportFormat}, {"label", label},       {"epsilon", eps[j]},
             {"weight_kind", c.weight_kind}, {"m0", c.m0},      {"m_max", c.m_max},
             {"aborted", ch.aborted},    {"abort_reason", ch.abort_reason}};
    json steps = json::array();
    for (const auto& r : ch.reports) steps.push_back(step_report_to_json(r));
    rep["steps"] = std::move(steps);
    stamp_json(rep, stamp);
    std::string rep_name = label + "_report.json";
    atomic_write_json(dir / rep_name, rep);

    chains.push_back(json{{"label", label},
                          {"epsilon", eps[j]},
                          {"final_m", ch.states.back().m},
                          {"aborted", ch.aborted},
                          {"states", std::move(state_files)},
                          {"report", rep_name}});
    if (ch.aborted) failures.push_back(json{{"label", label}, {"reason", ch.abort_reason}});
    std::cout << label << ": epsilon " << num_str(eps[j]) << ", reached m=" << ch.states.back().m
              << (ch.aborted ? " (aborted: " + ch.abort_reason + ")" : "") << "\n";
  }

  json man{{"format", kManifestFormat},
           {"library_version", kLibraryVersion},
           {"config", config_to_json(c)},
           {"sample_file", "sample.json"},
           {"chains", std::move(chains)}};
  stamp_json(man, stamp);
  atomic_write_json(dir / "manifest.json", man);

  if (!failures.empty()) {
    atomic_write_json(dir / "failure.json", json{{"failures", failures}});
    std::cerr << "error: " << failures.size() << " chain(s) aborted; partial artifacts written to "
              << c.out_dir << "\n";
    return 2;
  }
  std::cout << "manifest: " << (dir / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_sample(const RunConfig& c) {
  ensure_out_dir(c.out_dir);
  Hypersurface X = variety_from_config(c);
  SampleSet S = sample_from_config(c, X);
  RunStamp stamp{config_hash(c), c.seed, sample_content_hash(S)};
  fs::path out = fs::path(c.out_dir) / "sample.json";
  atomic_write_json(out, sample_to_json(S, stamp));
  std::cout << "wrote " << out.string() << " (" << S.size() << " points, mass " << num_str(S.total_weight())
            << ", hash " << stamp.sample_hash << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& only, const std::string& out_dir) {
  std::vector<CheckResult> rs = run_verification(only);
  std::string csv = verification_csv(rs);
  std::cout << csv;
  if (!out_dir.empty()) {
    ensure_out_dir(out_dir);
    atomic_write_text(fs::path(out_dir) / "verification.csv", csv);
  }
  int fails = 0;
  for (const auto& r : rs) fails += r.pass ? 0 : 1;
  if (fails > 0) {
    std::cerr << "error: " << fails << " verification check(s) failed\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct LoadedChain {
  std::string label;
  double epsilon = 0.0;
  ChainResult chain;
};

// Reads back one chain's states and step reports, enforcing that every file
// belongs to the same run as the manifest.
LoadedChain load_chain(const fs::path& dir, const json& entry, const RunStamp& stamp) {
  LoadedChain lc;
  lc.label = entry.at("label").get<std::string>();
  lc.epsilon = entry.at("epsilon").get<double>();

  auto check_stamp = [&](const json& j, const std::string& name) {
    if (j.value("config_hash", "") != stamp.config_hash || j.value("sample_hash", "") != stamp.sample_hash)
      fail_validation("'" + name + "' belongs to a different run (stamp mismatch); refusing mixed inputs");
  };

  std::vector<MetricState> states;
  for (const auto& f : entry.at("states")) {
    std::string name = f.get<std::string>();
    json j = read_json_file(dir / name);
    check_stamp(j, name);
    states.push_back(state_from_json(j));
  }
  if (states.empty()) fail_validation("chain '" + lc.label + "' has no state files");
  std::sort(states.begin(), states.end(), [](const MetricState& a, const MetricState& b) { return a.m < b.m; });

  std::string rep_name = entry.at("report").get<std::string>();
  json rj = read_json_file(dir / rep_name);
  check_stamp(rj, rep_name);
  std::vector<StepReport> steps;
  for (const auto& s : rj.at("steps")) steps.push_back(step_report_from_json(s));

  lc.chain.states = std::move(states);
  // Align step reports with the checkpointed states by starting level; gaps
  // from a sparse checkpoint cadence leave zeroed rows rather than lying.
  for (std::size_t i = 0; i + 1 < lc.chain.states.size(); ++i) {
    StepReport r{};
    for (const auto& s : steps)
      if (s.m_from == lc.chain.states[i].m) {
        r = s;
        break;
      }
    lc.chain.reports.push_back(r);
  }
  return lc;
}

int cmd_report(const std::string& dir_in, std::string out_dir) {
  if (dir_in.empty()) fail_validation("report requires a run directory (--dir)");
  fs::path dir(dir_in);
  if (out_dir.empty()) out_dir = dir_in;
  json man = read_json_file(dir / "manifest.json");
  if (man.value("format", "") != kManifestFormat) fail_validation("manifest.json has the wrong format tag");
  RunConfig c = config_from_json(man.at("config"));
  RunStamp stamp{man.at("config_hash").get<std::string>(), man.at("seed").get<std::uint64_t>(),
                 man.at("sample_hash").get<std::string>()};
  if (config_hash(c) != stamp.config_hash)
    fail_validation("manifest config does not reproduce its own config hash");

  Hypersurface X = variety_from_config(c);
  json sj = read_json_file(dir / man.value("sample_file", "sample.json"));
  if (sj.value("config_hash", "") != stamp.config_hash || sj.value("content_hash", "") != stamp.sample_hash)
    fail_validation("sample file belongs to a different run (stamp mismatch); refusing mixed inputs");
  SampleSet S = sample_from_json(sj);

  std::vector<VarietyPoint> probes = probes_from_config(c, X);
  ensure_out_dir(out_dir);
  fs::path out(out_dir);

  std::vector<LoadedChain> chains;
  for (const auto& entry : man.at("chains")) chains.push_back(load_chain(dir, entry, stamp));
  if (chains.empty()) fail_validation("manifest lists no chains");

  for (const auto& lc : chains) {
    ConvergenceSeries cs = build_convergence_series(X, lc.chain, probes, X.dim() == 1);
    atomic_write_text(out / (lc.label + "_series.csv"), convergence_series_csv(cs));
    json fit = convergence_fit_json(cs);
    fit["label"] = lc.label;
    fit["epsilon"] = lc.epsilon;
    stamp_json(fit, stamp);
    atomic_write_json(out / (lc.label + "_fit.json"), fit);
    std::cout << lc.label << ": " << cs.rows.size() << " rows";
    if (cs.fit_ok) std::cout << ", C=" << num_str(cs.fit.C) << ", R2=" << num_str(cs.fit.R2);
    std::cout << "\n";
  }

  // Epsilon study: per-probe metric values h^(1/m) at the deepest common
  // level, tabulated across the epsilon list at probes far from Q = 0.
  if (chains.size() > 1) {
    int m_final = c.m_max;
    bool complete = true;
    for (const auto& lc : chains) complete = complete && lc.chain.states.back().m == m_final;
    json stab{{"epsilons", json::array()}, {"emitted", false}};
    for (const auto& lc : chains) stab["epsilons"].push_back(lc.epsilon);
    if (!complete) {
      stab["reason"] = "not every chain reached m_max";
    } else {
      WeightSpec wbase = weight_from_config(c, X, chains.front().epsilon);
      normalize_weight_sup(wbase, S);
      std::vector<std::size_t> keep;
      for (std::size_t k = 0; k < probes.size(); ++k)
        if (eval_weight_base(wbase, probes[k]) >= 0.5) keep.push_back(k);
      if (keep.size() < 2) {
        stab["reason"] = "fewer than two probes have beta >= 0.5";
      } else {
        double ex = -1.0 / static_cast<double>(m_final);
        std::vector<std::vector<double>> cols(chains.size());
        for (std::size_t j = 0; j < chains.size(); ++j) {
          const MetricState& st = chains[j].chain.states.back();
          cols[j].resize(keep.size());
          for (std::size_t i = 0; i < keep.size(); ++i)
            cols[j][i] = std::pow(eval_B(X, st, probes[keep[i]]), ex);
        }
        std::ostringstream csv;
        csv << "probe,beta";
        for (const auto& lc : chains) csv << ",eps_" << num_str(lc.epsilon);
        csv << "\n";
        for (std::size_t i = 0; i < keep.size(); ++i) {
          csv << keep[i] << ',' << num_str(eval_weight_base(wbase, probes[keep[i]]));
          for (std::size_t j = 0; j < chains.size(); ++j) csv << ',' << num_str(cols[j][i]);
          csv << "\n";
        }
        atomic_write_text(out / "stabilization.csv", csv.str());
        json diffs = json::array();
        bool decreasing = true;
        double prev = 0.0;
        for (std::size_t j = 0; j + 1 < cols.size(); ++j) {
          double d = 0.0;
          for (std::size_t i = 0; i < keep.size(); ++i) d = std::max(d, std::abs(cols[j + 1][i] - cols[j][i]));
          if (j > 0) decreasing = decreasing && d < prev;
          prev = d;
          diffs.push_back(d);
        }
        stab["emitted"] = true;
        stab["probes_used"] = keep.size();
        stab["m"] = m_final;
        stab["max_successive_diff"] = std::move(diffs);
        stab["decreasing"] = decreasing;
        std::cout << "stabilization: " << keep.size() << " probes, successive diffs "
                  << stab["max_successive_diff"].dump() << "\n";
      }
    }
    stamp_json(stab, stamp);
    atomic_write_json(out / "stabilization.json", stab);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterated Bergman metric chains on projective hypersurfaces"};
  app.require_subcommand(1);

  std::string config_path, out_dir, only, report_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "run configuration file (TOML or JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--threads", threads, "worker thread count (never affects results)");
  };

  CLI::App* s_iter = app.add_subcommand("iterate", "run the metric iteration and write states");
  add_common(s_iter, true);
  CLI::App* s_verify = app.add_subcommand("verify", "run the built-in verification suite");
  add_common(s_verify, false);
  s_verify->add_option("--only", only, "run only checks whose name contains this substring");
  CLI::App* s_report = app.add_subcommand("report", "emit convergence tables from a finished run");
  add_common(s_report, false);
  s_report->add_option("--dir", report_dir, "run directory holding manifest.json")->required();
  CLI::App* s_sample = app.add_subcommand("sample", "emit a standalone sample set");
  add_common(s_sample, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (threads < 1) fail_validation("--threads must be at least 1");
    global_thread_count() = threads;

    auto load = [&]() {
      RunConfig c = load_config_file(config_path);
      for (CLI::App* sub : {s_iter, s_verify, s_report, s_sample})
        if (sub->parsed() && sub->count("--seed")) c.seed = seed;
      if (!out_dir.empty()) c.out_dir = out_dir;
      return c;
    };

    if (s_iter->parsed()) return cmd_iterate(load());
    if (s_sample->parsed()) return cmd_sample(load());
    if (s_verify->parsed()) {
      if (!config_path.empty()) load();  // config is validated but not otherwise used
      return cmd_verify(only, out_dir);
    }
    return cmd_report(report_dir, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
