#ifndef QLPD_IO_HPP
#define QLPD_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qlpd/clustering.hpp"
#include "qlpd/equilibrium.hpp"
#include "qlpd/ode.hpp"
#include "qlpd/simulator.hpp"

namespace qlpd::io {

// Shortest round-trip decimal representation; identical bytes for identical
// doubles on every run, which keeps all file formats bit-stable.
inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("bad numeric field: '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// FNV-1a 64-bit content digest used in run manifests.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write to " + path);
}

inline std::string digest_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

// --- tau tables -------------------------------------------------------------

inline std::string tau_table_csv(const TauTable& table) {
  std::ostringstream out;
  out << "g,eps_a,eps_b,tau_cc,tau_cd,tau_dc,tau_dd,k,T,W,seed\n";
  for (const auto& r : table.rows) {
    out << fmt(r.params.g) << ',' << fmt(r.params.eps_a) << ',' << fmt(r.params.eps_b);
    for (double t : r.tau) out << ',' << fmt(t);
    out << ',' << table.config.runs << ',' << table.config.horizon << ',' << table.config.window
        << ',' << table.config.seed << '\n';
  }
  return out.str();
}

// gamma and alpha are not part of the CSV schema; callers supply them.
inline TauTable parse_tau_table_csv(const std::string& content, double gamma, double alpha) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("tau csv: empty");
  TauTable table;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw std::runtime_error("tau csv: expected 11 fields");
    TauRow row;
    row.params = {parse_double(f[0]), gamma, alpha, parse_double(f[1]), parse_double(f[2])};
    for (int i = 0; i < 4; ++i) row.tau[i] = parse_double(f[3 + i]);
    table.rows.push_back(row);
    if (first) {
      table.config.runs = static_cast<int>(parse_double(f[7]));
      table.config.horizon = static_cast<long long>(parse_double(f[8]));
      table.config.window = static_cast<long long>(parse_double(f[9]));
      table.config.seed = static_cast<std::uint64_t>(std::stoull(f[10]));
      first = false;
    }
  }
  return table;
}

// --- terminal Q dumps (for the clustering pipeline) --------------------------

inline std::string terminals_csv(const TauTable& table) {
  std::ostringstream out;
  out << "g,eps_a,eps_b,run,qac,qad,qbc,qbd\n";
  for (std::size_t i = 0; i < table.terminal_qs.size(); ++i) {
    const auto& p = table.rows[i].params;
    for (std::size_t k = 0; k < table.terminal_qs[i].size(); ++k) {
      const auto v = table.terminal_qs[i][k].flat();
      out << fmt(p.g) << ',' << fmt(p.eps_a) << ',' << fmt(p.eps_b) << ',' << k;
      for (double x : v) out << ',' << fmt(x);
      out << '\n';
    }
  }
  return out.str();
}

// Keyed by the exact (g, eps_a, eps_b) strings, which round-trip losslessly.
inline std::map<std::string, std::vector<QVector>> parse_terminals_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("terminals csv: empty");
  std::map<std::string, std::vector<QVector>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw std::runtime_error("terminals csv: expected 8 fields");
    const std::string key = f[0] + "," + f[1] + "," + f[2];
    out[key].push_back(QVector::from_flat(
        {parse_double(f[4]), parse_double(f[5]), parse_double(f[6]), parse_double(f[7])}));
  }
  return out;
}

inline std::string triplet_key(const ModelParams& p) {
  return fmt(p.g) + "," + fmt(p.eps_a) + "," + fmt(p.eps_b);
}

// --- trajectories ------------------------------------------------------------

inline std::string trajectory_header() { return "t,qac,qad,qbc,qbd,region\n"; }

inline void append_trajectory_row(std::ostringstream& out, double t, const QVector& q,
                                  Region region) {
  const auto v = q.flat();
  out << fmt(t);
  for (double x : v) out << ',' << fmt(x);
  out << ',' << region_name(region) << '\n';
}

inline std::string trajectory_csv(const ode::Trajectory& traj) {
  std::ostringstream out;
  out << trajectory_header();
  for (const auto& s : traj.samples) append_trajectory_row(out, s.t, s.q, s.region);
  return out.str();
}

// --- basin estimates ----------------------------------------------------------

inline std::string basins_csv(const std::vector<ModelParams>& params,
                              const std::vector<clustering::BasinEstimate>& basins) {
  std::ostringstream out;
  out << "g,eps_a,eps_b,lambda,provenance\n";
  for (std::size_t i = 0; i < basins.size(); ++i) {
    out << triplet_key(params[i]) << ',' << fmt(basins[i].lambda) << ','
        << clustering::provenance_name(basins[i].provenance) << '\n';
  }
  return out.str();
}

// --- transition matrices -------------------------------------------------------

inline std::string transitions_json(const ModelParams& params, const TransitionMatrix& tm) {
  nlohmann::ordered_json j;
  j["g"] = params.g;
  j["gamma"] = params.gamma;
  j["alpha"] = params.alpha;
  j["eps_a"] = params.eps_a;
  j["eps_b"] = params.eps_b;
  nlohmann::ordered_json matrix;
  for (Region from : kAllRegions) {
    const int i = static_cast<int>(from);
    if (!tm.defined[i]) {
      matrix[region_name(from)] = nullptr;
      continue;
    }
    nlohmann::ordered_json row;
    for (Region to : kAllRegions) row[region_name(to)] = tm.prob[i][static_cast<int>(to)];
    matrix[region_name(from)] = row;
  }
  j["matrix"] = matrix;
  const auto p = tm.p_cc_to_cd_given_asym();
  j["p_cc_to_cd_given_asym"] = p ? nlohmann::ordered_json(*p) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

// --- equilibria ------------------------------------------------------------------

struct LabeledEquilibria {
  double g = 0.0;
  std::vector<equilibrium::NashPoint> nash;
  std::vector<std::pair<double, double>> pareto;
};

inline std::string equilibria_json(const std::vector<LabeledEquilibria>& all) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& e : all) {
    for (const auto& p : e.nash)
      list.push_back({{"g", e.g},
                      {"eps_a", p.eps_a},
                      {"eps_b", p.eps_b},
                      {"kind", "nash"},
                      {"symmetric", p.symmetric}});
    for (const auto& p : e.pareto)
      list.push_back({{"g", e.g},
                      {"eps_a", p.first},
                      {"eps_b", p.second},
                      {"kind", "pareto"},
                      {"symmetric", p.first == p.second}});
  }
  return list.dump(2) + "\n";
}

inline std::string frequency_csv(const equilibrium::FrequencyHeatmap& heat) {
  std::ostringstream out;
  out << "g,eps_lo,eps_hi,freq\n";
  for (std::size_t gi = 0; gi < heat.g_values.size(); ++gi)
    for (std::size_t b = 0; b + 1 < heat.eps_edges.size(); ++b)
      out << fmt(heat.g_values[gi]) << ',' << fmt(heat.eps_edges[b]) << ','
          << fmt(heat.eps_edges[b + 1]) << ',' << fmt(heat.freq[gi][b]) << '\n';
  return out.str();
}

// --- run manifests -----------------------------------------------------------------

// Every CLI command writes one of these next to its outputs; identical inputs
// reproduce identical digests.
inline std::string manifest_json(const std::string& command,
                                 const std::map<std::string, std::string>& config,
                                 std::uint64_t seed,
                                 const std::vector<std::string>& output_paths) {
  nlohmann::ordered_json j;
  j["tool"] = "qlpd";
  j["version"] = "0.1.0";
  j["command"] = command;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = seed;
  nlohmann::ordered_json outs = nlohmann::ordered_json::array();
  for (const auto& p : output_paths)
    outs.push_back({{"path", p}, {"fnv1a64", digest_hex(read_file(p))}});
  j["outputs"] = outs;
  return j.dump(2) + "\n";
}

}  // namespace qlpd::io

#endif  // QLPD_IO_HPP
