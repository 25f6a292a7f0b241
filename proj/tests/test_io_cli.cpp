#include <catch_amalgamated.hpp>
#include <filesystem>

#include <json.hpp>

#include "qlpd/cli.hpp"
#include "qlpd/io.hpp"

using namespace qlpd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qlpd_test_" + std::to_string(rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int count_lines(const std::string& content) {
  int n = 0;
  for (char c : content) n += c == '\n';
  return n;
}

int count_substr(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("double formatting round-trips") {
  for (double v : {0.0, 1.0 / 3.0, 41.400000000000006, 1e-17, 123456.789}) {
    CHECK(io::parse_double(io::fmt(v)) == v);
  }
}

TEST_CASE("tau table CSV round-trip") {
  const SimConfig cfg{2000, 400, 3, 99};
  const std::vector<ModelParams> grid{{1.7, 0.95, 0.1, 0.1, 0.2}, {1.5, 0.95, 0.1, 1.0, 0.0}};
  const TauTable t = sweep(grid, cfg, 1);
  const std::string csv = io::tau_table_csv(t);
  CHECK(csv.rfind("g,eps_a,eps_b,tau_cc,tau_cd,tau_dc,tau_dd,k,T,W,seed\n", 0) == 0);
  const TauTable back = io::parse_tau_table_csv(csv, 0.95, 0.1);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].tau == t.rows[i].tau);
    CHECK(back.rows[i].params.g == t.rows[i].params.g);
    CHECK(back.rows[i].params.eps_b == t.rows[i].params.eps_b);
  }
  CHECK(back.config.runs == cfg.runs);
  CHECK(back.config.seed == cfg.seed);
}

TEST_CASE("terminal dump round-trip") {
  const SimConfig cfg{1500, 300, 4, 7};
  const std::vector<ModelParams> grid{{1.7, 0.95, 0.1, 0.3, 0.4}};
  const TauTable t = sweep(grid, cfg, 1, true);
  const auto parsed = io::parse_terminals_csv(io::terminals_csv(t));
  const auto key = io::triplet_key(grid[0]);
  REQUIRE(parsed.count(key) == 1);
  REQUIRE(parsed.at(key).size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(parsed.at(key)[k].flat() == t.terminal_qs[0][k].flat());
}

TEST_CASE("cli simulate writes T rows and reproduces digests") {
  TempDir tmp;
  const std::string out = tmp.file("traj.csv");
  const std::vector<std::string> cmd{"simulate", "--g",   "1.7",  "--eps-a", "0.1", "--eps-b",
                                     "0.1",      "--T",   "5000", "--seed",  "7",   "--out",
                                     out};
  REQUIRE(cli::run(cmd) == 0);
  const std::string first = io::read_file(out);
  CHECK(count_lines(first) == 5001);  // header + T rows
  CHECK(first.rfind("t,qac,qad,qbc,qbd,region\n", 0) == 0);

  REQUIRE(cli::run(cmd) == 0);
  CHECK(io::read_file(out) == first);

  const auto manifest = nlohmann::json::parse(io::read_file(out + ".manifest.json"));
  CHECK(manifest["tool"] == "qlpd");
  CHECK(manifest["outputs"][0]["fnv1a64"] == io::digest_hex(first));
}

TEST_CASE("cli simulate --ode converges to the defection steady state from omega_DD") {
  TempDir tmp;
  const std::string out = tmp.file("ode.csv");
  REQUIRE(cli::run({"simulate", "--ode", "--g", "1.7", "--eps-a", "0.1", "--eps-b", "0.2",
                    "--init", "37,44,38,45", "--t-end", "20000", "--out", out}) == 0);
  const auto manifest = nlohmann::json::parse(io::read_file(out + ".manifest.json"));
  CHECK(manifest["config"]["termination"] == "converged");
  // last row sits at the closed-form steady state (43.1, 43.4, 41.4, 41.7)
  const std::string csv = io::read_file(out);
  const auto last = csv.rfind('\n', csv.size() - 2);
  const auto fields = io::split_csv_line(csv.substr(last + 1, csv.size() - last - 2));
  CHECK(io::parse_double(fields[1]) == Catch::Approx(43.1).margin(1e-5));
  CHECK(io::parse_double(fields[2]) == Catch::Approx(43.4).margin(1e-5));
  CHECK(io::parse_double(fields[3]) == Catch::Approx(41.4).margin(1e-5));
  CHECK(fields[5] == "DD");
}

TEST_CASE("cli sweep is worker-count invariant and row-normalized") {
  TempDir tmp;
  const std::string out1 = tmp.file("tau1.csv"), out4 = tmp.file("tau4.csv");
  const std::vector<std::string> base{"sweep", "--g-values", "1.6,1.8", "--eps-count", "3",
                                      "--T", "2000", "--window", "400", "--runs", "3",
                                      "--seed", "11"};
  auto with = [&](std::vector<std::string> v, std::initializer_list<std::string> extra) {
    v.insert(v.end(), extra);
    return v;
  };
  REQUIRE(cli::run(with(base, {"--jobs", "1", "--out", out1})) == 0);
  REQUIRE(cli::run(with(base, {"--jobs", "4", "--out", out4})) == 0);
  const std::string csv = io::read_file(out1);
  CHECK(csv == io::read_file(out4));
  const TauTable t = io::parse_tau_table_csv(csv, 0.95, 0.1);
  CHECK(t.rows.size() == 2 * 3 * 3);
  for (const auto& r : t.rows)
    CHECK(r.tau[0] + r.tau[1] + r.tau[2] + r.tau[3] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cli detect pipeline produces bounded lambdas") {
  TempDir tmp;
  const std::string tau = tmp.file("tau.csv"), term = tmp.file("terms.csv"),
                    out = tmp.file("basins.csv");
  REQUIRE(cli::run({"sweep", "--g-values", "1.7", "--eps-count", "4", "--eps-max", "0.9",
                    "--T", "8000", "--window", "500", "--runs", "6", "--seed", "3", "--jobs", "2",
                    "--out", tau, "--terminals", term}) == 0);
  REQUIRE(cli::run({"detect", "--tau", tau, "--terminals", term, "--out", out}) == 0);
  const std::string csv = io::read_file(out);
  CHECK(csv.rfind("g,eps_a,eps_b,lambda,provenance\n", 0) == 0);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    const auto f = io::split_csv_line(line);
    REQUIRE(f.size() == 5);
    const double lambda = io::parse_double(f[3]);
    CHECK(lambda >= 0.0);
    CHECK(lambda <= 1.0);
    if (f[4] == "forced-zero") CHECK(lambda == 0.0);
    ++rows;
  }
  CHECK(rows == 16);
}

TEST_CASE("cli transitions emits a row-stochastic json matrix") {
  TempDir tmp;
  const std::string out = tmp.file("trans.json");
  REQUIRE(cli::run({"transitions", "--g", "1.7", "--eps-a", "0.1", "--eps-b", "0.1", "--T",
                    "20000", "--runs", "10", "--seed", "5", "--out", out}) == 0);
  const auto j = nlohmann::json::parse(io::read_file(out));
  for (const auto& name : {"CC", "CD", "DC", "DD"}) {
    if (j["matrix"][name].is_null()) continue;
    double sum = 0;
    for (const auto& to : {"CC", "CD", "DC", "DD"}) sum += j["matrix"][name][to].get<double>();
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cli equilibria finds the origin for every g") {
  TempDir tmp;
  const std::string tau = tmp.file("tau.csv");
  REQUIRE(cli::run({"sweep", "--g-values", "1.2,1.7", "--eps-count", "5", "--T", "20000",
                    "--window", "1000", "--runs", "20", "--seed", "13", "--jobs", "4", "--out",
                    tau}) == 0);
  const std::string eqj = tmp.file("eq.json"), freq = tmp.file("freq.csv"),
                    svg = tmp.file("freq.svg");
  REQUIRE(cli::run({"equilibria", "--tau", tau, "--perturb", "50", "--out", eqj, "--freq", freq,
                    "--svg", svg}) == 0);
  const auto list = nlohmann::json::parse(io::read_file(eqj));
  for (double g : {1.2, 1.7}) {
    bool origin = false;
    for (const auto& e : list)
      if (e["g"].get<double>() == g && e["kind"] == "nash" &&
          std::abs(e["eps_a"].get<double>()) < 1e-9 && std::abs(e["eps_b"].get<double>()) < 1e-9)
        origin = true;
    CHECK(origin);
  }
  // frequency rows: every replica contributes at least one symmetric equilibrium
  const std::string fcsv = io::read_file(freq);
  std::istringstream in(fcsv);
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> per_g, origin_bin;
  while (std::getline(in, line)) {
    const auto f = io::split_csv_line(line);
    per_g[f[0]] += io::parse_double(f[3]);
    if (io::parse_double(f[1]) == 0.0) origin_bin[f[0]] = io::parse_double(f[3]);
  }
  for (const auto& [g, total] : per_g) CHECK(total >= 1.0);
  // the origin is an equilibrium in nearly every perturbed replica
  for (const auto& [g, freq0] : origin_bin) CHECK(freq0 >= 0.9);
  // SVG is self-contained
  const std::string svg_text = io::read_file(svg);
  CHECK(svg_text.rfind("<svg", 0) == 0);
  CHECK(svg_text.find("http://") == svg_text.find("http://www.w3.org/2000/svg"));
}

TEST_CASE("cli plot renders one rect per grid cell, deterministically") {
  TempDir tmp;
  const std::string tau = tmp.file("tau.csv"), svg = tmp.file("tau.svg");
  REQUIRE(cli::run({"sweep", "--g-values", "1.7", "--eps-count", "4", "--T", "2000", "--window",
                    "400", "--runs", "2", "--seed", "21", "--out", tau}) == 0);
  REQUIRE(cli::run({"plot", "--in", tau, "--kind", "heatmap", "--x", "eps_a", "--y", "eps_b",
                    "--value", "tau_cc", "--filter-g", "1.7", "--out", svg}) == 0);
  const std::string first = io::read_file(svg);
  CHECK(count_substr(first, "class=\"cell\"") == 16);
  REQUIRE(cli::run({"plot", "--in", tau, "--kind", "heatmap", "--x", "eps_a", "--y", "eps_b",
                    "--value", "tau_cc", "--filter-g", "1.7", "--out", svg}) == 0);
  CHECK(io::read_file(svg) == first);

  // color scale endpoints are the data min and max
  const TauTable t = io::parse_tau_table_csv(io::read_file(tau), 0.95, 0.1);
  double vmin = 1e300, vmax = -1e300;
  for (const auto& r : t.rows) {
    vmin = std::min(vmin, r.tau[0]);
    vmax = std::max(vmax, r.tau[0]);
  }
  CHECK(first.find(">" + io::fmt(vmin) + "<") != std::string::npos);
  CHECK(first.find(">" + io::fmt(vmax) + "<") != std::string::npos);

  const std::string curve = tmp.file("curve.svg");
  TempDir tmp2;
  const std::string traj = tmp2.file("traj.csv");
  REQUIRE(cli::run({"simulate", "--T", "500", "--seed", "2", "--out", traj}) == 0);
  REQUIRE(cli::run({"plot", "--in", traj, "--kind", "curve", "--x", "t", "--value", "qac",
                    "--out", curve}) == 0);
  CHECK(io::read_file(curve).rfind("<svg", 0) == 0);
}

TEST_CASE("cli failure leaves no partial outputs") {
  TempDir tmp;
  const std::string out = tmp.file("bad.csv");
  CHECK(cli::run({"simulate", "--g", "5.0", "--out", out}) != 0);
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(fs::exists(out + ".manifest.json"));
  // unknown flags are CLI parse errors
  CHECK(cli::run({"simulate", "--frobnicate"}) != 0);
  // missing inputs fail cleanly
  CHECK(cli::run({"detect", "--tau", tmp.file("absent.csv"), "--terminals",
                  tmp.file("absent2.csv"), "--out", tmp.file("b.csv")}) != 0);
  CHECK_FALSE(fs::exists(tmp.file("b.csv")));
}

TEST_CASE("malformed csv input is rejected") {
  CHECK_THROWS(io::parse_tau_table_csv("g,eps_a\n1.7,0.1\n", 0.95, 0.1));
  CHECK_THROWS(io::parse_tau_table_csv("", 0.95, 0.1));
  CHECK_THROWS(io::parse_double("abc"));
  CHECK_THROWS(io::parse_terminals_csv("h\n1,2,3\n"));
}

TEST_CASE("config file values are overridden by flags") {
  TempDir tmp;
  const std::string cfg = tmp.file("run.cfg"), out = tmp.file("a.csv"), out2 = tmp.file("b.csv");
  io::write_file(cfg, "simulate.T=300\nsimulate.seed=5\n");
  REQUIRE(cli::run({"--config", cfg, "simulate", "--out", out}) == 0);
  CHECK(count_lines(io::read_file(out)) == 301);
  REQUIRE(cli::run({"--config", cfg, "simulate", "--T", "100", "--out", out2}) == 0);
  CHECK(count_lines(io::read_file(out2)) == 101);
}
