#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "ewlab/checks.hpp"
#include "ewlab/convergence.hpp"
#include "ewlab/evolve.hpp"
#include "ewlab/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace ewlab;

namespace {

struct Result {
  int code;
  std::string out, err;
};

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("ewlab-cli-" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

const fs::path& scratch() {
  static const Scratch s;
  return s.dir;
}

Result run(const std::string& args, const std::string& env = "") {
  const char* bin = std::getenv("EWLAB_BIN");
  REQUIRE(bin != nullptr);
  const fs::path o = scratch() / "stdout.txt", e = scratch() / "stderr.txt";
  const std::string cmd = "cd " + scratch().string() + " && " + env + " " + bin + " " + args + " >" + o.string() +
                          " 2>" + e.string();
  const int st = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(st));
  return {WEXITSTATUS(st), read_text_file(o.string()), read_text_file(e.string())};
}

void write(const std::string& name, const std::string& text) { write_text_file((scratch() / name).string(), text); }

// header -> column of a CSV written by the tool
std::map<std::string, std::vector<double>> read_csv(const fs::path& p) {
  std::istringstream in(read_text_file(p.string()));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  std::stringstream hs(line);
  for (std::string h; std::getline(hs, h, ',');) head.push_back(h);
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::size_t i = 0;
    for (std::string v; std::getline(ls, v, ','); ++i) cols[head.at(i)].push_back(std::strtod(v.c_str(), nullptr));
    REQUIRE(i == head.size());
  }
  return cols;
}

std::string plane_config(double cfl_safety) {
  return R"({"material": {"gamma": [], "b_coef": 0},
  "data": {"kind": "plane", "waves": [{"m": [1, 0, 0], "amp": 0.02, "traveling": true},
                                      {"m": [0, 1, 2], "pol": "trans", "amp": 0.01, "traveling": true}]},
  "time": {"t_end": 1.0, "cfl_safety": )" + std::to_string(cfl_safety) + "}}";
}

// linear rough run (flat acoustic metric) and the nonlinear baseline, shared
const fs::path& flat_dir() {
  static const fs::path d = [] {
    write("flat.json", R"({"material": {"gamma": []}, "time": {"t_end": 1.0}})");
    REQUIRE(run("simulate flat.json -o flat --no-diagnostics").code == 0);
    return scratch() / "flat";
  }();
  return d;
}

const fs::path& baseline_dir() {
  static const fs::path d = [] {
    write("base.json", R"({"time": {"t_end": 1.0}})");
    const Result r = run("simulate base.json -o base");
    REQUIRE(r.code == 0);
    return scratch() / "base";
  }();
  return d;
}

}  // namespace

TEST_CASE("usage errors exit 2", "[cli]") {
  CHECK(run("").code == 2);
  CHECK(run("--help").code == 0);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("check --suite nonsense").code == 2);
  CHECK(run("simulate").code == 2);
  CHECK(run("simulate does-not-exist.json").code == 2);
  write("unknown.json", R"({"grid": {"n": 32, "colour": 1}})");
  CHECK(run("simulate unknown.json -o unknown").code == 2);
  CHECK_FALSE(fs::exists(scratch() / "unknown"));
}

TEST_CASE("malformed config leaves no output", "[cli]") {
  write("bad.json", "{\"grid\": ");
  const Result r = run("simulate bad.json -o badrun");
  CHECK(r.code == 2);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK_FALSE(fs::exists(scratch() / "badrun"));
}

TEST_CASE("simulate: linear traveling waves keep E_std", "[cli]") {
  write("plane.json", plane_config(0.1));  // dt = cfl / 4
  const Result r = run("simulate plane.json -o plane");
  REQUIRE(r.code == 0);
  for (const char* f : {"config.json", "run.json", "series.csv", "diagnostics.csv", "state_000000.ewf"})
    CHECK(fs::exists(scratch() / "plane" / f));
  const auto cols = read_csv(scratch() / "plane" / "series.csv");
  const auto& e = cols.at("E_std");
  REQUIRE(e.size() >= 2);
  for (double x : e) CHECK(std::abs(x - e.front()) <= 1e-8 * e.front());
}

TEST_CASE("simulate: nonlinear baseline stays hyperbolic", "[cli]") {
  const auto cols = read_csv(baseline_dir() / "series.csv");
  REQUIRE(cols.at("t").back() == Catch::Approx(1.0));
  for (double m : cols.at("hyper_margin")) CHECK(m > 0);
}

TEST_CASE("simulate: huge data exits 3 with a failure record", "[cli]") {
  write("huge.json", R"({"data": {"amp_div": 5, "amp_curl": 5}, "time": {"t_end": 0.2}})");
  const Result r = run("simulate huge.json -o huge");
  CHECK(r.code == 3);
  const std::string run_json = read_text_file((scratch() / "huge" / "run.json").string());
  CHECK(run_json.find("\"cause\": \"hyperbolicity\"") != std::string::npos);
}

TEST_CASE("trajectory directory round trip", "[cli][io]") {
  RunConfig c;
  c.time.t_end = 0.3;
  c.time.out_every = 1;
  const Trajectory a = simulate(c);
  const std::string dir = (scratch() / "roundtrip").string();
  write_trajectory(a, dir, false);
  const Trajectory b = read_trajectory(dir);
  REQUIRE(b.snapshots.size() == a.snapshots.size());
  CHECK(b.hash == a.hash);
  CHECK(b.dt == a.dt);
  CHECK(dump_config(b.config) == dump_config(a.config));
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    CHECK(b.snapshots[i].t == a.snapshots[i].t);
    CHECK(std::memcmp(a.snapshots[i].u.data().data(), b.snapshots[i].u.data().data(), a.snapshots[i].u.size() * 8) == 0);
    CHECK(std::memcmp(a.snapshots[i].v.data().data(), b.snapshots[i].v.data().data(), a.snapshots[i].v.size() * 8) == 0);
    CHECK(b.rows[i].hyper_margin == a.rows[i].hyper_margin);
  }
  CHECK(series_csv(b) == series_csv(a));
  // a shorter run in the same directory does not keep stale snapshots
  c.time.t_end = 0.08;
  write_trajectory(simulate(c), dir, false);
  CHECK(read_trajectory(dir).snapshots.size() < a.snapshots.size());
}

TEST_CASE("geodesics: flat trajectory gives trchi r = 2", "[cli][geometry]") {
  const std::string traj = flat_dir().string();
  const Result r = run("geodesics --traj " + traj + " --tip 0,3,3,3 --nomega 640 --dt-ray 0.05");
  REQUIRE(r.code == 0);
  CHECK(r.err.find("snapped") != std::string::npos);
  const auto cols = read_csv(flat_dir() / "geodesics.csv");
  for (const char* h : {"u", "ray_id", "t", "x", "y", "z", "L0", "L1", "L2", "L3", "trchi", "zsmall", "sigma", "H",
                        "null_drift"})
    CHECK(cols.count(h) == 1);
  CHECK(cols.at("ray_id").back() == 641);
  double worst = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < cols.at("t").size(); ++i) {
    const double rt = cols.at("t")[i] - cols.at("u")[i];
    const double tr = cols.at("trchi")[i];
    if (rt < 0.1 || std::isnan(tr)) continue;
    worst = std::max(worst, std::abs(tr * rt - 2));
    ++used;
  }
  CHECK(used > 1000);
  CHECK(worst <= 1e-4);
}

TEST_CASE("geodesics and fluxes on the nonlinear baseline", "[cli][geometry]") {
  const std::string traj = baseline_dir().string();
  SECTION("H column positive") {
    REQUIRE(run("geodesics --traj " + traj + " --tip 0,3.1,3.1,3.1 --nomega 162").code == 0);
    const auto cols = read_csv(baseline_dir() / "geodesics.csv");
    for (double h : cols.at("H")) CHECK(h > 0);
  }
  SECTION("tip outside coverage") {
    CHECK(run("geodesics --traj " + traj + " --tip 2,3,3,3").code == 2);
    CHECK(run("geodesics --traj " + traj + " --tip 0,3,3").code == 2);
    CHECK(run("geodesics --traj " + (scratch() / "nowhere").string() + " --tip 0,3,3,3").code == 2);
  }
  SECTION("fluxes") {
    const Result r = run("fluxes --traj " + traj + " --tip 0,3,3,3 --tip 0.1,1,2,3 --nomega 162 --field psi");
    REQUIRE(r.code == 0);
    const auto cols = read_csv(baseline_dir() / "fluxes.csv");
    REQUIRE(cols.at("u").size() == 2);
    CHECK(cols.at("u")[1] == Catch::Approx(0.1));
    for (double q : cols.at("coercive_ratio")) {
      CHECK(q >= 0.1);
      CHECK(q <= 10);
    }
    CHECK(run("fluxes --traj " + traj + " --tip 0,3,3,3 --field curlish").code == 2);
  }
}

TEST_CASE("decompose writes the split", "[cli]") {
  write("dec.json", R"({"time": {"t_end": 0.3}})");
  REQUIRE(run("decompose dec.json -o dec --no-diagnostics").code == 0);
  const auto cols = read_csv(scratch() / "dec" / "decomposition.csv");
  CHECK(cols.at("psi_gap").back() < 1e-4);
  CHECK(fs::exists(scratch() / "dec" / "psi_000000.ewf"));
  CHECK(fs::exists(scratch() / "dec" / "phi_000000.ewf"));
}

TEST_CASE("check suites", "[cli][check]") {
  SECTION("piola passes with one line per check") {
    const Result r = run("check --suite piola --json piola.json");
    CHECK(r.code == 0);
    std::istringstream in(r.out);
    int lines = 0;
    for (std::string l; std::getline(in, l);) {
      CHECK((l.rfind("PASS", 0) == 0 || l.rfind("FAIL", 0) == 0));
      ++lines;
    }
    CHECK(lines == 4);  // three checks and the suite line
    CHECK(read_text_file((scratch() / "piola.json").string()).find("\"pass\": true") != std::string::npos);
  }
  SECTION("broken Helmholtz projector fails decoupling") {
    const Result r = run("check --suite decoupling", "EWLAB_TEST_MUTATION=helmholtz");
    CHECK(r.code == 1);
    CHECK(r.out.find("FAIL  [4 ") != std::string::npos);
  }
}

TEST_CASE("suite table", "[check]") {
  CHECK(suite_criteria("all").size() == 12);
  std::vector<int> seen;
  for (const std::string& s : suite_names())
    if (s != "all")
      for (int id : suite_criteria(s)) seen.push_back(id);
  std::sort(seen.begin(), seen.end());
  CHECK(seen == suite_criteria("all"));
  CHECK_THROWS_AS(suite_criteria("nope"), InputError);
  CHECK(check_le("x", std::nan(""), 1).pass == false);
  CHECK(check_in("x", 2, 1, 3).pass);
  CHECK_FALSE(check_ge("x", 0.5, 1).pass);
}

TEST_CASE("convergence command", "[cli][convergence]") {
  write("plane_conv.json", plane_config(0.4));
  const Result r = run("convergence plane_conv.json --levels 2 --json conv.json");
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("solver: order 4.0") != std::string::npos);
  CHECK(run("convergence plane_conv.json --levels 1").code == 2);

  SECTION("order bookkeeping") {
    CHECK(order_row("q", "m", {1e-3, 6.25e-5}, 3.7).orders[0] == Catch::Approx(4.0));
    CHECK(order_row("q", "m", {1e-3, 2e-3}, 2).status == "n/a");
    CHECK(order_row("q", "m", {1e-3, 5e-4}, 2).status == "low");
    CHECK(order_row("q", "m", {1e-13, 2e-13}, 2).status == "exact");
    CHECK(order_row("q", "m", {5e-11, 3e-12}, 3.7).status == "ok");
    CHECK(order_row("q", "m", {std::nan(""), 1e-3}, 2).status == "n/a");
  }
}

TEST_CASE("under-resolved convergence surfaces n/a", "[cli][convergence]") {
  write("n8.json", R"({"grid": {"n": 8}})");
  const Result r = run("convergence n8.json --levels 3");
  CHECK(r.code == 1);
  CHECK(r.out.find("n/a") != std::string::npos);
}

TEST_CASE("identical runs write identical bytes", "[cli][determinism]") {
  write("det.json", R"({"time": {"t_end": 0.2}})");
  REQUIRE(run("simulate det.json -o det_a", "EWLAB_THREADS=1").code == 0);
  REQUIRE(run("simulate det.json -o det_b", "EWLAB_THREADS=1").code == 0);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(scratch() / "det_a")) {
    const fs::path other = scratch() / "det_b" / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(read_text_file(e.path().string()) == read_text_file(other.string()));
    ++n;
  }
  CHECK(n >= 5);
}
