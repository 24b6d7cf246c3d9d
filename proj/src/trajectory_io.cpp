#include "ewlab/trajectory_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ewlab/config.hpp"
#include "ewlab/diagnostics.hpp"
#include "ewlab/field_io.hpp"

namespace fs = std::filesystem;

namespace ewlab {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw InputError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string state_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "state_%06zu.ewf", i);
  return buf;
}

}  // namespace

std::string series_csv(const Trajectory& tr) {
  std::string out = "t,E_std,E_kin,hyper_margin,lambda_max,grad_max\n";
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
    const EnergyParts e = standard_energy(tr.snapshots[i], tr.config.material);
    const SnapshotRow& r = tr.rows[i];
    out += num(r.t) + "," + num(e.total) + "," + num(e.kinetic) + "," + num(r.hyper_margin) + "," +
           num(r.lambda_max) + "," + num(r.grad_max) + "\n";
  }
  return out;
}

void write_trajectory(const Trajectory& tr, const std::string& dir, bool with_diagnostics) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
  // stale snapshots from an earlier, longer run would be picked up on read
  for (const auto& ent : fs::directory_iterator(dir)) {
    const std::string name = ent.path().filename().string();
    if (name.rfind("state_", 0) == 0 && ent.path().extension() == ".ewf") fs::remove(ent.path());
  }
  fs::remove(fs::path(dir) / "diagnostics.csv");

  write_text_file((fs::path(dir) / "config.json").string(), dump_config(tr.config) + "\n");
  nlohmann::ordered_json run;
  run["hash"] = tr.hash;
  run["dt"] = tr.dt;
  run["out_every"] = tr.out_every;
  run["snapshots"] = tr.snapshots.size();
  run["initial_margin"] = tr.initial_margin;
  // infinite for linear material
  if (std::isfinite(tr.blowup_threshold))
    run["blowup_threshold"] = tr.blowup_threshold;
  else
    run["blowup_threshold"] = nullptr;
  run["completed"] = tr.completed();
  if (tr.failure)
    run["failure"] = {{"t", tr.failure->t}, {"cause", tr.failure->cause}};
  else
    run["failure"] = nullptr;
  run["flagged"] = nlohmann::ordered_json::array();
  for (const Failure& f : tr.flagged) run["flagged"].push_back({{"t", f.t}, {"cause", f.cause}});
  write_text_file((fs::path(dir) / "run.json").string(), run.dump(2) + "\n");
  write_text_file((fs::path(dir) / "series.csv").string(), series_csv(tr));

  std::vector<double> buf;
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
    const State& s = tr.snapshots[i];
    buf.assign(s.u.data().begin(), s.u.data().end());
    buf.insert(buf.end(), s.v.data().begin(), s.v.data().end());
    write_ewf((fs::path(dir) / state_name(i)).string(), s.u.grid(), "state", 6, s.t, buf);
  }
  if (with_diagnostics && tr.snapshots.size() >= 2)
    write_text_file((fs::path(dir) / "diagnostics.csv").string(), diagnostics_csv(build_diagnostics(tr)));
}

Trajectory read_trajectory(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("trajectory directory not found: " + dir);
  Trajectory tr;
  tr.config = parse_config(read_text_file((fs::path(dir) / "config.json").string()));
  nlohmann::json run;
  try {
    run = nlohmann::json::parse(read_text_file((fs::path(dir) / "run.json").string()));
    tr.hash = run.at("hash").get<std::string>();
    tr.dt = run.at("dt").get<double>();
    tr.out_every = run.at("out_every").get<int>();
    tr.initial_margin = run.at("initial_margin").get<double>();
    tr.blowup_threshold = run.at("blowup_threshold").is_null() ? INFINITY : run.at("blowup_threshold").get<double>();
    if (!run.at("failure").is_null())
      tr.failure = Failure{run["failure"].at("t").get<double>(), run["failure"].at("cause").get<std::string>()};
    for (const auto& f : run.at("flagged")) tr.flagged.push_back({f.at("t").get<double>(), f.at("cause").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(dir + "/run.json: " + e.what());
  }
  const auto count = run.at("snapshots").get<std::size_t>();
  const MaterialSpec& spec = tr.config.material;
  for (std::size_t i = 0; i < count; ++i) {
    const EwfRecord r = read_ewf((fs::path(dir) / state_name(i)).string());
    if (r.rank != "state" || r.components != 6) throw InputError(state_name(i) + ": expected a 6-component state");
    if (!(r.grid == tr.config.grid)) throw InputError(state_name(i) + ": grid differs from config.json");
    const std::size_t np = r.grid.points();
    State s{Field(r.grid, Rank::vector3, std::vector<double>(r.data.begin(), r.data.begin() + 3 * np)),
            Field(r.grid, Rank::vector3, std::vector<double>(r.data.begin() + 3 * np, r.data.end())), r.time};
    const Field du = gradient(s.u);
    const HyperbolicityResult h = hyperbolicity_check(du, spec);
    tr.rows.push_back({s.t, h.margin, h.lambda_max, du.max_abs()});
    tr.snapshots.push_back(std::move(s));
  }
  return tr;
}

}  // namespace ewlab
