#include "ewlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace ewlab {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  T v{};
  read(j, key, v, where);
  out = v;
}

PlaneWave parse_wave(const json& w) {
  only_keys(w, "data.waves[]", {"m", "pol", "polarization", "amp", "phase", "traveling"});
  PlaneWave p;
  read(w, "m", p.m, "data.waves[]");
  std::string pol = "long";
  read(w, "pol", pol, "data.waves[]");
  if (pol != "long" && pol != "trans") throw InputError("data.waves[].pol must be long or trans");
  p.longitudinal = pol == "long";
  read(w, "polarization", p.polarization, "data.waves[]");
  read(w, "amp", p.amp, "data.waves[]");
  read(w, "phase", p.phase, "data.waves[]");
  read(w, "traveling", p.traveling, "data.waves[]");
  if (p.m == std::array<int, 3>{0, 0, 0}) throw InputError("data.waves[].m must be nonzero");
  return p;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: malformed JSON: ") + e.what());
  }
  only_keys(j, "config", {"grid", "material", "data", "time", "checks", "output_dir", "seed", "force"});
  RunConfig c;
  if (j.contains("grid")) {
    const json& g = j["grid"];
    only_keys(g, "grid", {"n", "box_len"});
    int n = c.grid.n();
    double L = c.grid.box_len();
    read(g, "n", n, "grid");
    read(g, "box_len", L, "grid");
    c.grid = Grid3(n, L);
  }
  if (j.contains("material")) {
    const json& m = j["material"];
    only_keys(m, "material", {"c1", "c2", "b_coef", "gamma"});
    read(m, "c1", c.material.c1, "material");
    read(m, "c2", c.material.c2, "material");
    read(m, "b_coef", c.material.b_coef, "material");
    read(m, "gamma", c.material.gamma, "material");
  }
  c.material.validate();
  std::optional<std::uint64_t> top_seed;
  read_opt(j, "seed", top_seed, "config");
  if (j.contains("data")) {
    const json& d = j["data"];
    only_keys(d, "data", {"kind", "s_div", "s_curl", "amp_div", "amp_curl", "seed", "kmax", "v_init", "waves"});
    read(d, "kind", c.data.kind, "data");
    read(d, "s_div", c.data.s_div, "data");
    read(d, "s_curl", c.data.s_curl, "data");
    read(d, "amp_div", c.data.amp_div, "data");
    read(d, "amp_curl", c.data.amp_curl, "data");
    read(d, "seed", c.data.seed, "data");
    read_opt(d, "kmax", c.data.kmax, "data");
    read(d, "v_init", c.data.v_init, "data");
    if (d.contains("waves")) {
      if (!d["waves"].is_array()) throw InputError("data.waves must be an array");
      for (const json& w : d["waves"]) c.data.waves.push_back(parse_wave(w));
    }
    if (top_seed && d.contains("seed") && *top_seed != c.data.seed)
      throw InputError("config: seed and data.seed disagree");
  }
  if (top_seed) c.data.seed = *top_seed;
  const std::set<std::string> kinds{"rough", "plane", "mixed"}, vinits{"zero", "traveling", "rough"};
  if (!kinds.count(c.data.kind)) throw InputError("data.kind must be rough, plane or mixed");
  if (!vinits.count(c.data.v_init)) throw InputError("data.v_init must be zero, traveling or rough");
  if (!(c.data.s_div > 0 && c.data.s_curl > 0)) throw InputError("data: s_div and s_curl must be positive");
  if (c.data.amp_div < 0 || c.data.amp_curl < 0) throw InputError("data: amplitudes must be non-negative");
  if (c.data.kmax && (*c.data.kmax < 1 || 2 * *c.data.kmax >= c.grid.n()))
    throw InputError("data.kmax must lie in [1, n/2)");
  if (c.data.kind == "plane" && c.data.waves.empty()) throw InputError("data.kind plane needs data.waves");
  for (const PlaneWave& w : c.data.waves)
    for (int a = 0; a < 3; ++a)
      if (2 * std::abs(w.m[a]) >= c.grid.n()) throw InputError("data.waves[].m beyond the grid band");
  if (j.contains("time")) {
    const json& t = j["time"];
    only_keys(t, "time", {"t_end", "cfl_safety", "dt", "out_stride", "out_every"});
    read(t, "t_end", c.time.t_end, "time");
    read(t, "cfl_safety", c.time.cfl_safety, "time");
    read_opt(t, "dt", c.time.dt, "time");
    read_opt(t, "out_stride", c.time.out_stride, "time");
    read_opt(t, "out_every", c.time.out_every, "time");
  }
  if (!(c.time.t_end > 0)) throw InputError("time.t_end must be positive");
  if (!(c.time.cfl_safety > 0)) throw InputError("time.cfl_safety must be positive");
  if (c.time.dt && !(*c.time.dt > 0)) throw InputError("time.dt must be positive");
  if (c.time.out_stride && !(*c.time.out_stride > 0)) throw InputError("time.out_stride must be positive");
  if (c.time.out_every && *c.time.out_every < 1) throw InputError("time.out_every must be >= 1");
  if (c.time.out_every && c.time.out_stride) throw InputError("time: give out_stride or out_every, not both");
  read(j, "checks", c.checks, "config");
  for (const auto& k : c.checks)
    if (k != "hyperbolicity" && k != "blowup") throw InputError("checks: unknown monitor '" + k + "'");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "force", c.force, "config");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["grid"] = {{"n", c.grid.n()}, {"box_len", c.grid.box_len()}};
  j["material"] = {{"c1", c.material.c1}, {"c2", c.material.c2}, {"b_coef", c.material.b_coef},
                   {"gamma", c.material.gamma}};
  nlohmann::ordered_json d;
  d["kind"] = c.data.kind;
  d["s_div"] = c.data.s_div;
  d["s_curl"] = c.data.s_curl;
  d["amp_div"] = c.data.amp_div;
  d["amp_curl"] = c.data.amp_curl;
  d["seed"] = c.data.seed;
  d["kmax"] = c.kmax();
  d["v_init"] = c.data.v_init;
  d["waves"] = nlohmann::ordered_json::array();
  for (const PlaneWave& w : c.data.waves) {
    nlohmann::ordered_json o;
    o["m"] = w.m;
    o["pol"] = w.longitudinal ? "long" : "trans";
    o["polarization"] = w.polarization;
    o["amp"] = w.amp;
    o["phase"] = w.phase;
    o["traveling"] = w.traveling;
    d["waves"].push_back(o);
  }
  j["data"] = d;
  nlohmann::ordered_json t;
  t["t_end"] = c.time.t_end;
  t["cfl_safety"] = c.time.cfl_safety;
  if (c.time.dt) t["dt"] = *c.time.dt;
  if (c.time.out_stride) t["out_stride"] = *c.time.out_stride;
  if (c.time.out_every) t["out_every"] = *c.time.out_every;
  j["time"] = t;
  j["checks"] = c.checks;
  j["output_dir"] = c.output_dir;
  j["force"] = c.force;
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& c) {
  RunConfig k = c;
  k.output_dir.clear();
  const std::string s = dump_config(k);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_help() {
  return R"(Run config (JSON, unknown keys rejected):
  grid:     n (power of two >= 8, default 32), box_len (default 2*pi)
  material: c1 (1), c2 (0.5), b_coef (0.5), gamma [k2, k3, ...] ([0.4, 0.1])
  data:     kind rough|plane|mixed (mixed), s_div (1), s_curl (1),
            amp_div (0.05), amp_curl (0.05), seed (1), kmax (n/4),
            v_init zero|traveling|rough (zero),
            waves [{m:[i,j,k], pol:long|trans, polarization:[..], amp, phase, traveling}]
  time:     t_end (1), cfl_safety (0.4), dt (from CFL), out_stride | out_every (every step)
  checks:   monitors that halt the run ([hyperbolicity, blowup]); both are always recorded
  output_dir, seed (alias of data.seed), force (continue past hyperbolicity loss)
)";
}

}  // namespace ewlab
