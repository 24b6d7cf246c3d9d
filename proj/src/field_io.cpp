#include "ewlab/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace ewlab {

namespace {

constexpr char kMagic[8] = {'E', 'W', 'F', 'I', 'E', 'L', 'D', '1'};

static_assert(std::endian::native == std::endian::little, "EWF1 I/O assumes a little-endian host");

}  // namespace

void write_ewf(const std::string& path, const Grid3& g, const std::string& rank, int components,
               double time, std::span<const double> data) {
  if (data.size() != std::size_t(components) * g.points())
    throw ContractViolation("write_ewf: data length does not match header");
  nlohmann::ordered_json h;
  h["n"] = g.n();
  h["box_len"] = g.box_len();
  h["rank"] = rank;
  h["components"] = components;
  h["time"] = time;
  const std::string hs = h.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  os.write(kMagic, 8);
  const std::uint64_t len = hs.size();
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(hs.data(), std::streamsize(hs.size()));
  os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(double)));
  if (!os) throw InputError("write failed: " + path);
}

EwfRecord read_ewf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw InputError(path + ": not an EWF1 file");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 8);
  if (!is || len > (1u << 20)) throw InputError(path + ": bad header length");
  std::string hs(len, '\0');
  is.read(hs.data(), std::streamsize(len));
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(hs);
  } catch (const std::exception& e) {
    throw InputError(path + ": malformed header: " + e.what());
  }
  EwfRecord r{Grid3(h.at("n").get<int>(), h.at("box_len").get<double>()), h.at("rank").get<std::string>(),
              h.at("components").get<int>(), h.at("time").get<double>(), {}};
  r.data.resize(std::size_t(r.components) * r.grid.points());
  is.read(reinterpret_cast<char*>(r.data.data()), std::streamsize(r.data.size() * sizeof(double)));
  if (!is) throw InputError(path + ": truncated data");
  return r;
}

void write_field(const std::string& path, const Field& f, double time) {
  write_ewf(path, f.grid(), rank_name(f.rank()), f.ncomp(), time, f.data());
}

Field read_field(const std::string& path, double* time) {
  EwfRecord r = read_ewf(path);
  const Rank rank = rank_from_name(r.rank);
  if (components(rank) != r.components) throw InputError(path + ": rank/components mismatch");
  if (time) *time = r.time;
  return Field(r.grid, rank, std::move(r.data));
}

}  // namespace ewlab
