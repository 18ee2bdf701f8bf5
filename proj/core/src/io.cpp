#include "sbt/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "sbt/errors.hpp"

namespace sbt::io {

namespace {

constexpr std::string_view kMagic = "SBKL1";
constexpr std::size_t kHeaderBytes = 80;

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) {
    const auto bits = to_little(std::bit_cast<std::uint64_t>(d));
    std::array<char, 8> buf;
    std::memcpy(buf.data(), &bits, 8);
    os.write(buf.data(), 8);
  }
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& d : v) {
    std::array<char, 8> buf;
    if (!is.read(buf.data(), 8)) throw std::runtime_error("SBK block is truncated");
    std::uint64_t bits;
    std::memcpy(&bits, buf.data(), 8);
    d = std::bit_cast<double>(to_little(bits));
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_ensemble_csv(std::ostream& os, const PathEnsemble& e) {
  os << "path,t,x,u\n";
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    for (std::size_t k = 0; k < e.n_times; ++k) {
      os << p << ',' << format_double(e.times[k]) << ',' << format_double(e.x(p, k)) << ',';
      if (e.has_u()) os << format_double(e.u(p, k));
      os << '\n';
    }
  }
}

void write_sbk(std::ostream& os, const PathEnsemble& e) {
  const nlohmann::json desc = {{"n_paths", e.n_paths}, {"n_times", e.n_times}, {"cols", e.has_u() ? "txu" : "tx"}};
  std::string header = desc.dump();
  if (header.size() > kHeaderBytes) throw DomainError("SBK shape descriptor exceeds 80 bytes");
  header.resize(kHeaderBytes, ' ');
  os.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_doubles(os, e.times);
  write_doubles(os, e.xs);
  if (e.has_u()) write_doubles(os, e.us);
}

SbkBlock read_sbk(std::istream& is) {
  std::array<char, 5> magic;
  if (!is.read(magic.data(), 5) || std::string_view(magic.data(), 5) != kMagic) {
    throw std::runtime_error("not an SBK block (bad magic)");
  }
  std::string header(kHeaderBytes, ' ');
  if (!is.read(header.data(), kHeaderBytes)) throw std::runtime_error("SBK header is truncated");
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error(std::string("SBK header is not valid JSON: ") + ex.what());
  }
  SbkBlock b;
  b.n_paths = desc.at("n_paths").get<std::size_t>();
  b.n_times = desc.at("n_times").get<std::size_t>();
  const auto cols = desc.at("cols").get<std::string>();
  if (cols != "tx" && cols != "txu") throw std::runtime_error("SBK header has unknown cols: " + cols);
  b.times = read_doubles(is, b.n_times);
  b.xs = read_doubles(is, b.n_paths * b.n_times);
  if (cols == "txu") b.us = read_doubles(is, b.n_paths * b.n_times);
  return b;
}

void save_ensemble(const std::filesystem::path& path, const PathEnsemble& e) {
  const auto ext = path.extension().string();
  if (ext != ".csv" && ext != ".sbk") throw DomainError("ensemble output must end in .csv or .sbk: " + path.string());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (ext == ".csv") {
    write_ensemble_csv(os, e);
  } else {
    write_sbk(os, e);
  }
}

}  // namespace sbt::io
