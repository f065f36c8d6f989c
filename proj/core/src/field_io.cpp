#include "distcurrents/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace distcurrents {

namespace {

// Shortest decimal that parses back to the same double.
std::string exact_decimal(double v) {
  char buf[40];
  for (int prec : {15, 16, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument("field file: " + what);
}

// Reads one header line and splits it as "key rest".
void expect_key(std::istream& in, const char* key, std::string& rest) {
  std::string line;
  if (!std::getline(in, line)) bad(std::string("missing '") + key + "' line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t sp = line.find(' ');
  const std::string head = line.substr(0, sp);
  if (head != key) bad("expected '" + std::string(key) + "' line, got '" + head + "'");
  rest = sp == std::string::npos ? std::string() : line.substr(sp + 1);
}

}  // namespace

void write_field(std::ostream& out, const SampledMap& u) {
  const BoxGrid& g = u.grid();
  out << "dcf 1\n";
  out << "dim " << g.dim() << "\n";
  out << "codim " << u.components() << "\n";
  out << "box";
  for (int a = 0; a < g.dim(); ++a) out << ' ' << exact_decimal(g.lower(a));
  for (int a = 0; a < g.dim(); ++a) out << ' ' << exact_decimal(g.upper(a));
  out << "\n";
  out << "res";
  for (int a = 0; a < g.dim(); ++a) out << ' ' << g.res(a);
  out << "\n";
  out << "order row-major\n";
  out << "data\n";

  // Explicit byte assembly keeps the on-disk order little-endian regardless
  // of the host.
  std::vector<unsigned char> chunk;
  chunk.reserve(static_cast<std::size_t>(u.raw().size()) * 8);
  for (double v : u.raw()) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      chunk.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xff));
    }
  }
  out.write(reinterpret_cast<const char*>(chunk.data()),
            static_cast<std::streamsize>(chunk.size()));
  if (!out) throw std::runtime_error("field file: write failed");
}

void write_field(const std::string& path, const SampledMap& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_field(out, u);
}

SampledMap read_field(std::istream& in) {
  std::string rest;

  expect_key(in, "dcf", rest);
  if (rest != "1") bad("unsupported version '" + rest + "'");

  expect_key(in, "dim", rest);
  int dim = 0;
  {
    std::istringstream s(rest);
    if (!(s >> dim) || dim < 1 || dim > kMaxGridDim) bad("dim out of range");
  }

  expect_key(in, "codim", rest);
  int components = 0;
  {
    std::istringstream s(rest);
    if (!(s >> components) || components < 1 || components > kMaxMatrixDim) {
      bad("codim out of range");
    }
  }

  expect_key(in, "box", rest);
  std::vector<double> lower(dim), upper(dim);
  {
    std::istringstream s(rest);
    for (int a = 0; a < dim; ++a) {
      if (!(s >> lower[a])) bad("box needs lower/upper per axis");
    }
    for (int a = 0; a < dim; ++a) {
      if (!(s >> upper[a])) bad("box needs lower/upper per axis");
    }
    double extra;
    if (s >> extra) bad("box has trailing numbers");
  }

  expect_key(in, "res", rest);
  std::vector<int> res(dim);
  {
    std::istringstream s(rest);
    for (int a = 0; a < dim; ++a) {
      if (!(s >> res[a])) bad("res needs one entry per axis");
    }
    int extra;
    if (s >> extra) bad("res has trailing numbers");
  }

  expect_key(in, "order", rest);
  if (rest != "row-major") bad("unsupported order '" + rest + "'");

  expect_key(in, "data", rest);
  if (!rest.empty()) bad("'data' line takes no argument");

  BoxGrid grid;
  try {
    grid = BoxGrid(lower, upper, res);
  } catch (const std::invalid_argument& e) {
    bad(e.what());
  }

  SampledMap u(grid, components);
  const std::size_t bytes = u.raw().size() * 8;
  std::vector<unsigned char> chunk(bytes);
  in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) bad("data section is short");

  double* dst = u.raw().data();
  for (std::size_t i = 0; i < u.raw().size(); ++i) {
    uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<uint64_t>(chunk[i * 8 + b]) << (8 * b);
    }
    dst[i] = std::bit_cast<double>(bits);
  }
  u.recompute_mask();
  return u;
}

SampledMap read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open field file: " + path);
  SampledMap u = read_field(in);
  u.provenance = path;
  return u;
}

}  // namespace distcurrents
