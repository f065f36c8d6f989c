#include <cmath>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "distcurrents/field_io.hpp"
#include "doctest.h"

using namespace distcurrents;

namespace {

SampledMap awkward_map() {
  // Irrational box bounds and values exercise exact decimal round-tripping
  // of the header and bit-level fidelity of the payload.
  double lo[] = {-1.0 / 3.0, 0.1};
  double hi[] = {M_PI, 2.0000000000000004};
  int res[] = {5, 7};
  BoxGrid g(lo, hi, res);
  SampledMap u(g, 3);
  for (long node = 0; node < g.node_count(); ++node) {
    u.value(node, 0) = std::sin(static_cast<double>(node) * 0.7311);
    u.value(node, 1) = 1.0 / (node + 0.5);
    u.value(node, 2) = node * 1e-17 - 3.0;
  }
  u.value(11, 1) = std::nan("");
  u.recompute_mask();
  return u;
}

std::string serialize(const SampledMap& u) {
  std::ostringstream out(std::ios::binary);
  write_field(out, u);
  return out.str();
}

}  // namespace

TEST_SUITE("fieldio") {

TEST_CASE("round trip preserves geometry and every payload bit") {
  SampledMap u = awkward_map();
  std::istringstream in(serialize(u), std::ios::binary);
  SampledMap v = read_field(in);

  CHECK(v.grid().same_geometry(u.grid()));
  CHECK(v.components() == u.components());
  REQUIRE(v.raw().size() == u.raw().size());
  CHECK(std::memcmp(v.raw().data(), u.raw().data(), u.raw().size() * 8) == 0);
  CHECK(v.masked_count() == 1);
  CHECK(v.masked(11));
}

TEST_CASE("header is stable text and payload offset is exact") {
  double lo[] = {0.0, 0.0};
  double hi[] = {1.0, 1.0};
  int res[] = {2, 2};
  BoxGrid g(lo, hi, res);
  SampledMap u(g, 1);
  for (long node = 0; node < 4; ++node) u.value(node, 0) = node;

  const std::string blob = serialize(u);
  const std::string header =
      "dcf 1\ndim 2\ncodim 1\nbox 0 0 1 1\nres 2 2\norder row-major\ndata\n";
  REQUIRE(blob.size() == header.size() + 4 * 8);
  CHECK(blob.compare(0, header.size(), header) == 0);

  // First payload value is 0.0, second is 1.0 in little-endian float64.
  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(blob.data()) + header.size();
  for (int b = 0; b < 8; ++b) CHECK(p[b] == 0);
  CHECK(p[8 + 7] == 0x3f);
  CHECK(p[8 + 6] == 0xf0);
}

TEST_CASE("unsupported versions and malformed headers are rejected") {
  SampledMap u = awkward_map();
  std::string blob = serialize(u);

  auto reject = [](std::string s) {
    std::istringstream in(std::move(s), std::ios::binary);
    CHECK_THROWS_AS(read_field(in), std::invalid_argument);
  };

  {
    std::string v2 = blob;
    v2[4] = '2';  // "dcf 1" -> "dcf 2"
    reject(v2);
  }
  reject("");
  reject("dcf 1\ncodim 1\ndim 2\n");  // keys out of order
  reject("dcf 1\ndim 9\n");
  reject("dcf 1\ndim 2\ncodim 0\n");
  reject("dcf 1\ndim 1\ncodim 1\nbox 1 0\nres 4\norder row-major\ndata\n");
  reject("dcf 1\ndim 1\ncodim 1\nbox 0 1\nres 4\norder column-major\ndata\n");

  // Short payload.
  reject(blob.substr(0, blob.size() - 1));
}

TEST_CASE("file round trip tags provenance with the path") {
  SampledMap u = awkward_map();
  const std::string path = "field_io_roundtrip.dcf";
  write_field(path, u);
  SampledMap v = read_field(path);
  CHECK(v.provenance == path);
  CHECK(std::memcmp(v.raw().data(), u.raw().data(), u.raw().size() * 8) == 0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_field(std::string("no_such_file.dcf")), std::invalid_argument);
}

}
