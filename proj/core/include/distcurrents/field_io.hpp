#pragma once

#include <iosfwd>
#include <string>

#include "distcurrents/grid.hpp"

namespace distcurrents {

/// Field container format, version 1. A short text header pins the geometry:
///
///   dcf 1
///   dim 2
///   components 2
///   box 0 1 0 1
///   res 64 64
///   order row-major
///   data
///
/// followed immediately by node-major (component fastest) little-endian
/// float64 samples. Box bounds are printed with enough digits to round-trip
/// exactly. Non-finite samples are legal; readers mask them.
void write_field(std::ostream& out, const SampledMap& u);
void write_field(const std::string& path, const SampledMap& u);

/// Parses a version-1 field file. Throws std::invalid_argument on any header
/// deviation (unknown version, missing keys, geometry out of range) or short
/// data section.
SampledMap read_field(std::istream& in);
SampledMap read_field(const std::string& path);

}  // namespace distcurrents
