#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fdnet {

/// printf-%g formatting with fixed precision; deterministic and
/// locale-independent, used for every number we write to disk.
std::string format_double(double v, int significant_digits = 9);

/// Round-trip-exact formatting (17 significant digits).
std::string format_double_exact(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// 8-bit binary PGM (grayscale) from values in [0,1], row-major.
void write_pgm(const std::string& path, int64_t height, int64_t width, const std::vector<double>& values);

/// 8-bit binary PPM from interleaved RGB values in [0,1].
void write_ppm(const std::string& path, int64_t height, int64_t width, const std::vector<double>& rgb);

}  // namespace fdnet
