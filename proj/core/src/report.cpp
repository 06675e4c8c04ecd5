#include "fdnet/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fdnet/common.hpp"

namespace fdnet {

std::string format_double(double v, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, v);
  return buf;
}

std::string format_double_exact(double v) { return format_double(v, 17); }

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path);
  os << content;
  if (!os) throw DataError("failed writing file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

unsigned char to_byte(double v) {
  const double clamped = std::min(1.0, std::max(0.0, v));
  return static_cast<unsigned char>(clamped * 255.0 + 0.5);
}

}  // namespace

void write_pgm(const std::string& path, int64_t height, int64_t width, const std::vector<double>& values) {
  if (static_cast<int64_t>(values.size()) != height * width) {
    throw ShapeError("write_pgm: value count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path);
  os << "P5\n" << width << " " << height << "\n255\n";
  for (double v : values) {
    const unsigned char b = to_byte(v);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!os) throw DataError("failed writing file: " + path);
}

void write_ppm(const std::string& path, int64_t height, int64_t width, const std::vector<double>& rgb) {
  if (static_cast<int64_t>(rgb.size()) != height * width * 3) {
    throw ShapeError("write_ppm: value count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path);
  os << "P6\n" << width << " " << height << "\n255\n";
  for (double v : rgb) {
    const unsigned char b = to_byte(v);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!os) throw DataError("failed writing file: " + path);
}

}  // namespace fdnet
