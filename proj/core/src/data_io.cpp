#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fdnet/common.hpp"
#include "fdnet/data.hpp"

namespace fdnet::io {

namespace {

constexpr int64_t kCifarRecord = 3073;  // 1 label byte + 3*32*32 pixels
constexpr int64_t kCifarPixels = 3 * 32 * 32;

std::vector<uint8_t> read_all(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw DataError("cannot open dataset file: " + path);
  const std::streamsize size = is.tellg();
  is.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  is.read(reinterpret_cast<char*>(buf.data()), size);
  if (!is) throw DataError("failed reading dataset file: " + path);
  return buf;
}

uint32_t read_be32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
         static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}

void write_be32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

std::vector<std::string> cifar10_class_names() {
  return {"airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"};
}

RawImages read_cifar10_files(const std::vector<std::string>& files) {
  RawImages out;
  out.c = 3;
  out.h = 32;
  out.w = 32;
  for (const auto& path : files) {
    const auto buf = read_all(path);
    if (buf.empty() || buf.size() % kCifarRecord != 0) {
      throw DataError("CIFAR-10 file " + path + " has size " + std::to_string(buf.size()) +
                      ", not a multiple of the 3073-byte record");
    }
    const int64_t records = static_cast<int64_t>(buf.size()) / kCifarRecord;
    for (int64_t r = 0; r < records; ++r) {
      const uint8_t* rec = buf.data() + r * kCifarRecord;
      if (rec[0] > 9) {
        throw DataError("CIFAR-10 file " + path + " record " + std::to_string(r) + " has label byte " +
                        std::to_string(rec[0]) + " > 9");
      }
      out.labels.push_back(static_cast<int>(rec[0]));
      out.pixels.insert(out.pixels.end(), rec + 1, rec + kCifarRecord);
    }
    out.n += records;
  }
  return out;
}

void write_cifar10_file(const std::string& path, const RawImages& data) {
  if (data.c != 3 || data.h != 32 || data.w != 32) {
    throw DataError("write_cifar10_file: images must be 3x32x32");
  }
  if (static_cast<int64_t>(data.labels.size()) != data.n ||
      static_cast<int64_t>(data.pixels.size()) != data.n * kCifarPixels) {
    throw DataError("write_cifar10_file: inconsistent record counts");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path);
  for (int64_t r = 0; r < data.n; ++r) {
    const auto label = static_cast<unsigned char>(data.labels[static_cast<size_t>(r)]);
    os.write(reinterpret_cast<const char*>(&label), 1);
    os.write(reinterpret_cast<const char*>(data.pixels.data() + r * kCifarPixels), kCifarPixels);
  }
  if (!os) throw DataError("failed writing file: " + path);
}

RawImages read_idx_pair(const std::string& image_file, const std::string& label_file) {
  const auto img = read_all(image_file);
  if (img.size() < 16) throw DataError("IDX image file too short: " + image_file);
  const uint32_t magic = read_be32(img.data());
  if (magic != 0x00000803) {
    throw DataError("IDX image file " + image_file + " has magic " + std::to_string(magic) +
                    ", expected 2051 (0x00000803)");
  }
  const int64_t n = read_be32(img.data() + 4);
  const int64_t h = read_be32(img.data() + 8);
  const int64_t w = read_be32(img.data() + 12);
  if (static_cast<int64_t>(img.size()) != 16 + n * h * w) {
    throw DataError("IDX image file " + image_file + " truncated: expected " +
                    std::to_string(16 + n * h * w) + " bytes, got " + std::to_string(img.size()));
  }

  const auto lab = read_all(label_file);
  if (lab.size() < 8) throw DataError("IDX label file too short: " + label_file);
  const uint32_t lmagic = read_be32(lab.data());
  if (lmagic != 0x00000801) {
    throw DataError("IDX label file " + label_file + " has magic " + std::to_string(lmagic) +
                    ", expected 2049 (0x00000801)");
  }
  const int64_t ln = read_be32(lab.data() + 4);
  if (ln != n) {
    throw DataError("IDX pair mismatch: " + std::to_string(n) + " images vs " + std::to_string(ln) + " labels");
  }
  if (static_cast<int64_t>(lab.size()) != 8 + ln) {
    throw DataError("IDX label file " + label_file + " truncated");
  }

  RawImages out;
  out.n = n;
  out.c = 1;
  out.h = h;
  out.w = w;
  out.pixels.assign(img.begin() + 16, img.end());
  out.labels.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out.labels.push_back(static_cast<int>(lab[static_cast<size_t>(8 + i)]));
  return out;
}

void write_idx_pair(const std::string& image_file, const std::string& label_file, const RawImages& data) {
  if (data.c != 1) throw DataError("write_idx_pair: IDX images are single-channel");
  {
    std::ofstream os(image_file, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open file for writing: " + image_file);
    write_be32(os, 0x00000803);
    write_be32(os, static_cast<uint32_t>(data.n));
    write_be32(os, static_cast<uint32_t>(data.h));
    write_be32(os, static_cast<uint32_t>(data.w));
    os.write(reinterpret_cast<const char*>(data.pixels.data()),
             static_cast<std::streamsize>(data.pixels.size()));
    if (!os) throw DataError("failed writing file: " + image_file);
  }
  std::ofstream os(label_file, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + label_file);
  write_be32(os, 0x00000801);
  write_be32(os, static_cast<uint32_t>(data.n));
  for (int label : data.labels) {
    const auto b = static_cast<unsigned char>(label);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!os) throw DataError("failed writing file: " + label_file);
}

}  // namespace fdnet::io
