#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fdnet/model.hpp"

namespace fdnet {

// Checkpoint layout, all integers little-endian:
//   magic "FDNETCKPT", u32 version
//   u64 config length, config text (ModelConfig::canonical_text)
//   u32 blob count, then per blob:
//     u32 name length, name bytes, u64 element count, f32 values
// Blobs are the named parameters, then the named buffers, then (optionally)
// optimizer velocities under "opt.v." prefixes. Values are stored as 32-bit
// floats regardless of the runtime precision, so a save/load/save cycle is
// byte-identical.

namespace ckpt {

inline constexpr char magic[] = "FDNETCKPT";
inline constexpr uint32_t version = 1;

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& is) {
  const uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

template <typename T>
void write_blob(std::ostream& os, const std::string& name, const Tensor<T>& t) {
  write_u32(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(os, static_cast<uint64_t>(t.numel()));
  for (T v : t.values()) write_f32(os, static_cast<float>(v));
}

}  // namespace ckpt

template <typename T>
struct SgdState;  // defined in train.hpp

template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path,
                     const std::vector<std::vector<T>>* velocities = nullptr) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint file for writing: " + path);
  os.write(ckpt::magic, sizeof(ckpt::magic) - 1);
  ckpt::write_u32(os, ckpt::version);
  const std::string cfg_text = model.cfg.canonical_text();
  ckpt::write_u64(os, cfg_text.size());
  os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  auto params = model.named_parameters();
  auto buffers = model.named_buffers();
  if (velocities && velocities->size() != params.size()) {
    throw ShapeError("save_checkpoint: velocity count does not match parameter count");
  }
  const uint32_t blob_count =
      static_cast<uint32_t>(params.size() + buffers.size() + (velocities ? params.size() : 0));
  ckpt::write_u32(os, blob_count);
  for (auto& p : params) ckpt::write_blob(os, p.name, p.tensor);
  for (auto& b : buffers) ckpt::write_blob(os, b.name, b.tensor);
  if (velocities) {
    for (size_t i = 0; i < params.size(); ++i) {
      ckpt::write_u32(os, static_cast<uint32_t>(params[i].name.size() + 6));
      os << "opt.v.";
      os.write(params[i].name.data(), static_cast<std::streamsize>(params[i].name.size()));
      ckpt::write_u64(os, (*velocities)[i].size());
      for (T v : (*velocities)[i]) ckpt::write_f32(os, static_cast<float>(v));
    }
  }
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

/// Rebuilds the model from the embedded config and restores every parameter
/// and buffer. Optimizer velocities, when present and requested, land in
/// `velocities` (resized to the parameter count).
template <typename T>
Model<T> load_checkpoint(const std::string& path, std::vector<std::vector<T>>* velocities = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint file: " + path);
  char magic[sizeof(ckpt::magic) - 1];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, ckpt::magic, sizeof(magic)) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  const uint32_t version = ckpt::read_u32(is);
  if (version != ckpt::version) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  const uint64_t cfg_len = ckpt::read_u64(is);
  std::string cfg_text(cfg_len, '\0');
  is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
  if (!is) throw DataError("truncated checkpoint header: " + path);

  Model<T> model = build_model<T>(ModelConfig::from_text(cfg_text), /*seed=*/0);
  auto params = model.named_parameters();
  auto buffers = model.named_buffers();
  if (velocities) velocities->assign(params.size(), {});

  auto find_target = [&](const std::string& name) -> Tensor<T>* {
    for (auto& p : params) {
      if (p.name == name) return &p.tensor;
    }
    for (auto& b : buffers) {
      if (b.name == name) return &b.tensor;
    }
    return nullptr;
  };

  const uint32_t blob_count = ckpt::read_u32(is);
  size_t restored = 0;
  for (uint32_t bi = 0; bi < blob_count; ++bi) {
    const uint32_t name_len = ckpt::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint64_t count = ckpt::read_u64(is);
    if (!is) throw DataError("truncated checkpoint blob header: " + path);

    if (name.rfind("opt.v.", 0) == 0) {
      const std::string pname = name.substr(6);
      std::vector<T>* dst = nullptr;
      if (velocities) {
        for (size_t i = 0; i < params.size(); ++i) {
          if (params[i].name == pname) {
            dst = &(*velocities)[i];
            break;
          }
        }
        if (!dst) throw DataError("checkpoint velocity for unknown parameter '" + pname + "' in " + path);
        dst->resize(count);
      }
      for (uint64_t i = 0; i < count; ++i) {
        const float v = ckpt::read_f32(is);
        if (dst) (*dst)[i] = static_cast<T>(v);
      }
      continue;
    }

    Tensor<T>* target = find_target(name);
    if (!target) throw DataError("checkpoint blob '" + name + "' does not match any model tensor in " + path);
    if (static_cast<uint64_t>(target->numel()) != count) {
      throw DataError("checkpoint blob '" + name + "' has " + std::to_string(count) + " elements, model expects " +
                      std::to_string(target->numel()));
    }
    auto vals = target->values_mut();
    for (uint64_t i = 0; i < count; ++i) vals[i] = static_cast<T>(ckpt::read_f32(is));
    ++restored;
  }
  if (!is) throw DataError("truncated checkpoint data: " + path);
  if (restored != params.size() + buffers.size()) {
    throw DataError("checkpoint " + path + " restored " + std::to_string(restored) + " tensors, model has " +
                    std::to_string(params.size() + buffers.size()));
  }
  return model;
}

}  // namespace fdnet
