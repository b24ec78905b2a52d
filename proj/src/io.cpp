// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tpvocc {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, const char* what) : in_(in), what_(what) {}

  const char* bytes(std::size_t n) {
    if (in_.size() - pos_ < n) throw DataError(std::string(what_) + ": truncated");
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(*bytes(1)); }
  std::uint32_t u32() {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes(4));
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
           std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | std::uint64_t{u32()} << 32;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void magic(const char* m) {
    if (std::memcmp(bytes(4), m, 4) != 0) {
      throw DataError(std::string(what_) + ": bad magic");
    }
  }
  void version() {
    const std::uint32_t v = u32();
    if (v != kFormatVersion) {
      throw DataError(std::string(what_) + ": unsupported version " + std::to_string(v));
    }
  }
  void finish() const {
    if (pos_ != in_.size()) throw DataError(std::string(what_) + ": trailing bytes");
  }

 private:
  const std::string& in_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
std::string encode_tnsr(const Tensor<T>& t) {
  Writer w;
  w.bytes("TNSR", 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  if constexpr (std::is_same_v<T, float>) {
    w.u8(static_cast<std::uint8_t>(TnsrDtype::kF32));
    for (float v : t.data()) w.f32(v);
  } else {
    static_assert(std::is_same_v<T, double>, "TNSR stores f32 or f64");
    w.u8(static_cast<std::uint8_t>(TnsrDtype::kF64));
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

AnyTensor decode_tnsr(const std::string& bytes) {
  Reader r(bytes, "TNSR");
  r.magic("TNSR");
  r.version();
  const std::uint32_t ndim = r.u32();
  if (ndim > 16) throw DataError("TNSR: implausible rank " + std::to_string(ndim));
  Shape shape(ndim);
  for (auto& d : shape) d = r.u32();
  const std::uint8_t dtype = r.u8();
  const std::size_t n = shape_size(shape);
  AnyTensor out;
  if (dtype == static_cast<std::uint8_t>(TnsrDtype::kF32)) {
    if ((bytes.size()) < n * 4) throw DataError("TNSR: truncated");
    Tensor<float> t(shape);
    for (auto& v : t.data()) v = r.f32();
    out = std::move(t);
  } else if (dtype == static_cast<std::uint8_t>(TnsrDtype::kF64)) {
    if ((bytes.size()) < n * 8) throw DataError("TNSR: truncated");
    Tensor<double> t(shape);
    for (auto& v : t.data()) v = r.f64();
    out = std::move(t);
  } else {
    throw DataError("TNSR: unknown dtype tag " + std::to_string(dtype));
  }
  r.finish();
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

template <typename T>
void write_tnsr(const std::filesystem::path& path, const Tensor<T>& t) {
  write_file(path, encode_tnsr(t));
}

AnyTensor read_tnsr(const std::filesystem::path& path) {
  return decode_tnsr(read_file(path));
}

template <typename T>
Tensor<T> read_tnsr_as(const std::filesystem::path& path) {
  return std::visit([](auto&& t) { return t.template cast<T>(); }, read_tnsr(path));
}

std::string encode_occg(const Labels& labels, std::uint32_t num_classes) {
  if (labels.rank() != 3) throw ShapeError("OCCG grids are rank 3");
  for (std::uint8_t v : labels.data()) {
    if (v >= num_classes) throw DataError("OCCG: label exceeds class count");
  }
  Writer w;
  w.bytes("OCCG", 4);
  w.u32(kFormatVersion);
  for (std::size_t d : labels.shape()) w.u32(static_cast<std::uint32_t>(d));
  w.u32(num_classes);
  w.bytes(reinterpret_cast<const char*>(labels.ptr()), labels.size());
  return w.take();
}

OccGrid decode_occg(const std::string& bytes) {
  Reader r(bytes, "OCCG");
  r.magic("OCCG");
  r.version();
  Shape shape(3);
  for (auto& d : shape) d = r.u32();
  OccGrid g;
  g.num_classes = r.u32();
  g.labels = Labels(shape);
  const char* payload = r.bytes(g.labels.size());
  std::memcpy(g.labels.ptr(), payload, g.labels.size());
  r.finish();
  for (std::uint8_t v : g.labels.data()) {
    if (v >= g.num_classes) throw DataError("OCCG: label exceeds class count");
  }
  return g;
}

void write_occg(const std::filesystem::path& path, const Labels& labels,
                std::uint32_t num_classes) {
  write_file(path, encode_occg(labels, num_classes));
}

OccGrid read_occg(const std::filesystem::path& path) {
  return decode_occg(read_file(path));
}

void write_mask(const std::filesystem::path& path, const VisibilityMask& mask) {
  write_occg(path, mask.visible, 2);
}

VisibilityMask read_mask(const std::filesystem::path& path) {
  OccGrid g = read_occg(path);
  if (g.num_classes != 2) throw DataError("mask grid must have two classes");
  return {std::move(g.labels)};
}

const std::array<Rgb, kNumClasses>& class_palette() {
  static const std::array<Rgb, kNumClasses> palette = {{
      {0, 0, 0},        // others
      {255, 120, 50},   // barrier
      {255, 192, 203},  // bicycle
      {255, 255, 0},    // bus
      {0, 150, 245},    // car
      {0, 255, 255},    // construction_vehicle
      {200, 180, 0},    // motorcycle
      {255, 0, 0},      // pedestrian
      {255, 240, 150},  // traffic_cone
      {135, 60, 0},     // trailer
      {160, 32, 240},   // truck
      {255, 0, 255},    // driveable_surface
      {139, 137, 137},  // other_flat
      {75, 0, 75},      // sidewalk
      {150, 240, 80},   // terrain
      {230, 230, 250},  // manmade
      {0, 175, 0},      // vegetation
      {255, 255, 255},  // free
  }};
  return palette;
}

Labels bev_slice(const Labels& labels, std::optional<std::size_t> z_index,
                 std::uint8_t free_class) {
  if (labels.rank() != 3) throw ShapeError("bev_slice expects nx x ny x nz");
  const std::size_t nx = labels.dim(0), ny = labels.dim(1), nz = labels.dim(2);
  if (z_index && *z_index >= nz) {
    throw DataError("z index " + std::to_string(*z_index) + " out of range [0, " +
                    std::to_string(nz) + ")");
  }
  Labels image({nx, ny});
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      if (z_index) {
        image(i, j) = labels(i, j, *z_index);
        continue;
      }
      std::uint8_t top = free_class;
      for (std::size_t k = nz; k-- > 0;) {
        if (labels(i, j, k) != free_class) {
          top = labels(i, j, k);
          break;
        }
      }
      image(i, j) = top;
    }
  }
  return image;
}

std::string encode_ppm(const Labels& image) {
  if (image.rank() != 2) throw ShapeError("encode_ppm expects a 2D image");
  std::string out = "P6\n" + std::to_string(image.dim(1)) + " " +
                    std::to_string(image.dim(0)) + "\n255\n";
  const auto& palette = class_palette();
  for (std::uint8_t id : image.data()) {
    const Rgb& c = palette[id % palette.size()];
    out.append(reinterpret_cast<const char*>(c.data()), 3);
  }
  return out;
}

template std::string encode_tnsr(const Tensor<float>&);
template std::string encode_tnsr(const Tensor<double>&);
template void write_tnsr(const std::filesystem::path&, const Tensor<float>&);
template void write_tnsr(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_tnsr_as(const std::filesystem::path&);
template Tensor<double> read_tnsr_as(const std::filesystem::path&);

}  // namespace tpvocc
