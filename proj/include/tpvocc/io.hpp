// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "tpvocc/head.hpp"
#include "tpvocc/tensor.hpp"

namespace tpvocc {

// TNSR: "TNSR", u32 version = 1, u32 ndim, u32 dims[ndim], u8 dtype
// (1 = f32, 2 = f64), then the row-major payload. Little-endian throughout.
enum class TnsrDtype : std::uint8_t { kF32 = 1, kF64 = 2 };

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <typename T>
std::string encode_tnsr(const Tensor<T>& t);
AnyTensor decode_tnsr(const std::string& bytes);

template <typename T>
void write_tnsr(const std::filesystem::path& path, const Tensor<T>& t);
AnyTensor read_tnsr(const std::filesystem::path& path);

/// Reads a TNSR file and converts the payload to T.
template <typename T>
Tensor<T> read_tnsr_as(const std::filesystem::path& path);

// OCCG: "OCCG", u32 version = 1, u32 nx, ny, nz, u32 L, then nx*ny*nz label
// bytes with x slowest and z fastest. Little-endian throughout.
struct OccGrid {
  Labels labels;
  std::uint32_t num_classes = 0;
};

std::string encode_occg(const Labels& labels, std::uint32_t num_classes);
OccGrid decode_occg(const std::string& bytes);

void write_occg(const std::filesystem::path& path, const Labels& labels,
                std::uint32_t num_classes);
OccGrid read_occg(const std::filesystem::path& path);

/// Writes a visibility mask as an OCCG grid with two classes.
void write_mask(const std::filesystem::path& path, const VisibilityMask& mask);
VisibilityMask read_mask(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// RGB color of each class id; ids past the table wrap around.
using Rgb = std::array<std::uint8_t, 3>;
const std::array<Rgb, kNumClasses>& class_palette();

/// Image of class ids: rows follow x, columns follow y. `z_index` selects a
/// horizontal slice; nullopt renders the top-down view (highest non-free
/// label per pillar, free when the pillar is empty).
Labels bev_slice(const Labels& labels, std::optional<std::size_t> z_index,
                 std::uint8_t free_class = kFreeClass);

/// Binary (P6) portable pixmap of a class-id image through class_palette().
std::string encode_ppm(const Labels& image);

}  // namespace tpvocc
