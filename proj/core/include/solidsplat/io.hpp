// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/camera.hpp"
#include "solidsplat/gaussian.hpp"
#include "solidsplat/image.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace solidsplat {

enum class PlyFormat { ascii, binary_little_endian };

enum class PlyType { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::float32;
};

/// Gaussians decoded from a splatting PLY together with the raw vertex
/// records, so that unused properties survive a save/load cycle unchanged.
struct SceneFile {
    Scene gaussians;
    std::vector<PlyProperty> properties;
    /// One row per vertex, values in property order.
    std::vector<std::vector<double>> records;
    PlyFormat format = PlyFormat::binary_little_endian;
};

inline constexpr double kShC0 = 0.28209479177387814;

/// Encodes a scene in the standard splatting layout (float32 properties).
SceneFile encode_scene(const Scene &scene);

SceneFile parse_ply(std::string_view bytes);
SceneFile load_ply(const std::filesystem::path &path);
std::string serialize_ply(const SceneFile &file);
void save_ply(const std::filesystem::path &path, const SceneFile &file);

/// Point clouds with float32 x, y, z properties.
std::vector<Vec3> parse_cloud(std::string_view bytes);
std::vector<Vec3> load_cloud(const std::filesystem::path &path);
std::string serialize_cloud(std::span<const Vec3> points, PlyFormat format);
void save_cloud(const std::filesystem::path &path, std::span<const Vec3> points,
                PlyFormat format = PlyFormat::binary_little_endian);

/// Camera list from JSON text. Schema errors name the offending field path.
std::vector<Camera> parse_cameras(std::string_view json_text);
std::vector<Camera> load_cameras(const std::filesystem::path &path);
std::string serialize_cameras(std::span<const Camera> cameras);
void save_cameras(const std::filesystem::path &path, std::span<const Camera> cameras);

/// Little-endian PFM; masked pixels are written as +Inf.
std::string encode_pfm(const DepthMap &depth);
void write_depth_pfm(const std::filesystem::path &path, const DepthMap &depth);
/// Non-finite samples come back masked.
DepthMap decode_pfm(std::string_view bytes);
DepthMap read_depth_pfm(const std::filesystem::path &path);

/// 16-bit grayscale PNG: valid depths mapped linearly onto [1, 65535], masked pixels 0.
void write_depth_png(const std::filesystem::path &path, const DepthMap &depth);
/// 8-bit grayscale PNG of values / scale, clamped to [0, 1]; masked pixels 0.
void write_scalar_png(const std::filesystem::path &path, const Image<double> &values,
                      const Mask &mask, double scale);
void write_rgb_png(const std::filesystem::path &path, const RgbImage &image);
/// Reads 8- or 16-bit gray/RGB(A) PNGs into [0, 1] RGB.
RgbImage read_rgb_png(const std::filesystem::path &path);

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view bytes);

} // namespace solidsplat
