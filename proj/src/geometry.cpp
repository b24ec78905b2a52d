// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace tpvocc {

using nlohmann::json;

GridSpec GridSpec::from_origin(double x_min, double y_min, double z_min,
                               double voxel_size, std::size_t nx,
                               std::size_t ny, std::size_t nz) {
  GridSpec s;
  s.x_min = x_min;
  s.y_min = y_min;
  s.z_min = z_min;
  s.voxel_size = voxel_size;
  s.nx = nx;
  s.ny = ny;
  s.nz = nz;
  s.x_max = x_min + static_cast<double>(nx) * voxel_size;
  s.y_max = y_min + static_cast<double>(ny) * voxel_size;
  s.z_max = z_min + static_cast<double>(nz) * voxel_size;
  return s;
}

GridSpec GridSpec::occ3d() {
  GridSpec s;
  s.x_min = -40.0;
  s.x_max = 40.0;
  s.y_min = -40.0;
  s.y_max = 40.0;
  s.z_min = -1.0;
  s.z_max = 5.4;
  s.voxel_size = 0.4;
  s.nx = 200;
  s.ny = 200;
  s.nz = 16;
  return s;
}

namespace {

void check_extent(const char* axis, double lo, double hi, std::size_t n,
                  double voxel) {
  const double extent = hi - lo;
  const double expected = static_cast<double>(n) * voxel;
  const double scale = std::max({std::abs(lo), std::abs(hi), expected, 1.0});
  if (std::abs(extent - expected) > 1e-9 * scale) {
    std::ostringstream os;
    os << "grid extent along " << axis << " is " << extent << " but "
       << n << " voxels of " << voxel << " m span " << expected;
    throw ConfigError(os.str());
  }
}

}  // namespace

void GridSpec::validate() const {
  if (nx == 0 || ny == 0 || nz == 0) {
    throw ConfigError("grid counts must be positive");
  }
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw ConfigError("voxel_size must be positive");
  }
  check_extent("x", x_min, x_max, nx, voxel_size);
  check_extent("y", y_min, y_max, ny, voxel_size);
  check_extent("z", z_min, z_max, nz, voxel_size);
}

CameraModel CameraModel::level(const Eigen::Vector3d& position, double yaw,
                               double focal, std::size_t H, std::size_t W) {
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  const Eigen::Vector3d right = forward.cross(up);
  CameraModel cam;
  cam.R.row(0) = right.transpose();
  cam.R.row(1) = (-up).transpose();
  cam.R.row(2) = forward.transpose();
  cam.t = -cam.R * position;
  cam.K << focal, 0.0, (static_cast<double>(W) - 1.0) / 2.0,  //
      0.0, focal, (static_cast<double>(H) - 1.0) / 2.0,       //
      0.0, 0.0, 1.0;
  cam.H = H;
  cam.W = W;
  return cam;
}

void CameraModel::validate() const {
  if (H == 0 || W == 0) throw ConfigError("camera image size must be positive");
  const Eigen::Matrix3d gram = R.transpose() * R;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(R.determinant() - 1.0) > 1e-9) {
    throw ConfigError("camera rotation is not a proper orthonormal matrix");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 ||
      std::abs(K(2, 2) - 1.0) > 1e-12) {
    throw ConfigError("camera intrinsics must be upper triangular with K22 = 1");
  }
  if (!(fx() > 0.0) || !(fy() > 0.0)) {
    throw ConfigError("camera focal lengths must be positive");
  }
  if (cx() < 0.0 || cx() >= static_cast<double>(W) || cy() < 0.0 ||
      cy() >= static_cast<double>(H)) {
    throw ConfigError("camera principal point lies outside the image");
  }
}

std::vector<CameraModel> make_ring_rig(const Eigen::Vector3d& position,
                                       std::size_t count, double focal,
                                       std::size_t H, std::size_t W) {
  std::vector<CameraModel> rig;
  rig.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    const double yaw = 2.0 * M_PI * static_cast<double>(c) /
                       static_cast<double>(count);
    rig.push_back(CameraModel::level(position, yaw, focal, H, W));
  }
  return rig;
}

void DepthBins::validate() const {
  if (!(bin_size > 0.0)) throw ConfigError("depth bin_size must be positive");
  if (n_bins == 0) throw ConfigError("depth n_bins must be at least 1");
}

Tensor<double> voxel_centers(const GridSpec& spec) {
  Tensor<double> out({spec.nx, spec.ny, spec.nz, 3});
  double* p = out.ptr();
  for (std::size_t i = 0; i < spec.nx; ++i) {
    for (std::size_t j = 0; j < spec.ny; ++j) {
      for (std::size_t k = 0; k < spec.nz; ++k) {
        const Eigen::Vector3d c = spec.center(i, j, k);
        *p++ = c.x();
        *p++ = c.y();
        *p++ = c.z();
      }
    }
  }
  return out;
}

ImagePoint project(const CameraModel& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = cam.R * p + cam.t;
  ImagePoint ip;
  ip.d = q.z();
  if (!(q.z() > kMinDepth)) return ip;
  const Eigen::Vector3d u = cam.K * q;
  ip.w = u.x() / q.z();
  ip.h = u.y() / q.z();
  ip.in_frustum = ip.h >= 0.0 && ip.h <= static_cast<double>(cam.H) - 1.0 &&
                  ip.w >= 0.0 && ip.w <= static_cast<double>(cam.W) - 1.0;
  return ip;
}

Eigen::Vector3d unproject(const CameraModel& cam, const ImagePoint& ip) {
  const Eigen::Vector3d q =
      ip.d * cam.K.triangularView<Eigen::Upper>().solve(
                 Eigen::Vector3d(ip.w, ip.h, 1.0));
  return cam.R.transpose() * (q - cam.t);
}

BinCoord depth_to_bin(double d, const DepthBins& bins) {
  BinCoord b;
  b.coord = (d - bins.d_min) / bins.bin_size - 0.5;
  b.valid = b.coord >= -0.5 &&
            b.coord <= static_cast<double>(bins.n_bins) - 0.5;
  return b;
}

namespace {

std::vector<double> numbers(const json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != n) {
    throw ConfigError(std::string("camera field '") + key + "' must be an array of " +
                      std::to_string(n) + " numbers");
  }
  return j.at(key).get<std::vector<double>>();
}

GridSpec grid_from_json(const json& g) {
  GridSpec s;
  s.x_min = g.at("x_min").get<double>();
  s.x_max = g.at("x_max").get<double>();
  s.y_min = g.at("y_min").get<double>();
  s.y_max = g.at("y_max").get<double>();
  s.z_min = g.at("z_min").get<double>();
  s.z_max = g.at("z_max").get<double>();
  s.voxel_size = g.at("voxel_size").get<double>();
  s.nx = g.at("nx").get<std::size_t>();
  s.ny = g.at("ny").get<std::size_t>();
  s.nz = g.at("nz").get<std::size_t>();
  s.validate();
  return s;
}

}  // namespace

Rig parse_rig(const std::string& json_text) {
  Rig rig;
  try {
    const json doc = json::parse(json_text);
    rig.grid = grid_from_json(doc.at("grid"));
    for (const json& c : doc.at("cameras")) {
      CameraModel cam;
      const auto k = numbers(c, "K", 9);
      const auto r = numbers(c, "R", 9);
      const auto t = numbers(c, "t", 3);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          cam.K(a, b) = k[3 * a + b];
          cam.R(a, b) = r[3 * a + b];
        }
        cam.t(a) = t[a];
      }
      cam.H = c.at("H").get<std::size_t>();
      cam.W = c.at("W").get<std::size_t>();
      cam.validate();
      rig.cameras.push_back(cam);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rig json: ") + e.what());
  }
  if (rig.cameras.empty()) throw ConfigError("rig json: no cameras");
  return rig;
}

Rig load_rig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rig file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rig(ss.str());
}

std::string rig_to_json(const Rig& rig) {
  const GridSpec& g = rig.grid;
  json doc;
  doc["grid"] = {{"x_min", g.x_min}, {"x_max", g.x_max},
                 {"y_min", g.y_min}, {"y_max", g.y_max},
                 {"z_min", g.z_min}, {"z_max", g.z_max},
                 {"voxel_size", g.voxel_size},
                 {"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}};
  doc["cameras"] = json::array();
  for (const CameraModel& cam : rig.cameras) {
    std::vector<double> k, r;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        k.push_back(cam.K(a, b));
        r.push_back(cam.R(a, b));
      }
    }
    doc["cameras"].push_back({{"K", k},
                              {"R", r},
                              {"t", {cam.t.x(), cam.t.y(), cam.t.z()}},
                              {"H", cam.H},
                              {"W", cam.W}});
  }
  return doc.dump(2);
}

}  // namespace tpvocc
