#pragma once

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fovsim {

// Default in-plane pitch: a 6-voxel signal subtends ~0.13 dva.
inline constexpr double kDefaultPitchDva = 0.13 / 6.0;

struct VolumeGeometry {
  int nx = 0;
  int ny = 0;
  int nz = 1;
  double pitch_dva = kDefaultPitchDva;  // degrees of visual angle per voxel, isotropic in-plane

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(z) * nx * ny + static_cast<std::size_t>(y) * nx + x;
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
  }
  void validate() const {
    if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("VolumeGeometry: dims must be >= 1");
    if (!(pitch_dva > 0.0)) throw std::invalid_argument("VolumeGeometry: pitch must be > 0");
  }
  bool operator==(const VolumeGeometry&) const = default;
};

// 3D scalar voxel grid, x-fastest storage.
struct Volume {
  VolumeGeometry geom;
  std::vector<double> voxels;

  Volume() = default;
  explicit Volume(VolumeGeometry g, double fill = 0.0)
      : geom(g), voxels(g.voxel_count(), fill) {
    geom.validate();
  }

  double& at(int x, int y, int z) { return voxels[geom.index(x, y, z)]; }
  double at(int x, int y, int z) const { return voxels[geom.index(x, y, z)]; }
  const double* slice(int z) const { return voxels.data() + static_cast<std::size_t>(z) * geom.nx * geom.ny; }
  double* slice(int z) { return voxels.data() + static_cast<std::size_t>(z) * geom.nx * geom.ny; }
};

struct VoxelLoc {
  int x = 0;
  int y = 0;
  int z = 0;
  bool operator==(const VoxelLoc&) const = default;
};

inline double dva_between(const VolumeGeometry& g, double x0, double y0, double x1, double y1) {
  const double dx = (x1 - x0) * g.pitch_dva;
  const double dy = (y1 - y0) * g.pitch_dva;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace fovsim
