#include "fovsim/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fovsim/fft.hpp"

namespace fovsim {

using json = nlohmann::json;

void NoiseSpec::validate() const {
  if (!std::isfinite(exponent) || exponent < 0.0)
    throw std::invalid_argument("NoiseSpec: exponent must be finite and >= 0");
  if (!std::isfinite(mean)) throw std::invalid_argument("NoiseSpec: mean must be finite");
  if (!std::isfinite(sigma) || sigma <= 0.0)
    throw std::invalid_argument("NoiseSpec: sigma must be finite and > 0");
}

void SignalSpec::validate() const {
  if (!(size_voxels > 0.0)) throw std::invalid_argument("SignalSpec: size must be > 0");
  if (!(contrast >= 0.0)) throw std::invalid_argument("SignalSpec: contrast must be >= 0");
}

std::string to_string(SignalKind kind) {
  return kind == SignalKind::microcalcification ? "microcalcification" : "mass";
}

SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "microcalcification" || s == "mcalc") return SignalKind::microcalcification;
  if (s == "mass") return SignalKind::mass;
  throw std::invalid_argument("unknown signal kind: " + s);
}

double SignalProfile::peak() const {
  double p = 0.0;
  for (const double v : values) p = std::max(p, v);
  return p;
}

Volume generate_noise_volume(const NoiseSpec& spec, const VolumeGeometry& geom) {
  spec.validate();
  geom.validate();
  const bool is3d = geom.nz > 1;
  if (geom.nx < 2 || geom.ny < 2 || (is3d && geom.nz < 2))
    throw std::invalid_argument("generate_noise_volume: each FFT axis needs >= 2 voxels");

  const std::size_t n = geom.voxel_count();
  Rng rng(spec.seed);
  std::vector<double> field(n);
  for (auto& v : field) v = rng.normal();

  fft::cvec spectrum = is3d ? fft::fft3_real(geom.nx, geom.ny, geom.nz, field.data())
                            : fft::fft2_real(geom.nx, geom.ny, field.data());

  const double half_beta = spec.exponent / 2.0;
  std::size_t i = 0;
  for (int z = 0; z < geom.nz; ++z) {
    const int fz = is3d ? fft::freq_index(z, geom.nz) : 0;
    for (int y = 0; y < geom.ny; ++y) {
      const int fy = fft::freq_index(y, geom.ny);
      for (int x = 0; x < geom.nx; ++x, ++i) {
        const int fx = fft::freq_index(x, geom.nx);
        const double f2 = static_cast<double>(fx) * fx + static_cast<double>(fy) * fy +
                          static_cast<double>(fz) * fz;
        if (f2 == 0.0) {
          spectrum[i] = 0.0;  // DC handled separately: the mean is added below
        } else {
          spectrum[i] *= std::pow(f2, -half_beta / 2.0);
        }
      }
    }
  }

  std::vector<double> filtered = is3d
      ? fft::ifft3_to_real(geom.nx, geom.ny, geom.nz, spectrum)
      : fft::ifft2_to_real(geom.nx, geom.ny, spectrum);

  // Zero-mean by construction (DC bin cleared); remove residual numeric mean.
  double mean = 0.0;
  for (const double v : filtered) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double v : filtered) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);

  double gain = 1.0;
  if (spec.renormalize_sigma) {
    if (var <= 0.0) throw std::runtime_error("generate_noise_volume: degenerate filtered field");
    gain = spec.sigma / std::sqrt(var);
  }

  Volume vol(geom);
  for (std::size_t k = 0; k < n; ++k) vol.voxels[k] = spec.mean + gain * (filtered[k] - mean);
  return vol;
}

std::vector<double> noise_power_spectrum(const NoiseSpec& spec, const VolumeGeometry& geom) {
  spec.validate();
  geom.validate();
  const bool is3d = geom.nz > 1;
  const std::size_t n = geom.voxel_count();
  std::vector<double> s(n, 0.0);
  double sum = 0.0;
  std::size_t i = 0;
  for (int z = 0; z < geom.nz; ++z) {
    const int fz = is3d ? fft::freq_index(z, geom.nz) : 0;
    for (int y = 0; y < geom.ny; ++y) {
      const int fy = fft::freq_index(y, geom.ny);
      for (int x = 0; x < geom.nx; ++x, ++i) {
        const int fx = fft::freq_index(x, geom.nx);
        const double f2 = static_cast<double>(fx) * fx + static_cast<double>(fy) * fy +
                          static_cast<double>(fz) * fz;
        if (f2 == 0.0) continue;
        s[i] = std::pow(f2, -spec.exponent / 2.0);
        sum += s[i];
      }
    }
  }
  // Normalize so the per-voxel variance (1/N * sum_k S) equals sigma^2.
  const double scale = spec.sigma * spec.sigma * static_cast<double>(n) / sum;
  for (auto& v : s) v *= scale;
  return s;
}

SignalProfile make_signal_profile(const SignalSpec& spec, const VolumeGeometry& geom,
                                  double background_mean) {
  spec.validate();
  geom.validate();
  const double amplitude = spec.contrast * background_mean;
  const bool is3d = geom.nz > 1;
  SignalProfile p;

  if (spec.kind == SignalKind::microcalcification) {
    const double radius = spec.size_voxels / 2.0;
    const int h = static_cast<int>(std::floor(radius));
    const int hz = is3d ? h : 0;
    p.sx = p.sy = 2 * h + 1;
    p.sz = 2 * hz + 1;
    p.values.assign(static_cast<std::size_t>(p.sx) * p.sy * p.sz, 0.0);
    std::size_t i = 0;
    for (int z = -hz; z <= hz; ++z)
      for (int y = -h; y <= h; ++y)
        for (int x = -h; x <= h; ++x, ++i) {
          const double r = std::sqrt(static_cast<double>(x) * x + static_cast<double>(y) * y +
                                     static_cast<double>(z) * z);
          if (r <= radius) p.values[i] = amplitude;
        }
  } else {
    const double sigma = spec.size_voxels;
    const int h = static_cast<int>(std::ceil(2.0 * sigma));
    // Depth support clamped so a valid placement exists in shallow stacks.
    int hz = is3d ? h : 0;
    if (is3d) hz = std::min(hz, std::max(1, (geom.nz - 2) / 2));
    p.sx = p.sy = 2 * h + 1;
    p.sz = 2 * hz + 1;
    p.values.assign(static_cast<std::size_t>(p.sx) * p.sy * p.sz, 0.0);
    std::size_t i = 0;
    for (int z = -hz; z <= hz; ++z)
      for (int y = -h; y <= h; ++y)
        for (int x = -h; x <= h; ++x, ++i) {
          const double r2 = static_cast<double>(x) * x + static_cast<double>(y) * y +
                            static_cast<double>(z) * z;
          p.values[i] = amplitude * std::exp(-r2 / (2.0 * sigma * sigma));
        }
  }
  if (p.sx > geom.nx || p.sy > geom.ny || p.sz > geom.nz)
    throw std::invalid_argument("make_signal_profile: signal support does not fit the volume");
  return p;
}

static void add_signal(Volume& bg, const SignalProfile& s, const VoxelLoc& loc, double sign) {
  const auto& g = bg.geom;
  const int x0 = loc.x - s.hx(), y0 = loc.y - s.hy(), z0 = loc.z - s.hz();
  if (x0 < 0 || y0 < 0 || z0 < 0 || x0 + s.sx > g.nx || y0 + s.sy > g.ny || z0 + s.sz > g.nz)
    throw std::out_of_range("embed_signal: signal support out of bounds at this location");
  std::size_t i = 0;
  for (int z = 0; z < s.sz; ++z)
    for (int y = 0; y < s.sy; ++y)
      for (int x = 0; x < s.sx; ++x, ++i)
        bg.at(x0 + x, y0 + y, z0 + z) += sign * s.values[i];
}

void embed_signal(Volume& bg, const SignalProfile& s, const VoxelLoc& loc) {
  add_signal(bg, s, loc, 1.0);
}

void subtract_signal(Volume& bg, const SignalProfile& s, const VoxelLoc& loc) {
  add_signal(bg, s, loc, -1.0);
}

PlacementBounds placement_bounds(const SignalProfile& s, const VolumeGeometry& geom,
                                 int extra_margin_xy) {
  PlacementBounds b;
  b.lo = {s.hx() + extra_margin_xy, s.hy() + extra_margin_xy, s.hz()};
  b.hi = {geom.nx - 1 - s.hx() - extra_margin_xy, geom.ny - 1 - s.hy() - extra_margin_xy,
          geom.nz - 1 - s.hz()};
  if (b.hi.x < b.lo.x || b.hi.y < b.lo.y || b.hi.z < b.lo.z)
    throw std::invalid_argument("placement_bounds: no valid placement for this signal/geometry");
  return b;
}

VoxelLoc random_location(const PlacementBounds& b, Rng& rng) {
  VoxelLoc loc;
  loc.x = b.lo.x + static_cast<int>(rng.uniform_index(b.hi.x - b.lo.x + 1));
  loc.y = b.lo.y + static_cast<int>(rng.uniform_index(b.hi.y - b.lo.y + 1));
  loc.z = b.lo.z + static_cast<int>(rng.uniform_index(b.hi.z - b.lo.z + 1));
  return loc;
}

TrialStimulus extract_2d_slice(const TrialStimulus& stim) {
  const auto& g = stim.volume.geom;
  const int z = stim.present ? stim.location->z : g.nz / 2;
  TrialStimulus out;
  out.spec = stim.spec;
  out.present = stim.present;
  VolumeGeometry g2 = g;
  g2.nz = 1;
  out.volume = Volume(g2);
  std::copy(stim.volume.slice(z), stim.volume.slice(z) + static_cast<std::size_t>(g.nx) * g.ny,
            out.volume.voxels.begin());
  if (stim.present) out.location = VoxelLoc{stim.location->x, stim.location->y, 0};
  return out;
}

void write_volume(const std::string& path, const Volume& vol, const NoiseSpec& spec) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_volume: cannot open " + path);
  std::vector<float> buf(vol.voxels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(vol.voxels[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  json meta = {
      {"dims", {vol.geom.nx, vol.geom.ny, vol.geom.nz}},
      {"pitch_dva", vol.geom.pitch_dva},
      {"noise",
       {{"exponent", spec.exponent},
        {"mean", spec.mean},
        {"sigma", spec.sigma},
        {"seed", spec.seed},
        {"sigma_renormalized", spec.renormalize_sigma}}},
  };
  std::ofstream mf(path + ".json");
  mf << meta.dump(2) << "\n";
}

Volume read_volume(const std::string& path) {
  std::ifstream mf(path + ".json");
  if (!mf) throw std::runtime_error("read_volume: missing sidecar " + path + ".json");
  json meta = json::parse(mf);
  VolumeGeometry g;
  g.nx = meta["dims"][0];
  g.ny = meta["dims"][1];
  g.nz = meta["dims"][2];
  g.pitch_dva = meta["pitch_dva"];
  Volume vol(g);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_volume: cannot open " + path);
  std::vector<float> buf(vol.voxels.size());
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<std::size_t>(f.gcount()) != buf.size() * sizeof(float))
    throw std::runtime_error("read_volume: truncated file " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) vol.voxels[i] = buf[i];
  return vol;
}

}  // namespace fovsim
