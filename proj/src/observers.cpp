#include "fovsim/observers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fovsim/kernels.hpp"
#include "fovsim/rng.hpp"

namespace fovsim {

using json = nlohmann::json;

std::string to_string(ObserverKind kind) {
  switch (kind) {
    case ObserverKind::io: return "io";
    case ObserverKind::npw: return "npw";
    case ObserverKind::npwe: return "npwe";
    case ObserverKind::cho_gabor: return "cho_gabor";
    case ObserverKind::cho_lg: return "cho_lg";
    case ObserverKind::cho_dog: return "cho_dog";
    case ObserverKind::fcho: return "fcho";
  }
  return "unknown";
}

ObserverKind observer_kind_from_string(const std::string& s) {
  if (s == "io") return ObserverKind::io;
  if (s == "npw") return ObserverKind::npw;
  if (s == "npwe") return ObserverKind::npwe;
  if (s == "cho_gabor" || s == "cho") return ObserverKind::cho_gabor;
  if (s == "cho_lg") return ObserverKind::cho_lg;
  if (s == "cho_dog") return ObserverKind::cho_dog;
  if (s == "fcho") return ObserverKind::fcho;
  throw std::invalid_argument("unknown observer kind: " + s);
}

namespace {

// Embeds a centered kernel stack into the full grid, center wrapped to the
// origin, so that IFFT(conj(W) G) is the cross-correlation with the kernel
// centered on each voxel.
std::vector<double> embed_wrapped(const double* data, int sx, int sy, int sz,
                                  const VolumeGeometry& g) {
  if (sx > g.nx || sy > g.ny || sz > g.nz)
    throw std::invalid_argument("template/signal support exceeds the volume");
  std::vector<double> out(g.voxel_count(), 0.0);
  const int hx = sx / 2, hy = sy / 2, hz = sz / 2;
  std::size_t i = 0;
  for (int z = 0; z < sz; ++z) {
    const int wz = ((z - hz) % g.nz + g.nz) % g.nz;
    for (int y = 0; y < sy; ++y) {
      const int wy = ((y - hy) % g.ny + g.ny) % g.ny;
      for (int x = 0; x < sx; ++x, ++i) {
        const int wx = ((x - hx) % g.nx + g.nx) % g.nx;
        out[g.index(wx, wy, wz)] = data[i];
      }
    }
  }
  return out;
}

fft::cvec fft_embedded(const std::vector<double>& field, const VolumeGeometry& g) {
  return g.nz > 1 ? fft::fft3_real(g.nx, g.ny, g.nz, field.data())
                  : fft::fft2_real(g.nx, g.ny, field.data());
}

fft::cvec signal_spectrum(const SignalProfile& s, const VolumeGeometry& g) {
  return fft_embedded(embed_wrapped(s.values.data(), s.sx, s.sy, s.sz, g), g);
}

fft::cvec template_spectrum(const Template& t, const VolumeGeometry& g) {
  if (t.spectral) {
    if (!(t.spectral_geom == g))
      throw std::invalid_argument("spectral template geometry does not match the volume");
    return t.freq_response;
  }
  return fft_embedded(embed_wrapped(t.slices.data(), t.side, t.side, t.n_slices, g), g);
}

// Smallest odd crop side holding >= 99.9% of the wrapped kernel's energy.
int wrapped_energy_side(const std::vector<double>& kernel, int nx, int ny, int cap) {
  const int h_max = std::min({nx / 2, ny / 2, cap / 2});
  std::vector<double> ring(h_max + 1, 0.0);
  double total = 0.0;
  for (int y = 0; y < ny; ++y) {
    const int dy = std::abs(fft::freq_index(y, ny));
    for (int x = 0; x < nx; ++x) {
      const int dx = std::abs(fft::freq_index(x, nx));
      const double e = kernel[static_cast<std::size_t>(y) * nx + x];
      const int m = std::max(dx, dy);
      total += e * e;
      if (m <= h_max) ring[m] += e * e;
    }
  }
  double acc = 0.0;
  for (int m = 0; m <= h_max; ++m) {
    acc += ring[m];
    if (acc >= 0.999 * total) return 2 * m + 1;
  }
  return 2 * h_max + 1;
}

// Crops a wrapped full-grid kernel to a centered side^2 patch.
std::vector<double> crop_wrapped(const std::vector<double>& kernel, int nx, int ny, int side) {
  std::vector<double> out(static_cast<std::size_t>(side) * side);
  const int h = side / 2;
  std::size_t i = 0;
  for (int y = -h; y <= h; ++y) {
    const int wy = (y % ny + ny) % ny;
    for (int x = -h; x <= h; ++x, ++i) {
      const int wx = (x % nx + nx) % nx;
      out[i] = kernel[static_cast<std::size_t>(wy) * nx + wx];
    }
  }
  return out;
}

// Signal slice (z offset from center) as a centered side^2 patch.
std::vector<double> signal_slice_patch(const SignalProfile& s, int dz, int side) {
  std::vector<double> patch(static_cast<std::size_t>(side) * side, 0.0);
  const int z = s.hz() + dz;
  if (z < 0 || z >= s.sz) return patch;
  const int h = side / 2;
  for (int y = 0; y < s.sy; ++y) {
    const int py = y - s.hy() + h;
    if (py < 0 || py >= side) continue;
    for (int x = 0; x < s.sx; ++x) {
      const int px = x - s.hx() + h;
      if (px < 0 || px >= side) continue;
      patch[static_cast<std::size_t>(py) * side + px] = s.at(x, y, z);
    }
  }
  return patch;
}

}  // namespace

std::vector<double> slice_power_spectrum(const NoiseSpec& spec, const VolumeGeometry& geom) {
  const std::vector<double> s3 = noise_power_spectrum(spec, geom);
  const std::size_t n2 = static_cast<std::size_t>(geom.nx) * geom.ny;
  std::vector<double> s2(n2, 0.0);
  for (int z = 0; z < geom.nz; ++z)
    for (std::size_t i = 0; i < n2; ++i) s2[i] += s3[static_cast<std::size_t>(z) * n2 + i];
  for (auto& v : s2) v /= static_cast<double>(geom.nz);
  return s2;
}

Template io_template(const NoiseSpec& spec, const VolumeGeometry& geom, const SignalProfile& s) {
  const std::vector<double> spectrum = noise_power_spectrum(spec, geom);
  fft::cvec shat = signal_spectrum(s, geom);
  double smax = 0.0;
  for (const double v : spectrum) smax = std::max(smax, v);
  const double floor = 1e-12 * smax;
  Template t;
  t.kind = ObserverKind::io;
  t.spectral = true;
  t.spectral_geom = geom;
  t.freq_response.resize(shat.size());
  for (std::size_t i = 0; i < shat.size(); ++i) {
    if (spectrum[i] <= 0.0) {
      t.freq_response[i] = 0.0;  // DC: excluded (the mean carries no noise)
    } else {
      t.freq_response[i] = shat[i] / std::max(spectrum[i], floor);
    }
  }
  return t;
}

Template npw_template(const SignalProfile& s, int n_slices) {
  if (n_slices % 2 == 0) ++n_slices;
  Template t;
  t.kind = ObserverKind::npw;
  t.side = s.sx;
  t.n_slices = s.sz > 1 ? n_slices : 1;
  t.slices.assign(static_cast<std::size_t>(t.n_slices) * t.side * t.side, 0.0);
  for (int n = 0; n < t.n_slices; ++n) {
    const int dz = n - t.n_slices / 2;
    const auto patch = signal_slice_patch(s, dz, t.side);
    std::copy(patch.begin(), patch.end(),
              t.slices.begin() + static_cast<std::size_t>(n) * t.side * t.side);
  }
  return t;
}

double eye_filter_gain(double rho, double alpha, double beta, double gamma) {
  return std::pow(rho, alpha) * std::exp(-beta * std::pow(rho, gamma));
}

Template npwe_template(const SignalProfile& s, const VolumeGeometry& geom, int n_slices) {
  if (n_slices % 2 == 0) ++n_slices;
  const int nx = geom.nx, ny = geom.ny;
  const int slices = s.sz > 1 ? n_slices : 1;

  // Per-slice filtered kernels on the full in-plane grid first, then a shared
  // crop side from their energy support.
  std::vector<std::vector<double>> full(slices);
  for (int n = 0; n < slices; ++n) {
    const int dz = n - slices / 2;
    const auto patch = signal_slice_patch(s, dz, s.sx);
    const auto embedded = embed_wrapped(patch.data(), s.sx, s.sx, 1, {nx, ny, 1, geom.pitch_dva});
    fft::cvec spec = fft::fft2_real(nx, ny, embedded.data());
    // The eye filter is evaluated on the integer frequency-index grid, the
    // same radial axis the noise power spectrum is defined on.
    std::size_t i = 0;
    for (int ky = 0; ky < ny; ++ky) {
      const double fy = fft::freq_index(ky, ny);
      for (int kx = 0; kx < nx; ++kx, ++i) {
        const double fx = fft::freq_index(kx, nx);
        const double xi = eye_filter_gain(std::sqrt(fx * fx + fy * fy));
        spec[i] *= xi * xi;
      }
    }
    full[n] = fft::ifft2_to_real(nx, ny, spec);
  }
  int side = 1;
  for (const auto& k : full) side = std::max(side, wrapped_energy_side(k, nx, ny, 127));
  Template t;
  t.kind = ObserverKind::npwe;
  t.side = side;
  t.n_slices = slices;
  t.slices.reserve(static_cast<std::size_t>(slices) * side * side);
  for (const auto& k : full) {
    const auto cropped = crop_wrapped(k, nx, ny, side);
    t.slices.insert(t.slices.end(), cropped.begin(), cropped.end());
  }
  return t;
}

std::vector<double> channel_covariance(const ChannelBank& bank, const NoiseSpec& spec,
                                       const VolumeGeometry& geom) {
  const std::vector<double> s2 = slice_power_spectrum(spec, geom);
  const VolumeGeometry plane{geom.nx, geom.ny, 1, geom.pitch_dva};
  const std::size_t n2 = s2.size();
  const int nc = bank.n_channels;
  std::vector<fft::cvec> spectra(nc);
  for (int c = 0; c < nc; ++c) {
    const auto e = embed_wrapped(bank.channel(c), bank.side, bank.side, 1, plane);
    spectra[c] = fft::fft2_real(geom.nx, geom.ny, e.data());
  }
  std::vector<double> kv(static_cast<std::size_t>(nc) * nc);
  for (int i = 0; i < nc; ++i) {
    for (int j = i; j < nc; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n2; ++k)
        acc += s2[k] * (spectra[i][k].real() * spectra[j][k].real() +
                        spectra[i][k].imag() * spectra[j][k].imag());
      acc /= static_cast<double>(n2);
      kv[static_cast<std::size_t>(i) * nc + j] = acc;
      kv[static_cast<std::size_t>(j) * nc + i] = acc;
    }
  }
  return kv;
}

std::vector<double> channel_covariance_sampled(const ChannelBank& bank, const NoiseSpec& spec,
                                               const VolumeGeometry& geom, int n_patches,
                                               std::uint64_t seed) {
  const int nc = bank.n_channels;
  const int side = bank.side;
  Rng rng(seed);
  std::vector<double> mean(nc, 0.0);
  std::vector<double> acc(static_cast<std::size_t>(nc) * nc, 0.0);
  std::vector<double> patch(static_cast<std::size_t>(side) * side);
  std::vector<double> resp(nc);

  int done = 0;
  std::uint64_t vol_counter = 0;
  while (done < n_patches) {
    NoiseSpec vs = spec;
    vs.seed = seed ^ (0x9e3779b97f4a7c15ULL * ++vol_counter);
    const Volume vol = generate_noise_volume(vs, geom);
    const int patches_per_vol = std::max(1, std::min(n_patches - done, 4 * geom.nz));
    for (int p = 0; p < patches_per_vol && done < n_patches; ++p, ++done) {
      const int z = static_cast<int>(rng.uniform_index(geom.nz));
      const int x0 = static_cast<int>(rng.uniform_index(geom.nx - side + 1));
      const int y0 = static_cast<int>(rng.uniform_index(geom.ny - side + 1));
      const double* sl = vol.slice(z);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          patch[static_cast<std::size_t>(y) * side + x] =
              sl[static_cast<std::size_t>(y0 + y) * geom.nx + x0 + x] - spec.mean;
      for (int c = 0; c < nc; ++c)
        resp[c] = kernels::dot(bank.channel(c), patch.data(), patch.size());
      for (int i = 0; i < nc; ++i) {
        mean[i] += resp[i];
        for (int j = i; j < nc; ++j) acc[static_cast<std::size_t>(i) * nc + j] += resp[i] * resp[j];
      }
    }
  }
  std::vector<double> kv(static_cast<std::size_t>(nc) * nc);
  const double n = static_cast<double>(n_patches);
  for (int i = 0; i < nc; ++i)
    for (int j = i; j < nc; ++j) {
      const double c = acc[static_cast<std::size_t>(i) * nc + j] / n -
                       (mean[i] / n) * (mean[j] / n);
      kv[static_cast<std::size_t>(i) * nc + j] = c;
      kv[static_cast<std::size_t>(j) * nc + i] = c;
    }
  return kv;
}

std::vector<double> spd_solve(std::vector<double> a, std::vector<double> b, int n,
                              double* ridge_out) {
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += a[static_cast<std::size_t>(i) * n + i];
  double lambda = 0.0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<double> l = a;
    if (lambda > 0.0)
      for (int i = 0; i < n; ++i) l[static_cast<std::size_t>(i) * n + i] += lambda;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = 0; j <= i; ++j) {
        double sum = l[static_cast<std::size_t>(i) * n + j];
        for (int k = 0; k < j; ++k)
          sum -= l[static_cast<std::size_t>(i) * n + k] * l[static_cast<std::size_t>(j) * n + k];
        if (i == j) {
          if (sum <= 0.0) {
            ok = false;
            break;
          }
          l[static_cast<std::size_t>(i) * n + j] = std::sqrt(sum);
        } else {
          l[static_cast<std::size_t>(i) * n + j] = sum / l[static_cast<std::size_t>(j) * n + j];
        }
      }
    }
    if (ok) {
      // Forward then backward substitution.
      std::vector<double> y(n), x(n);
      for (int i = 0; i < n; ++i) {
        double sum = b[i];
        for (int k = 0; k < i; ++k) sum -= l[static_cast<std::size_t>(i) * n + k] * y[k];
        y[i] = sum / l[static_cast<std::size_t>(i) * n + i];
      }
      for (int i = n - 1; i >= 0; --i) {
        double sum = y[i];
        for (int k = i + 1; k < n; ++k) sum -= l[static_cast<std::size_t>(k) * n + i] * x[k];
        x[i] = sum / l[static_cast<std::size_t>(i) * n + i];
      }
      if (ridge_out) *ridge_out = lambda;
      return x;
    }
    lambda = (lambda == 0.0) ? 1e-12 * trace / n : lambda * 10.0;
  }
  throw std::runtime_error("spd_solve: matrix not positive definite even with ridge");
}

Template cho_template(const ChannelBank& bank, const NoiseSpec& spec, const VolumeGeometry& geom,
                      const SignalProfile& s, int n_slices, ObserverKind kind) {
  if (n_slices % 2 == 0) ++n_slices;
  const int nc = bank.n_channels;
  const int side = bank.side;
  const int slices = s.sz > 1 ? n_slices : 1;
  const std::vector<double> kv = channel_covariance(bank, spec, geom);

  Template t;
  t.kind = kind;
  t.side = side;
  t.n_slices = slices;
  t.slices.assign(static_cast<std::size_t>(slices) * side * side, 0.0);
  double ridge = 0.0;
  for (int n = 0; n < slices; ++n) {
    const int dz = n - slices / 2;
    const auto patch = signal_slice_patch(s, dz, side);
    std::vector<double> v(nc);
    for (int c = 0; c < nc; ++c) v[c] = kernels::dot(bank.channel(c), patch.data(), patch.size());
    double r = 0.0;
    const std::vector<double> coef = spd_solve(kv, v, nc, &r);
    ridge = std::max(ridge, r);
    double* w = t.slices.data() + static_cast<std::size_t>(n) * side * side;
    for (int c = 0; c < nc; ++c) kernels::axpy(coef[c], bank.channel(c), w, bank.patch_pixels());
  }
  t.ridge_lambda = ridge;
  return t;
}

ScanField scan_respond(const Template& tmpl, const Volume& vol, double noise_mean) {
  const auto& g = vol.geom;
  std::vector<double> centered(vol.voxels.size());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = vol.voxels[i] - noise_mean;
  fft::cvec gspec = fft_embedded(centered, g);
  const fft::cvec w = template_spectrum(tmpl, g);
  fft::cvec prod(gspec.size(), {0.0, 0.0});
  kernels::cmul_conj_acc(gspec.data(), w.data(), prod.data(), gspec.size());
  ScanField field;
  field.geom = g;
  field.values = g.nz > 1 ? fft::ifft3_to_real(g.nx, g.ny, g.nz, prod)
                          : fft::ifft2_to_real(g.nx, g.ny, prod);
  if (!tmpl.spectral) {
    field.margin_xy = tmpl.side / 2;
    field.margin_z = g.nz > 1 ? tmpl.n_slices / 2 : 0;
  }
  return field;
}

ResponseStats response_stats(const Template& tmpl, const SignalProfile& s, const NoiseSpec& spec,
                             const VolumeGeometry& geom, double internal_noise_gain) {
  const fft::cvec w = template_spectrum(tmpl, geom);
  const fft::cvec shat = signal_spectrum(s, geom);
  const std::vector<double> spectrum = noise_power_spectrum(spec, geom);
  const double n = static_cast<double>(w.size());
  double mu = 0.0, var = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    mu += w[i].real() * shat[i].real() + w[i].imag() * shat[i].imag();
    var += spectrum[i] * std::norm(w[i]);
  }
  mu /= n;
  var /= n;
  ResponseStats st;
  st.mu_plus = mu;
  st.mu_minus = 0.0;
  st.sigma = std::sqrt(var * (1.0 + internal_noise_gain * internal_noise_gain));
  if (!(st.sigma > 0.0)) throw std::runtime_error("response_stats: degenerate response variance");
  return st;
}

void loglr_field(ScanField& field, const ResponseStats& stats) {
  if (!(stats.sigma > 0.0)) throw std::invalid_argument("loglr_field: sigma must be > 0");
  const double a = (stats.mu_plus - stats.mu_minus) / (stats.sigma * stats.sigma);
  const double b = 0.5 * (stats.mu_plus + stats.mu_minus);
  for (auto& v : field.values) v = a * (v - b);
}

double analytic_dprime(const Template& tmpl, const SignalProfile& s, const NoiseSpec& spec,
                       const VolumeGeometry& geom, double internal_noise_gain) {
  return response_stats(tmpl, s, spec, geom, internal_noise_gain).dprime();
}

DecisionOutcome decide(const ScanField& loglr, ObserverKind kind, double log_threshold) {
  const auto& g = loglr.geom;
  double best = -std::numeric_limits<double>::infinity();
  VoxelLoc arg{};
  double lse_max = best;
  // First pass: max over the valid region.
  for (int z = loglr.margin_z; z < g.nz - loglr.margin_z; ++z)
    for (int y = loglr.margin_xy; y < g.ny - loglr.margin_xy; ++y)
      for (int x = loglr.margin_xy; x < g.nx - loglr.margin_xy; ++x) {
        const double v = loglr.values[g.index(x, y, z)];
        if (v > best) {
          best = v;
          arg = {x, y, z};
        }
      }
  if (!(best > -std::numeric_limits<double>::infinity()))
    throw std::invalid_argument("decide: empty valid region");
  DecisionOutcome out;
  out.argmax = arg;
  if (kind == ObserverKind::io) {
    lse_max = best;
    double acc = 0.0;
    for (int z = loglr.margin_z; z < g.nz - loglr.margin_z; ++z)
      for (int y = loglr.margin_xy; y < g.ny - loglr.margin_xy; ++y)
        for (int x = loglr.margin_xy; x < g.nx - loglr.margin_xy; ++x)
          acc += std::exp(loglr.values[g.index(x, y, z)] - lse_max);
    out.statistic = lse_max + std::log(acc);
  } else {
    out.statistic = best;
  }
  out.yes = out.statistic > log_threshold;
  return out;
}

void write_template(const std::string& path, const Template& tmpl) {
  json meta = {
      {"kind", to_string(tmpl.kind)},
      {"spectral", tmpl.spectral},
      {"side", tmpl.side},
      {"n_slices", tmpl.n_slices},
      {"ridge_lambda", tmpl.ridge_lambda},
  };
  std::ofstream mf(path + ".json");
  mf << meta.dump(2) << "\n";
  std::ofstream f(path, std::ios::binary);
  if (tmpl.spectral) {
    std::vector<float> buf;
    buf.reserve(tmpl.freq_response.size() * 2);
    for (const auto& c : tmpl.freq_response) {
      buf.push_back(static_cast<float>(c.real()));
      buf.push_back(static_cast<float>(c.imag()));
    }
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    std::vector<float> buf(tmpl.slices.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(tmpl.slices[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

}  // namespace fovsim
