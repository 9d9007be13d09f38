#include "fovsim/foveation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fovsim/kernels.hpp"
#include "fovsim/rng.hpp"
#include "fovsim/stats.hpp"

namespace fovsim {

int EccentricityLadder::band_index(double eccentricity_dva) const {
  const int b = static_cast<int>(std::lround(eccentricity_dva));
  return std::clamp(b, 0, static_cast<int>(bands.size()) - 1);
}

EccentricityLadder build_ladder(const SignalSpec& signal, const NoiseSpec& noise,
                                const VolumeGeometry& geom, const FoveationParams& params,
                                int n_bands, int n_slices, int max_side) {
  params.validate();
  // Channel patches must embed in the in-plane grid.
  const int cap = std::min(geom.nx, geom.ny) / 2;
  max_side = std::min(max_side, cap % 2 == 0 ? cap - 1 : cap);
  EccentricityLadder ladder;
  ladder.params = params;
  ladder.geom = geom;
  ladder.noise = noise;
  ladder.signal = signal;
  const SignalProfile profile = make_signal_profile(signal, geom, noise.mean);
  const std::vector<double> base = drop_above_nyquist(fcho_frequencies_cpd(), geom.pitch_dva);
  ladder.bands.reserve(n_bands);
  for (int e = 0; e < n_bands; ++e) {
    BandTemplate band;
    band.eccentricity_dva = static_cast<double>(e);
    band.bank = scaled_gabor_bank(base, 8, band.eccentricity_dva, params, geom.pitch_dva, max_side);
    band.tmpl = cho_template(band.bank, noise, geom, profile, n_slices, ObserverKind::fcho);
    band.stats = response_stats(band.tmpl, profile, noise, geom, params.internal_noise_gain);
    band.sigma_raw = response_stats(band.tmpl, profile, noise, geom, 0.0).sigma;
    ladder.bands.push_back(std::move(band));
  }
  return ladder;
}

std::vector<EccCurvePoint> dprime_vs_eccentricity(const EccentricityLadder& ladder, int trials,
                                                  std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("dprime_vs_eccentricity: need >= 100 trials/point");
  const auto& geom = ladder.geom;
  const SignalProfile profile = make_signal_profile(ladder.signal, geom, ladder.noise.mean);
  const double k_int = ladder.params.internal_noise_gain;
  std::vector<EccCurvePoint> curve;
  for (std::size_t b = 0; b < ladder.bands.size(); ++b) {
    const BandTemplate& band = ladder.bands[b];
    EccCurvePoint pt;
    pt.eccentricity_dva = band.eccentricity_dva;
    pt.dprime_analytic = band.stats.dprime();

    // Yes/no Monte-Carlo at the cued center voxel, midpoint criterion.
    const double criterion = 0.5 * (band.stats.mu_plus + band.stats.mu_minus);
    const int side = band.tmpl.side;
    const VoxelLoc center{geom.nx / 2, geom.ny / 2, geom.nz / 2};
    Rng rng = Rng::substream(seed, "ecc_mc", b);
    int hits = 0, misses = 0, fas = 0, crs = 0;
    for (int t = 0; t < trials; ++t) {
      NoiseSpec ns = ladder.noise;
      ns.seed = rng.next_u64();
      Volume vol = generate_noise_volume(ns, geom);
      const bool present = rng.uniform() < 0.5;
      if (present) embed_signal(vol, profile, center);
      // Template response at the cue (central slice kernel stack).
      double lambda = 0.0;
      for (int n = 0; n < band.tmpl.n_slices; ++n) {
        const int z = center.z + n - band.tmpl.n_slices / 2;
        if (z < 0 || z >= geom.nz) continue;
        const double* kern = band.tmpl.slice_kernel(n);
        const int h = side / 2;
        for (int y = 0; y < side; ++y)
          for (int x = 0; x < side; ++x)
            lambda += kern[static_cast<std::size_t>(y) * side + x] *
                      (vol.at(center.x + x - h, center.y + y - h, z) - ns.mean);
      }
      lambda += rng.normal(0.0, k_int * band.sigma_raw);
      const bool yes = lambda > criterion;
      if (present && yes) ++hits;
      else if (present) ++misses;
      else if (yes) ++fas;
      else ++crs;
    }
    pt.dprime_mc = dprime_yesno(hits, misses, fas, crs);
    const int np = hits + misses, na = fas + crs;
    const double hr = std::clamp(static_cast<double>(hits) / std::max(np, 1), 0.01, 0.99);
    const double far = std::clamp(static_cast<double>(fas) / std::max(na, 1), 0.01, 0.99);
    // Delta-method SE of z(HR) - z(FAR).
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979); };
    const double se_h = std::sqrt(hr * (1 - hr) / std::max(np, 1)) / phi(normal_quantile(hr));
    const double se_f = std::sqrt(far * (1 - far) / std::max(na, 1)) / phi(normal_quantile(far));
    pt.dprime_mc_se = std::sqrt(se_h * se_h + se_f * se_f);
    curve.push_back(pt);
  }
  return curve;
}

EccentricityDataset read_ecc_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_ecc_dataset: cannot open " + path);
  EccentricityDataset data;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line.rfind("signal", 0) == 0) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw std::runtime_error("read_ecc_dataset: malformed row at line " + std::to_string(lineno));
    EccConditionData c;
    c.signal = signal_kind_from_string(fields[0]);
    c.eccentricity_dva = std::stod(fields[1]);
    const int n_trials = std::stoi(fields[2]);
    c.n_hits = std::stoi(fields[3]);
    c.n_fa = std::stoi(fields[4]);
    c.n_present = std::stoi(fields[5]);
    c.n_absent = std::stoi(fields[6]);
    if (c.n_present + c.n_absent != n_trials)
      throw std::runtime_error("read_ecc_dataset: trial counts inconsistent at line " +
                               std::to_string(lineno));
    if (c.n_present <= 0 || c.n_absent <= 0 || c.n_hits > c.n_present || c.n_fa > c.n_absent)
      throw std::runtime_error("read_ecc_dataset: counts out of range at line " +
                               std::to_string(lineno));
    data.conditions.push_back(c);
  }
  return data;
}

void write_ecc_dataset(const std::string& path, const EccentricityDataset& data) {
  std::ofstream f(path);
  f << "signal,eccentricity_dva,n_trials,n_hits,n_fa,n_present,n_absent\n";
  for (const auto& c : data.conditions)
    f << to_string(c.signal) << "," << c.eccentricity_dva << "," << (c.n_present + c.n_absent)
      << "," << c.n_hits << "," << c.n_fa << "," << c.n_present << "," << c.n_absent << "\n";
}

FovealDetectabilityModel::FovealDetectabilityModel(const SignalSpec& signal,
                                                   const NoiseSpec& noise,
                                                   const VolumeGeometry& geom, int n_slices,
                                                   int grid_points, double max_scaling,
                                                   int max_side) {
  const SignalProfile profile = make_signal_profile(signal, geom, noise.mean);
  const std::vector<double> base = drop_above_nyquist(fcho_frequencies_cpd(), geom.pitch_dva);
  const int cap = std::min(geom.nx, geom.ny) / 2;
  max_side = std::min(max_side, cap % 2 == 0 ? cap - 1 : cap);
  log_scalings_.resize(grid_points);
  dprimes_.resize(grid_points);
  const double lmax = std::log(max_scaling);
  for (int i = 0; i < grid_points; ++i) {
    const double ls = lmax * i / (grid_points - 1);
    log_scalings_[i] = ls;
    std::vector<double> freqs = base;
    for (auto& f : freqs) f /= std::exp(ls);
    const ChannelBank bank = gabor_bank(freqs, 8, geom.pitch_dva, max_side);
    const Template tmpl = cho_template(bank, noise, geom, profile, n_slices, ObserverKind::fcho);
    dprimes_[i] = analytic_dprime(tmpl, profile, noise, geom, 0.0);
  }
}

double FovealDetectabilityModel::dprime_raw(double scaling) const {
  const double ls = std::log(std::max(scaling, 1.0));
  if (ls <= log_scalings_.front()) return dprimes_.front();
  if (ls >= log_scalings_.back()) return dprimes_.back();
  const auto it = std::upper_bound(log_scalings_.begin(), log_scalings_.end(), ls);
  const std::size_t i = static_cast<std::size_t>(it - log_scalings_.begin());
  const double t = (ls - log_scalings_[i - 1]) / (log_scalings_[i] - log_scalings_[i - 1]);
  return dprimes_[i - 1] + t * (dprimes_[i] - dprimes_[i - 1]);
}

YesNoRates yes_no_rates(double dprime, double criterion) {
  return {normal_cdf(dprime - criterion), normal_cdf(-criterion)};
}

namespace {

double binomial_loglik(int k, int n, double p) {
  const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return k * std::log(pc) + (n - k) * std::log(1.0 - pc);
}

// Profile log-likelihood of one condition: criterion maximized by golden
// section (the objective is concave in the criterion).
double condition_loglik(const EccConditionData& c, double dprime) {
  auto ll = [&](double t) {
    const YesNoRates r = yes_no_rates(dprime, t);
    return binomial_loglik(c.n_hits, c.n_present, r.hit) +
           binomial_loglik(c.n_fa, c.n_absent, r.fa);
  };
  const double gr = 0.61803398874989484820;
  double a = -8.0, b = dprime + 8.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = ll(x1), f2 = ll(x2);
  for (int i = 0; i < 80; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = ll(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = ll(x1);
    }
  }
  return std::max(f1, f2);
}

struct Simplex {
  // Nelder-Mead minimization; returns best point and value.
  static std::pair<std::vector<double>, double> minimize(
      const std::function<double(const std::vector<double>&)>& fn, std::vector<double> x0,
      double step, int max_evals, int* evals_used) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    int evals = 0;
    for (std::size_t i = 1; i <= n; ++i) pts[i][i - 1] += step;
    for (std::size_t i = 0; i <= n; ++i) {
      vals[i] = fn(pts[i]);
      ++evals;
    }
    while (evals < max_evals) {
      // Order: best first.
      std::vector<std::size_t> order(n + 1);
      for (std::size_t i = 0; i <= n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
      if (vals[order[n]] - vals[order[0]] < 1e-10) break;
      std::vector<double> centroid(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[order[i]][d] / n;
      auto mix = [&](double coef) {
        std::vector<double> p(n);
        for (std::size_t d = 0; d < n; ++d)
          p[d] = centroid[d] + coef * (pts[order[n]][d] - centroid[d]);
        return p;
      };
      const auto refl = mix(-1.0);
      const double frefl = fn(refl);
      ++evals;
      if (frefl < vals[order[0]]) {
        const auto exp_pt = mix(-2.0);
        const double fexp = fn(exp_pt);
        ++evals;
        if (fexp < frefl) {
          pts[order[n]] = exp_pt;
          vals[order[n]] = fexp;
        } else {
          pts[order[n]] = refl;
          vals[order[n]] = frefl;
        }
      } else if (frefl < vals[order[n - 1]]) {
        pts[order[n]] = refl;
        vals[order[n]] = frefl;
      } else {
        const auto con = mix(0.5);
        const double fcon = fn(con);
        ++evals;
        if (fcon < vals[order[n]]) {
          pts[order[n]] = con;
          vals[order[n]] = fcon;
        } else {
          for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t d = 0; d < n; ++d)
              pts[order[i]][d] = 0.5 * (pts[order[i]][d] + pts[order[0]][d]);
            vals[order[i]] = fn(pts[order[i]]);
            ++evals;
          }
        }
      }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
      if (vals[i] < vals[best]) best = i;
    if (evals_used) *evals_used = evals;
    return {pts[best], vals[best]};
  }
};

}  // namespace

FitResult fit_foveation_params(
    const EccentricityDataset& data,
    const std::function<double(SignalKind, double)>& dprime_raw_fn, int max_evaluations) {
  if (data.conditions.size() < 3)
    throw std::invalid_argument("fit_foveation_params: need >= 3 conditions");

  // Parameters in log space keep alpha, beta, K nonnegative.
  auto neg_ll = [&](const std::vector<double>& u) {
    FoveationParams p;
    p.alpha = std::exp(u[0]);
    p.beta = std::exp(u[1]);
    p.internal_noise_gain = std::exp(u[2]);
    const double inflate = std::sqrt(1.0 + p.internal_noise_gain * p.internal_noise_gain);
    double ll = 0.0;
    for (const auto& c : data.conditions) {
      const double d = dprime_raw_fn(c.signal, p.scaling(c.eccentricity_dva)) / inflate;
      ll += condition_loglik(c, d);
    }
    return -ll;
  };

  const std::vector<std::vector<double>> starts = {
      {std::log(0.7063), std::log(1.6953), std::log(2.7813)},
      {std::log(0.3), std::log(1.0), std::log(1.0)},
      {std::log(1.5), std::log(2.5), std::log(5.0)},
  };
  FitResult best;
  best.log_likelihood = -1e300;
  int total_evals = 0;
  for (const auto& s : starts) {
    int used = 0;
    const auto [u, f] =
        Simplex::minimize(neg_ll, s, 0.4, max_evaluations / static_cast<int>(starts.size()), &used);
    total_evals += used;
    if (-f > best.log_likelihood) {
      best.log_likelihood = -f;
      best.params.alpha = std::exp(u[0]);
      best.params.beta = std::exp(u[1]);
      best.params.internal_noise_gain = std::exp(u[2]);
      best.converged = used < max_evaluations / static_cast<int>(starts.size());
    }
  }
  best.evaluations = total_evals;
  return best;
}

FitResult fit_foveation_params(const EccentricityDataset& data, const NoiseSpec& noise,
                               const VolumeGeometry& geom, double contrast, int max_evaluations) {
  const FovealDetectabilityModel mcalc(SignalSpec::microcalc(contrast), noise, geom, 1);
  const FovealDetectabilityModel mass(SignalSpec::mass(contrast), noise, geom, 1);
  return fit_foveation_params(
      data,
      [&](SignalKind kind, double scaling) {
        return kind == SignalKind::microcalcification ? mcalc.dprime_raw(scaling)
                                                      : mass.dprime_raw(scaling);
      },
      max_evaluations);
}

EccentricityDataset synthesize_ecc_dataset(
    const std::function<double(SignalKind, double)>& dprime_raw_fn, const FoveationParams& truth,
    const std::vector<double>& eccentricities, int trials_per_point, std::uint64_t seed,
    double criterion) {
  Rng rng(seed);
  const double inflate =
      std::sqrt(1.0 + truth.internal_noise_gain * truth.internal_noise_gain);
  EccentricityDataset data;
  for (const SignalKind kind : {SignalKind::microcalcification, SignalKind::mass}) {
    for (const double e : eccentricities) {
      const double d = dprime_raw_fn(kind, truth.scaling(e)) / inflate;
      const YesNoRates r = yes_no_rates(d, criterion + d / 2.0);
      EccConditionData c;
      c.signal = kind;
      c.eccentricity_dva = e;
      c.n_present = trials_per_point / 2;
      c.n_absent = trials_per_point - c.n_present;
      for (int t = 0; t < c.n_present; ++t)
        if (rng.uniform() < r.hit) ++c.n_hits;
      for (int t = 0; t < c.n_absent; ++t)
        if (rng.uniform() < r.fa) ++c.n_fa;
      data.conditions.push_back(c);
    }
  }
  return data;
}

}  // namespace fovsim
