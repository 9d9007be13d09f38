#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "fovsim/channels.hpp"

using namespace fovsim;

namespace {

constexpr double kPitch = 0.13 / 6.0;

std::vector<double> gaussian_patch(int side, double sigma_px) {
  std::vector<double> p(static_cast<std::size_t>(side) * side);
  const int h = side / 2;
  std::size_t i = 0;
  for (int y = -h; y <= h; ++y)
    for (int x = -h; x <= h; ++x, ++i)
      p[i] = std::exp(-0.5 * (x * x + y * y) / (sigma_px * sigma_px));
  return p;
}

double channel_norm(const ChannelBank& bank, int c) {
  double acc = 0.0;
  for (std::size_t i = 0; i < bank.patch_pixels(); ++i) acc += bank.channel(c)[i] * bank.channel(c)[i];
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("frequency presets match the published sets") {
  CHECK(fcho_frequencies_cpd() == std::vector<double>{32, 16, 8, 4, 2, 1});
  CHECK(cho_frequencies_cpd() == std::vector<double>{0.5, 1, 2, 4, 8, 16});
}

TEST_CASE("nyquist filter drops the 32 cpd channel at default pitch") {
  // Nyquist at ~46 voxels/dva is ~23 cpd.
  const auto kept = drop_above_nyquist(fcho_frequencies_cpd(), kPitch);
  CHECK(kept == std::vector<double>{16, 8, 4, 2, 1});
}

TEST_CASE("6 frequencies x 8 orientations gives 48 channels") {
  const ChannelBank bank = gabor_bank({16, 8, 4, 2, 1, 0.5}, 8, kPitch);
  CHECK(bank.n_channels == 48);
  CHECK(bank.side % 2 == 1);
  for (int c = 0; c < bank.n_channels; ++c) CHECK(channel_norm(bank, c) > 0.0);
}

TEST_CASE("gabor construction rejects frequencies at or above Nyquist") {
  CHECK_THROWS_AS(gabor_bank({32.0}, 8, kPitch), std::domain_error);
}

TEST_CASE("isotropic stimulus drives all orientations equally") {
  const ChannelBank bank = gabor_bank({4.0}, 8, kPitch);
  const auto patch = gaussian_patch(bank.side, 4.0);
  const auto resp = channel_response(bank, patch);
  REQUIRE(resp.size() == 8);
  for (std::size_t i = 1; i < resp.size(); ++i)
    CHECK(resp[i] == doctest::Approx(resp[0]).epsilon(0.02));
}

TEST_CASE("laguerre-gauss default bank has 16 channels") {
  const ChannelBank bank = laguerre_gauss_bank_default(kPitch);
  CHECK(bank.n_channels == 16);
  CHECK(bank.family == ChannelBank::Family::laguerre_gauss);
}

TEST_CASE("laguerre-gauss order 0 is an analytic gaussian") {
  const ChannelBank bank = laguerre_gauss_bank({0}, {10.0}, kPitch);
  const int h = bank.side / 2;
  std::size_t i = 0;
  for (int y = -h; y <= h; ++y) {
    for (int x = -h; x <= h; ++x, ++i) {
      const double r2 = static_cast<double>(x) * x + static_cast<double>(y) * y;
      const double expect = std::sqrt(2.0) / 10.0 * std::exp(-M_PI * r2 / 100.0);
      CHECK(std::abs(bank.channel(0)[i] - expect) < 1e-10);
    }
  }
  // Decays toward zero at the patch corner (99%-energy crop leaves ~1%).
  CHECK(std::abs(bank.channel(0)[0]) < 0.02 * bank.channel(0)[i / 2]);
}

TEST_CASE("literal laguerre-gauss switch changes the width form") {
  const ChannelBank std_form = laguerre_gauss_bank({0}, {5.0}, kPitch, 127, false);
  const ChannelBank lit_form = laguerre_gauss_bank({0}, {5.0}, kPitch, 127, true);
  const std::size_t center_std = static_cast<std::size_t>(std_form.side / 2) * std_form.side + std_form.side / 2;
  const std::size_t center_lit = static_cast<std::size_t>(lit_form.side / 2) * lit_form.side + lit_form.side / 2;
  CHECK(std_form.channel(0)[center_std] == doctest::Approx(lit_form.channel(0)[center_lit]));
  // Off-center the decay differs (a^2 vs a in the exponent).
  CHECK(std_form.side != lit_form.side);
}

TEST_CASE("dog default bank has 10 bandpass channels") {
  const ChannelBank bank = dog_bank_default(kPitch);
  CHECK(bank.n_channels == 10);
  for (int n = 1; n <= 10; ++n) {
    // Zero gain at DC, a positive passband above it.
    CHECK(dog_radial_gain(0.0, n, 0.005, 1.4, 1.67) == 0.0);
    const double sn = 0.005 * std::pow(1.4, n);
    CHECK(dog_radial_gain(1.5 * sn, n, 0.005, 1.4, 1.67) > 0.0);
  }
}

TEST_CASE("dog gain forms agree only at DC") {
  const double f = 0.01;
  CHECK(dog_radial_gain(0.0, 3, 0.005, 1.4, 1.67, true) ==
        dog_radial_gain(0.0, 3, 0.005, 1.4, 1.67, false));
  CHECK(dog_radial_gain(f, 3, 0.005, 1.4, 1.67, true) !=
        dog_radial_gain(f, 3, 0.005, 1.4, 1.67, false));
}

TEST_CASE("eccentricity scaling follows 1 + alpha E^beta") {
  FoveationParams p;
  CHECK(p.scaling(0.0) == 1.0);
  CHECK(p.scaling(2.0) == doctest::Approx(1.0 + 0.7063 * std::pow(2.0, 1.6953)).epsilon(1e-12));
  CHECK(p.scaling(2.0) == doctest::Approx(3.288).epsilon(1e-3));
  for (double e = 0.5; e < 9.0; e += 0.5) CHECK(p.scaling(e + 0.5) > p.scaling(e));
}

TEST_CASE("scaled bank at E=0 is bit-identical to the foveal bank") {
  FoveationParams p;
  const std::vector<double> freqs = {16, 8, 4, 2, 1};
  const ChannelBank foveal = gabor_bank(freqs, 8, kPitch);
  const ChannelBank scaled = scaled_gabor_bank(freqs, 8, 0.0, p, kPitch);
  CHECK(scaled.side == foveal.side);
  CHECK(scaled.profiles == foveal.profiles);
  CHECK(scaled.center_freq_cpd == foveal.center_freq_cpd);
}

TEST_CASE("scaled bank divides every center frequency by the scaling") {
  FoveationParams p;
  const std::vector<double> freqs = {16, 8, 4, 2, 1};
  const ChannelBank scaled = scaled_gabor_bank(freqs, 8, 2.0, p, kPitch);
  const double s = p.scaling(2.0);
  for (int c = 0; c < scaled.n_channels; ++c) {
    const double base = freqs[static_cast<std::size_t>(c) / 8];
    CHECK(scaled.center_freq_cpd[c] == base / s);
  }
  // 8 cpd lands near 2.43 cpd at E=2.
  CHECK(8.0 / s == doctest::Approx(2.43).epsilon(2e-3));
}

TEST_CASE("channel_response is linear and rejects shape mismatches") {
  const ChannelBank bank = gabor_bank({4.0, 2.0}, 4, kPitch);
  const auto a = gaussian_patch(bank.side, 3.0);
  const auto b = gaussian_patch(bank.side, 6.0);
  std::vector<double> combo(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) combo[i] = 2.0 * a[i] - 0.5 * b[i];

  const auto ra = channel_response(bank, a);
  const auto rb = channel_response(bank, b);
  const auto rc = channel_response(bank, combo);
  for (std::size_t i = 0; i < rc.size(); ++i)
    CHECK(rc[i] == doctest::Approx(2.0 * ra[i] - 0.5 * rb[i]).epsilon(1e-12));

  const std::vector<double> zero(a.size(), 0.0);
  for (const double r : channel_response(bank, zero)) CHECK(r == 0.0);

  CHECK_THROWS_AS(channel_response(bank, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("a channel correlates best with itself among unit-norm channels") {
  const ChannelBank bank = gabor_bank({8.0, 4.0, 2.0}, 8, kPitch);
  for (const int k : {0, 5, 13, 23}) {
    std::vector<double> patch(bank.channel(k), bank.channel(k) + bank.patch_pixels());
    const double nk = channel_norm(bank, k);
    const auto resp = channel_response(bank, patch);
    double best = -1.0;
    int best_i = -1;
    for (int c = 0; c < bank.n_channels; ++c) {
      const double normalized = resp[c] / (channel_norm(bank, c) * nk);
      if (normalized > best) {
        best = normalized;
        best_i = c;
      }
    }
    CHECK(best_i == k);
    CHECK(best == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("bank export round-trips") {
  const ChannelBank bank = gabor_bank({4.0, 2.0}, 4, kPitch);
  const std::string path = "test_bank_roundtrip";
  write_bank(path, bank);
  const ChannelBank back = read_bank(path);
  CHECK(back.family == bank.family);
  CHECK(back.side == bank.side);
  CHECK(back.n_channels == bank.n_channels);
  CHECK(back.center_freq_cpd.size() == bank.center_freq_cpd.size());
  REQUIRE(back.profiles.size() == bank.profiles.size());
  for (std::size_t i = 0; i < bank.profiles.size(); ++i)
    CHECK(back.profiles[i] == doctest::Approx(bank.profiles[i]).epsilon(1e-6));
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}
