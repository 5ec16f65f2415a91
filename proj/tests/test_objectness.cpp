#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>
#include <set>

#include "vsflab/objectness.hpp"
#include "vsflab/rng.hpp"

using namespace vsflab;

namespace {

GrayImage noisy_image(int w, int h, std::uint64_t seed, int lo = 100,
                      int hi = 140) {
  GrayImage img(w, h);
  Rng rng(seed);
  for (auto& p : img.px) p = static_cast<std::uint8_t>(rng.uniform_int(lo, hi));
  return img;
}

GrayImage square_scene(int w, int h, const BoxI& sq, std::uint8_t bg,
                       std::uint8_t fg) {
  GrayImage img(w, h, bg);
  for (int y = sq.y1; y < sq.y2; ++y)
    for (int x = sq.x1; x < sq.x2; ++x) img.at(y, x) = fg;
  return img;
}

}  // namespace

TEST_CASE("radix-2 transform oracles") {
  using C = std::complex<double>;
  std::vector<C> unit{C(1, 0), C(0, 0), C(0, 0), C(0, 0)};
  fft_radix2(unit, false);
  for (const C& v : unit) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }

  std::vector<C> flat{C(1, 0), C(1, 0), C(1, 0), C(1, 0)};
  fft_radix2(flat, false);
  CHECK(flat[0].real() == doctest::Approx(4.0));
  for (int k = 1; k < 4; ++k) CHECK(std::abs(flat[k]) < 1e-12);

  // Single oscillation lands in bin 1.
  std::vector<C> wave(8);
  for (int n = 0; n < 8; ++n)
    wave[n] = std::polar(1.0, 2.0 * std::acos(-1.0) * n / 8);
  auto spectrum = wave;
  fft_radix2(spectrum, false);
  CHECK(std::abs(spectrum[1]) == doctest::Approx(8.0));
  CHECK(std::abs(spectrum[0]) < 1e-12);
  CHECK(std::abs(spectrum[5]) < 1e-12);

  // Round trip restores the signal including the 1/n scaling.
  fft_radix2(spectrum, true);
  for (int n = 0; n < 8; ++n) {
    CHECK(spectrum[n].real() == doctest::Approx(wave[n].real()).epsilon(1e-12));
    CHECK(spectrum[n].imag() == doctest::Approx(wave[n].imag()).epsilon(1e-12));
  }

  std::vector<C> bad(6);
  CHECK_THROWS_AS(fft_radix2(bad, false), Error);
}

TEST_CASE("saliency is normalized and lifts an isolated anomaly") {
  GrayImage img(64, 64, 120);
  for (int y = 30; y < 34; ++y)
    for (int x = 40; x < 44; ++x) img.at(y, x) = 250;
  const Tensor sal = spectral_saliency(img);
  REQUIRE(sal.shape() == Shape({64, 64}));

  double peak = -1;
  for (std::int64_t i = 0; i < sal.size(); ++i) {
    CHECK(sal[i] >= 0.0);
    CHECK(sal[i] <= 1.0);
    peak = std::max(peak, sal[i]);
  }
  CHECK(peak == doctest::Approx(1.0));

  // Same input, same map.
  const Tensor again = spectral_saliency(img);
  for (std::int64_t i = 0; i < sal.size(); ++i) CHECK(again[i] == sal[i]);

  // The blob region outscores equally sized flat regions. (The whitened
  // spectrum also rings at blob-free locations, so only relative statements
  // about occupied-versus-flat windows are stable.)
  const double on_blob = ms_score(img, BoxI{38, 28, 46, 36});
  CHECK(on_blob > ms_score(img, BoxI{2, 2, 10, 10}));
  CHECK(on_blob > ms_score(img, BoxI{8, 40, 16, 48}));
}

TEST_CASE("segmentation separates two flat regions") {
  GrayImage img(32, 32, 50);
  for (int y = 0; y < 32; ++y)
    for (int x = 16; x < 32; ++x) img.at(y, x) = 200;

  // The pre-blur smears the tone boundary into thin transition bands; a
  // minimum size above the band area absorbs them into the two halves.
  const auto labels = felzenszwalb_segments(img, 100.0, 100);
  REQUIRE(labels.size() == 32u * 32);
  std::set<int> uniq(labels.begin(), labels.end());
  CHECK(uniq.size() == 2);
  CHECK(labels[0] == 0);  // compacted in scan order
  // Interior pixels land with their half regardless of row.
  CHECK(labels[16 * 32 + 2] == labels[0]);
  CHECK(labels[31 * 32 + 4] == labels[0]);
  CHECK(labels[16 * 32 + 30] != labels[0]);
  CHECK(labels[2 * 32 + 28] == labels[16 * 32 + 30]);

  // Same call, same labels.
  CHECK(felzenszwalb_segments(img, 100.0, 100) == labels);

  // A huge minimum size forces everything into one component.
  const auto merged = felzenszwalb_segments(img, 100.0, 32 * 32);
  CHECK(std::set<int>(merged.begin(), merged.end()).size() == 1);

  CHECK_THROWS_AS(felzenszwalb_segments(img, 0.0, 8), Error);
}

TEST_CASE("descriptor layout and degenerate inputs") {
  const GrayImage img = noisy_image(48, 48, 7, 0, 255);
  // 16x16 box = 2x2 cells = one block of 4 cells x 9 bins.
  const auto h = hog_descriptor(img, BoxI{8, 8, 24, 24});
  REQUIRE(h.size() == 36);
  const double norm =
      std::sqrt(std::inner_product(h.begin(), h.end(), h.begin(), 0.0));
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));

  // A flat box has no gradients anywhere.
  const GrayImage flat(32, 32, 128);
  const auto z = hog_descriptor(flat, BoxI{4, 4, 20, 20});
  for (double v : z) CHECK(v == 0.0);

  CHECK_THROWS_AS(hog_descriptor(img, BoxI{0, 0, 7, 7}), Error);
}

TEST_CASE("evidence scores rank a solid object above blank texture") {
  // A bright 12x12 square on a mid gray field with mild noise.
  GrayImage img = noisy_image(64, 64, 3, 118, 122);
  for (int y = 26; y < 38; ++y)
    for (int x = 26; x < 38; ++x)
      img.at(y, x) = static_cast<std::uint8_t>(220 + (x + y) % 3);

  const BoxI on{26, 26, 38, 38};
  const BoxI off{4, 4, 16, 16};  // same size, plain background
  const ObjectnessScores a = objectness_scores(img, on);
  const ObjectnessScores b = objectness_scores(img, off);

  for (double v : {a.ms, a.cc, a.ed, a.ss, b.ms, b.cc, b.ed, b.ss}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(a.ms > b.ms);
  CHECK(a.cc > b.cc);
  CHECK(a.ed > b.ed);
  CHECK(a.ss > b.ss);
  CHECK(a.hog.size() == b.hog.size());

  CHECK_THROWS_AS(objectness_scores(img, BoxI{-1, 0, 8, 8}), Error);
  CHECK_THROWS_AS(objectness_scores(img, BoxI{10, 10, 10, 18}), Error);
}

TEST_CASE("straddling rewards boxes aligned with whole segments") {
  // A 16x16 flat square segment on a flat field. A box that contains the
  // segment exactly cuts nothing; shifting it half a square leaves equal
  // halves of two segments on both sides of the border, the worst case.
  const GrayImage img = square_scene(64, 64, BoxI{24, 24, 40, 40}, 100, 230);
  const double exact = ss_score(img, BoxI{24, 24, 40, 40});
  const double shifted = ss_score(img, BoxI{16, 24, 32, 40});
  const double background = ss_score(img, BoxI{2, 2, 18, 18});
  // The pre-blur rounds the segment border slightly, so "exact" is near
  // but not precisely 1.
  CHECK(exact > 0.9);
  CHECK(shifted < 0.5);
  // Floating inside one big segment is as bad as cutting it: the border
  // straddles the segment everywhere.
  CHECK(background < 0.1);
  CHECK(exact > shifted);
  CHECK(exact > background);
}

TEST_CASE("contrast compares the box against its surrounding ring") {
  const GrayImage img = square_scene(64, 64, BoxI{24, 24, 40, 40}, 100, 230);
  const double tight = cc_score(img, BoxI{24, 24, 40, 40});
  // A window over flat background sees identical histograms.
  const double blank = cc_score(img, BoxI{2, 2, 14, 14});
  CHECK(tight > 0.9);
  CHECK(blank == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("edge density concentrates on the object contour") {
  const GrayImage img = square_scene(64, 64, BoxI{24, 24, 40, 40}, 100, 230);
  const double on = ed_score(img, BoxI{24, 24, 40, 40});
  const double blank = ed_score(img, BoxI{2, 2, 14, 14});
  CHECK(on > blank);
  CHECK(blank == doctest::Approx(0.0).epsilon(1e-12));
}
