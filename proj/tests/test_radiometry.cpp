#include <doctest.h>

#include <cmath>

#include "vsflab/radiometry.hpp"

using namespace vsflab;

TEST_CASE("blackbody exitance oracle") {
  // 10 um at 300 K with the two-constant form used throughout.
  CHECK(planck_radiance(10e-6, 300.0) ==
        doctest::Approx(31034661.37621313).epsilon(1e-12));
  // Hotter bodies radiate more at every wavelength.
  for (double lam : {8e-6, 10e-6, 12e-6})
    CHECK(planck_radiance(lam, 310.0) > planck_radiance(lam, 290.0));
}

TEST_CASE("single-layer transmittance follows the exponential law") {
  const GasSpectrum spec = standard_spectrum();
  const double lam = spec.wavelength[spec.wavelength.size() / 2];
  const double t1 = gas_transmittance(spec, lam, 50.0);
  const double t2 = gas_transmittance(spec, lam, 100.0);
  CHECK(t2 == doctest::Approx(t1 * t1).epsilon(1e-12));
  CHECK(gas_transmittance(spec, lam, 0.0) == 1.0);
}

TEST_CASE("band transmittance is monotone and invertible") {
  const GasSpectrum spec = standard_spectrum();
  double prev = 1.0;
  for (double cl : {10.0, 50.0, 250.0, 1000.0}) {
    const double tau = band_mean_transmittance(spec, cl);
    CHECK(tau < prev);
    prev = tau;
  }
  const double cl = path_length_for_contrast(spec, 0.3);
  CHECK(1.0 - band_mean_transmittance(spec, cl) == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("difference vanishes at thermal equilibrium") {
  // A blackbody background at the gas temperature radiates exactly what the
  // gas does, so the on/off contrast cancels term by term.
  SceneConfig scene;
  scene.emissivity_bg = 1.0;
  scene.t_gas = scene.t_background;
  const GasSpectrum spec = standard_spectrum();
  for (double cl : {0.0, 30.0, 400.0})
    CHECK(radiance_difference(scene, spec, 10e-6, cl) == 0.0);

  RenderContext ctx(scene, spec);
  CHECK(ctx.band_difference(250.0) == 0.0);

  // A graybody background under the same temperatures keeps a residual:
  // the blackbody gas outshines it.
  SceneConfig gray = scene;
  gray.emissivity_bg = 0.95;
  CHECK(radiance_difference(gray, spec, 10e-6, 30.0) < 0.0);
}

TEST_CASE("zero gas renders the flat background") {
  SceneConfig scene;
  scene.noise_sigma = 0.0;
  const GasSpectrum spec = standard_spectrum();
  RenderContext pre(scene, spec);
  scene.gain = 150.0 / pre.band_off_plume();
  RenderContext ctx(scene, spec);

  ConcentrationSlice slice;
  slice.grid.nx = 12;
  slice.grid.ny = 9;
  slice.values.assign(12 * 9, 0.0);

  const GrayImage img = render_frame(slice, ctx, 0, 0, nullptr);
  const GrayImage flat(12, 9, img.at(0, 0));
  CHECK(img == flat);
  CHECK(img.at(0, 0) == 150);
}

TEST_CASE("warm background darkens monotonically with path length") {
  SceneConfig scene;  // t_background 300 > t_gas 285
  scene.noise_sigma = 0.0;
  const GasSpectrum spec = standard_spectrum();
  RenderContext pre(scene, spec);
  scene.gain = 150.0 / pre.band_off_plume();
  RenderContext ctx(scene, spec);

  // Rising difference, so falling pixel values.
  ConcentrationSlice slice;
  slice.grid.nx = 8;
  slice.grid.ny = 1;
  for (int j = 0; j < 8; ++j) slice.values.push_back(40.0 * j);
  scene.path_depth = 1.0;
  const GrayImage img = render_frame(slice, ctx, 0, 0, nullptr);
  for (int j = 1; j < 8; ++j) CHECK(img.at(0, j) <= img.at(0, j - 1));
  CHECK(img.at(0, 7) < img.at(0, 0));

  double dprev = -1.0;
  for (double cl : {0.0, 20.0, 80.0, 320.0}) {
    const double d = ctx.band_difference(cl);
    CHECK(d > dprev);
    dprev = d;
  }
}

TEST_CASE("annotation marks cells past the visibility threshold") {
  SceneConfig scene;
  scene.noise_sigma = 0.0;
  scene.vis_threshold = 0.05;
  const GasSpectrum spec = standard_spectrum();
  RenderContext ctx(scene, spec);

  ConcentrationSlice slice;
  slice.grid.nx = 10;
  slice.grid.ny = 10;
  slice.values.assign(100, 0.0);
  CHECK(!annotate_bbox(slice, ctx, 0, 0).has_value());

  // One strongly absorbing cell yields a 1x1 box around it.
  const double hot = path_length_for_contrast(spec, 0.5);
  slice.values[4 * 10 + 6] = hot;
  const auto box = annotate_bbox(slice, ctx, 0, 0);
  REQUIRE(box.has_value());
  CHECK(box->x1 == 6);
  CHECK(box->y1 == 4);
  CHECK(box->x2 == 7);
  CHECK(box->y2 == 5);

  // Camera jitter moves the annotation with the image content.
  const auto moved = annotate_bbox(slice, ctx, 2, 1);
  REQUIRE(moved.has_value());
  CHECK(moved->x1 != box->x1);
}
