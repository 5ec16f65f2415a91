#include "vsflab/radiometry.hpp"

#include <cmath>

namespace vsflab {

double planck_radiance(double lambda_m, double t_kelvin) {
  require(lambda_m > 0.0, "planck_radiance: wavelength must be positive");
  require(t_kelvin > 0.0, "planck_radiance: temperature must be positive");
  const double l5 = lambda_m * lambda_m * lambda_m * lambda_m * lambda_m;
  return kPlanckC1 / l5 / (std::exp(kPlanckC2 / (lambda_m * t_kelvin)) - 1.0);
}

GasSpectrum standard_spectrum(int samples) {
  require(samples >= 2, "standard_spectrum: needs at least 2 samples");
  const double lo = 8e-6, hi = 12e-6;
  GasSpectrum s;
  s.wavelength.resize(samples);
  s.absorption.resize(samples);
  // Two Gaussian absorption peaks inside the band.
  const double p1 = 9.4e-6, w1 = 0.5e-6, a1 = 1.0;
  const double p2 = 10.9e-6, w2 = 0.35e-6, a2 = 0.6;
  for (int i = 0; i < samples; ++i) {
    const double l = lo + (hi - lo) * i / (samples - 1);
    s.wavelength[i] = l;
    const double d1 = (l - p1) / w1, d2 = (l - p2) / w2;
    s.absorption[i] = a1 * std::exp(-0.5 * d1 * d1) + a2 * std::exp(-0.5 * d2 * d2);
  }
  return s;
}

namespace {

void check_spectrum(const GasSpectrum& spec) {
  require(spec.wavelength.size() >= 2, "spectrum: needs at least 2 samples");
  require(spec.wavelength.size() == spec.absorption.size(),
          "spectrum: sample count mismatch");
  for (std::size_t i = 1; i < spec.wavelength.size(); ++i)
    require(spec.wavelength[i] > spec.wavelength[i - 1],
            "spectrum: wavelengths must ascend");
  for (double a : spec.absorption)
    require(a >= 0.0, "spectrum: negative absorption");
}

}  // namespace

double gas_absorption(const GasSpectrum& spec, double lambda_m) {
  check_spectrum(spec);
  require(lambda_m >= spec.wavelength.front() && lambda_m <= spec.wavelength.back(),
          "gas_absorption: wavelength outside the sampled band");
  const auto& w = spec.wavelength;
  std::size_t i = 1;
  while (i + 1 < w.size() && w[i] < lambda_m) ++i;
  const double f = (lambda_m - w[i - 1]) / (w[i] - w[i - 1]);
  return spec.absorption[i - 1] + f * (spec.absorption[i] - spec.absorption[i - 1]);
}

double gas_transmittance(const GasSpectrum& spec, double lambda_m, double cl) {
  require(cl >= 0.0, "gas_transmittance: negative path length");
  return std::exp(-gas_absorption(spec, lambda_m) * cl);
}

RadiancePaths radiance_paths(const SceneConfig& scene, const GasSpectrum& spec,
                             double lambda_m, double cl) {
  const double tau_gas = gas_transmittance(spec, lambda_m, cl);
  const double m_bg = scene.emissivity_bg * planck_radiance(lambda_m, scene.t_background);
  const double m_gas = planck_radiance(lambda_m, scene.t_gas);
  const double m_atm = planck_radiance(lambda_m, scene.t_atm);
  RadiancePaths p;
  // Gas layer output, then atmosphere layer; gas emissivity is 1 - tau_gas.
  const double m1 = tau_gas * m_bg + (1.0 - tau_gas) * m_gas;
  p.on_plume = scene.tau_atm * m1 + scene.eps_atm * m_atm;
  p.off_plume = scene.tau_atm * m_bg + scene.eps_atm * m_atm;
  p.difference = scene.tau_atm * (1.0 - tau_gas) * (m_bg - m_gas);
  return p;
}

double radiance_difference(const SceneConfig& scene, const GasSpectrum& spec,
                           double lambda_m, double cl) {
  return radiance_paths(scene, spec, lambda_m, cl).difference;
}

double band_integrate(const GasSpectrum& spec,
                      const std::function<double(double)>& f) {
  check_spectrum(spec);
  double acc = 0.0;
  for (std::size_t i = 1; i < spec.wavelength.size(); ++i) {
    const double a = spec.wavelength[i - 1], b = spec.wavelength[i];
    acc += 0.5 * (b - a) * (f(a) + f(b));
  }
  return acc;
}

double band_width(const GasSpectrum& spec) {
  check_spectrum(spec);
  return spec.wavelength.back() - spec.wavelength.front();
}

double band_mean_transmittance(const GasSpectrum& spec, double cl) {
  return band_integrate(spec, [&](double l) {
    return gas_transmittance(spec, l, cl);
  }) / band_width(spec);
}

double path_length_for_contrast(const GasSpectrum& spec, double contrast) {
  require(contrast > 0.0 && contrast < 1.0,
          "path_length_for_contrast: contrast must be in (0, 1)");
  double lo = 0.0, hi = 1.0;
  while (1.0 - band_mean_transmittance(spec, hi) < contrast) {
    hi *= 2.0;
    require(hi < 1e12, "path_length_for_contrast: contrast unreachable");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (1.0 - band_mean_transmittance(spec, mid) >= contrast)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

RenderContext::RenderContext(const SceneConfig& scene, const GasSpectrum& spec)
    : scene_(scene), spec_(spec) {
  check_spectrum(spec_);
  require(scene.tau_atm >= 0.0 && scene.tau_atm <= 1.0,
          "scene: tau_atm must be in [0, 1]");
  require(scene.path_depth > 0.0, "scene: path_depth must be positive");
  const std::size_t n = spec_.wavelength.size();
  trap_weight_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dl = spec_.wavelength[i + 1] - spec_.wavelength[i];
    trap_weight_[i] += 0.5 * dl;
    trap_weight_[i + 1] += 0.5 * dl;
  }
  diff_coeff_.resize(n);
  width_ = band_width(spec_);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = spec_.wavelength[i];
    const double m_bg = scene.emissivity_bg * planck_radiance(l, scene.t_background);
    const double m_gas = planck_radiance(l, scene.t_gas);
    const double m_atm = planck_radiance(l, scene.t_atm);
    diff_coeff_[i] = scene.tau_atm * (m_bg - m_gas);
    band_off_ += trap_weight_[i] * (scene.tau_atm * m_bg + scene.eps_atm * m_atm);
  }
}

double RenderContext::band_difference(double cl) const {
  require(cl >= 0.0, "band_difference: negative path length");
  double acc = 0.0;
  for (std::size_t i = 0; i < diff_coeff_.size(); ++i)
    acc += trap_weight_[i] * diff_coeff_[i] *
           (1.0 - std::exp(-spec_.absorption[i] * cl));
  return acc;
}

double RenderContext::band_tau(double cl) const {
  require(cl >= 0.0, "band_tau: negative path length");
  double acc = 0.0;
  for (std::size_t i = 0; i < spec_.absorption.size(); ++i)
    acc += trap_weight_[i] * std::exp(-spec_.absorption[i] * cl);
  return acc / width_;
}

namespace {

// Concentration under camera shift (jdx, jdy): image pixel (y, x) sees slice
// cell (y - jdy, x - jdx); exposed cells are gas-free.
double shifted_cl(const ConcentrationSlice& slice, double path_depth, int y, int x,
                  int jdx, int jdy) {
  const int sy = y - jdy, sx = x - jdx;
  if (sy < 0 || sy >= slice.grid.ny || sx < 0 || sx >= slice.grid.nx) return 0.0;
  const double v = slice.at(sy, sx);
  return v > 0.0 ? v * path_depth : 0.0;
}

}  // namespace

GrayImage render_frame(const ConcentrationSlice& slice, const RenderContext& ctx,
                       int jitter_dx, int jitter_dy, Rng* noise) {
  const SceneConfig& sc = ctx.scene();
  GrayImage img(slice.grid.nx, slice.grid.ny);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const double cl = shifted_cl(slice, sc.path_depth, y, x, jitter_dx, jitter_dy);
      double v = sc.gain * (ctx.band_off_plume() - ctx.band_difference(cl)) +
                 sc.offset;
      if (noise) v += noise->normal(0.0, sc.noise_sigma);
      img.at(y, x) = static_cast<std::uint8_t>(
          std::min<long>(255, std::max<long>(0, std::lround(v))));
    }
  return img;
}

std::optional<BoxI> annotate_bbox(const ConcentrationSlice& slice,
                                  const RenderContext& ctx, int jitter_dx,
                                  int jitter_dy) {
  const SceneConfig& sc = ctx.scene();
  int x1 = slice.grid.nx, y1 = slice.grid.ny, x2 = -1, y2 = -1;
  for (int y = 0; y < slice.grid.ny; ++y)
    for (int x = 0; x < slice.grid.nx; ++x) {
      const double cl = shifted_cl(slice, sc.path_depth, y, x, jitter_dx, jitter_dy);
      if (cl <= 0.0) continue;
      if (1.0 - ctx.band_tau(cl) < sc.vis_threshold) continue;
      x1 = std::min(x1, x);
      y1 = std::min(y1, y);
      x2 = std::max(x2, x);
      y2 = std::max(y2, y);
    }
  if (x2 < 0) return std::nullopt;
  return BoxI{x1, y1, x2 + 1, y2 + 1};
}

double mean_box_contrast(const ConcentrationSlice& slice, const RenderContext& ctx,
                         int jitter_dx, int jitter_dy, const BoxI& box) {
  require(box.x2 > box.x1 && box.y2 > box.y1, "mean_box_contrast: degenerate box");
  const SceneConfig& sc = ctx.scene();
  // Average over the annotated pixels only: the box also spans sub-threshold
  // fringe whose near-zero contrast would dilute the measure and make the
  // clear cutoff unreachable for any plume profile.
  double acc = 0.0;
  int n = 0;
  for (int y = box.y1; y < box.y2; ++y)
    for (int x = box.x1; x < box.x2; ++x) {
      const double cl = shifted_cl(slice, sc.path_depth, y, x, jitter_dx, jitter_dy);
      if (cl <= 0.0) continue;
      const double contrast = 1.0 - ctx.band_tau(cl);
      if (contrast < sc.vis_threshold) continue;
      acc += contrast;
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace vsflab
