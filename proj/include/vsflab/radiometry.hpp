#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "vsflab/boxes.hpp"
#include "vsflab/dispersion.hpp"
#include "vsflab/image.hpp"
#include "vsflab/rng.hpp"

namespace vsflab {

// Blackbody spectral exitance, W m^-2 m^-1, with the two-constant form
// c1 = 3.74e-16 W m^2, c2 = 1.44e-2 m K.
inline constexpr double kPlanckC1 = 3.74e-16;
inline constexpr double kPlanckC2 = 1.44e-2;
double planck_radiance(double lambda_m, double t_kelvin);

// Absorption coefficient samples on an ascending wavelength grid (meters).
// The sample range is the sensor band; integrations run over it.
struct GasSpectrum {
  std::vector<double> wavelength;
  std::vector<double> absorption;  // per unit concentration path length
};

// Synthetic long-wave band (8-12 um) with two absorption peaks.
GasSpectrum standard_spectrum(int samples = 41);

double gas_absorption(const GasSpectrum& spec, double lambda_m);

// Beer-Lambert single-layer transmittance for concentration path length cl.
double gas_transmittance(const GasSpectrum& spec, double lambda_m, double cl);

// Two-layer scene: background behind a gas layer behind the atmosphere.
// Atmosphere transmittance/emissivity are taken wavelength-flat.
struct SceneConfig {
  double t_background = 300.0;  // K
  double t_gas = 285.0;         // K
  double t_atm = 280.0;         // K
  double emissivity_bg = 0.95;
  double tau_atm = 0.85;
  double eps_atm = 0.15;
  double gain = 1.0;            // radiance -> gray levels
  double offset = 0.0;
  double noise_sigma = 1.5;     // gray levels
  int jitter_amp = 0;           // max |integer camera shift| per frame, px
  double path_depth = 1.0;      // converts slice concentration to path length
  double vis_threshold = 0.05;  // (1 - tau_band) cutoff for the GT mask
};

// Sensor-reaching spectral radiances through (on) and beside (off) the plume,
// and their difference.
struct RadiancePaths {
  double on_plume = 0.0;
  double off_plume = 0.0;
  double difference = 0.0;
};
RadiancePaths radiance_paths(const SceneConfig& scene, const GasSpectrum& spec,
                             double lambda_m, double cl);

// difference = tau_atm * (1 - tau_gas) * (M_bg - M_gas); positive when the
// background outshines the gas.
double radiance_difference(const SceneConfig& scene, const GasSpectrum& spec,
                           double lambda_m, double cl);

// Trapezoid rule over the spectrum's wavelength grid.
double band_integrate(const GasSpectrum& spec,
                      const std::function<double(double)>& f);

double band_width(const GasSpectrum& spec);

// Band-mean gas transmittance at path length cl; strictly decreasing in cl.
double band_mean_transmittance(const GasSpectrum& spec, double cl);

// Smallest cl with 1 - band_mean_transmittance(cl) >= contrast (bisection).
double path_length_for_contrast(const GasSpectrum& spec, double contrast);

// Per-(scene, spectrum) constants reused across pixels.
class RenderContext {
 public:
  RenderContext(const SceneConfig& scene, const GasSpectrum& spec);
  double band_off_plume() const { return band_off_; }
  double band_difference(double cl) const;
  double band_tau(double cl) const;
  const SceneConfig& scene() const { return scene_; }

 private:
  SceneConfig scene_;
  GasSpectrum spec_;
  std::vector<double> trap_weight_;
  std::vector<double> diff_coeff_;  // tau_atm * (M_bg - M_gas) per sample
  double band_off_ = 0.0;
  double width_ = 0.0;
};

// pixel = clamp8(gain * (band_off_plume - band_difference(cl)) + offset + noise).
// cl(y, x) = path_depth * slice value at the camera-shifted cell; cells the
// shift exposes read as zero concentration. `noise` may be null (noise-free).
GrayImage render_frame(const ConcentrationSlice& slice, const RenderContext& ctx,
                       int jitter_dx, int jitter_dy, Rng* noise);

// Tight half-open box around pixels with 1 - band_tau(cl) >= vis_threshold;
// nullopt when no pixel qualifies.
std::optional<BoxI> annotate_bbox(const ConcentrationSlice& slice,
                                  const RenderContext& ctx, int jitter_dx,
                                  int jitter_dy);

// Mean in-box (1 - band_tau) of one annotated frame; the generator's
// visibility flag averages this across annotated frames.
double mean_box_contrast(const ConcentrationSlice& slice, const RenderContext& ctx,
                         int jitter_dx, int jitter_dy, const BoxI& box);

}  // namespace vsflab
