#pragma once

#include <optional>
#include <vector>

#include "vsflab/common.hpp"

namespace vsflab {

// Horizontal/vertical spread of a puff, in meters. sigma_x equals sigma_y by
// construction (the tabulated fits only provide crosswind and vertical
// spreads; the along-wind spread is taken equal to the crosswind one).
struct Sigma {
  double x = 1.0, y = 1.0, z = 1.0;
};

enum class StabilityClass { A, B, C, D, E, F };

StabilityClass stability_from_char(char c);
char stability_to_char(StabilityClass s);

// Briggs open-country power-law fits. x_downwind is meters traveled, > 0.
Sigma pg_coefficients(StabilityClass s, double x_downwind);

// One instantaneous release from the origin at height h, drifting with a
// constant wind u along direction theta. Spread is either fixed or, when a
// stability class is set, re-evaluated at downwind distance u*t.
struct PuffParams {
  double q0 = 1.0;     // released mass
  double u = 1.0;      // wind speed, m/s
  double theta = 0.0;  // wind direction, radians, CCW from +x
  double h = 0.0;      // release height, m
  Sigma sigma;
  std::optional<StabilityClass> stability;
};

Sigma effective_sigma(const PuffParams& p, double t);

// Reflected expanding-puff concentration at (x, y, z) a time t after release.
double puff_concentration(const PuffParams& p, double x, double y, double z,
                          double t);

// Uniform horizontal grid. Cell (row i, col j) has center
// (origin_x + (j + 0.5) * spacing, origin_y + (i + 0.5) * spacing).
struct GridSpec {
  int nx = 0, ny = 0;
  double spacing = 1.0;
  double origin_x = 0.0, origin_y = 0.0;
};

// Concentration sampled on a grid at height z0 and time t; row-major, ny rows.
struct ConcentrationSlice {
  GridSpec grid;
  double z0 = 0.0;
  double t = 0.0;
  std::vector<double> values;

  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(grid.nx) +
                  static_cast<std::size_t>(j)];
  }
};

ConcentrationSlice slice_concentration(const PuffParams& p, const GridSpec& grid,
                                       double z0, double t);

// Image-plane displacement after dt that keeps the advecting puff fixed:
// dx = u*dt*cos(theta), dy = u*dt*sin(theta).
struct Shift {
  double dx = 0.0, dy = 0.0;
};
Shift shift_offsets(double u, double theta, double dt);

// Relative error |z(x,y,z0,t) - z(x+dx,y+dy,z0,t+dt)| / |z(x,y,z0,t)| of the
// shift identity at one probe. Exact (to roundoff) for fixed sigma; first
// order in dt when sigma grows with travel distance.
double verify_approximation(const PuffParams& p, double x, double y, double z0,
                            double t, double dt);

// Continuous leak approximated as a train of puffs under piecewise-constant
// wind. Wind sample k applies on [time_k, time_{k+1}); query times clamp to
// the covered interval.
struct WindSample {
  double time = 0.0;
  double u = 1.0;
  double theta = 0.0;
};

struct PuffRelease {
  double time = 0.0;
  double q0 = 1.0;
};

struct ReleaseSchedule {
  std::vector<PuffRelease> puffs;   // ascending release times
  std::vector<WindSample> wind;     // ascending sample times, non-empty
  double source_height = 0.0;
  Sigma sigma;                      // used when stability is unset
  std::optional<StabilityClass> stability;
};

WindSample wind_at(const ReleaseSchedule& s, double t);

// Superposition of every puff released strictly before each query time.
// Puffs older than `horizon` seconds are dropped (their contribution has
// spread below visibility). Each puff advects with the integrated wind
// vector; its spread grows with integrated travel distance.
std::vector<ConcentrationSlice> superpose_field(const ReleaseSchedule& s,
                                                const GridSpec& grid, double z0,
                                                const std::vector<double>& times,
                                                double horizon);

}  // namespace vsflab
