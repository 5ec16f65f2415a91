#include "vsflab/dispersion.hpp"

#include <cmath>

namespace vsflab {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Downwind distance floor for class-based spread; a just-released puff has
// numerically singular spread otherwise.
constexpr double kMinTravel = 0.1;

double gauss_puff(double q0, const Sigma& s, double along, double cross, double z,
                  double h) {
  const double pre = q0 / (2.0 * std::pow(kPi, 1.5) * s.x * s.y * s.z);
  const double ea = std::exp(-(along * along) / (2.0 * s.x * s.x));
  const double ec = std::exp(-(cross * cross) / (2.0 * s.y * s.y));
  const double zp = z + h, zm = z - h;
  const double ev = std::exp(-(zp * zp) / (2.0 * s.z * s.z)) +
                    std::exp(-(zm * zm) / (2.0 * s.z * s.z));
  return pre * ea * ec * ev;
}

void check_sigma(const Sigma& s) {
  require(s.x > 0.0 && s.y > 0.0 && s.z > 0.0, "sigma components must be positive");
}

}  // namespace

StabilityClass stability_from_char(char c) {
  switch (c) {
    case 'A': return StabilityClass::A;
    case 'B': return StabilityClass::B;
    case 'C': return StabilityClass::C;
    case 'D': return StabilityClass::D;
    case 'E': return StabilityClass::E;
    case 'F': return StabilityClass::F;
    default: fail(std::string("unknown stability class '") + c + "'");
  }
}

char stability_to_char(StabilityClass s) {
  return static_cast<char>('A' + static_cast<int>(s));
}

Sigma pg_coefficients(StabilityClass s, double x) {
  require(x > 0.0, "pg_coefficients: downwind distance must be positive");
  const double a = 1.0 / std::sqrt(1.0 + 0.0001 * x);
  Sigma out;
  switch (s) {
    case StabilityClass::A:
      out.y = 0.22 * x * a;
      out.z = 0.20 * x;
      break;
    case StabilityClass::B:
      out.y = 0.16 * x * a;
      out.z = 0.12 * x;
      break;
    case StabilityClass::C:
      out.y = 0.11 * x * a;
      out.z = 0.08 * x / std::sqrt(1.0 + 0.0002 * x);
      break;
    case StabilityClass::D:
      out.y = 0.08 * x * a;
      out.z = 0.06 * x / std::sqrt(1.0 + 0.0015 * x);
      break;
    case StabilityClass::E:
      out.y = 0.06 * x * a;
      out.z = 0.03 * x / (1.0 + 0.0003 * x);
      break;
    case StabilityClass::F:
      out.y = 0.04 * x * a;
      out.z = 0.016 * x / (1.0 + 0.0003 * x);
      break;
  }
  out.x = out.y;
  return out;
}

Sigma effective_sigma(const PuffParams& p, double t) {
  if (p.stability) {
    require(p.u > 0.0, "effective_sigma: class-based spread needs positive wind");
    return pg_coefficients(*p.stability, std::max(p.u * t, kMinTravel));
  }
  check_sigma(p.sigma);
  return p.sigma;
}

double puff_concentration(const PuffParams& p, double x, double y, double z,
                          double t) {
  require(p.q0 > 0.0, "puff_concentration: q0 must be positive");
  const Sigma s = effective_sigma(p, t);
  const double c = std::cos(p.theta), sn = std::sin(p.theta);
  const double along = x * c + y * sn - p.u * t;
  const double cross = y * c - x * sn;
  return gauss_puff(p.q0, s, along, cross, z, p.h);
}

ConcentrationSlice slice_concentration(const PuffParams& p, const GridSpec& grid,
                                       double z0, double t) {
  require(grid.nx > 0 && grid.ny > 0 && grid.spacing > 0.0,
          "slice_concentration: bad grid");
  ConcentrationSlice out;
  out.grid = grid;
  out.z0 = z0;
  out.t = t;
  out.values.resize(static_cast<std::size_t>(grid.nx) *
                    static_cast<std::size_t>(grid.ny));
  for (int i = 0; i < grid.ny; ++i)
    for (int j = 0; j < grid.nx; ++j) {
      const double px = grid.origin_x + (j + 0.5) * grid.spacing;
      const double py = grid.origin_y + (i + 0.5) * grid.spacing;
      out.values[static_cast<std::size_t>(i) * grid.nx + j] =
          puff_concentration(p, px, py, z0, t);
    }
  return out;
}

Shift shift_offsets(double u, double theta, double dt) {
  return Shift{u * dt * std::cos(theta), u * dt * std::sin(theta)};
}

double verify_approximation(const PuffParams& p, double x, double y, double z0,
                            double t, double dt) {
  const double a = puff_concentration(p, x, y, z0, t);
  require(a > 0.0, "verify_approximation: probe outside the plume's support");
  const Shift d = shift_offsets(p.u, p.theta, dt);
  const double b = puff_concentration(p, x + d.dx, y + d.dy, z0, t + dt);
  return std::abs(a - b) / a;
}

WindSample wind_at(const ReleaseSchedule& s, double t) {
  require(!s.wind.empty(), "schedule: empty wind series");
  WindSample cur = s.wind.front();
  for (const WindSample& w : s.wind) {
    if (w.time > t) break;
    cur = w;
  }
  return cur;
}

namespace {

struct WindIntegral {
  double cx = 0.0, cy = 0.0, dist = 0.0;
};

// Integral of the wind vector (and speed) over [t0, t1], piecewise constant.
WindIntegral integrate_wind(const ReleaseSchedule& s, double t0, double t1) {
  WindIntegral acc;
  const std::size_t n = s.wind.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double seg_lo = k == 0 ? -1e300 : s.wind[k].time;
    const double seg_hi = k + 1 < n ? s.wind[k + 1].time : 1e300;
    const double lo = std::max(seg_lo, t0);
    const double hi = std::min(seg_hi, t1);
    if (hi <= lo) continue;
    const WindSample& w = s.wind[k];
    const double dt = hi - lo;
    acc.cx += w.u * dt * std::cos(w.theta);
    acc.cy += w.u * dt * std::sin(w.theta);
    acc.dist += w.u * dt;
  }
  return acc;
}

void check_schedule(const ReleaseSchedule& s) {
  require(!s.wind.empty(), "schedule: empty wind series");
  for (std::size_t i = 1; i < s.wind.size(); ++i)
    require(s.wind[i].time > s.wind[i - 1].time, "schedule: unsorted wind series");
  for (std::size_t i = 1; i < s.puffs.size(); ++i)
    require(s.puffs[i].time >= s.puffs[i - 1].time, "schedule: unsorted puff times");
  for (const WindSample& w : s.wind)
    require(w.u >= 0.0, "schedule: negative wind speed");
  if (!s.stability) check_sigma(s.sigma);
}

}  // namespace

std::vector<ConcentrationSlice> superpose_field(const ReleaseSchedule& s,
                                                const GridSpec& grid, double z0,
                                                const std::vector<double>& times,
                                                double horizon) {
  check_schedule(s);
  require(grid.nx > 0 && grid.ny > 0 && grid.spacing > 0.0, "superpose: bad grid");
  require(horizon > 0.0, "superpose: horizon must be positive");
  std::vector<ConcentrationSlice> out;
  out.reserve(times.size());
  for (double t : times) {
    ConcentrationSlice slice;
    slice.grid = grid;
    slice.z0 = z0;
    slice.t = t;
    slice.values.assign(static_cast<std::size_t>(grid.nx) *
                            static_cast<std::size_t>(grid.ny),
                        0.0);
    for (const PuffRelease& puff : s.puffs) {
      if (puff.time >= t || t - puff.time > horizon) continue;
      require(puff.q0 > 0.0, "superpose: puff mass must be positive");
      const WindIntegral adv = integrate_wind(s, puff.time, t);
      const double theta_e = wind_at(s, puff.time).theta;
      const Sigma sg = s.stability
                           ? pg_coefficients(*s.stability,
                                             std::max(adv.dist, kMinTravel))
                           : s.sigma;
      const double c = std::cos(theta_e), sn = std::sin(theta_e);
      for (int i = 0; i < grid.ny; ++i)
        for (int j = 0; j < grid.nx; ++j) {
          const double rx = grid.origin_x + (j + 0.5) * grid.spacing - adv.cx;
          const double ry = grid.origin_y + (i + 0.5) * grid.spacing - adv.cy;
          const double along = rx * c + ry * sn;
          const double cross = ry * c - rx * sn;
          slice.values[static_cast<std::size_t>(i) * grid.nx + j] +=
              gauss_puff(puff.q0, sg, along, cross, z0, s.source_height);
        }
    }
    out.push_back(std::move(slice));
  }
  return out;
}

}  // namespace vsflab
