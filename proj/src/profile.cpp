#include "asymnet/profile.hpp"

#include <cmath>
#include <numeric>

#include "asymnet/errors.hpp"

namespace asymnet {

double SensitivityProfile::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

void validate_profile(std::span<const double> values) {
  if (values.empty()) throw ProfileError("sensitivity profile is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double s = values[i];
    if (!(s > 0.0) || !(s <= 1.0)) {
      throw ProfileError("sensitivity s_" + std::to_string(i + 1) + " = " + std::to_string(s) +
                         " outside (0, 1]");
    }
    if (i > 0 && s > values[i - 1]) {
      throw ProfileError("sensitivity profile increases at node " + std::to_string(i + 1));
    }
  }
}

SensitivityProfile make_profile(Schedule schedule, std::size_t n, double floor) {
  if (n == 0) throw ProfileError("profile needs at least one node");
  if (!(floor > 0.0 && floor < 1.0)) {
    throw ProfileError("profile floor must lie in (0, 1), got " + std::to_string(floor));
  }
  SensitivityProfile p{std::vector<double>(n), schedule};
  const double dn = static_cast<double>(n);
  switch (schedule) {
    case Schedule::linear:
      for (std::size_t i = 0; i < n; ++i) p.values[i] = std::max(1.0 - static_cast<double>(i) / dn, floor);
      break;
    case Schedule::quadratic:
      for (std::size_t i = 0; i < n; ++i) {
        const double r = 1.0 - static_cast<double>(i) / dn;
        p.values[i] = std::max(r * r, floor);
      }
      break;
    case Schedule::clamped_ramp: {
      const std::size_t head = (n + 3) / 4;      // ceil(n/4)
      const std::size_t tail = (3 * n + 3) / 4;  // ceil(3n/4)
      const double span = static_cast<double>(tail - head + 1);
      for (std::size_t k = 1; k <= n; ++k) {
        double s;
        if (k <= head) {
          s = 1.0;
        } else if (k > tail) {
          s = floor;
        } else {
          s = 1.0 - (1.0 - floor) * static_cast<double>(k - head) / span;
        }
        p.values[k - 1] = s;
      }
      break;
    }
    case Schedule::explicit_values:
      throw ProfileError("explicit profiles are built with explicit_profile()");
  }
  validate_profile(p.values);
  return p;
}

SensitivityProfile explicit_profile(std::vector<double> values) {
  validate_profile(values);
  return SensitivityProfile{std::move(values), Schedule::explicit_values};
}

double base_activation(Activation base, double u) {
  switch (base) {
    case Activation::relu:
      return u > 0.0 ? u : 0.0;
    case Activation::tanh:
      return std::tanh(u);
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-u));
    case Activation::linear:
    case Activation::none:
      return u;
  }
  return u;
}

double base_derivative(Activation base, double u) {
  switch (base) {
    case Activation::relu:
      return u > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(u);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double sg = 1.0 / (1.0 + std::exp(-u));
      return sg * (1.0 - sg);
    }
    case Activation::linear:
    case Activation::none:
      return 1.0;
  }
  return 1.0;
}

double scaled_activation(double u, double s, Activation base) { return s * base_activation(base, u); }

double scaled_derivative(double u, double s, Activation base) { return s * base_derivative(base, u); }

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::none: return "none";
  }
  return "?";
}

std::string_view to_string(Schedule s) {
  switch (s) {
    case Schedule::linear: return "linear";
    case Schedule::quadratic: return "quadratic";
    case Schedule::clamped_ramp: return "clamped_ramp";
    case Schedule::explicit_values: return "explicit";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::linear, Activation::tanh, Activation::sigmoid,
                 Activation::none}) {
    if (to_string(a) == name) return a;
  }
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

Schedule parse_schedule(std::string_view name) {
  for (auto s : {Schedule::linear, Schedule::quadratic, Schedule::clamped_ramp,
                 Schedule::explicit_values}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown profile schedule '" + std::string(name) + "'");
}

}  // namespace asymnet
