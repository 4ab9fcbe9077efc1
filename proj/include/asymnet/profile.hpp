#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asymnet {

enum class Activation : std::uint8_t { relu = 0, linear = 1, tanh = 2, sigmoid = 3, none = 4 };

enum class Schedule : std::uint8_t { linear = 0, quadratic = 1, clamped_ramp = 2, explicit_values = 3 };

inline constexpr double kDefaultProfileFloor = 1e-4;

/// Per-node sensitivity parameters of one layer, ordered so that
/// 1 >= s_1 >= s_2 >= ... >= s_n > 0.
struct SensitivityProfile {
  std::vector<double> values;
  Schedule schedule = Schedule::explicit_values;

  std::size_t size() const { return values.size(); }
  double mean() const;
  bool operator==(const SensitivityProfile&) const = default;
};

/// Builds a profile for n nodes (1-based index i below):
///   linear:       s_i = max(1 - (i-1)/n, floor)
///   quadratic:    s_i = max((1 - (i-1)/n)^2, floor)
///   clamped_ramp: 1 for i <= ceil(n/4), floor for i > ceil(3n/4), and a
///                 straight ramp from 1 toward floor in between.
/// Throws ProfileError for n == 0, floor outside (0,1), or explicit_values
/// (use explicit_profile instead).
SensitivityProfile make_profile(Schedule schedule, std::size_t n,
                                double floor = kDefaultProfileFloor);

/// Validates and wraps caller-supplied values.
SensitivityProfile explicit_profile(std::vector<double> values);

/// Throws ProfileError unless values are non-empty, in (0,1], and non-increasing.
void validate_profile(std::span<const double> values);

double base_activation(Activation base, double u);
/// f0'(u); the ReLU derivative at 0 is taken as 0.
double base_derivative(Activation base, double u);

/// s * f0(u)
double scaled_activation(double u, double s, Activation base);
/// s * f0'(u)
double scaled_derivative(double u, double s, Activation base);

std::string_view to_string(Activation a);
std::string_view to_string(Schedule s);
Activation parse_activation(std::string_view name);
Schedule parse_schedule(std::string_view name);

}  // namespace asymnet
