#pragma once

#include <filesystem>
#include <string>

#include "berry/faults.hpp"

namespace berry {

inline constexpr double kGravity = 9.81;  // m/s^2

/// Physical constants of one UAV. Masses in grams, power in watts, energy in
/// joules. Closed forms used by the chain:
///   heatsink(tdp)  = heatsink_base_mass + heatsink_specific_mass * tdp
///   accel(payload) = max_thrust / m - g0,  m = takeoff + payload (kg)
///   v_safe(a)      = sqrt(2 a sensing_distance)
///   rotor(m)       = rotor_power_base * (m / takeoff)^1.5
struct UavPlatform {
  std::string name = "custom";
  double takeoff_mass_g = 0.0;
  double max_payload_g = 0.0;
  double battery_energy_j = 0.0;
  double max_thrust_n = 0.0;
  double rotor_power_base_w = 0.0;
  double compute_power_ref_w = 0.0;
  double compute_power_fraction = 0.0;  // informational
  double sensing_distance_m = 0.0;
  double speed_utilization = 1.0;  // kappa: average / safe speed
  double heatsink_specific_mass_g_per_w = 0.0;
  double heatsink_base_mass_g = 0.0;
  double fixed_payload_g = 0.0;
  double tdp_factor = 1.0;
  double learn_step_time_s = 0.0;

  void validate() const;
  bool operator==(const UavPlatform&) const = default;
};

/// Published figures a platform preset is fitted to.
struct PlatformAnchors {
  std::string name;
  double takeoff_mass_g = 0.0;
  double max_payload_g = 0.0;
  double battery_mah = 0.0;
  double cell_voltage = 3.7;
  double compute_power_fraction = 0.0;
  // Reference mission at v_norm = 1 (error-free, 1 V operation).
  double ref_distance_m = 0.0;
  double ref_time_s = 0.0;
  double ref_energy_j = 0.0;
  // Heatsink mass at two operating voltages.
  double heatsink_v_hi = 1.28, heatsink_m_hi = 3.26;
  double heatsink_v_lo = 0.79, heatsink_m_lo = 1.22;
  // Acceleration and safe velocity observed at those two heatsink masses.
  double accel_hi = 6.37, accel_lo = 7.56;
  double velocity_hi = 4.91, velocity_lo = 5.43;
  // Optional on-device learning energy anchor (steps at voltage -> joules).
  double learn_steps = 0.0, learn_v_norm = 1.0, learn_energy_j = 0.0;
};

double battery_energy_joules(double capacity_mah, double cell_voltage);

/// Closed-form fit of every free platform coefficient to the anchors:
/// heatsink line through the two (TDP, mass) points, thrust and sensing
/// distance by minimax relative error over the two anchor pairs, kappa and
/// rotor power from the reference mission.
UavPlatform calibrate_platform(const PlatformAnchors& anchors, const VoltageCurve& curve);

PlatformAnchors crazyflie_anchors();
PlatformAnchors tello_anchors();
UavPlatform crazyflie_platform();
UavPlatform tello_platform();
UavPlatform platform_preset(const std::string& name);

/// Key-value text, one `key = value` per line, '#' comments.
std::string format_platform(const UavPlatform& p);
UavPlatform parse_platform(const std::string& text, const std::string& origin = "<string>");
UavPlatform load_platform(const std::filesystem::path& path);

double compute_power(const UavPlatform& p, double v_norm, const VoltageCurve& curve);
double heatsink_mass(const UavPlatform& p, double tdp_w);
double acceleration(const UavPlatform& p, double payload_mass_g);
double safe_velocity(const UavPlatform& p, double accel);
double rotor_power(const UavPlatform& p, double total_mass_g);

/// Missions per charge: success_rate * battery / flight_energy.
double missions_per_charge(double success_rate, double battery_energy_j, double flight_energy_j);

struct QofMetrics {
  double success_rate = 0.0;
  double flight_distance = 0.0;  // m
  double flight_time = 0.0;      // s
  double flight_energy = 0.0;    // J
  double missions = 0.0;
  double processing_energy_scale = 1.0;
  // Intermediate chain values.
  double compute_power = 0.0;
  double heatsink_mass = 0.0;
  double acceleration = 0.0;
  double safe_velocity = 0.0;
  double rotor_power = 0.0;
};

QofMetrics quality_of_flight(const UavPlatform& p, const VoltageCurve& curve, double v_norm, double success_rate,
                             double flight_distance);

/// Energy spent flying while learning on-device:
/// steps * t_step * (hover power + compute power at v_norm).
double estimate_learning_energy(std::uint64_t steps, double v_norm, const UavPlatform& p,
                                const VoltageCurve& curve);

}  // namespace berry
