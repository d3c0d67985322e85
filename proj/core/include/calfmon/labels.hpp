#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace calfmon {

enum class Behaviour : std::uint8_t { lying = 0, running = 1, drinking_milk = 2, other = 3 };
enum class Activity : std::uint8_t { active = 0, inactive = 1 };

inline constexpr std::array<Behaviour, 4> kBehaviours{Behaviour::lying, Behaviour::running,
                                                      Behaviour::drinking_milk, Behaviour::other};
inline constexpr std::array<Activity, 2> kActivities{Activity::active, Activity::inactive};

std::string_view to_string(Behaviour b) noexcept;
std::string_view to_string(Activity a) noexcept;

std::optional<Behaviour> parse_behaviour(std::string_view name) noexcept;
std::optional<Activity> parse_activity(std::string_view name) noexcept;

/// Maps a free-form ethogram label onto the four modelled classes: anything
/// that is not lying, running or drinking milk becomes `other`.
Behaviour behaviour_from_label(std::string_view label) noexcept;

/// Fixed activity of the three named behaviours; `other` has none and takes
/// the ethogram's own flag.
std::optional<Activity> implied_activity(Behaviour b) noexcept;

}  // namespace calfmon
