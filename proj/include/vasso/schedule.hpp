#ifndef VASSO_SCHEDULE_HPP
#define VASSO_SCHEDULE_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace vasso {

enum class ScheduleKind { constant, cosine, inverse_sqrt, theory };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Step-size schedule over a fixed horizon.
///
///   constant      base
///   cosine        base * (1 + cos(pi * t / horizon)) / 2
///   inverse_sqrt  base / sqrt(t + 1)
///   theory        base / sqrt(horizon), independent of t
struct Schedule {
    ScheduleKind kind = ScheduleKind::constant;
    double base = 0.0;
    std::int64_t horizon = 1;

    static Schedule constant(double base, std::int64_t horizon = 1) {
        return {ScheduleKind::constant, base, horizon};
    }
    static Schedule theory(double base, std::int64_t horizon) {
        return {ScheduleKind::theory, base, horizon};
    }
    static Schedule cosine(double base, std::int64_t horizon) {
        return {ScheduleKind::cosine, base, horizon};
    }
    static Schedule inverse_sqrt(double base, std::int64_t horizon) {
        return {ScheduleKind::inverse_sqrt, base, horizon};
    }

    bool operator==(const Schedule&) const = default;
};

/// Throws vasso::Error when t is outside [0, horizon). Constant schedules accept
/// any t >= 0.
double schedule_value(const Schedule& s, std::int64_t t);

}  // namespace vasso

#endif  // VASSO_SCHEDULE_HPP
