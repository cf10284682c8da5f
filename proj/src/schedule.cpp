#include "vasso/schedule.hpp"

#include <cmath>
#include <numbers>

#include "vasso/core.hpp"

namespace vasso {

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::cosine: return "cosine";
        case ScheduleKind::inverse_sqrt: return "inverse_sqrt";
        case ScheduleKind::theory: return "theory";
    }
    return "constant";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
    if (name == "constant") return ScheduleKind::constant;
    if (name == "cosine") return ScheduleKind::cosine;
    if (name == "inverse_sqrt" || name == "inverse-sqrt") return ScheduleKind::inverse_sqrt;
    if (name == "theory") return ScheduleKind::theory;
    throw Error("unknown schedule kind '" + std::string(name) + "'");
}

double schedule_value(const Schedule& s, std::int64_t t) {
    if (s.horizon <= 0) {
        throw Error("schedule horizon must be positive");
    }
    if (t < 0 || (s.kind != ScheduleKind::constant && t >= s.horizon)) {
        throw Error("schedule index " + std::to_string(t) + " outside [0, " +
                    std::to_string(s.horizon) + ")");
    }
    switch (s.kind) {
        case ScheduleKind::constant:
            return s.base;
        case ScheduleKind::cosine:
            return s.base * 0.5 *
                   (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                                   static_cast<double>(s.horizon)));
        case ScheduleKind::inverse_sqrt:
            return s.base / std::sqrt(static_cast<double>(t + 1));
        case ScheduleKind::theory:
            return s.base / std::sqrt(static_cast<double>(s.horizon));
    }
    return s.base;
}

}  // namespace vasso
