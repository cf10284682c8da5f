#ifndef VASSO_CSV_HPP
#define VASSO_CSV_HPP

#include <optional>
#include <string>
#include <vector>

#include "vasso/analysis.hpp"

namespace vasso {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

std::string drift_csv(const StabilityTrace& trace);
std::string spread_csv(const std::vector<SpreadStats>& stats);
std::string spectrum_csv(const SpectrumEstimate& spectrum);
std::string landscape_csv(const LandscapeGrid& grid);

/// Writes `content` to `path`, throwing vasso::Error on failure.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace vasso

#endif  // VASSO_CSV_HPP
