#include "vasso/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vasso {

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) {
        throw Error("format_double: conversion failed");
    }
    return std::string(buf.data(), ptr);
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

std::string drift_csv(const StabilityTrace& trace) {
    std::string out = "t,drift\n";
    for (std::size_t t = 0; t < trace.drifts.size(); ++t) {
        out += std::to_string(t + 1) + "," + format_double(trace.drifts[t]) + "\n";
    }
    return out;
}

std::string spread_csv(const std::vector<SpreadStats>& stats) {
    std::string out = "noise_scale,mean_cos,std_cos\n";
    for (const auto& s : stats) {
        out += format_double(s.noise_scale) + "," + format_double(s.mean_cos) + "," + format_double(s.std_cos) + "\n";
    }
    return out;
}

std::string spectrum_csv(const SpectrumEstimate& spectrum) {
    std::string out = "index,ritz_value,residual\n";
    for (std::size_t i = 0; i < spectrum.top_eigenvalues.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_double(spectrum.top_eigenvalues[i]) + "," +
               format_double(spectrum.residuals[i]) + "\n";
    }
    return out;
}

std::string landscape_csv(const LandscapeGrid& grid) {
    std::string out;
    if (grid.betas.empty()) {
        out = "alpha,loss\n";
        for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
            out += format_double(grid.alphas[i]) + "," +
                   format_double(grid.losses(static_cast<Eigen::Index>(i), 0)) + "\n";
        }
        return out;
    }
    out = "alpha,beta,loss\n";
    for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
        for (std::size_t j = 0; j < grid.betas.size(); ++j) {
            out += format_double(grid.alphas[i]) + "," + format_double(grid.betas[j]) + "," +
                   format_double(grid.losses(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + "\n";
        }
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    out << content;
    if (!out) {
        throw Error("failed writing '" + path + "'");
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace vasso
